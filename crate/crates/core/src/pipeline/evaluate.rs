//! Test path: register each lung, translate it, map the result back to the
//! patient's own coordinates, merge and score.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::backend::{translate_as, BackendSpec};
use super::{load_case, worker_pool};
use crate::dlfpr::{reg, warp_within};
use crate::error::{Error, Result};
use crate::imagedata::{write_pgm, BinaryMask, CaseManifest, GrayImage, Label, SignedMap};
use crate::lungmask::{split_mask, LungPair, Side};
use crate::metrics::{anomaly_map, score_case, summarize, write_report, ScoreReport, TauSummary};

/// Everything [`run_test`] computes for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case_id: String,
    pub label: Label,
    /// One row per threshold, in the order given.
    pub reports: Vec<ScoreReport>,
    /// Virtual normal image in the patient's coordinates.
    pub merged: GrayImage,
    pub anomaly: SignedMap,
    /// Mean |v| over the union of both lungs.
    pub mean_abs_in_lungs: f64,
}

struct SideArtifacts {
    moving: GrayImage,
    fixed: GrayImage,
    translated: GrayImage,
    deregistered: GrayImage,
}

fn run_side(
    image: &GrayImage,
    lungs: &LungPair,
    fixed: &LungPair,
    side: Side,
    backend: &BackendSpec,
    case_id: &str,
) -> Result<SideArtifacts> {
    let moving_mask = lungs.side(side);
    let fixed_mask = fixed.side(side);
    let pair = reg(moving_mask, fixed_mask)?;
    let moving = image.masked(moving_mask)?;
    let in_fixed = warp_within(&moving, moving_mask, &pair.forward, 0)?.masked(fixed_mask)?;
    let translated = translate_as(&in_fixed, side, backend, case_id)?.masked(fixed_mask)?;
    let deregistered =
        warp_within(&translated, fixed_mask, &pair.inverse, 0)?.masked(moving_mask)?;
    Ok(SideArtifacts {
        moving,
        fixed: in_fixed,
        translated,
        deregistered,
    })
}

/// `s_l ⊙ y_l + s_r ⊙ y_r + (1 − s_l − s_r) ⊙ x`.
pub fn merge(x: &GrayImage, lungs: &LungPair, left: &GrayImage, right: &GrayImage) -> GrayImage {
    GrayImage::from_fn(x.height(), x.width(), |r, c| {
        if lungs.left.get(r, c) {
            left.get(r, c)
        } else if lungs.right.get(r, c) {
            right.get(r, c)
        } else {
            x.get(r, c)
        }
    })
}

/// File-name form of a threshold: `20`, `22.5`.
pub fn tau_tag(tau: f64) -> String {
    format!("{tau}")
}

/// Runs one case through the test path and scores it at every threshold.
/// With `artifacts`, intermediate images go under `artifacts/<case>/`.
pub fn run_test(
    case: &CaseManifest,
    fixed: &LungPair,
    backend: &BackendSpec,
    taus: &[f64],
    artifacts: Option<&Path>,
) -> Result<CaseResult> {
    run_test_inner(case, fixed, backend, taus, artifacts).map_err(|e| e.for_case(&case.case_id))
}

fn run_test_inner(
    case: &CaseManifest,
    fixed: &LungPair,
    backend: &BackendSpec,
    taus: &[f64],
    artifacts: Option<&Path>,
) -> Result<CaseResult> {
    if let Some(&bad) = taus.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(Error::Input(format!(
            "threshold {bad} must be non-negative"
        )));
    }
    let (image, mask) = load_case(case)?;
    let lungs = split_mask(&mask)?;
    let left = run_side(&image, &lungs, fixed, Side::Left, backend, &case.case_id)?;
    let right = run_side(&image, &lungs, fixed, Side::Right, backend, &case.case_id)?;
    let merged = merge(&image, &lungs, &left.deregistered, &right.deregistered);

    let lung_mask = lungs.union();
    let anomaly = anomaly_map(&image, &merged, &lung_mask, &lung_mask)?;
    let bbox_mask = case
        .bbox
        .map(|b| BinaryMask::from_bbox(image.height(), image.width(), b));
    let reports = taus
        .iter()
        .map(|&tau| score_case(&case.case_id, case.label, &anomaly, bbox_mask.as_ref(), tau))
        .collect::<Result<Vec<_>>>()?;
    let area = lung_mask.area().max(1) as f64;
    let mean_abs_in_lungs = lung_mask
        .support()
        .map(|(r, c)| anomaly.get(r, c).unsigned_abs() as f64)
        .sum::<f64>()
        / area;

    if let Some(root) = artifacts {
        let dir = root.join(&case.case_id);
        for (side, a) in [(Side::Left, &left), (Side::Right, &right)] {
            let side_dir = dir.join(side.tag());
            fs::create_dir_all(&side_dir).map_err(|e| Error::io(&side_dir, e))?;
            write_pgm(&a.moving, side_dir.join("moving.pgm"))?;
            write_pgm(&a.fixed, side_dir.join("fixed.pgm"))?;
            write_pgm(&a.translated, side_dir.join("translated.pgm"))?;
            write_pgm(&a.deregistered, side_dir.join("deregistered.pgm"))?;
        }
        write_pgm(&merged, dir.join("merged.pgm"))?;
        for &tau in taus {
            let display = crate::metrics::threshold_h(&anomaly, tau).map.to_display();
            write_pgm(
                &display,
                dir.join(format!("anomaly_tau{}.pgm", tau_tag(tau))),
            )?;
        }
    }

    Ok(CaseResult {
        case_id: case.case_id.clone(),
        label: case.label,
        reports,
        merged,
        anomaly,
        mean_abs_in_lungs,
    })
}

/// Outcome of [`run_all`] and [`eval_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cases: Vec<CaseResult>,
    /// Rows grouped by threshold, cases in input order within each.
    pub rows: Vec<ScoreReport>,
    /// Empty when a class is missing.
    pub summaries: Vec<TauSummary>,
    pub report: Option<PathBuf>,
}

/// Runs the test path over all cases on `jobs` workers (0 = one per CPU),
/// returning results in input order. With `out_dir`, per-case artifacts
/// and `report.tsv` are written there; the report carries a summary block
/// when both classes are present. The first failing case (in input order)
/// aborts the run.
pub fn run_all(
    cases: &[CaseManifest],
    fixed_mask: &BinaryMask,
    backend: &BackendSpec,
    taus: &[f64],
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<Evaluation> {
    if taus.is_empty() {
        return Err(Error::Input("no thresholds given".into()));
    }
    let fixed = split_mask(fixed_mask)?;
    let results: Vec<CaseResult> = worker_pool(jobs)?.install(|| {
        cases
            .par_iter()
            .map(|c| run_test(c, &fixed, backend, taus, out_dir))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()
    })?;

    let rows: Vec<ScoreReport> = (0..taus.len())
        .flat_map(|k| results.iter().map(move |r| r.reports[k].clone()))
        .collect();
    let both_classes = [Label::Normal, Label::Abnormal]
        .iter()
        .all(|&l| results.iter().any(|r| r.label == l));
    let summaries = if both_classes {
        summarize(&rows)?
    } else {
        Vec::new()
    };
    let report = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("report.tsv");
            write_report(&rows, &summaries, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok(Evaluation {
        cases: results,
        rows,
        summaries,
        report,
    })
}

/// [`run_all`] on a set that must contain both classes, so every
/// threshold gets an AUC.
pub fn eval_dataset(
    cases: &[CaseManifest],
    fixed_mask: &BinaryMask,
    backend: &BackendSpec,
    taus: &[f64],
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<Evaluation> {
    for label in [Label::Normal, Label::Abnormal] {
        if !cases.iter().any(|c| c.label == label) {
            return Err(Error::Input(format!("no {label} cases to evaluate")));
        }
    }
    run_all(cases, fixed_mask, backend, taus, out_dir, jobs)
}
