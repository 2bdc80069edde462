//! Training pairs for an external learned registration network: each lung
//! image in its own frame next to its registered (pseudo-fixed) version.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{reg, warp_mask, warp_within};
use crate::error::{Error, Result};
use crate::imagedata::{read_mask, read_pgm, write_mask, write_pgm, BinaryMask, CaseManifest};
use crate::lungmask::{split_mask, LungPair, Side};

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub case_id: String,
    pub side: Side,
    pub moving: PathBuf,
    pub pseudo_fixed: PathBuf,
    pub pseudo_fixed_mask: PathBuf,
    /// IoU of the warped moving mask against the fixed side mask.
    pub mask_iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportReport {
    pub pairs: Vec<PairRecord>,
    pub failures: Vec<(String, String)>,
    pub manifest: PathBuf,
}

/// Writes `<case>_<side>_moving.pgm`, `<case>_<side>_pseudofixed.pgm` and
/// `<case>_<side>_pseudofixed_mask.pgm` for every case and side, plus
/// `pairs.tsv`. Failing cases are recorded and skipped.
pub fn export_pseudo_pairs(
    cases: &[CaseManifest],
    fixed_mask: &BinaryMask,
    out_dir: impl AsRef<Path>,
) -> Result<ExportReport> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let fixed = split_mask(fixed_mask)?;

    let mut report = ExportReport {
        manifest: out.join("pairs.tsv"),
        ..Default::default()
    };
    for case in cases {
        match export_case(case, &fixed, out) {
            Ok(mut pairs) => report.pairs.append(&mut pairs),
            Err(e) => report.failures.push((case.case_id.clone(), e.to_string())),
        }
    }

    let mut text =
        String::from("# case_id\tside\tmoving\tpseudofixed\tpseudofixed_mask\tmask_iou\n");
    let name = |p: &Path| {
        p.file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned()
    };
    for p in &report.pairs {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{:.6}",
            p.case_id,
            p.side,
            name(&p.moving),
            name(&p.pseudo_fixed),
            name(&p.pseudo_fixed_mask),
            p.mask_iou
        );
    }
    for (id, reason) in &report.failures {
        let _ = writeln!(
            text,
            "# failed\t{id}\t{}",
            reason.replace(['\t', '\n'], " ")
        );
    }
    fs::write(&report.manifest, text).map_err(|e| Error::io(&report.manifest, e))?;
    Ok(report)
}

fn export_case(case: &CaseManifest, fixed: &LungPair, out: &Path) -> Result<Vec<PairRecord>> {
    let image = read_pgm(&case.image_path)?;
    let mask = read_mask(&case.mask_path)?;
    let lungs = split_mask(&mask)?;
    // register both sides before writing anything so a failure leaves no partial output
    let mut staged = Vec::new();
    for side in [Side::Left, Side::Right] {
        let moving_mask = lungs.side(side);
        let fixed_mask = fixed.side(side);
        let pair = reg(moving_mask, fixed_mask)?;
        let moving = image.masked(moving_mask)?;
        let pseudo = warp_within(&moving, moving_mask, &pair.forward, 0)?;
        let pseudo_mask = warp_mask(moving_mask, &pair.forward)?;
        let iou = pseudo_mask.iou(fixed_mask)?;
        staged.push((side, moving, pseudo, pseudo_mask, iou));
    }
    let mut records = Vec::new();
    for (side, moving, pseudo, pseudo_mask, iou) in staged {
        let stem = format!("{}_{}", case.case_id, side);
        let rec = PairRecord {
            case_id: case.case_id.clone(),
            side,
            moving: out.join(format!("{stem}_moving.pgm")),
            pseudo_fixed: out.join(format!("{stem}_pseudofixed.pgm")),
            pseudo_fixed_mask: out.join(format!("{stem}_pseudofixed_mask.pgm")),
            mask_iou: iou,
        };
        write_pgm(&moving, &rec.moving)?;
        write_pgm(&pseudo, &rec.pseudo_fixed)?;
        write_mask(&pseudo_mask, &rec.pseudo_fixed_mask)?;
        records.push(rec);
    }
    Ok(records)
}
