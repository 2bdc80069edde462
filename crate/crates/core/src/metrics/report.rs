//! Tab-separated score reports with a per-threshold summary block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{auc, ScoreReport};
use crate::error::{Error, Result};
use crate::imagedata::Label;

const HEADER: &str = "# case_id\tlabel\ttau\tpatient_score\ts_intensity\ts_binary";
const MEANS_NOTE: &str =
    "# mean_s_intensity and mean_s_binary are averaged over abnormal cases only";

/// Discrimination and localization summary at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSummary {
    pub tau: f64,
    pub auc: f64,
    pub n_normal: usize,
    pub n_abnormal: usize,
    pub mean_s_intensity: f64,
    pub mean_s_binary: f64,
}

/// Groups rows by threshold (ascending) and summarizes each group.
pub fn summarize(rows: &[ScoreReport]) -> Result<Vec<TauSummary>> {
    let mut groups: BTreeMap<u64, Vec<&ScoreReport>> = BTreeMap::new();
    for row in rows {
        if row.tau.is_nan() || row.tau < 0.0 {
            return Err(Error::Input(format!("invalid threshold {}", row.tau)));
        }
        // bit patterns of non-negative floats sort like the values
        groups.entry(row.tau.to_bits()).or_default().push(row);
    }
    if groups.is_empty() {
        return Err(Error::Input("report has no rows".into()));
    }
    groups
        .into_iter()
        .map(|(bits, group)| {
            let scores = |label| -> Vec<f64> {
                group
                    .iter()
                    .filter(|r| r.label == label)
                    .map(|r| r.patient_score)
                    .collect()
            };
            let normal = scores(Label::Normal);
            let abnormal = scores(Label::Abnormal);
            let abnormal_rows: Vec<_> = group
                .iter()
                .filter(|r| r.label == Label::Abnormal)
                .collect();
            let n = abnormal_rows.len().max(1) as f64;
            Ok(TauSummary {
                tau: f64::from_bits(bits),
                auc: auc(&normal, &abnormal)?,
                n_normal: normal.len(),
                n_abnormal: abnormal.len(),
                mean_s_intensity: abnormal_rows.iter().map(|r| r.s_intensity).sum::<f64>() / n,
                mean_s_binary: abnormal_rows.iter().map(|r| r.s_binary as f64).sum::<f64>() / n,
            })
        })
        .collect()
}

pub fn format_report(rows: &[ScoreReport], summaries: &[TauSummary]) -> String {
    let mut text = format!("{HEADER}\n{MEANS_NOTE}\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.case_id, r.label, r.tau, r.patient_score, r.s_intensity, r.s_binary
        );
    }
    for s in summaries {
        let _ = writeln!(text, "{}", format_summary(s));
    }
    text
}

pub fn format_summary(s: &TauSummary) -> String {
    format!(
        "# auc={} n_normal={} n_abnormal={} tau={} mean_s_intensity={} mean_s_binary={}",
        s.auc, s.n_normal, s.n_abnormal, s.tau, s.mean_s_intensity, s.mean_s_binary
    )
}

pub fn write_report(
    rows: &[ScoreReport],
    summaries: &[TauSummary],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_report(rows, summaries)).map_err(|e| Error::io(path, e))
}

/// Reads the per-case rows of a report; comment lines are skipped.
pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<ScoreReport>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text)
}

pub fn parse_report(text: &str) -> Result<Vec<ScoreReport>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("report line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [case_id, label, tau, score, si, sb] = fields[..] else {
            return Err(bad("expected 6 tab-separated fields"));
        };
        let num = |s: &str, name: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad {name}")));
        rows.push(ScoreReport {
            case_id: case_id.to_string(),
            label: label.parse().map_err(|_| bad("bad label"))?,
            tau: num(tau, "tau")?,
            patient_score: num(score, "patient_score")?,
            s_intensity: num(si, "s_intensity")?,
            s_binary: sb.parse().map_err(|_| bad("bad s_binary"))?,
        });
    }
    Ok(rows)
}
