//! Anomaly maps, the two threshold operators, patient-wise scores, ROC AUC
//! and the bounding-box localization scores.
//!
//! The two thresholds deliberately differ: [`threshold_h`] keeps a value
//! when `|v| > tau` (strict, absolute, sign preserved) while
//! [`s_binary`] counts non-zero values with `z >= tau` (inclusive, signed, so
//! negative values never count).

mod report;

pub use report::{
    format_report, format_summary, parse_report, read_report, summarize, write_report, TauSummary,
};

use crate::error::{Error, Result};
use crate::imagedata::{check_dims, BinaryMask, GrayImage, Label, SignedMap};

/// `x ⊙ m_x − y ⊙ m_y`.
pub fn anomaly_map(
    x: &GrayImage,
    y_hat: &GrayImage,
    mask_x: &BinaryMask,
    mask_y: &BinaryMask,
) -> Result<SignedMap> {
    check_dims(x.dims(), y_hat.dims())?;
    check_dims(x.dims(), mask_x.dims())?;
    check_dims(x.dims(), mask_y.dims())?;
    let data = x
        .data()
        .iter()
        .zip(y_hat.data())
        .zip(mask_x.data().iter().zip(mask_y.data()))
        .map(|((&a, &b), (&ma, &mb))| (a as i16) * (ma as i16) - (b as i16) * (mb as i16))
        .collect();
    SignedMap::new(x.height(), x.width(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedMap {
    pub map: SignedMap,
    pub tau: f64,
}

pub fn threshold_h(v: &SignedMap, tau: f64) -> ThresholdedMap {
    ThresholdedMap {
        map: v.map(|x| if (x.abs() as f64) > tau { x } else { 0 }),
        tau,
    }
}

/// ℓ2 norm of the thresholded map.
pub fn patient_score(v: &SignedMap, tau: f64) -> f64 {
    threshold_h(v, tau)
        .map
        .data()
        .iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Mann–Whitney AUC: P(abnormal > normal) + ½ P(tie).
pub fn auc(normal: &[f64], abnormal: &[f64]) -> Result<f64> {
    if normal.is_empty() || abnormal.is_empty() {
        return Err(Error::Input(
            "auc needs at least one score per class".into(),
        ));
    }
    if normal.iter().chain(abnormal).any(|v| v.is_nan()) {
        return Err(Error::Input("auc scores contain NaN".into()));
    }
    let mut sorted = normal.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &a in abnormal {
        let below = sorted.partition_point(|&n| n < a);
        let not_above = sorted.partition_point(|&n| n <= a);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (normal.len() as f64 * abnormal.len() as f64))
}

/// `v ⊙ g`.
pub fn intersect_bbox(v: &SignedMap, g: &BinaryMask) -> Result<SignedMap> {
    check_dims(v.dims(), g.dims())?;
    let data = v
        .data()
        .iter()
        .zip(g.data())
        .map(|(&x, &m)| x * m as i16)
        .collect();
    SignedMap::new(v.height(), v.width(), data)
}

/// Signed sum of the thresholded map.
pub fn s_intensity(z: &SignedMap, tau: f64) -> f64 {
    threshold_h(z, tau)
        .map
        .data()
        .iter()
        .map(|&x| x as f64)
        .sum()
}

/// Number of non-zero values with `z >= tau`.
pub fn s_binary(z: &SignedMap, tau: f64) -> u64 {
    z.data()
        .iter()
        .filter(|&&x| x != 0 && x as f64 >= tau)
        .count() as u64
}

/// One case scored at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub case_id: String,
    pub label: Label,
    pub tau: f64,
    pub patient_score: f64,
    pub s_intensity: f64,
    pub s_binary: u64,
}

/// Scores `v` at `tau`; localization scores use `bbox_mask` when given and
/// are zero otherwise.
pub fn score_case(
    case_id: &str,
    label: Label,
    v: &SignedMap,
    bbox_mask: Option<&BinaryMask>,
    tau: f64,
) -> Result<ScoreReport> {
    let (si, sb) = match bbox_mask {
        Some(g) => {
            let z = intersect_bbox(v, g)?;
            (s_intensity(&z, tau), s_binary(&z, tau))
        }
        None => (0.0, 0),
    };
    Ok(ScoreReport {
        case_id: case_id.to_string(),
        label,
        tau,
        patient_score: patient_score(v, tau),
        s_intensity: si,
        s_binary: sb,
    })
}
