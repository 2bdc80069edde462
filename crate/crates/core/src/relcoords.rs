//! Relative in-lung coordinates and a brute-force correspondence oracle.
//!
//! In the chord frame of a lung, four rays are cast from a point: down and
//! up along the chord direction, and to both sides across it. Each ray stops
//! at the first position where the bilinear mask drops below one half. The
//! ray lengths `p1` (down), `p2` (up), `q1` (towards −s), `q2` (towards +s)
//! give the coordinate `(p1, p2, q1, q2)` normalized per axis.
//!
//! The oracle matches each moving pixel with the fixed pixel whose relative
//! coordinate is closest in Euclidean norm. It is quadratic in the support
//! size and meant for small masks only.

use crate::dlfpr::{frame::MARCH_STEP, ChordFrame};
use crate::error::{Error, Result};
use crate::imagedata::{BinaryMask, Point};
use crate::lungmask::{anchors, LungAnchors};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelCoord {
    pub pv1: f64,
    pub pv2: f64,
    pub qh1: f64,
    pub qh2: f64,
}

impl RelCoord {
    pub fn distance(&self, other: &RelCoord) -> f64 {
        let d = [
            self.pv1 - other.pv1,
            self.pv2 - other.pv2,
            self.qh1 - other.qh1,
            self.qh2 - other.qh2,
        ];
        d.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Distance from `p` along `dir` to the first exit from the mask.
/// Zero when the first step already lies outside.
pub fn ray_length(mask: &BinaryMask, p: Point, dir: Point) -> f64 {
    let at = |d: f64| Point::new(p.row + d * dir.row, p.col + d * dir.col);
    let limit = (mask.height() + mask.width()) as f64 + 2.0;
    let mut d = 0.0;
    while d + MARCH_STEP <= limit && mask.covers(at(d + MARCH_STEP)) {
        d += MARCH_STEP;
    }
    if d == 0.0 {
        return 0.0;
    }
    let (mut ins, mut out) = (d, d + MARCH_STEP);
    for _ in 0..12 {
        let mid = 0.5 * (ins + out);
        if mask.covers(at(mid)) {
            ins = mid;
        } else {
            out = mid;
        }
    }
    ins
}

fn ratio(a: f64, b: f64) -> (f64, f64) {
    if a + b > 0.0 {
        (a / (a + b), b / (a + b))
    } else {
        (0.5, 0.5)
    }
}

/// Relative coordinate of a real position given the lung's chord frame.
pub fn rel_coord_in_frame(mask: &BinaryMask, frame: &ChordFrame, p: Point) -> Result<RelCoord> {
    if !mask.covers(p) {
        return Err(Error::OutOfSupport {
            row: p.row,
            col: p.col,
        });
    }
    let (up, right) = frame.directions();
    let neg = |d: Point| Point::new(-d.row, -d.col);
    let p1 = ray_length(mask, p, neg(up));
    let p2 = ray_length(mask, p, up);
    let q1 = ray_length(mask, p, neg(right));
    let q2 = ray_length(mask, p, right);
    let (pv1, pv2) = ratio(p1, p2);
    let (qh1, qh2) = ratio(q1, q2);
    Ok(RelCoord { pv1, pv2, qh1, qh2 })
}

/// Relative coordinate of a support pixel.
pub fn rel_coord(mask: &BinaryMask, anchors: &LungAnchors, p: (usize, usize)) -> Result<RelCoord> {
    if p.0 >= mask.height() || p.1 >= mask.width() || !mask.get(p.0, p.1) {
        return Err(Error::OutOfSupport {
            row: p.0 as f64,
            col: p.1 as f64,
        });
    }
    let frame = ChordFrame::from_anchors(anchors)?;
    rel_coord_in_frame(mask, &frame, p.into())
}

/// Moving support pixel → best-matching fixed support pixel, in raster
/// order of the moving support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleMap {
    pub entries: Vec<((usize, usize), (usize, usize))>,
}

impl OracleMap {
    pub fn get(&self, p: (usize, usize)) -> Option<(usize, usize)> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&p))
            .ok()
            .map(|i| self.entries[i].1)
    }
}

fn coords_of(mask: &BinaryMask) -> Result<Vec<((usize, usize), RelCoord)>> {
    let a = anchors(mask)?;
    let frame = ChordFrame::from_anchors(&a)?;
    mask.support()
        .map(|p| Ok((p, rel_coord_in_frame(mask, &frame, p.into())?)))
        .collect()
}

pub fn oracle_register(moving: &BinaryMask, fixed: &BinaryMask) -> Result<OracleMap> {
    let m = coords_of(moving)?;
    let f = coords_of(fixed)?;
    let entries = m
        .iter()
        .map(|&(p, cm)| {
            // raster order + strict < gives the (row, col) tie-break
            let mut best = (f64::INFINITY, (0, 0));
            for &(q, cf) in &f {
                let d = cm.distance(&cf);
                if d < best.0 {
                    best = (d, q);
                }
            }
            (p, best.1)
        })
        .collect();
    Ok(OracleMap { entries })
}
