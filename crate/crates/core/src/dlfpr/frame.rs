//! Chord-aligned lung frames and the row-wise affine transform built on them.
//!
//! A [`ChordFrame`] puts the lowest boundary point at the origin and the
//! lowest→apex chord on the positive vertical axis. Local coordinates are
//! `(t, s)`: `t` is the height along the chord, `s` the signed offset across
//! it (growing with the image column when the chord points straight up).
//!
//! A [`RowwiseTransform`] maps target-frame points to source-frame points by
//! scaling `t` so the chords coincide and, per target row, mapping the
//! target row interval affinely onto the source row interval.

use crate::error::{Error, Result};
use crate::imagedata::{BinaryMask, Point};
use crate::lungmask::LungAnchors;

/// March step used to locate row extents.
pub const MARCH_STEP: f64 = 0.25;
/// Row spacing of the interval table, in target-frame pixels.
pub const TABLE_STEP: f64 = 0.5;
const REFINE_ITERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordFrame {
    pub pivot: Point,
    /// Angle of the chord measured from straight up towards +col, radians.
    pub angle: f64,
    pub length: f64,
}

impl ChordFrame {
    pub fn from_anchors(a: &LungAnchors) -> Result<Self> {
        if a.chord_length <= 0.0 {
            return Err(Error::DegenerateMask("zero-length chord".into()));
        }
        let low = a.lowest();
        let apex = a.apex();
        Ok(ChordFrame {
            pivot: low,
            angle: (apex.col - low.col).atan2(low.row - apex.row),
            length: a.chord_length,
        })
    }

    #[inline]
    fn axes(&self) -> ((f64, f64), (f64, f64)) {
        let (sin, cos) = self.angle.sin_cos();
        ((-cos, sin), (sin, cos))
    }

    #[inline]
    pub fn to_local(&self, p: Point) -> (f64, f64) {
        let (u, n) = self.axes();
        let dr = p.row - self.pivot.row;
        let dc = p.col - self.pivot.col;
        (dr * u.0 + dc * u.1, dr * n.0 + dc * n.1)
    }

    #[inline]
    pub fn to_image(&self, t: f64, s: f64) -> Point {
        let (u, n) = self.axes();
        Point::new(
            self.pivot.row + t * u.0 + s * n.0,
            self.pivot.col + t * u.1 + s * n.1,
        )
    }

    /// Unit direction of the chord (towards the apex) and of the +s axis.
    pub fn directions(&self) -> (Point, Point) {
        let (u, n) = self.axes();
        (Point::new(u.0, u.1), Point::new(n.0, n.1))
    }
}

/// Bounding box of a mask's support in local coordinates, padded by one pixel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalExtent {
    pub t_min: f64,
    pub t_max: f64,
    pub s_min: f64,
    pub s_max: f64,
}

pub(crate) fn local_extent(mask: &BinaryMask, frame: &ChordFrame) -> Result<LocalExtent> {
    let mut ext: Option<LocalExtent> = None;
    for p in mask.support() {
        let (t, s) = frame.to_local(p.into());
        ext = Some(match ext {
            None => LocalExtent {
                t_min: t,
                t_max: t,
                s_min: s,
                s_max: s,
            },
            Some(e) => LocalExtent {
                t_min: e.t_min.min(t),
                t_max: e.t_max.max(t),
                s_min: e.s_min.min(s),
                s_max: e.s_max.max(s),
            },
        });
    }
    let e = ext.ok_or(Error::EmptyMask)?;
    Ok(LocalExtent {
        t_min: e.t_min - 1.0,
        t_max: e.t_max + 1.0,
        s_min: e.s_min - 1.0,
        s_max: e.s_max + 1.0,
    })
}

/// Outermost covered positions along the row at height `t`: the bounding
/// interval `[first, last]`, refined to the 0.5 iso-line of the bilinear mask.
pub(crate) fn row_interval(
    mask: &BinaryMask,
    frame: &ChordFrame,
    t: f64,
    ext: &LocalExtent,
) -> Option<(f64, f64)> {
    let inside = |s: f64| mask.covers(frame.to_image(t, s));
    let n = ((ext.s_max - ext.s_min) / MARCH_STEP).ceil() as usize + 1;
    let at = |k: usize| ext.s_min + k as f64 * MARCH_STEP;
    let first = (0..n).find(|&k| inside(at(k)))?;
    let last = (0..n).rev().find(|&k| inside(at(k)))?;
    let refine = |mut ins: f64, mut out: f64| {
        for _ in 0..REFINE_ITERS {
            let mid = 0.5 * (ins + out);
            if inside(mid) {
                ins = mid;
            } else {
                out = mid;
            }
        }
        ins
    };
    let a = if first == 0 {
        at(0)
    } else {
        refine(at(first), at(first - 1))
    };
    let b = refine(at(last), at(last) + MARCH_STEP);
    Some((a, b))
}

/// Matching target and source row intervals at one table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSpan {
    pub target: (f64, f64),
    pub source: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowTable {
    pub t0: f64,
    pub step: f64,
    pub rows: Vec<RowSpan>,
}

impl RowTable {
    /// Spans at target height `t`, linearly interpolated and clamped to the table.
    pub fn at(&self, t: f64) -> RowSpan {
        let x = ((t - self.t0) / self.step).clamp(0.0, (self.rows.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.rows.len() - 1);
        let f = x - k as f64;
        if f == 0.0 || k + 1 == self.rows.len() {
            return self.rows[k];
        }
        let (a, b) = (self.rows[k], self.rows[k + 1]);
        let lerp = |p: (f64, f64), q: (f64, f64)| (p.0 + f * (q.0 - p.0), p.1 + f * (q.1 - p.1));
        RowSpan {
            target: lerp(a.target, b.target),
            source: lerp(a.source, b.source),
        }
    }
}

/// Which end of a row is kept when an over-long source row is truncated
/// instead of resized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepEnd {
    /// Keep the low-`s` end, drop the high-`s` end.
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowwiseTransform {
    pub target: ChordFrame,
    pub source: ChordFrame,
    /// `t_source = t_target * vertical_scale`.
    pub vertical_scale: f64,
    /// Source rows are mirrored (`s -> -s`) before matching.
    pub mirror: bool,
    pub table: RowTable,
}

#[inline]
fn affine(x: f64, from: (f64, f64), to: (f64, f64)) -> f64 {
    let w = from.1 - from.0;
    if w.abs() < 1e-9 {
        0.5 * (to.0 + to.1)
    } else {
        to.0 + (x - from.0) * (to.1 - to.0) / w
    }
}

impl RowwiseTransform {
    /// Builds the transform that pulls `target_mask` positions from `source_mask`.
    ///
    /// With `trim = Some(end)`, rows whose source interval is at least as long
    /// as the target interval are cut to the target length keeping `end`
    /// instead of being shrunk.
    pub fn build(
        target_mask: &BinaryMask,
        target: ChordFrame,
        source_mask: &BinaryMask,
        source: ChordFrame,
        mirror: bool,
        trim: Option<KeepEnd>,
    ) -> Result<Self> {
        let scale = source.length / target.length;
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::DegenerateMask(
                "chord lengths give no vertical scale".into(),
            ));
        }
        let te = local_extent(target_mask, &target)?;
        let se = local_extent(source_mask, &source)?;
        let lo = te.t_min.min(se.t_min / scale);
        let hi = te.t_max.max(se.t_max / scale);
        let t0 = (lo / TABLE_STEP).floor() * TABLE_STEP;
        let n = ((hi - t0) / TABLE_STEP).ceil() as usize + 1;

        let mut tgt: Vec<Option<(f64, f64)>> = Vec::with_capacity(n);
        let mut src: Vec<Option<(f64, f64)>> = Vec::with_capacity(n);
        for k in 0..n {
            let t = t0 + k as f64 * TABLE_STEP;
            tgt.push(row_interval(target_mask, &target, t, &te));
            src.push(
                row_interval(source_mask, &source, t * scale, &se).map(|(a, b)| {
                    if mirror {
                        (-b, -a)
                    } else {
                        (a, b)
                    }
                }),
            );
        }
        let tgt = fill_nearest(&tgt)
            .ok_or_else(|| Error::DegenerateMask("target mask has no covered row".into()))?;
        let src = fill_nearest(&src)
            .ok_or_else(|| Error::DegenerateMask("source mask has no covered row".into()))?;

        let rows = tgt
            .into_iter()
            .zip(src)
            .map(|(target, mut source)| {
                if let Some(end) = trim {
                    let (lt, ls) = (target.1 - target.0, source.1 - source.0);
                    if ls >= lt {
                        source = match end {
                            KeepEnd::Low => (source.0, source.0 + lt),
                            KeepEnd::High => (source.1 - lt, source.1),
                        };
                    }
                }
                RowSpan { target, source }
            })
            .collect();

        Ok(RowwiseTransform {
            target,
            source,
            vertical_scale: scale,
            mirror,
            table: RowTable {
                t0,
                step: TABLE_STEP,
                rows,
            },
        })
    }

    /// Source-frame position for a target-frame point (pull direction).
    pub fn source_of(&self, q: Point) -> Point {
        let (t, s) = self.target.to_local(q);
        let span = self.table.at(t);
        let s_src = affine(s, span.target, span.source);
        let s_src = if self.mirror { -s_src } else { s_src };
        self.source.to_image(t * self.vertical_scale, s_src)
    }

    /// Target-frame position for a source-frame point; inverse of [`source_of`](Self::source_of).
    pub fn target_of(&self, p: Point) -> Point {
        let (ts, ss) = self.source.to_local(p);
        let t = ts / self.vertical_scale;
        let ss = if self.mirror { -ss } else { ss };
        let span = self.table.at(t);
        self.target
            .to_image(t, affine(ss, span.source, span.target))
    }
}

/// Replaces gaps with the nearest populated entry (lower index on ties).
fn fill_nearest(rows: &[Option<(f64, f64)>]) -> Option<Vec<(f64, f64)>> {
    let populated: Vec<usize> = (0..rows.len()).filter(|&k| rows[k].is_some()).collect();
    if populated.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(rows.len());
    let mut j = 0;
    for k in 0..rows.len() {
        while j + 1 < populated.len() && populated[j + 1] <= k {
            j += 1;
        }
        let keep_lower = populated[j] >= k
            || j + 1 == populated.len()
            || k - populated[j] <= populated[j + 1] - k;
        let pick = if keep_lower {
            populated[j]
        } else {
            populated[j + 1]
        };
        out.push(rows[pick].expect("populated"));
    }
    Some(out)
}
