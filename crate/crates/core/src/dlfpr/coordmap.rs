//! Dense pull-style coordinate maps and their binary file format.
//!
//! Layout (little endian):
//!
//! ```text
//! "CMAP" | version u16 | target h u32 | target w u32 | source h u32 | source w u32
//! target h * w entries of (row f32, col f32), NaN NaN = invalid
//! meta length u32 | meta UTF-8 text (key=value lines)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::frame::{ChordFrame, RowSpan, RowTable, RowwiseTransform};
use crate::error::{Error, Result};
use crate::imagedata::{BinaryMask, Point};

pub const MAGIC: &[u8; 4] = b"CMAP";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Fixed-frame targets pulling from the moving frame.
    Forward,
    /// Moving-frame targets pulling from the fixed frame.
    Inverse,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        }
    }
}

/// For every target pixel, the source-frame position it samples (or nothing).
#[derive(Debug, Clone, PartialEq)]
pub struct CoordMap {
    target_dims: (usize, usize),
    source_dims: (usize, usize),
    coords: Vec<[f32; 2]>,
    meta: String,
}

impl CoordMap {
    /// Evaluates `f` on every support pixel of `target_support`.
    pub fn from_fn(
        target_support: &BinaryMask,
        source_dims: (usize, usize),
        meta: String,
        mut f: impl FnMut(Point) -> Point,
    ) -> Self {
        let (h, w) = target_support.dims();
        let mut coords = vec![[f32::NAN; 2]; h * w];
        for (r, c) in target_support.support() {
            let p = f(Point::new(r as f64, c as f64));
            coords[r * w + c] = [p.row as f32, p.col as f32];
        }
        CoordMap {
            target_dims: (h, w),
            source_dims,
            coords,
            meta,
        }
    }

    /// Identity on the support of `mask`.
    pub fn identity(mask: &BinaryMask) -> Self {
        CoordMap::from_fn(mask, mask.dims(), "kind=identity\n".into(), |p| p)
    }

    pub(crate) fn from_transform(
        transform: &RowwiseTransform,
        direction: Direction,
        target_support: &BinaryMask,
        source_dims: (usize, usize),
    ) -> Self {
        let meta = encode_meta(transform, direction);
        match direction {
            Direction::Forward => CoordMap::from_fn(target_support, source_dims, meta, |q| {
                transform.source_of(q)
            }),
            Direction::Inverse => CoordMap::from_fn(target_support, source_dims, meta, |p| {
                transform.target_of(p)
            }),
        }
    }

    pub fn target_dims(&self) -> (usize, usize) {
        self.target_dims
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    /// Source position for an integer target pixel.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<Point> {
        let [r, c] = self.coords[row * self.target_dims.1 + col];
        if r.is_nan() || c.is_nan() {
            None
        } else {
            Some(Point::new(r as f64, c as f64))
        }
    }

    /// Target pixels carrying a source position.
    pub fn valid_mask(&self) -> BinaryMask {
        let (h, w) = self.target_dims;
        BinaryMask::from_fn(h, w, |r, c| self.get(r, c).is_some())
    }

    /// Bilinear interpolation of the grid at a real target position, using
    /// only valid neighbours (weights renormalized). `None` when no
    /// neighbour is valid.
    pub fn interpolate(&self, p: Point) -> Option<Point> {
        let (h, w) = self.target_dims;
        let r0 = p.row.floor();
        let c0 = p.col.floor();
        let (fr, fc) = (p.row - r0, p.col - c0);
        let (mut wsum, mut row, mut col) = (0.0, 0.0, 0.0);
        for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
            for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                let (r, c) = (r0 as isize + dr, c0 as isize + dc);
                if r < 0 || c < 0 || r as usize >= h || c as usize >= w {
                    continue;
                }
                let wt = wr * wc;
                if wt <= 0.0 {
                    continue;
                }
                if let Some(q) = self.get(r as usize, c as usize) {
                    wsum += wt;
                    row += wt * q.row;
                    col += wt * q.col;
                }
            }
        }
        (wsum > 0.0).then(|| Point::new(row / wsum, col / wsum))
    }

    /// Rebuilds the transform recorded in the meta block, if there is one.
    pub fn transform(&self) -> Result<Option<(RowwiseTransform, Direction)>> {
        decode_meta(&self.meta)
    }

    /// Recomputes the grid from the meta block; `None` for maps without an
    /// analytic description.
    pub fn reevaluate(&self) -> Result<Option<CoordMap>> {
        Ok(self.transform()?.map(|(t, dir)| {
            CoordMap::from_transform(&t, dir, &self.valid_mask(), self.source_dims)
        }))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (th, tw) = self.target_dims;
        let (sh, sw) = self.source_dims;
        let mut out = Vec::with_capacity(22 + self.coords.len() * 8 + 4 + self.meta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in [th, tw, sh, sw] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &[r, c] in &self.coords {
            // canonical NaN keeps files byte-stable
            let enc = |v: f32| if v.is_nan() { f32::NAN } else { v };
            out.extend_from_slice(&enc(r).to_le_bytes());
            out.extend_from_slice(&enc(c).to_le_bytes());
        }
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MAGIC {
            return Err(Error::Format("coordinate map: bad magic".into()));
        }
        let version = u16::from_le_bytes(rd.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!(
                "coordinate map: unsupported version {version}"
            )));
        }
        let th = rd.u32()? as usize;
        let tw = rd.u32()? as usize;
        let sh = rd.u32()? as usize;
        let sw = rd.u32()? as usize;
        let n = th
            .checked_mul(tw)
            .ok_or_else(|| Error::Format("coordinate map: dimensions overflow".into()))?;
        let mut coords = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let r = f32::from_le_bytes(rd.take(4)?.try_into().unwrap());
            let c = f32::from_le_bytes(rd.take(4)?.try_into().unwrap());
            coords.push([r, c]);
        }
        let len = rd.u32()? as usize;
        let meta = std::str::from_utf8(rd.take(len)?)
            .map_err(|e| Error::Format(format!("coordinate map: meta not UTF-8: {e}")))?
            .to_string();
        if rd.pos != bytes.len() {
            return Err(Error::Format("coordinate map: trailing bytes".into()));
        }
        Ok(CoordMap {
            target_dims: (th, tw),
            source_dims: (sh, sw),
            coords,
            meta,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        CoordMap::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("coordinate map: truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn encode_meta(t: &RowwiseTransform, dir: Direction) -> String {
    let mut m = String::new();
    let frame = |m: &mut String, name: &str, f: &ChordFrame| {
        let _ = writeln!(m, "{name}_pivot={},{}", f.pivot.row, f.pivot.col);
        let _ = writeln!(m, "{name}_angle={}", f.angle);
        let _ = writeln!(m, "{name}_length={}", f.length);
    };
    let _ = writeln!(m, "kind=rowwise");
    let _ = writeln!(m, "direction={}", dir.as_str());
    frame(&mut m, "target", &t.target);
    frame(&mut m, "source", &t.source);
    let _ = writeln!(m, "vertical_scale={}", t.vertical_scale);
    let _ = writeln!(m, "mirror={}", t.mirror as u8);
    let _ = writeln!(m, "table_t0={}", t.table.t0);
    let _ = writeln!(m, "table_step={}", t.table.step);
    let _ = writeln!(m, "table_rows={}", t.table.rows.len());
    for r in &t.table.rows {
        let _ = writeln!(
            m,
            "row={},{},{},{}",
            r.target.0, r.target.1, r.source.0, r.source.1
        );
    }
    m
}

fn decode_meta(text: &str) -> Result<Option<(RowwiseTransform, Direction)>> {
    let bad = |what: &str| Error::Format(format!("coordinate map meta: {what}"));
    let mut kv: Vec<(&str, &str)> = Vec::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
        kv.push((k, v));
    }
    let get = |key: &str| {
        kv.iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| bad(&format!("missing {key}")))
    };
    if kv.iter().find(|(k, _)| *k == "kind").map(|(_, v)| *v) != Some("rowwise") {
        return Ok(None);
    }
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse::<f64>()
            .map_err(|_| bad(&format!("bad {key}")))
    };
    let nums = |s: &str, n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(s))?;
        if v.len() == n {
            Ok(v)
        } else {
            Err(bad(s))
        }
    };
    let frame = |name: &str| -> Result<ChordFrame> {
        let p = nums(get(&format!("{name}_pivot"))?, 2)?;
        Ok(ChordFrame {
            pivot: Point::new(p[0], p[1]),
            angle: num(&format!("{name}_angle"))?,
            length: num(&format!("{name}_length"))?,
        })
    };
    let direction = match get("direction")? {
        "forward" => Direction::Forward,
        "inverse" => Direction::Inverse,
        other => return Err(bad(other)),
    };
    let rows: Vec<RowSpan> = kv
        .iter()
        .filter(|(k, _)| *k == "row")
        .map(|(_, v)| {
            nums(v, 4).map(|x| RowSpan {
                target: (x[0], x[1]),
                source: (x[2], x[3]),
            })
        })
        .collect::<Result<_>>()?;
    let declared: usize = get("table_rows")?.parse().map_err(|_| bad("table_rows"))?;
    if rows.len() != declared || rows.is_empty() {
        return Err(bad("row count"));
    }
    let transform = RowwiseTransform {
        target: frame("target")?,
        source: frame("source")?,
        vertical_scale: num("vertical_scale")?,
        mirror: get("mirror")? == "1",
        table: RowTable {
            t0: num("table_t0")?,
            step: num("table_step")?,
            rows,
        },
    };
    Ok(Some((transform, direction)))
}
