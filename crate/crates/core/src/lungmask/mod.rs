//! Lung mask geometry: left/right split, boundary extraction and the
//! lowest-point / apex anchors that define each lung's vertical axis.
//!
//! Components use 8-connectivity; the boundary uses 4-connectivity.
//!
//! Naming follows anatomy: the **right** lung is the component with the
//! smaller mean column (it appears on the image-left of a frontal film).

pub mod synth;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imagedata::{BinaryMask, Point};

/// Anatomical lung side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Single-letter tag used in file names (`l` / `r`).
    pub fn tag(self) -> &'static str {
        match self {
            Side::Left => "l",
            Side::Right => "r",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l" | "left" => Ok(Side::Left),
            "r" | "right" => Ok(Side::Right),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LungPair {
    pub left: BinaryMask,
    pub right: BinaryMask,
}

impl LungPair {
    pub fn side(&self, side: Side) -> &BinaryMask {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn union(&self) -> BinaryMask {
        self.left
            .union(&self.right)
            .expect("lung pair masks share dimensions")
    }
}

/// Lowest boundary point, the boundary point farthest from it, and their distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LungAnchors {
    pub lowest_point: (usize, usize),
    pub apex_point: (usize, usize),
    pub chord_length: f64,
}

impl LungAnchors {
    pub fn lowest(&self) -> Point {
        self.lowest_point.into()
    }

    pub fn apex(&self) -> Point {
        self.apex_point.into()
    }
}

/// Minimum area for a component to count as a lung: 64 px at 256×256,
/// scaled with canvas area.
pub fn min_component_area(height: usize, width: usize) -> usize {
    ((64 * height * width) as f64 / (256.0 * 256.0))
        .round()
        .max(1.0) as usize
}

/// 8-connected component labelling. Returns labels (0 = background) and
/// component areas indexed by `label - 1`, labels assigned in raster order.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (h, w) = mask.dims();
    let mut labels = vec![0u32; h * w];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if mask.data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = areas.len() as u32 + 1;
        let mut area = 0usize;
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if mask.get_signed(nr, nc) {
                        let j = nr as usize * w + nc as usize;
                        if labels[j] == 0 {
                            labels[j] = label;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

/// Splits a whole-lung mask into its two largest components.
pub fn split_mask(mask: &BinaryMask) -> Result<LungPair> {
    split_mask_with_min_area(mask, min_component_area(mask.height(), mask.width()))
}

pub fn split_mask_with_min_area(mask: &BinaryMask, min_area: usize) -> Result<LungPair> {
    let (h, w) = mask.dims();
    let (labels, areas) = label_components(mask);
    let mut order: Vec<usize> = (0..areas.len()).filter(|&k| areas[k] >= min_area).collect();
    if order.len() < 2 {
        return Err(Error::Split(format!(
            "found {} component(s) with area >= {min_area}, need 2",
            order.len()
        )));
    }
    // stable sort keeps raster order among equal areas
    order.sort_by(|&a, &b| areas[b].cmp(&areas[a]));
    let (a, b) = (order[0] as u32 + 1, order[1] as u32 + 1);

    let component = |label: u32| {
        BinaryMask::new(h, w, labels.iter().map(|&l| (l == label) as u8).collect())
            .expect("dimensions preserved")
    };
    let mean_col = |m: &BinaryMask| {
        let (sum, n) = m
            .support()
            .fold((0usize, 0usize), |(s, n), (_, c)| (s + c, n + 1));
        sum as f64 / n as f64
    };
    let (ma, mb) = (component(a), component(b));
    if mean_col(&ma) <= mean_col(&mb) {
        Ok(LungPair {
            right: ma,
            left: mb,
        })
    } else {
        Ok(LungPair {
            right: mb,
            left: ma,
        })
    }
}

/// Support pixels with a 4-neighbour outside the support or off the grid,
/// in raster order.
pub fn boundary(mask: &BinaryMask) -> Result<Vec<(usize, usize)>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(mask
        .support()
        .filter(|&(r, c)| {
            let (r, c) = (r as isize, c as isize);
            [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dr, dc)| !mask.get_signed(r + dr, c + dc))
        })
        .collect())
}

/// Lowest boundary point (max row, then min col) and the boundary point
/// farthest from it (ties: min row, then min col).
pub fn anchors(mask: &BinaryMask) -> Result<LungAnchors> {
    let edge = boundary(mask)?;
    let lowest = edge
        .iter()
        .copied()
        .min_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)))
        .expect("boundary of a non-empty mask is non-empty");
    let sq = |p: (usize, usize)| {
        let dr = p.0 as i64 - lowest.0 as i64;
        let dc = p.1 as i64 - lowest.1 as i64;
        dr * dr + dc * dc
    };
    // integer squared distances keep the argmax exact
    let apex = edge
        .iter()
        .copied()
        .max_by(|&a, &b| sq(a).cmp(&sq(b)).then(b.cmp(&a)))
        .expect("non-empty");
    Ok(LungAnchors {
        lowest_point: lowest,
        apex_point: apex,
        chord_length: (sq(apex) as f64).sqrt(),
    })
}
