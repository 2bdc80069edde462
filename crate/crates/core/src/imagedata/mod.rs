//! Grid types shared by every stage, plus PGM and manifest IO.
//!
//! All grids are row-major with the row index increasing downward.
//! Coordinates are always written `(row, col)`.

mod manifest;
mod pgm;

pub use manifest::{load_manifest, write_manifest, BBox, CaseManifest, Label};
pub use pgm::{read_mask, read_pgm, write_mask, write_pgm};

use crate::error::{Error, Result};

/// A real-valued position in raster coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub const fn new(row: f64, col: f64) -> Self {
        Point { row, col }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }
}

impl From<(usize, usize)> for Point {
    fn from((row, col): (usize, usize)) -> Self {
        Point::new(row as f64, col as f64)
    }
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Format(format!(
                "expected {} pixels for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        GrayImage {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        GrayImage {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    /// Bilinear sample with the position clamped to the image bounds.
    pub fn bilinear(&self, p: Point) -> f64 {
        let r = p.row.clamp(0.0, (self.height - 1) as f64);
        let c = p.col.clamp(0.0, (self.width - 1) as f64);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let top = self.get(r0, c0) as f64 * (1.0 - fc) + self.get(r0, c1) as f64 * fc;
        let bottom = self.get(r1, c0) as f64 * (1.0 - fc) + self.get(r1, c1) as f64 * fc;
        top * (1.0 - fr) + bottom * fr
    }

    /// `mask ⊙ self`: pixels outside the mask become 0.
    pub fn masked(&self, mask: &BinaryMask) -> Result<GrayImage> {
        check_dims(self.dims(), mask.dims())?;
        let data = self
            .data
            .iter()
            .zip(mask.data())
            .map(|(&v, &m)| if m == 1 { v } else { 0 })
            .collect();
        Ok(GrayImage {
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Horizontal mirror image (column `c` becomes `width - 1 - c`).
    pub fn flip_horizontal(&self) -> GrayImage {
        GrayImage::from_fn(self.height, self.width, |r, c| {
            self.get(r, self.width - 1 - c)
        })
    }
}

/// Binary lung or bounding-box mask with values in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Format(format!(
                "expected {} mask cells for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Format(format!("mask value {bad} is not 0 or 1")));
        }
        Ok(BinaryMask {
            height,
            width,
            data,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        BinaryMask {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        BinaryMask {
            height,
            width,
            data,
        }
    }

    /// Mask that is 1 inside the (inclusive) box.
    pub fn from_bbox(height: usize, width: usize, bbox: BBox) -> Self {
        BinaryMask::from_fn(height, width, |r, c| bbox.contains(r, c))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value as u8;
    }

    /// Like [`get`](Self::get) but false outside the grid.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Support pixels in raster order.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Bilinear interpolation of the 0/1 field, zero outside the grid.
    pub fn bilinear(&self, p: Point) -> f64 {
        let r0 = p.row.floor();
        let c0 = p.col.floor();
        let fr = p.row - r0;
        let fc = p.col - c0;
        let (r0, c0) = (r0 as isize, c0 as isize);
        let v = |r: isize, c: isize| self.get_signed(r, c) as u8 as f64;
        let top = v(r0, c0) * (1.0 - fc) + v(r0, c0 + 1) * fc;
        let bottom = v(r0 + 1, c0) * (1.0 - fc) + v(r0 + 1, c0 + 1) * fc;
        top * (1.0 - fr) + bottom * fr
    }

    /// Continuous membership test: bilinear value at least one half.
    #[inline]
    pub fn covers(&self, p: Point) -> bool {
        self.bilinear(p) >= 0.5
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a | b)
            .collect();
        Ok(BinaryMask {
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Intersection over union of the two supports; 1 when both are empty.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        check_dims(self.dims(), other.dims())?;
        let (mut inter, mut uni) = (0usize, 0usize);
        for (a, b) in self.data.iter().zip(&other.data) {
            inter += (a & b) as usize;
            uni += (a | b) as usize;
        }
        Ok(if uni == 0 {
            1.0
        } else {
            inter as f64 / uni as f64
        })
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        BinaryMask::from_fn(self.height, self.width, |r, c| {
            self.get(r, self.width - 1 - c)
        })
    }
}

/// Signed per-pixel differences in [-255, 255].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignedMap {
    height: usize,
    width: usize,
    data: Vec<i16>,
}

impl SignedMap {
    pub fn new(height: usize, width: usize, data: Vec<i16>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Format(format!(
                "expected {} map cells for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| v.abs() > 255) {
            return Err(Error::Format(format!(
                "map value {bad} outside [-255, 255]"
            )));
        }
        Ok(SignedMap {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        SignedMap {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i16 {
        self.data[row * self.width + col]
    }

    pub(crate) fn map(&self, f: impl Fn(i16) -> i16) -> SignedMap {
        SignedMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Display rendering: negatives clipped to 0.
    pub fn to_display(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v.clamp(0, 255) as u8).collect(),
        }
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::shape(expected, actual))
    }
}
