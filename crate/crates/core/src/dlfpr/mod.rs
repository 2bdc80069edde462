//! Deep-learning-free pseudo-paired registration.
//!
//! Each lung is rotated about its lowest boundary point so the chord to the
//! farthest boundary point is vertical, scaled vertically so both chords
//! match, and then resized row by row so every row interval of the moving
//! lung lands on the corresponding row interval of the fixed lung. The
//! composition is analytic, so both directions come out of the same
//! parameter table with no numerical inversion.

pub mod coordmap;
mod export;
pub mod frame;

pub use coordmap::{CoordMap, Direction};
pub use export::{export_pseudo_pairs, ExportReport, PairRecord};
pub use frame::{ChordFrame, KeepEnd, RowwiseTransform};

use crate::error::{Error, Result};
use crate::imagedata::{check_dims, BinaryMask, GrayImage, Point};
use crate::lungmask::{anchors, min_component_area};

/// Forward (fixed-frame targets) and inverse (moving-frame targets) maps.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPair {
    pub forward: CoordMap,
    pub inverse: CoordMap,
}

pub(crate) fn lung_frame(mask: &BinaryMask) -> Result<ChordFrame> {
    let min_area = min_component_area(mask.height(), mask.width());
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    if area < min_area {
        return Err(Error::DegenerateMask(format!(
            "support of {area} px is below the minimum of {min_area} px"
        )));
    }
    ChordFrame::from_anchors(&anchors(mask)?)
}

/// Registers one moving lung mask onto one fixed lung mask.
pub fn reg(moving: &BinaryMask, fixed: &BinaryMask) -> Result<RegPair> {
    let transform = reg_transform(moving, fixed)?;
    Ok(RegPair {
        forward: CoordMap::from_transform(&transform, Direction::Forward, fixed, moving.dims()),
        inverse: CoordMap::from_transform(&transform, Direction::Inverse, moving, fixed.dims()),
    })
}

/// The analytic transform behind [`reg`]: targets in the fixed frame,
/// sources in the moving frame.
pub fn reg_transform(moving: &BinaryMask, fixed: &BinaryMask) -> Result<RowwiseTransform> {
    let fixed_frame = lung_frame(fixed)?;
    let moving_frame = lung_frame(moving)?;
    RowwiseTransform::build(fixed, fixed_frame, moving, moving_frame, false, None)
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Pull-warps `img` through `map`: bilinear samples at valid targets,
/// `fill` elsewhere.
pub fn warp(img: &GrayImage, map: &CoordMap, fill: u8) -> Result<GrayImage> {
    check_dims(map.source_dims(), img.dims())?;
    let (h, w) = map.target_dims();
    Ok(GrayImage::from_fn(h, w, |r, c| match map.get(r, c) {
        Some(p) => to_u8(img.bilinear(p)),
        None => fill,
    }))
}

/// Like [`warp`], but only pixels inside `support` contribute to each
/// sample, so the zero background of a masked image never bleeds into the
/// lung edge. Targets whose four neighbours all fall outside `support` take
/// the nearest support pixel within two pixels, or `fill`.
pub fn warp_within(
    img: &GrayImage,
    support: &BinaryMask,
    map: &CoordMap,
    fill: u8,
) -> Result<GrayImage> {
    check_dims(map.source_dims(), img.dims())?;
    check_dims(img.dims(), support.dims())?;
    let (h, w) = map.target_dims();
    Ok(GrayImage::from_fn(h, w, |r, c| {
        map.get(r, c)
            .and_then(|p| sample_within(img, support, p))
            .map_or(fill, to_u8)
    }))
}

fn sample_within(img: &GrayImage, support: &BinaryMask, p: Point) -> Option<f64> {
    let r0 = p.row.floor();
    let c0 = p.col.floor();
    let (fr, fc) = (p.row - r0, p.col - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let (mut acc, mut wsum) = (0.0, 0.0);
    for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
        for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
            let (r, c) = (r0 + dr, c0 + dc);
            let wt = wr * wc;
            if wt > 0.0 && support.get_signed(r, c) {
                acc += wt * img.get(r as usize, c as usize) as f64;
                wsum += wt;
            }
        }
    }
    if wsum > 0.0 {
        return Some(acc / wsum);
    }
    let (pr, pc) = (p.row.round() as isize, p.col.round() as isize);
    let mut best: Option<(f64, u8)> = None;
    for r in pr - 2..=pr + 2 {
        for c in pc - 2..=pc + 2 {
            if support.get_signed(r, c) {
                let d = (r as f64 - p.row).hypot(c as f64 - p.col);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, img.get(r as usize, c as usize)));
                }
            }
        }
    }
    best.map(|(_, v)| v as f64)
}

/// Nearest-neighbour pull-warp of an image; invalid targets and off-grid
/// sources give `fill`.
pub fn warp_nearest(img: &GrayImage, map: &CoordMap, fill: u8) -> Result<GrayImage> {
    check_dims(map.source_dims(), img.dims())?;
    let (h, w) = map.target_dims();
    let (sh, sw) = img.dims();
    Ok(GrayImage::from_fn(h, w, |r, c| {
        map.get(r, c)
            .and_then(|p| {
                let (pr, pc) = (p.row.round(), p.col.round());
                let inside = pr >= 0.0 && pc >= 0.0 && (pr as usize) < sh && (pc as usize) < sw;
                inside.then(|| img.get(pr as usize, pc as usize))
            })
            .unwrap_or(fill)
    }))
}

/// Nearest-neighbour warp of a mask; invalid targets and off-grid sources give 0.
pub fn warp_mask(mask: &BinaryMask, map: &CoordMap) -> Result<BinaryMask> {
    check_dims(map.source_dims(), mask.dims())?;
    let (h, w) = map.target_dims();
    Ok(BinaryMask::from_fn(h, w, |r, c| {
        map.get(r, c)
            .is_some_and(|p| mask.get_signed(p.row.round() as isize, p.col.round() as isize))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(h: usize, w: usize, cr: f64, cc: f64, ar: f64, ac: f64, tilt: f64) -> BinaryMask {
        let (s, co) = tilt.sin_cos();
        BinaryMask::from_fn(h, w, |r, c| {
            let dr = r as f64 - cr;
            let dc = c as f64 - cc;
            let u = (dr * co + dc * s) / ar;
            let v = (-dr * s + dc * co) / ac;
            u * u + v * v <= 1.0
        })
    }

    #[test]
    fn identical_masks_give_identity() {
        let m = blob(64, 64, 32.0, 30.0, 24.0, 11.0, 0.2);
        let pair = reg(&m, &m).unwrap();
        for (r, c) in m.support() {
            let p = pair.forward.get(r, c).unwrap();
            assert!(p.distance((r, c).into()) < 1e-3);
            let q = pair.inverse.get(r, c).unwrap();
            assert!(q.distance((r, c).into()) < 1e-3);
        }
    }

    #[test]
    fn maps_cover_exactly_the_supports() {
        let a = blob(64, 64, 30.0, 30.0, 22.0, 10.0, 0.1);
        let b = blob(64, 64, 34.0, 28.0, 25.0, 12.0, -0.1);
        let pair = reg(&a, &b).unwrap();
        assert_eq!(pair.forward.valid_mask(), b);
        assert_eq!(pair.inverse.valid_mask(), a);
        assert_eq!(pair.forward.source_dims(), a.dims());
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let mut single = BinaryMask::empty(256, 256);
        single.set(10, 10, true);
        let good = blob(256, 256, 128.0, 128.0, 60.0, 30.0, 0.0);
        assert!(matches!(reg(&single, &good), Err(Error::DegenerateMask(_))));
        assert!(matches!(
            reg(&BinaryMask::empty(256, 256), &good),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn warp_identity_and_constant() {
        let m = blob(40, 40, 20.0, 20.0, 15.0, 8.0, 0.0);
        let img = GrayImage::from_fn(40, 40, |r, c| (r * 3 + c) as u8);
        let out = warp(&img, &CoordMap::identity(&m), 7).unwrap();
        for r in 0..40 {
            for c in 0..40 {
                let want = if m.get(r, c) { img.get(r, c) } else { 7 };
                assert_eq!(out.get(r, c), want);
            }
        }
        let other = blob(40, 40, 21.0, 19.0, 17.0, 9.0, 0.3);
        let pair = reg(&m, &other).unwrap();
        let flat = warp(&GrayImage::filled(40, 40, 100), &pair.forward, 0).unwrap();
        for (r, c) in other.support() {
            assert_eq!(flat.get(r, c), 100);
        }
    }

    #[test]
    fn warp_shape_mismatch() {
        let m = blob(40, 40, 20.0, 20.0, 15.0, 8.0, 0.0);
        let map = CoordMap::identity(&m);
        assert!(matches!(
            warp(&GrayImage::filled(10, 10, 0), &map, 0),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            warp_mask(&BinaryMask::empty(10, 10), &map),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn warp_nearest_matches_mask_warp() {
        let a = blob(40, 40, 20.0, 20.0, 15.0, 8.0, 0.0);
        let b = blob(40, 40, 21.0, 19.0, 17.0, 9.0, 0.3);
        let pair = reg(&a, &b).unwrap();
        let as_image = GrayImage::from_fn(40, 40, |r, c| if a.get(r, c) { 255 } else { 0 });
        let warped = warp_nearest(&as_image, &pair.forward, 0).unwrap();
        let mask = warp_mask(&a, &pair.forward).unwrap();
        for r in 0..40 {
            for c in 0..40 {
                assert_eq!(warped.get(r, c) == 255, mask.get(r, c));
            }
        }
    }

    #[test]
    fn warp_mask_identity_and_invalid() {
        let m = blob(40, 40, 20.0, 20.0, 15.0, 8.0, 0.0);
        assert_eq!(warp_mask(&m, &CoordMap::identity(&m)).unwrap(), m);
        let none = CoordMap::identity(&BinaryMask::empty(40, 40));
        assert!(warp_mask(&m, &none).unwrap().is_empty());
    }

    #[test]
    fn warp_within_ignores_background() {
        let m = BinaryMask::from_fn(10, 10, |_, c| c < 5);
        let img = GrayImage::from_fn(10, 10, |_, c| if c < 5 { 100 } else { 0 });
        let map = CoordMap::from_fn(
            &BinaryMask::from_fn(10, 10, |_, _| true),
            (10, 10),
            String::new(),
            |p| Point::new(p.row, p.col * 0.5 + 2.3),
        );
        let out = warp_within(&img, &m, &map, 0).unwrap();
        // plain bilinear would blend in the zero background near col 4.5
        for r in 0..10 {
            for c in 0..10 {
                let src = c as f64 * 0.5 + 2.3;
                if src <= 6.0 {
                    assert_eq!(out.get(r, c), 100, "({r},{c})");
                }
            }
        }
        let plain = warp(&img, &map, 0).unwrap();
        assert!(plain.get(0, 5) < 100);
    }
}
