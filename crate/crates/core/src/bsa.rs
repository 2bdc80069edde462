//! Bilateral augmentation: synthesize the opposite lung from a registered one.
//!
//! The source lung is mirrored across its own chord, scaled so its chord
//! matches the target lung's chord, and resized row by row onto the target
//! lung. Going left→right, rows of the flipped left lung that are at least
//! as long as the target row are truncated on the medial (heart) side
//! rather than squeezed. Both inputs must already be in the fixed frame.

use crate::dlfpr::{lung_frame, warp_within, CoordMap, Direction, KeepEnd, RowwiseTransform};
use crate::error::Result;
use crate::imagedata::{check_dims, BinaryMask, GrayImage};

/// End of a right-lung row (in chord-frame `s`) that faces the heart.
/// On a standard frontal film the right lung sits image-left, so its medial
/// side is the high-column end. Truncation keeps the opposite end.
pub const RIGHT_LUNG_MEDIAL_END: KeepEnd = KeepEnd::High;

const fn lateral_of(medial: KeepEnd) -> KeepEnd {
    match medial {
        KeepEnd::High => KeepEnd::Low,
        KeepEnd::Low => KeepEnd::High,
    }
}

/// Right lung image (fixed frame) → synthetic left lung image.
pub fn ba_r_to_l(
    right_image: &GrayImage,
    left_fixed: &BinaryMask,
    right_fixed: &BinaryMask,
) -> Result<GrayImage> {
    mirror_onto(right_image, right_fixed, left_fixed, None)
}

/// Left lung image (fixed frame) → synthetic right lung image, trimming
/// the virtual heart region where the flipped row is too long.
pub fn ba_l_to_r(
    left_image: &GrayImage,
    right_fixed: &BinaryMask,
    left_fixed: &BinaryMask,
) -> Result<GrayImage> {
    mirror_onto(
        left_image,
        left_fixed,
        right_fixed,
        Some(lateral_of(RIGHT_LUNG_MEDIAL_END)),
    )
}

fn mirror_onto(
    image: &GrayImage,
    source_mask: &BinaryMask,
    target_mask: &BinaryMask,
    trim: Option<KeepEnd>,
) -> Result<GrayImage> {
    check_dims(source_mask.dims(), image.dims())?;
    let transform = RowwiseTransform::build(
        target_mask,
        lung_frame(target_mask)?,
        source_mask,
        lung_frame(source_mask)?,
        true,
        trim,
    )?;
    let map = CoordMap::from_transform(&transform, Direction::Forward, target_mask, image.dims());
    warp_within(image, source_mask, &map, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trim_keeps_the_lateral_end() {
        assert_eq!(lateral_of(RIGHT_LUNG_MEDIAL_END), KeepEnd::Low);
    }

    #[test]
    fn constant_image_stays_constant() {
        let right =
            BinaryMask::from_fn(64, 64, |r, c| (8..56).contains(&r) && (6..24).contains(&c));
        let left = BinaryMask::from_fn(64, 64, |r, c| {
            (10..58).contains(&r) && (36..60).contains(&c)
        });
        let img = GrayImage::filled(64, 64, 120).masked(&right).unwrap();
        let out = ba_r_to_l(&img, &left, &right).unwrap();
        for r in 0..64 {
            for c in 0..64 {
                if left.get(r, c) {
                    assert!((out.get(r, c) as i32 - 120).abs() <= 1);
                } else {
                    assert_eq!(out.get(r, c), 0);
                }
            }
        }
        let img = GrayImage::filled(64, 64, 90).masked(&left).unwrap();
        let out = ba_l_to_r(&img, &right, &left).unwrap();
        for (r, c) in right.support() {
            assert!((out.get(r, c) as i32 - 90).abs() <= 1);
        }
    }
}
