//! Seeded mask pairs and small measurement helpers shared by the
//! integration tests.
#![allow(dead_code)]

use lungreg::lungmask::synth::{lobe_mask, lung_masks, LobeSpec, SynthSpec};
use lungreg::relcoords::OracleMap;
use lungreg::{BinaryMask, Point, RegPair, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A moving/fixed pair of single lung-like blobs on a 48×48 canvas.
pub fn small_pair(seed: u64) -> (BinaryMask, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lobe = || LobeSpec {
        center: (
            24.0 + rng.gen_range(-2.0..2.0),
            24.0 + rng.gen_range(-2.0..2.0),
        ),
        semi_axes: (
            19.0 * rng.gen_range(0.9..1.05),
            10.0 * rng.gen_range(0.85..1.15),
        ),
        tilt: rng.gen_range(-0.15..0.15),
        perturbation: rng.gen_range(0.02..0.05),
    };
    let (a, b) = (lobe(), lobe());
    (
        lobe_mask(48, 48, &a, seed * 2 + 1),
        lobe_mask(48, 48, &b, seed * 2 + 2),
    )
}

/// A moving lung from a perturbed 256×256 synthetic chest and the matching
/// unperturbed reference lung. Even seeds give left lungs, odd seeds right.
pub fn full_pair(seed: u64) -> (BinaryMask, BinaryMask, Side) {
    let reference = SynthSpec::reference(256, 256, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let mut spec = reference.clone();
    for lobe in [&mut spec.right, &mut spec.left] {
        lobe.center.0 += rng.gen_range(-6.0..6.0);
        lobe.center.1 += rng.gen_range(-5.0..5.0);
        lobe.semi_axes.0 *= rng.gen_range(0.9..1.1);
        lobe.semi_axes.1 *= rng.gen_range(0.9..1.1);
        lobe.tilt += rng.gen_range(-0.08..0.08);
        lobe.perturbation = rng.gen_range(0.02..0.05);
    }
    let (mr, ml) = lung_masks(1000 + seed, &spec).unwrap();
    let (fr, fl) = lung_masks(0, &reference).unwrap();
    if seed.is_multiple_of(2) {
        (ml, fl, Side::Left)
    } else {
        (mr, fr, Side::Right)
    }
}

/// Fraction of moving support pixels whose registered position lies within
/// `tol` px of the oracle's fixed pixel, plus the number compared.
pub fn oracle_agreement(pair: &RegPair, oracle: &OracleMap, tol: f64) -> (f64, usize) {
    let mut hits = 0;
    for &(p, q) in &oracle.entries {
        let mapped = pair
            .inverse
            .get(p.0, p.1)
            .expect("inverse covers the moving support");
        if mapped.distance(q.into()) <= tol {
            hits += 1;
        }
    }
    (
        hits as f64 / oracle.entries.len() as f64,
        oracle.entries.len(),
    )
}

/// Round-trip errors `|forward(inverse(p)) - p|` over the moving support;
/// pixels whose image leaves the forward grid count as infinite.
pub fn round_trip_errors(pair: &RegPair, moving: &BinaryMask) -> Vec<f64> {
    moving
        .support()
        .map(|(r, c)| {
            let q = pair
                .inverse
                .get(r, c)
                .expect("inverse covers the moving support");
            pair.forward.interpolate(q).map_or(f64::INFINITY, |back| {
                back.distance(Point::new(r as f64, c as f64))
            })
        })
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
