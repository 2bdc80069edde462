//! Deterministic synthetic chest images for desk-scale testing.
//!
//! A case is two smooth perturbed ellipses (the lungs) over a shared
//! low-frequency texture, optionally with a soft-edged bright lesion inside
//! one lung. Every output is a pure function of `(seed, spec)`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Side;
use crate::error::{Error, Result};
use crate::imagedata::{
    write_manifest, write_mask, write_pgm, BBox, BinaryMask, CaseManifest, GrayImage, Label,
};

/// Width of the raised-cosine rim of a lesion, in pixels. The profile is
/// flat out to `radius - LESION_RIM / 2` and reaches zero at `radius + LESION_RIM / 2`.
pub const LESION_RIM: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobeSpec {
    pub center: (f64, f64),
    /// Semi-axes along (row, col) before tilting.
    pub semi_axes: (f64, f64),
    /// Rotation in radians.
    pub tilt: f64,
    /// Relative radial perturbation amplitude (0 gives an exact ellipse).
    pub perturbation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LesionSpec {
    pub side: Side,
    pub center: (f64, f64),
    pub radius: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub right: LobeSpec,
    pub left: LobeSpec,
    pub lesion: Option<LesionSpec>,
    /// Seed of the background texture; cases sharing it share the texture.
    pub texture_seed: u64,
}

impl SynthSpec {
    /// Unperturbed reference lungs on a `height × width` canvas.
    pub fn reference(height: usize, width: usize, texture_seed: u64) -> Self {
        let (sh, sw) = (height as f64 / 256.0, width as f64 / 256.0);
        SynthSpec {
            height,
            width,
            right: LobeSpec {
                center: (128.0 * sh, 78.0 * sw),
                semi_axes: (84.0 * sh, 32.0 * sw),
                tilt: 0.08,
                perturbation: 0.0,
            },
            left: LobeSpec {
                center: (128.0 * sh, 178.0 * sw),
                semi_axes: (84.0 * sh, 38.0 * sw),
                tilt: -0.08,
                perturbation: 0.0,
            },
            lesion: None,
            texture_seed,
        }
    }

    pub fn lobe(&self, side: Side) -> &LobeSpec {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub image: GrayImage,
    pub mask: BinaryMask,
    pub bbox: Option<BBox>,
    pub lesion: Option<LesionSpec>,
}

/// Low-order boundary harmonics drawn from the seed.
#[derive(Debug, Clone, Copy)]
struct Harmonics {
    coeffs: [(f64, f64); 3],
}

impl Harmonics {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut coeffs = [(0.0, 0.0); 3];
        for c in &mut coeffs {
            *c = (rng.gen_range(-1.0..1.0) / 3.0, rng.gen_range(0.0..2.0 * PI));
        }
        Harmonics { coeffs }
    }

    fn radius(&self, theta: f64, amplitude: f64) -> f64 {
        let wobble: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &(a, phase))| a * ((k as f64 + 2.0) * theta + phase).cos())
            .sum();
        1.0 + amplitude * wobble
    }
}

/// Rasterizes one perturbed ellipse.
pub fn lobe_mask(height: usize, width: usize, lobe: &LobeSpec, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rasterize_lobe(height, width, lobe, Harmonics::draw(&mut rng))
}

fn rasterize_lobe(height: usize, width: usize, lobe: &LobeSpec, h: Harmonics) -> BinaryMask {
    let (sin, cos) = lobe.tilt.sin_cos();
    BinaryMask::from_fn(height, width, |r, c| {
        let dr = r as f64 - lobe.center.0;
        let dc = c as f64 - lobe.center.1;
        let u = (dr * cos + dc * sin) / lobe.semi_axes.0;
        let v = (-dr * sin + dc * cos) / lobe.semi_axes.1;
        let rho = u.hypot(v);
        rho <= h.radius(v.atan2(u), lobe.perturbation)
    })
}

/// Right and left lung masks of a spec (seed only affects boundary wobble).
pub fn lung_masks(seed: u64, spec: &SynthSpec) -> Result<(BinaryMask, BinaryMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hr = Harmonics::draw(&mut rng);
    let hl = Harmonics::draw(&mut rng);
    let right = rasterize_lobe(spec.height, spec.width, &spec.right, hr);
    let left = rasterize_lobe(spec.height, spec.width, &spec.left, hl);
    if right.is_empty() || left.is_empty() {
        return Err(Error::Spec("a lung lobe rasterizes to nothing".into()));
    }
    if touches(&right, &left) {
        return Err(Error::Spec("lung lobes overlap or touch".into()));
    }
    Ok((right, left))
}

fn touches(a: &BinaryMask, b: &BinaryMask) -> bool {
    a.support().any(|(r, c)| {
        let (r, c) = (r as isize, c as isize);
        (-1..=1).any(|dr| (-1..=1).any(|dc| b.get_signed(r + dr, c + dc)))
    })
}

/// Smooth background field with values inside [40, 160].
pub fn base_texture(height: usize, width: usize, texture_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(texture_seed ^ 0x7e57_u64);
    let scale = height.max(width) as f64;
    // amplitudes sum to 54 around a mean of 100
    let waves: Vec<(f64, f64, f64, f64)> = [24.0, 18.0, 12.0]
        .iter()
        .map(|&amp| {
            let dir = rng.gen_range(0.0..2.0 * PI);
            let wavelength = rng.gen_range(1.2..2.4) * scale;
            let phase = rng.gen_range(0.0..2.0 * PI);
            let k = 2.0 * PI / wavelength;
            (amp, k * dir.cos(), k * dir.sin(), phase)
        })
        .collect();
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let v: f64 = waves
                .iter()
                .map(|&(a, kr, kc, ph)| a * (kr * r as f64 + kc * c as f64 + ph).sin())
                .sum();
            out.push(100.0 + v);
        }
    }
    out
}

/// Lesion intensity profile at distance `d` from its centre.
pub fn lesion_profile(d: f64, radius: f64) -> f64 {
    let inner = radius - LESION_RIM / 2.0;
    if radius <= 0.0 {
        0.0
    } else if d <= inner {
        1.0
    } else if d >= radius + LESION_RIM / 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (d - inner) / LESION_RIM).cos())
    }
}

/// Pixels where the lesion adds a non-zero amount.
pub fn lesion_support(height: usize, width: usize, lesion: &LesionSpec) -> BinaryMask {
    BinaryMask::from_fn(height, width, |r, c| {
        let d = (r as f64 - lesion.center.0).hypot(c as f64 - lesion.center.1);
        lesion_profile(d, lesion.radius) > 0.0
    })
}

fn tight_bbox(mask: &BinaryMask) -> Option<BBox> {
    mask.support().fold(None, |acc, (r, c)| {
        Some(match acc {
            None => BBox {
                row_min: r,
                col_min: c,
                row_max: r,
                col_max: c,
            },
            Some(b) => BBox {
                row_min: b.row_min.min(r),
                col_min: b.col_min.min(c),
                row_max: b.row_max.max(r),
                col_max: b.col_max.max(c),
            },
        })
    })
}

pub fn gen_synthetic(seed: u64, spec: &SynthSpec) -> Result<SynthCase> {
    let (right, left) = lung_masks(seed, spec)?;
    let mask = right.union(&left)?;
    let mut field = base_texture(spec.height, spec.width, spec.texture_seed);

    let mut bbox = None;
    let lesion = spec.lesion.filter(|l| l.radius > 0.0);
    if let Some(lesion) = lesion {
        let support = lesion_support(spec.height, spec.width, &lesion);
        let lung = match lesion.side {
            Side::Left => &left,
            Side::Right => &right,
        };
        if support.support().any(|(r, c)| !lung.get(r, c)) {
            return Err(Error::Spec(format!(
                "lesion at {:?} radius {} leaves the {} lung",
                lesion.center, lesion.radius, lesion.side
            )));
        }
        for (r, c) in support.support() {
            let d = (r as f64 - lesion.center.0).hypot(c as f64 - lesion.center.1);
            field[r * spec.width + c] += lesion.delta * lesion_profile(d, lesion.radius);
        }
        bbox = tight_bbox(&support);
    }

    let image = GrayImage::new(
        spec.height,
        spec.width,
        field
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect(),
    )?;
    Ok(SynthCase {
        image,
        mask,
        bbox,
        lesion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub count: usize,
    pub lesion_rate: f64,
    pub height: usize,
    pub width: usize,
    pub lesion_delta: f64,
    pub lesion_radius: (u32, u32),
}

impl DatasetConfig {
    pub fn new(seed: u64, count: usize, lesion_rate: f64) -> Self {
        DatasetConfig {
            seed,
            count,
            lesion_rate,
            height: 256,
            width: 256,
            lesion_delta: 80.0,
            lesion_radius: (8, 14),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub fixed_mask: BinaryMask,
    /// Per-side normal templates: the shared texture inside the fixed lung.
    pub template_left: GrayImage,
    pub template_right: GrayImage,
    pub cases: Vec<(String, Label, SynthCase)>,
}

/// Whether case `i` carries a lesion: spreads `round(count * rate)` lesions evenly.
fn is_abnormal(i: usize, rate: f64) -> bool {
    ((i + 1) as f64 * rate).floor() > (i as f64 * rate).floor()
}

fn case_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (i as u64 + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

pub fn synth_dataset(cfg: &DatasetConfig) -> Result<SynthDataset> {
    if !(0.0..=1.0).contains(&cfg.lesion_rate) {
        return Err(Error::Spec(format!(
            "lesion rate {} outside [0, 1]",
            cfg.lesion_rate
        )));
    }
    let reference = SynthSpec::reference(cfg.height, cfg.width, cfg.seed);
    let (fr, fl) = lung_masks(0, &reference)?;
    let fixed_mask = fr.union(&fl)?;
    let texture = gen_synthetic(0, &reference)?.image;
    let template_left = texture.masked(&fl)?;
    let template_right = texture.masked(&fr)?;

    let mut cases = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let seed = case_seed(cfg.seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = reference.clone();
        for lobe in [&mut spec.right, &mut spec.left] {
            lobe.center.0 += rng.gen_range(-6.0..6.0);
            lobe.center.1 += rng.gen_range(-5.0..5.0);
            lobe.semi_axes.0 *= rng.gen_range(0.9..1.1);
            lobe.semi_axes.1 *= rng.gen_range(0.9..1.1);
            lobe.tilt += rng.gen_range(-0.08..0.08);
            lobe.perturbation = rng.gen_range(0.02..0.05);
        }
        let label = if is_abnormal(i, cfg.lesion_rate) {
            spec.lesion = Some(place_lesion(&spec, seed, cfg, &mut rng)?);
            Label::Abnormal
        } else {
            Label::Normal
        };
        let case = gen_synthetic(seed, &spec)?;
        cases.push((format!("case{i:04}"), label, case));
    }
    Ok(SynthDataset {
        fixed_mask,
        template_left,
        template_right,
        cases,
    })
}

fn place_lesion(
    spec: &SynthSpec,
    seed: u64,
    cfg: &DatasetConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LesionSpec> {
    let (right, left) = lung_masks(seed, spec)?;
    let side = if rng.gen_bool(0.5) {
        Side::Left
    } else {
        Side::Right
    };
    let lung = match side {
        Side::Left => &left,
        Side::Right => &right,
    };
    let radius = rng.gen_range(cfg.lesion_radius.0..=cfg.lesion_radius.1) as f64;
    let support: Vec<(usize, usize)> = lung.support().collect();
    for _ in 0..500 {
        let (r, c) = support[rng.gen_range(0..support.len())];
        let lesion = LesionSpec {
            side,
            center: (r as f64, c as f64),
            radius,
            delta: cfg.lesion_delta,
        };
        let disc = lesion_support(spec.height, spec.width, &lesion);
        if disc.support().all(|(r, c)| lung.get(r, c)) {
            return Ok(lesion);
        }
    }
    Err(Error::Spec(format!(
        "no room for a radius-{radius} lesion in the {side} lung"
    )))
}

/// Paths written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub manifest: PathBuf,
    pub fixed_mask: PathBuf,
    pub template_left: PathBuf,
    pub template_right: PathBuf,
}

/// Writes `manifest.tsv`, `fixed_mask.pgm`, `template_{l,r}.pgm` and
/// `cases/<id>_{image,mask}.pgm` under `out_dir`.
pub fn write_dataset(ds: &SynthDataset, out_dir: impl AsRef<Path>) -> Result<DatasetPaths> {
    let out = out_dir.as_ref();
    let cases_dir = out.join("cases");
    fs::create_dir_all(&cases_dir).map_err(|e| Error::io(&cases_dir, e))?;
    let paths = DatasetPaths {
        manifest: out.join("manifest.tsv"),
        fixed_mask: out.join("fixed_mask.pgm"),
        template_left: out.join("template_l.pgm"),
        template_right: out.join("template_r.pgm"),
    };
    write_mask(&ds.fixed_mask, &paths.fixed_mask)?;
    write_pgm(&ds.template_left, &paths.template_left)?;
    write_pgm(&ds.template_right, &paths.template_right)?;

    let mut rows = Vec::with_capacity(ds.cases.len());
    for (id, label, case) in &ds.cases {
        let image_path = cases_dir.join(format!("{id}_image.pgm"));
        let mask_path = cases_dir.join(format!("{id}_mask.pgm"));
        write_pgm(&case.image, &image_path)?;
        write_mask(&case.mask, &mask_path)?;
        rows.push(CaseManifest {
            case_id: id.clone(),
            image_path,
            mask_path,
            label: *label,
            bbox: case.bbox,
        });
    }
    write_manifest(&rows, &paths.manifest)?;
    Ok(paths)
}
