//! Training-set construction: every lung registered onto the fixed frame,
//! abnormal cases doubled by bilateral augmentation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{load_case, worker_pool};
use crate::bsa::{ba_l_to_r, ba_r_to_l};
use crate::dlfpr::{reg, warp_within};
use crate::error::{Error, Result};
use crate::imagedata::{write_pgm, BinaryMask, CaseManifest, GrayImage, Label};
use crate::lungmask::{split_mask, LungPair, Side};

/// One image of the prepared dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedItem {
    pub case_id: String,
    pub side: Side,
    pub label: Label,
    /// Synthesized from the opposite lung rather than registered directly.
    pub augmented: bool,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreparedDataset {
    /// Abnormal left / right lungs, registered and augmented.
    pub x_left: Vec<PreparedItem>,
    pub x_right: Vec<PreparedItem>,
    /// Normal left / right lungs, registered only.
    pub y_left: Vec<PreparedItem>,
    pub y_right: Vec<PreparedItem>,
    /// Cases that failed, with the reason.
    pub skipped: Vec<(String, String)>,
    pub manifest: PathBuf,
}

impl PreparedDataset {
    pub fn items(&self) -> impl Iterator<Item = &PreparedItem> {
        self.x_left
            .iter()
            .chain(&self.x_right)
            .chain(&self.y_left)
            .chain(&self.y_right)
    }
}

/// Both lungs of one image mapped onto the fixed frame, each masked to its
/// fixed-side support.
pub fn register_lungs(image: &GrayImage, lungs: &LungPair, fixed: &LungPair) -> Result<LungImages> {
    let one = |side: Side| -> Result<GrayImage> {
        let moving = lungs.side(side);
        let pair = reg(moving, fixed.side(side))?;
        warp_within(&image.masked(moving)?, moving, &pair.forward, 0)?.masked(fixed.side(side))
    };
    Ok(LungImages {
        left: one(Side::Left)?,
        right: one(Side::Right)?,
    })
}

/// A left and a right lung image in the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LungImages {
    pub left: GrayImage,
    pub right: GrayImage,
}

impl LungImages {
    pub fn side(&self, side: Side) -> &GrayImage {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Bilateral augmentation of registered lungs: the synthetic left lung
/// comes from the right one and vice versa.
pub fn augment(registered: &LungImages, fixed: &LungPair) -> Result<LungImages> {
    Ok(LungImages {
        left: ba_r_to_l(&registered.right, &fixed.left, &fixed.right)?.masked(&fixed.left)?,
        right: ba_l_to_r(&registered.left, &fixed.right, &fixed.left)?.masked(&fixed.right)?,
    })
}

struct CaseOutput {
    registered: LungImages,
    augmented: Option<LungImages>,
}

fn prepare_case(case: &CaseManifest, fixed: &LungPair) -> Result<CaseOutput> {
    let (image, mask) = load_case(case)?;
    let lungs = split_mask(&mask)?;
    let registered = register_lungs(&image, &lungs, fixed)?;
    let augmented = match case.label {
        Label::Abnormal => Some(augment(&registered, fixed)?),
        Label::Normal => None,
    };
    Ok(CaseOutput {
        registered,
        augmented,
    })
}

/// Registers every case, augments the abnormal ones and writes
/// `images/<case>_<side>_{reg,aug}.pgm` plus `dataset.tsv` under `out_dir`.
/// Failing cases are skipped and listed; only an unusable fixed mask is fatal.
/// `jobs = 0` uses one worker per logical CPU.
pub fn prepare(
    cases: &[CaseManifest],
    fixed_mask: &BinaryMask,
    out_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<PreparedDataset> {
    let fixed = split_mask(fixed_mask)?;
    let out = out_dir.as_ref();
    let images = out.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;

    let results: Vec<Result<CaseOutput>> =
        worker_pool(jobs)?.install(|| cases.par_iter().map(|c| prepare_case(c, &fixed)).collect());

    let mut ds = PreparedDataset {
        manifest: out.join("dataset.tsv"),
        ..Default::default()
    };
    for (case, result) in cases.iter().zip(results) {
        let output = match result {
            Ok(o) => o,
            Err(e) => {
                ds.skipped.push((case.case_id.clone(), e.to_string()));
                continue;
            }
        };
        let mut emit = |img: &GrayImage, side: Side, augmented: bool| -> Result<()> {
            let kind = if augmented { "aug" } else { "reg" };
            let path = images.join(format!("{}_{}_{kind}.pgm", case.case_id, side));
            write_pgm(img, &path)?;
            let item = PreparedItem {
                case_id: case.case_id.clone(),
                side,
                label: case.label,
                augmented,
                path,
            };
            let set = match (case.label, side) {
                (Label::Abnormal, Side::Left) => &mut ds.x_left,
                (Label::Abnormal, Side::Right) => &mut ds.x_right,
                (Label::Normal, Side::Left) => &mut ds.y_left,
                (Label::Normal, Side::Right) => &mut ds.y_right,
            };
            set.push(item);
            Ok(())
        };
        for side in Side::BOTH {
            emit(output.registered.side(side), side, false)?;
        }
        if let Some(aug) = &output.augmented {
            for side in Side::BOTH {
                emit(aug.side(side), side, true)?;
            }
        }
    }
    write_dataset_manifest(&ds, out)?;
    Ok(ds)
}

fn set_name(item: &PreparedItem) -> &'static str {
    match (item.label, item.side) {
        (Label::Abnormal, Side::Left) => "X_l",
        (Label::Abnormal, Side::Right) => "X_r",
        (Label::Normal, Side::Left) => "Y_l",
        (Label::Normal, Side::Right) => "Y_r",
    }
}

fn write_dataset_manifest(ds: &PreparedDataset, out: &Path) -> Result<()> {
    let mut text = String::from("# set\tcase_id\tside\tlabel\taugmented\tpath\n");
    for item in ds.items() {
        let rel = item.path.strip_prefix(out).unwrap_or(&item.path);
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            set_name(item),
            item.case_id,
            item.side,
            item.label,
            item.augmented,
            rel.display()
        );
    }
    for (id, reason) in &ds.skipped {
        let _ = writeln!(
            text,
            "# skipped\t{id}\t{}",
            reason.replace(['\t', '\n'], " ")
        );
    }
    fs::write(&ds.manifest, text).map_err(|e| Error::io(&ds.manifest, e))
}
