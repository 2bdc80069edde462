//! Dataset preparation, translation backends and the scoring test path.
//!
//! Cases are independent and run on a bounded worker pool; results are
//! assembled in input order so every output is deterministic regardless of
//! the number of workers.

mod backend;
mod evaluate;
mod prepare;

pub use backend::{translate, translate_as, BackendSpec, ExternalBackend, DEFAULT_TIMEOUT};
pub use evaluate::{eval_dataset, merge, run_all, run_test, tau_tag, CaseResult, Evaluation};
pub use prepare::{augment, prepare, register_lungs, LungImages, PreparedDataset, PreparedItem};

use crate::error::{Error, Result};
use crate::imagedata::{check_dims, read_mask, read_pgm, BinaryMask, CaseManifest, GrayImage};

/// Reads a case's image and mask and checks they agree in size.
pub fn load_case(case: &CaseManifest) -> Result<(GrayImage, BinaryMask)> {
    let image = read_pgm(&case.image_path)?;
    let mask = read_mask(&case.mask_path)?;
    check_dims(image.dims(), mask.dims())?;
    Ok((image, mask))
}

/// A pool of `jobs` workers; zero means one per logical CPU.
pub(crate) fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Input(format!("cannot start {jobs} workers: {e}")))
}
