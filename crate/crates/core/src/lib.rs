//! Pseudo-paired lung registration for chest X-ray anomaly localization.
//!
//! The crate maps each lung of a patient image onto a shared reference
//! ("fixed") lung mask with a deterministic geometric transform, synthesizes
//! the opposite lung by bilateral flipping, and scores anomaly maps produced
//! by any image-translation backend after mapping results back to the
//! patient's own coordinates.
//!
//! Modules, bottom-up:
//! - [`imagedata`]: grids, PGM and manifest IO.
//! - [`lungmask`]: left/right split, boundaries, anchors, synthetic cases.
//! - [`relcoords`]: relative in-lung coordinates and a brute-force
//!   correspondence oracle.
//! - [`dlfpr`]: the fast registration, coordinate maps and warping.
//! - [`bsa`]: bilateral augmentation.
//! - [`metrics`]: anomaly maps, thresholds, scores, AUC and reports.
//! - [`pipeline`]: dataset preparation, translation backends, test path.
//!
//! Left and right always mean the patient's anatomical sides. On a standard
//! frontal radiograph the right lung appears on the image-left.

pub mod bsa;
pub mod dlfpr;
mod error;
pub mod imagedata;
pub mod lungmask;
pub mod metrics;
pub mod pipeline;
pub mod relcoords;

pub use dlfpr::{CoordMap, RegPair};
pub use error::{Error, Result};
pub use imagedata::{BBox, BinaryMask, CaseManifest, GrayImage, Label, Point, SignedMap};
pub use lungmask::{LungAnchors, LungPair, Side};
