//! Robustness evaluation for monocular depth estimation.
//!
//! A benchmark is a set of scene groups: a base scene plus variants produced
//! by one procedural perturbation (camera roll, dolly zoom, lighting, object
//! resizing and so on). For each model the crate scores every record against
//! ground truth after least-squares alignment, then summarizes each group with
//! the average error `mu`, the accuracy instability `sigma` and, where it is
//! defined, the self-inconsistency `kappa` measured against the model's own
//! base prediction.
//!
//! Modules, bottom up:
//!
//! * [`depthio`]: rasters, masks, cameras, the manifest and file formats
//! * [`align`]: scale and scale-shift fits in the depth and disparity domains
//! * [`metrics`]: AbsRel, Log10, RMSE, the delta family and the per-record pipeline
//! * [`robust`]: group statistics and roll compensation
//! * [`geom`]: a small ray caster and perturbation operators for synthetic fixtures
//! * [`report`]: result tables, CSV/JSON, model rankings and erosion sweeps
//! * [`cli`]: the commands behind the `pde` binary
//!
//! The `examples/` directory has one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod cli;
pub mod depthio;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod numeric;
pub mod report;
pub mod robust;

pub use error::{PdeError, Result};
