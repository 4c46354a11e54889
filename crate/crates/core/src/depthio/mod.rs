//! Data model, raster file formats, manifest ingestion and mask morphology.

pub mod camera;
pub mod format;
pub mod manifest;
pub mod morphology;
pub mod raster;
pub mod scene;

pub use camera::CameraModel;
pub use format::{
    read_depth_raster, read_header, read_mask, write_depth_raster, write_mask, RasterFormat, RasterHeader,
};
pub use manifest::{load_manifest, parse_manifest, write_manifest, Background, Benchmark, SceneGroup, SceneRecord};
pub use morphology::{background_mask, erode_mask};
pub use raster::{DepthMap, Mask, Shaped, ValueKind};
pub use scene::{Category, ModelEntry, OutputKind, PerturbationMeta, PerturbationType};
