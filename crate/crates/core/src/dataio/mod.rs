//! Readers and writers for the on-disk dataset layout: camera parameter
//! files, view pairing files, PFM depth maps, 8-bit images, a minimal OBJ
//! subset for ground-truth meshes, and semi-supervised split generation.
//!
//! Parsers reject malformed input with a position-bearing error; none of
//! them silently substitute defaults.

mod camera;
mod manifest;
mod obj;
mod pair;
mod pfm;
mod split;

pub use camera::{read_camera, write_camera, CameraFile};
pub use manifest::{load_depth, load_image, load_manifest, load_view, write_image, SceneManifest, ViewPaths};
pub use obj::read_obj;
pub use pair::{read_pair, write_pair, PairEntry};
pub use pfm::{read_pfm, write_pfm};
pub use split::{make_split, SplitItem, SplitMode, SplitSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("view {0} not present in the manifest")]
    UnknownView(usize),
    #[error("split ratio {0} must lie in (0, 1]")]
    BadRatio(f64),
    #[error("split has no labeled items")]
    EmptySplit,
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image {path}: {message}")]
    Image { path: String, message: String },
}

pub(crate) fn parse_err(path: &std::path::Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse { path: path.display().to_string(), line, message: message.into() }
}
