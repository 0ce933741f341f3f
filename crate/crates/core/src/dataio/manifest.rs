//! Scene manifests over the standard on-disk layout:
//!
//! ```text
//! scene/
//!   pair.txt
//!   cams/00000000_cam.txt ...
//!   images/00000000.png ...
//!   depths/00000000.pfm ...   (optional)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::ImageReader;

use super::{read_camera, read_pair, read_pfm, DataError, PairEntry};
use crate::geometry::{DepthMap, View};
use crate::raster::Image;

/// File locations of one view.
#[derive(Debug, Clone)]
pub struct ViewPaths {
    pub image: PathBuf,
    pub camera: PathBuf,
    pub depth: Option<PathBuf>,
}

/// All views and pairings of one scene.
#[derive(Debug, Clone)]
pub struct SceneManifest {
    pub scene_id: String,
    pub root: PathBuf,
    pub views: BTreeMap<usize, ViewPaths>,
    pub pairs: Vec<PairEntry>,
}

impl SceneManifest {
    pub fn view_ids(&self) -> Vec<usize> {
        self.views.keys().copied().collect()
    }
}

/// Scan a scene directory. The pair file is authoritative for which view ids
/// exist; every referenced camera and image file must be present.
pub fn load_manifest(dir: &Path) -> Result<SceneManifest, DataError> {
    let pair_path = dir.join("pair.txt");
    let pairs = read_pair(&pair_path)?;
    let mut ids: Vec<usize> = pairs.iter().map(|p| p.reference).collect();
    for p in &pairs {
        ids.extend(p.sources.iter().map(|(id, _)| *id));
    }
    ids.sort_unstable();
    ids.dedup();

    let mut views = BTreeMap::new();
    for id in ids {
        let camera = dir.join("cams").join(format!("{id:08}_cam.txt"));
        let image = dir.join("images").join(format!("{id:08}.png"));
        for (path, what) in [(&camera, "camera"), (&image, "image")] {
            if !path.exists() {
                return Err(DataError::Format {
                    path: path.display().to_string(),
                    message: format!("{what} file referenced by pair.txt is missing"),
                });
            }
        }
        let depth = dir.join("depths").join(format!("{id:08}.pfm"));
        views.insert(
            id,
            ViewPaths { image, camera, depth: depth.exists().then_some(depth) },
        );
    }
    let scene_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string());
    Ok(SceneManifest { scene_id, root: dir.to_path_buf(), views, pairs })
}

/// Decode an 8-bit PNG or PPM into `[0, 1]` samples.
pub fn load_image(path: &Path) -> Result<Image, DataError> {
    let decoded = ImageReader::open(path)
        .map_err(|e| DataError::Image { path: path.display().to_string(), message: e.to_string() })?
        .decode()
        .map_err(|e| DataError::Image { path: path.display().to_string(), message: e.to_string() })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    Ok(Image::from_fn(w, h, 3, |x, y, c| rgb.get_pixel(x as u32, y as u32).0[c] as f64 / 255.0))
}

/// Quantize to 8 bits and write a PNG.
pub fn write_image(path: &Path, img: &Image) -> Result<(), DataError> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut rgb = image::RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let px = img.pixel(x as usize, y as usize);
            let at = |c: usize| -> u8 {
                let v = if px.len() == 1 { px[0] } else { px[c] };
                (v.clamp(0.0, 1.0) * 255.0).round() as u8
            };
            rgb.put_pixel(x, y, image::Rgb([at(0), at(1), at(2)]));
        }
    }
    rgb.save(path)
        .map_err(|e| DataError::Image { path: path.display().to_string(), message: e.to_string() })
}

/// Load one calibrated view. With `extrinsic_inverted` the stored 4x4 is
/// treated as camera-to-world and inverted before use (the convention of
/// some synthetic datasets).
pub fn load_view(
    manifest: &SceneManifest,
    id: usize,
    extrinsic_inverted: bool,
) -> Result<View, DataError> {
    let paths = manifest.views.get(&id).ok_or(DataError::UnknownView(id))?;
    let camera = read_camera(&paths.camera)?;
    let extrinsics =
        if extrinsic_inverted { camera.inverted_extrinsics() } else { camera.extrinsics.clone() };
    let img = load_image(&paths.image)?;
    Ok(View::new(img, camera.intrinsics, extrinsics, id)?)
}

/// Load the ground-truth depth map of one view, if the scene carries one.
pub fn load_depth(manifest: &SceneManifest, id: usize) -> Result<Option<DepthMap>, DataError> {
    let paths = manifest.views.get(&id).ok_or(DataError::UnknownView(id))?;
    paths.depth.as_ref().map(|p| read_pfm(p)).transpose()
}
