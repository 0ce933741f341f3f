//! Shared plumbing for the subcommands: output directories, the `run.txt`
//! config echo, CSV writing, and format conversions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mvs_core::dataio::{load_depth, load_manifest, load_view, SceneManifest};
use mvs_core::geometry::DepthMap;
use mvs_core::style::FeatureMap;
use mvs_core::sweep::ProbabilityVolume;
use mvs_core::{Image, Intrinsics, View};

/// Create the output directory and echo the resolved configuration, one
/// `key=value` per line, for reproducibility. No timestamps: two runs with
/// the same config produce identical artifacts.
pub fn init_out_dir(out: &Path, command: &str, config: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut text = format!("command={command}\n");
    for (key, value) in config {
        writeln!(text, "{key}={value}").unwrap();
    }
    fs::write(out.join("run.txt"), text)?;
    Ok(())
}

/// Write a CSV file with a header row.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = format!("{header}\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// A scene loaded into memory: views sorted by id, optional ground-truth
/// depths aligned with them.
pub struct LoadedScene {
    pub manifest: SceneManifest,
    pub views: Vec<View>,
    pub gt_depths: Vec<Option<DepthMap>>,
}

impl LoadedScene {
    pub fn view_by_id(&self, id: usize) -> Result<&View> {
        self.views.iter().find(|v| v.id == id).with_context(|| format!("view {id} not in scene"))
    }

    pub fn gt_depth_by_id(&self, id: usize) -> Result<&DepthMap> {
        let idx = self
            .views
            .iter()
            .position(|v| v.id == id)
            .with_context(|| format!("view {id} not in scene"))?;
        self.gt_depths[idx]
            .as_ref()
            .with_context(|| format!("scene has no ground-truth depth for view {id}"))
    }
}

pub fn load_scene(dir: &Path, extrinsic_inverted: bool) -> Result<LoadedScene> {
    let manifest = load_manifest(dir)?;
    let ids = manifest.view_ids();
    let mut views = Vec::with_capacity(ids.len());
    let mut gt_depths = Vec::with_capacity(ids.len());
    for &id in &ids {
        views.push(load_view(&manifest, id, extrinsic_inverted)?);
        gt_depths.push(load_depth(&manifest, id)?);
    }
    Ok(LoadedScene { manifest, views, gt_depths })
}

/// Wrap a bare image file in a calibrated view with a neutral camera, for
/// commands that operate on pixels only.
pub fn image_as_view(path: &Path, id: usize) -> Result<View> {
    let img = mvs_core::dataio::load_image(path)?;
    view_from_image(img, id)
}

pub fn view_from_image(img: Image, id: usize) -> Result<View> {
    let f = img.width().max(img.height()) as f64;
    let intrinsics = Intrinsics::new(
        f,
        f,
        (img.width() - 1) as f64 / 2.0,
        (img.height() - 1) as f64 / 2.0,
    )?;
    Ok(View::new(img, intrinsics, mvs_core::Extrinsics::identity(), id)?)
}

/// Interpret a feature-map file as a probability volume (channels = depth
/// hypotheses). Float32 storage slightly denormalizes the per-pixel sums, so
/// they are rescaled; sums off by more than 1e-3 are rejected as not being
/// probabilities.
pub fn fmap_to_probability_volume(f: &FeatureMap) -> Result<ProbabilityVolume> {
    let k = f.channel_count();
    let (w, h) = (f.width(), f.height());
    let mut data = vec![0.0f64; w * h * k];
    for ch in 0..k {
        for pos in 0..w * h {
            data[pos * k + ch] = f.data()[(ch, pos)];
        }
    }
    for px in data.chunks_exact_mut(k) {
        let sum: f64 = px.iter().sum();
        if (sum - 1.0).abs() > 1e-3 || px.iter().any(|&p| p < 0.0) {
            bail!("feature map is not a probability volume (pixel sum {sum})");
        }
        for v in px {
            *v /= sum;
        }
    }
    Ok(ProbabilityVolume::from_vec(w, h, k, data)?)
}

/// Format used by sweep outputs and fusion inputs.
pub fn depth_file_name(view_id: usize) -> String {
    format!("depth_{view_id:08}.pfm")
}

pub fn confidence_file_name(view_id: usize) -> String {
    format!("conf_{view_id:08}.pfm")
}

/// Locate a per-view depth map in `dir`, accepting both the sweep output
/// naming and the dataset naming.
pub fn find_depth_file(dir: &Path, view_id: usize) -> Result<PathBuf> {
    let candidates = [depth_file_name(view_id), format!("{view_id:08}.pfm")];
    for c in &candidates {
        let p = dir.join(c);
        if p.exists() {
            return Ok(p);
        }
    }
    bail!("no depth map for view {view_id} in {} (tried {candidates:?})", dir.display())
}
