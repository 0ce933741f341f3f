//! `mvs fuse`: merge per-view depth maps into a geometrically consistent
//! point cloud and write it as binary PLY.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mvs_core::dataio::read_pfm;
use mvs_core::fusion::{fuse, write_ply, FusionConfig};
use mvs_core::geometry::DepthMap;

use crate::common::{find_depth_file, init_out_dir, load_scene, write_csv};

#[derive(Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory holding per-view depth maps (sweep output or dataset
    /// depths); default: the scene's own depths.
    #[arg(long)]
    pub depths: Option<PathBuf>,
    /// How many other views must confirm a pixel.
    #[arg(long, default_value_t = 2)]
    pub min_views: usize,
    #[arg(long, default_value_t = 0.01)]
    pub max_rel_err: f64,
    #[arg(long, default_value_t = 1.0)]
    pub max_px: f64,
    /// Deduplication voxel edge; default: half the median point spacing.
    #[arg(long)]
    pub cell: Option<f64>,
    #[arg(long)]
    pub gta: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: FuseArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "fuse",
        &[
            ("scene", args.scene.display().to_string()),
            ("depths", args.depths.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("min_views", args.min_views.to_string()),
            ("max_rel_err", args.max_rel_err.to_string()),
            ("max_px", args.max_px.to_string()),
            ("cell", args.cell.map(|c| c.to_string()).unwrap_or_default()),
            ("gta", args.gta.to_string()),
        ],
    )?;
    let scene = load_scene(&args.scene, args.gta)?;
    let depths: Vec<DepthMap> = match &args.depths {
        Some(dir) => scene
            .views
            .iter()
            .map(|v| Ok(read_pfm(&find_depth_file(dir, v.id)?)?))
            .collect::<Result<_>>()?,
        None => scene
            .views
            .iter()
            .map(|v| scene.gt_depth_by_id(v.id).cloned())
            .collect::<Result<_>>()?,
    };

    let cfg = FusionConfig {
        min_consistent_views: args.min_views,
        max_relative_depth_error: args.max_rel_err,
        max_reprojection_px: args.max_px,
        dedup_cell: args.cell,
    };
    let cloud = fuse(&scene.views, &depths, &cfg)?;
    write_ply(&args.out.join("fused.ply"), &cloud)?;

    let total_valid: usize = depths.iter().map(|d| d.valid_count()).sum();
    write_csv(
        &args.out.join("fuse.csv"),
        "metric,value",
        &[
            format!("points,{}", cloud.len()),
            format!("input_valid_pixels,{total_valid}"),
            format!("views,{}", scene.views.len()),
        ],
    )?;
    println!("fuse: {} points from {} views", cloud.len(), scene.views.len());
    Ok(())
}
