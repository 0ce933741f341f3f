//! `mvs sweep`: plane-sweep depth estimation for every view of a scene (or a
//! chosen subset), writing per-view depth and confidence maps plus summary
//! statistics.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use mvs_core::dataio::{read_camera, write_pfm};
use mvs_core::geometry::DepthMap;
use mvs_core::sweep::{plane_sweep_depth, CostKind, DepthHypotheses};
use mvs_core::View;

use crate::common::{confidence_file_name, depth_file_name, init_out_dir, load_scene, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostArg {
    Ssd,
    Ncc,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Views to estimate; default all.
    #[arg(long = "view")]
    pub views: Vec<usize>,
    /// Number of depth hypotheses.
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    /// Override the camera file's depth range.
    #[arg(long)]
    pub depth_min: Option<f64>,
    #[arg(long)]
    pub depth_max: Option<f64>,
    #[arg(long, value_enum, default_value = "ssd")]
    pub cost: CostArg,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Maximum number of source views per reference (best pair scores first).
    #[arg(long, default_value_t = 4)]
    pub max_sources: usize,
    /// Treat stored extrinsics as camera-to-world and invert them.
    #[arg(long)]
    pub gta: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: SweepArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "sweep",
        &[
            ("scene", args.scene.display().to_string()),
            ("k", args.k.to_string()),
            ("cost", format!("{:?}", args.cost)),
            ("window", args.window.to_string()),
            ("temperature", args.temperature.to_string()),
            ("max_sources", args.max_sources.to_string()),
            ("gta", args.gta.to_string()),
        ],
    )?;
    let scene = load_scene(&args.scene, args.gta)?;
    let targets: Vec<usize> =
        if args.views.is_empty() { scene.manifest.view_ids() } else { args.views.clone() };

    let cost_kind = match args.cost {
        CostArg::Ssd => CostKind::Ssd,
        CostArg::Ncc => CostKind::Ncc,
    };

    let mut rows = Vec::new();
    for &ref_id in &targets {
        let reference = scene.view_by_id(ref_id)?;
        let pair = scene
            .manifest
            .pairs
            .iter()
            .find(|p| p.reference == ref_id)
            .with_context(|| format!("view {ref_id} has no pair entry"))?;
        let sources: Vec<View> = pair
            .sources
            .iter()
            .take(args.max_sources)
            .map(|(id, _)| scene.view_by_id(*id).cloned())
            .collect::<Result<_>>()?;
        if sources.is_empty() {
            bail!("view {ref_id} has no source views in pair.txt");
        }

        let (depth_min, depth_max) = match (args.depth_min, args.depth_max) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => {
                let paths = &scene.manifest.views[&ref_id];
                let cam = read_camera(&paths.camera)?;
                let lo = args.depth_min.unwrap_or(cam.depth_min);
                let hi = args.depth_max.or(cam.depth_max).with_context(|| {
                    format!("camera file for view {ref_id} has no depth_max; pass --depth-max")
                })?;
                (lo, hi)
            }
        };
        let hyps = DepthHypotheses::linear(depth_min, depth_max, args.k)?;
        let (depth, pv) =
            plane_sweep_depth(reference, &sources, &hyps, cost_kind, args.window, args.temperature)?;
        write_pfm(&args.out.join(depth_file_name(ref_id)), &depth)?;

        let conf = pv.max_prob_map();
        let conf_map = DepthMap::from_vec(depth.width(), depth.height(), conf.clone())?;
        write_pfm(&args.out.join(confidence_file_name(ref_id)), &conf_map)?;

        let mean_conf: f64 = conf.iter().sum::<f64>() / conf.len() as f64;
        rows.push(format!("{ref_id},mean_confidence,{mean_conf}"));
        rows.push(format!("{ref_id},hypothesis_spacing,{}", hyps.mean_spacing()));
        rows.push(format!("{ref_id},sources,{}", sources.len()));

        if let Ok(gt) = scene.gt_depth_by_id(ref_id) {
            let mut errs: Vec<f64> = depth
                .data()
                .iter()
                .zip(gt.data())
                .filter(|(_, &g)| g > 0.0)
                .map(|(&d, &g)| (d - g).abs())
                .collect();
            if !errs.is_empty() {
                errs.sort_by(f64::total_cmp);
                let median = errs[errs.len() / 2];
                let mae: f64 = errs.iter().sum::<f64>() / errs.len() as f64;
                rows.push(format!("{ref_id},median_abs_err_vs_gt,{median}"));
                rows.push(format!("{ref_id},mae_vs_gt,{mae}"));
            }
        }
    }
    write_csv(&args.out.join("sweep.csv"), "view,metric,value", &rows)?;
    println!("sweep: {} views -> {}", targets.len(), args.out.display());
    Ok(())
}
