//! `mvs warp`: reconstruct a reference view from source views under a depth
//! map and report the photometric error breakdown.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mvs_core::dataio::{read_pfm, write_image};
use mvs_core::geometry::{photometric_loss, warp_image};
use mvs_core::View;

use crate::common::{init_out_dir, load_scene, write_csv};

#[derive(Args)]
pub struct WarpArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Reference view id.
    #[arg(long = "ref")]
    pub reference: usize,
    /// Source view ids; default: the reference's pair entry.
    #[arg(long = "src")]
    pub sources: Vec<usize>,
    /// Depth map to warp under; default: the scene's ground-truth depth.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long)]
    pub gta: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: WarpArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "warp",
        &[
            ("scene", args.scene.display().to_string()),
            ("ref", args.reference.to_string()),
            ("depth", args.depth.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("gta", args.gta.to_string()),
        ],
    )?;
    let scene = load_scene(&args.scene, args.gta)?;
    let reference = scene.view_by_id(args.reference)?;
    let source_ids: Vec<usize> = if args.sources.is_empty() {
        scene
            .manifest
            .pairs
            .iter()
            .find(|p| p.reference == args.reference)
            .with_context(|| format!("view {} has no pair entry", args.reference))?
            .sources
            .iter()
            .map(|(id, _)| *id)
            .collect()
    } else {
        args.sources.clone()
    };
    let sources: Vec<View> =
        source_ids.iter().map(|id| scene.view_by_id(*id).cloned()).collect::<Result<_>>()?;

    let depth = match &args.depth {
        Some(path) => read_pfm(path)?,
        None => scene.gt_depth_by_id(args.reference)?.clone(),
    };

    let mut rows = Vec::new();
    for src in &sources {
        let (warped, mask) = warp_image(src, reference, &depth)?;
        write_image(&args.out.join(format!("warped_{:08}.png", src.id)), &warped)?;
        rows.push(format!("{},valid_pixels,{}", src.id, mask.count()));
    }
    let report = photometric_loss(reference, &sources, &depth)?;
    for per_view in &report.per_view {
        rows.push(format!("{},photometric_loss,{}", per_view.view_id, per_view.loss));
    }
    rows.push(format!("total,photometric_loss,{}", report.total));
    write_csv(&args.out.join("warp.csv"), "view,metric,value", &rows)?;
    println!("warp: ref {} from {} sources, loss {}", args.reference, sources.len(), report.total);
    Ok(())
}
