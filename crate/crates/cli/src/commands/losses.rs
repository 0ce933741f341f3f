//! `mvs losses`: assemble the four loss terms from file inputs and emit the
//! weighted combination as one CSV row plus key=value text.
//!
//! Every term is optional and contributes 0 when its inputs are absent:
//! supervision needs `--pred`/`--gt`, the photometric term a scene plus a
//! depth map, the consistency term two probability volumes, the style term a
//! second prediction scored against the same ground truth.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mvs_core::dataio::read_pfm;
use mvs_core::geometry::photometric_loss;
use mvs_core::losses::{
    kl_consistency_loss, overall_loss, style_consistency_loss, supervised_loss,
    symmetric_kl_consistency_loss, LAMBDA1, LAMBDA2,
};
use mvs_core::style::read_fmap;
use mvs_core::View;

use crate::common::{fmap_to_probability_volume, init_out_dir, load_scene, write_csv};

#[derive(Args)]
pub struct LossesArgs {
    /// Predicted depth map (PFM) for the supervised term.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Ground-truth depth map (PFM); scores `--pred` and `--pred-style`.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Scene directory for the photometric term.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Depth map the photometric term is evaluated at; defaults to `--pred`.
    #[arg(long)]
    pub photo_depth: Option<PathBuf>,
    /// Reference view id for the photometric term.
    #[arg(long, default_value_t = 0)]
    pub photo_ref: usize,
    /// Probability volume of the clean sample (`FMAP`, channels = hypotheses).
    #[arg(long)]
    pub pv: Option<PathBuf>,
    /// Probability volume of the augmented sample.
    #[arg(long)]
    pub pv_aug: Option<PathBuf>,
    /// Predicted depth of the style-transferred sample (PFM).
    #[arg(long)]
    pub pred_style: Option<PathBuf>,
    #[arg(long, default_value_t = LAMBDA1)]
    pub lambda1: f64,
    #[arg(long, default_value_t = LAMBDA2)]
    pub lambda2: f64,
    /// Use the symmetrized KL divergence instead of the forward direction.
    #[arg(long)]
    pub symmetric_kl: bool,
    #[arg(long)]
    pub gta: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: LossesArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "losses",
        &[
            ("pred", args.pred.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("gt", args.gt.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("scene", args.scene.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("lambda1", args.lambda1.to_string()),
            ("lambda2", args.lambda2.to_string()),
            ("symmetric_kl", args.symmetric_kl.to_string()),
        ],
    )?;

    let gt = args.gt.as_ref().map(|p| read_pfm(p)).transpose()?;

    let sup = match (&args.pred, &gt) {
        (Some(pred_path), Some(gt_map)) => {
            let pred = read_pfm(pred_path)?;
            supervised_loss(&pred, gt_map)?
        }
        _ => 0.0,
    };

    let photo = match &args.scene {
        Some(scene_dir) => {
            let scene = load_scene(scene_dir, args.gta)?;
            let reference = scene.view_by_id(args.photo_ref)?;
            let depth_path = args
                .photo_depth
                .as_ref()
                .or(args.pred.as_ref())
                .context("photometric term needs --photo-depth or --pred")?;
            let depth = read_pfm(depth_path)?;
            let sources: Vec<View> = scene
                .manifest
                .pairs
                .iter()
                .find(|p| p.reference == args.photo_ref)
                .with_context(|| format!("view {} has no pair entry", args.photo_ref))?
                .sources
                .iter()
                .map(|(id, _)| scene.view_by_id(*id).cloned())
                .collect::<Result<_>>()?;
            photometric_loss(reference, &sources, &depth)?.total
        }
        None => 0.0,
    };

    let consis = match (&args.pv, &args.pv_aug) {
        (Some(pv_path), Some(aug_path)) => {
            let pv = fmap_to_probability_volume(&read_fmap(pv_path)?)?;
            let pv_aug = fmap_to_probability_volume(&read_fmap(aug_path)?)?;
            if args.symmetric_kl {
                symmetric_kl_consistency_loss(&pv, &pv_aug)?
            } else {
                kl_consistency_loss(&pv, &pv_aug)?
            }
        }
        _ => 0.0,
    };

    let style = match (&args.pred_style, &gt) {
        (Some(pred_path), Some(gt_map)) => {
            let pred = read_pfm(pred_path)?;
            style_consistency_loss(&pred, gt_map)?
        }
        _ => 0.0,
    };

    let report = overall_loss(sup, photo, consis, style, args.lambda1, args.lambda2)?;
    write_csv(
        &args.out.join("losses.csv"),
        "sup,photo,consis,style,lambda1,lambda2,overall",
        &[format!(
            "{},{},{},{},{},{},{}",
            report.sup,
            report.photo,
            report.consis,
            report.style,
            report.lambda1,
            report.lambda2,
            report.overall
        )],
    )?;
    let text = format!(
        "sup={}\nphoto={}\nconsis={}\nstyle={}\nlambda1={}\nlambda2={}\noverall={}\n",
        report.sup,
        report.photo,
        report.consis,
        report.style,
        report.lambda1,
        report.lambda2,
        report.overall
    );
    std::fs::write(args.out.join("losses.txt"), &text)?;
    print!("{text}");
    Ok(())
}
