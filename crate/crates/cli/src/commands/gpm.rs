//! `mvs gpm`: edge-guided spatial propagation filtering of a distorted image
//! against its clean content counterpart.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mvs_core::dataio::write_image;
use mvs_core::spn::guided_filter;

use crate::common::{image_as_view, init_out_dir, write_csv};

#[derive(Args)]
pub struct GpmArgs {
    /// Distorted image to filter.
    #[arg(long)]
    pub input: PathBuf,
    /// Clean guide image defining the affinities.
    #[arg(long)]
    pub guide: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub strength: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: GpmArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "gpm",
        &[
            ("input", args.input.display().to_string()),
            ("guide", args.guide.display().to_string()),
            ("strength", args.strength.to_string()),
        ],
    )?;
    let input_view = image_as_view(&args.input, 0)?;
    let guide = image_as_view(&args.guide, 1)?;
    let filtered = guided_filter(&input_view.image, &guide, args.strength)?;
    write_image(&args.out.join("filtered.png"), &filtered)?;

    let n = filtered.data().len() as f64;
    let mean_change: f64 = filtered
        .data()
        .iter()
        .zip(input_view.image.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    let residual_to_guide: f64 = filtered
        .data()
        .iter()
        .zip(guide.image.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    write_csv(
        &args.out.join("gpm.csv"),
        "metric,value",
        &[
            format!("mean_abs_change,{mean_change}"),
            format!("mse_to_guide,{residual_to_guide}"),
        ],
    )?;
    println!("gpm: mean change {mean_change}");
    Ok(())
}
