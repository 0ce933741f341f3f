//! `mvs wct`: whitening-coloring style transfer between two images, with
//! optional raw feature-map input/output in the `FMAP` binary format.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use mvs_core::dataio::write_image;
use mvs_core::style::{
    content_loss, extract_features, read_fmap, style_loss, wct, write_fmap,
};

use crate::common::{image_as_view, init_out_dir, write_csv};

#[derive(Args)]
pub struct WctArgs {
    /// Content image (PNG/PPM); mutually exclusive with --content-fmap.
    #[arg(long)]
    pub content: Option<PathBuf>,
    /// Style image.
    #[arg(long)]
    pub style: Option<PathBuf>,
    /// Raw content features (`FMAP`) instead of an image.
    #[arg(long)]
    pub content_fmap: Option<PathBuf>,
    /// Raw style features (`FMAP`).
    #[arg(long)]
    pub style_fmap: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub blend: f64,
    /// Feature-extractor levels (1 = raw pixels).
    #[arg(long, default_value_t = 1)]
    pub levels: usize,
    /// Also write the transferred features as out/transferred.fmap.
    #[arg(long)]
    pub save_fmap: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: WctArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "wct",
        &[
            ("content", args.content.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("style", args.style.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("blend", args.blend.to_string()),
            ("levels", args.levels.to_string()),
        ],
    )?;

    let (content_features, pixel_channels) = match (&args.content, &args.content_fmap) {
        (Some(path), None) => {
            let view = image_as_view(path, 0)?;
            let c = view.image.channels();
            (extract_features(&view, args.levels)?, Some(c))
        }
        (None, Some(path)) => (read_fmap(path)?, None),
        _ => bail!("pass exactly one of --content or --content-fmap"),
    };
    let style_features = match (&args.style, &args.style_fmap) {
        (Some(path), None) => extract_features(&image_as_view(path, 1)?, args.levels)?,
        (None, Some(path)) => read_fmap(path)?,
        _ => bail!("pass exactly one of --style or --style-fmap"),
    };

    let before_style = style_loss(&content_features, &style_features)?;
    let transferred = wct(&content_features, &style_features, args.blend)?;
    let after_style = style_loss(&transferred, &style_features)?;
    let after_content = content_loss(&transferred, &content_features)?;

    if let Some(channels) = pixel_channels {
        let img = transferred.to_image(channels)?;
        write_image(&args.out.join("transferred.png"), &img)?;
    }
    if args.save_fmap || pixel_channels.is_none() {
        write_fmap(&args.out.join("transferred.fmap"), &transferred)?;
    }
    write_csv(
        &args.out.join("wct.csv"),
        "metric,value",
        &[
            format!("style_loss_before,{before_style}"),
            format!("style_loss_after,{after_style}"),
            format!("content_loss_after,{after_content}"),
        ],
    )?;
    println!("wct: style loss {before_style} -> {after_style}");
    Ok(())
}
