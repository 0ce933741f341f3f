//! `mvs mmd`: distribution-gap confusion matrix between scenes, from
//! externally computed embedding files (`FMAP`, channels = embedding
//! dimension, one position per view) or from image directories via the
//! built-in descriptor.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mvs_core::mmd::{confusion_matrix, embed_view, EmbeddingSet};
use mvs_core::style::read_fmap;

use crate::common::{image_as_view, init_out_dir, write_csv};

#[derive(Args)]
pub struct MmdArgs {
    /// Per-scene embedding files (`FMAP`: d channels x n views).
    #[arg(long = "embeddings", num_args = 1..)]
    pub embeddings: Vec<PathBuf>,
    /// Per-scene image directories; every PNG inside is embedded with the
    /// built-in descriptor.
    #[arg(long = "image-dirs", num_args = 1..)]
    pub image_dirs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn scene_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scene".into())
}

fn set_from_fmap(path: &Path) -> Result<EmbeddingSet> {
    let f = read_fmap(path)?;
    let d = f.channel_count();
    let n = f.position_count();
    let vectors: Vec<Vec<f64>> =
        (0..n).map(|i| (0..d).map(|c| f.data()[(c, i)]).collect()).collect();
    Ok(EmbeddingSet::new(scene_name(path), vectors)?)
}

fn set_from_images(dir: &Path) -> Result<EmbeddingSet> {
    // Accept either a bare directory of images or a scene layout with an
    // images/ subdirectory.
    let image_dir = if dir.join("images").is_dir() { dir.join("images") } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&image_dir)
        .with_context(|| format!("reading {}", image_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|ext| matches!(ext.to_string_lossy().as_ref(), "png" | "ppm" | "pnm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.len() < 2 {
        bail!("{} holds {} images; need at least 2", image_dir.display(), paths.len());
    }
    let vectors: Vec<Vec<f64>> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| Ok(embed_view(&image_as_view(p, i)?)))
        .collect::<Result<_>>()?;
    Ok(EmbeddingSet::new(scene_name(dir), vectors)?)
}

pub fn execute(args: MmdArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "mmd",
        &[
            (
                "embeddings",
                args.embeddings.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(";"),
            ),
            (
                "image_dirs",
                args.image_dirs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(";"),
            ),
        ],
    )?;
    let mut sets: Vec<EmbeddingSet> = Vec::new();
    for path in &args.embeddings {
        sets.push(set_from_fmap(path)?);
    }
    for dir in &args.image_dirs {
        sets.push(set_from_images(dir)?);
    }
    if sets.len() < 2 {
        bail!("need at least 2 scenes (got {})", sets.len());
    }

    let matrix = confusion_matrix(&sets)?;
    let names: Vec<&str> = sets.iter().map(|s| s.scene_id.as_str()).collect();

    let header = format!("scene,{}", names.join(","));
    let rows: Vec<String> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            format!("{},{}", names[i], values.join(","))
        })
        .collect();
    write_csv(&args.out.join("mmd_matrix.csv"), &header, &rows)?;

    let mut pair_rows = Vec::new();
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            pair_rows.push(format!("{},{},{}", names[i], names[j], matrix[i][j]));
        }
    }
    write_csv(&args.out.join("mmd_pairs.csv"), "scene_a,scene_b,mmd_squared", &pair_rows)?;
    println!("mmd: {} scenes -> {}", sets.len(), args.out.display());
    Ok(())
}
