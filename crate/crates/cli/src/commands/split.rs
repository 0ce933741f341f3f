//! `mvs split`: deterministic semi-supervised split generation. Emits two
//! text files listing labeled and unlabeled multi-view pairs, one
//! `scene pair_index` per line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use mvs_core::dataio::{make_split, read_pair, SplitItem, SplitMode, SplitSpec};

use crate::common::{init_out_dir, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    ByScenes,
    ByViews,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Root directory whose subdirectories are scenes with pair.txt files.
    #[arg(long)]
    pub scenes_root: Option<PathBuf>,
    /// Alternative input: text file with `scene pair_count` lines.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "by-views")]
    pub mode: ModeArg,
    /// Labeled fraction in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw the by-views split per scene instead of globally.
    #[arg(long)]
    pub stratified: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn scan_scenes_root(root: &Path) -> Result<Vec<(String, usize)>> {
    let mut scenes = Vec::new();
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("pair.txt").exists())
        .collect();
    dirs.sort();
    for dir in dirs {
        let pairs = read_pair(&dir.join("pair.txt"))?;
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        scenes.push((name, pairs.len()));
    }
    Ok(scenes)
}

fn parse_counts(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = std::fs::read_to_string(path)?;
    let mut scenes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(name), Some(count)) = (tokens.next(), tokens.next()) else {
            bail!("{}:{}: expected `scene pair_count`", path.display(), i + 1);
        };
        let count: usize = count
            .parse()
            .with_context(|| format!("{}:{}: invalid count {count:?}", path.display(), i + 1))?;
        scenes.push((name.to_string(), count));
    }
    Ok(scenes)
}

fn write_items(path: &Path, items: &[SplitItem]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&format!("{} {}\n", item.scene, item.pair_index));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn execute(args: SplitArgs) -> Result<()> {
    init_out_dir(
        &args.out,
        "split",
        &[
            (
                "scenes_root",
                args.scenes_root.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("counts", args.counts.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("mode", format!("{:?}", args.mode)),
            ("ratio", args.ratio.to_string()),
            ("seed", args.seed.to_string()),
            ("stratified", args.stratified.to_string()),
        ],
    )?;
    let scenes = match (&args.scenes_root, &args.counts) {
        (Some(root), None) => scan_scenes_root(root)?,
        (None, Some(path)) => parse_counts(path)?,
        _ => bail!("pass exactly one of --scenes-root or --counts"),
    };
    let spec = SplitSpec {
        mode: match args.mode {
            ModeArg::ByScenes => SplitMode::ByScenes,
            ModeArg::ByViews => SplitMode::ByViews,
        },
        ratio: args.ratio,
        seed: args.seed,
        stratified: args.stratified,
    };
    let (labeled, unlabeled) = make_split(&scenes, &spec)?;
    write_items(&args.out.join("labeled.txt"), &labeled)?;
    write_items(&args.out.join("unlabeled.txt"), &unlabeled)?;
    write_csv(
        &args.out.join("split.csv"),
        "set,count",
        &[format!("labeled,{}", labeled.len()), format!("unlabeled,{}", unlabeled.len())],
    )?;
    println!("split: {} labeled / {} unlabeled", labeled.len(), unlabeled.len());
    Ok(())
}
