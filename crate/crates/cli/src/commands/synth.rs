//! `mvs synth`: generate a synthetic scene and write it out in the standard
//! dataset layout (images, camera files, PFM depths, pair file, ground-truth
//! cloud, sparse correspondences).

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use mvs_core::dataio::{write_camera, write_image, write_pair, CameraFile, PairEntry};
use mvs_core::dataio::write_pfm;
use mvs_core::fusion::write_ply;
use mvs_core::spn::write_sparse;
use mvs_core::synth::{generate, ArcSpec, SceneSpec, SurfaceSpec, TextureSpec};

use crate::common::init_out_dir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurfaceKind {
    Plane,
    Sphere,
    TwoBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextureKind {
    Checker,
    Noise,
    Gradient,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "plane")]
    pub surface: SurfaceKind,
    #[arg(long, default_value_t = 5)]
    pub views: usize,
    #[arg(long, value_enum, default_value = "noise")]
    pub texture: TextureKind,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Number of sparse correspondence points.
    #[arg(long, default_value_t = 64)]
    pub sparse: usize,
    #[arg(long, default_value_t = 2.5)]
    pub arc_radius: f64,
    /// Angular span of the camera arc, degrees.
    #[arg(long, default_value_t = 26.0)]
    pub arc_span: f64,
    /// Checker period in world units.
    #[arg(long, default_value_t = 0.35)]
    pub checker_period: f64,
    /// Value-noise lattice scale in world units.
    #[arg(long, default_value_t = 0.3)]
    pub noise_scale: f64,
    /// Minimum number of views that must see a surface point for it to enter
    /// the ground-truth cloud.
    #[arg(long, default_value_t = 2)]
    pub gt_min_vis: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(args: SynthArgs) -> Result<()> {
    let surface = match args.surface {
        SurfaceKind::Plane => SurfaceSpec::default_plane(),
        SurfaceKind::Sphere => SurfaceSpec::default_sphere(),
        SurfaceKind::TwoBox => SurfaceSpec::default_two_box(),
    };
    let texture = match args.texture {
        TextureKind::Checker => TextureSpec::Checker { period: args.checker_period },
        TextureKind::Noise => TextureSpec::Noise { seed: args.seed, scale: args.noise_scale },
        TextureKind::Gradient => TextureSpec::Gradient,
    };
    let spec = SceneSpec {
        surface,
        texture,
        n_views: args.views,
        width: args.width,
        height: args.height,
        channels: 3,
        arc: ArcSpec { radius: args.arc_radius, span_deg: args.arc_span, ..ArcSpec::default() },
        sparse_points: args.sparse,
        gt_min_visibility: args.gt_min_vis,
        seed: args.seed,
    };

    init_out_dir(
        &args.out,
        "synth",
        &[
            ("surface", format!("{:?}", args.surface)),
            ("texture", format!("{:?}", args.texture)),
            ("views", args.views.to_string()),
            ("seed", args.seed.to_string()),
            ("width", args.width.to_string()),
            ("height", args.height.to_string()),
            ("sparse", args.sparse.to_string()),
            ("arc_radius", args.arc_radius.to_string()),
            ("arc_span", args.arc_span.to_string()),
            ("gt_min_vis", args.gt_min_vis.to_string()),
        ],
    )?;

    let scene = generate(&spec).context("scene generation")?;
    for sub in ["images", "cams", "depths"] {
        fs::create_dir_all(args.out.join(sub))?;
    }

    // Depth sampling range for downstream sweeps, padded a little.
    let (lo, hi) = scene.depth_range();
    let depth_min = lo * 0.85;
    let depth_max = hi * 1.15;
    let depth_num = 64.0;
    let depth_interval = (depth_max - depth_min) / (depth_num - 1.0);

    for (view, depth) in scene.views.iter().zip(&scene.gt_depths) {
        let id = view.id;
        write_image(&args.out.join("images").join(format!("{id:08}.png")), &view.image)?;
        write_pfm(&args.out.join("depths").join(format!("{id:08}.pfm")), depth)?;
        let camera = CameraFile {
            extrinsics: view.extrinsics.clone(),
            intrinsics: view.intrinsics,
            depth_min,
            depth_interval,
            depth_num: Some(depth_num),
            depth_max: Some(depth_max),
        };
        write_camera(&args.out.join("cams").join(format!("{id:08}_cam.txt")), &camera)?;
    }

    // Source ranking by angular proximity of the viewing directions.
    let mut entries = Vec::new();
    for reference in &scene.views {
        let fwd = |v: &mvs_core::View| v.extrinsics.rotation.row(2).transpose();
        let rf = fwd(reference);
        let mut sources: Vec<(usize, f64)> = scene
            .views
            .iter()
            .filter(|v| v.id != reference.id)
            .map(|v| {
                let cosine = rf.dot(&fwd(v)).clamp(-1.0, 1.0);
                (v.id, 100.0 * cosine.acos().to_degrees().mul_add(-1.0, 90.0) / 90.0)
            })
            .collect();
        sources.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        entries.push(PairEntry { reference: reference.id, sources });
    }
    write_pair(&args.out.join("pair.txt"), &entries)?;

    write_ply(&args.out.join("gt_cloud.ply"), &scene.gt_cloud)?;
    write_sparse(&args.out.join("sparse.txt"), &scene.sparse)?;

    println!(
        "synth: {} views at {}x{}, {} cloud points, {} sparse points -> {}",
        scene.views.len(),
        args.width,
        args.height,
        scene.gt_cloud.len(),
        scene.sparse.len(),
        args.out.display()
    );
    Ok(())
}
