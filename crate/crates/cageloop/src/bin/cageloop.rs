//! Command-line front end.
//!
//! `synthesize` runs the full pipeline on a shape file, `gen-shape` produces
//! analytic test clouds, `validate` re-checks the invariants of a result
//! directory. Exit codes: 0 = at least one valid pose (or a clean validate),
//! 2 = pipeline ran but nothing survived, 1 = any other error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cageloop::config::PipelineConfig;
use cageloop::error::{Error, Result};
use cageloop::grid::{build_grid, Label};
use cageloop::pipeline::{run, validate_outputs, write_outputs};
use cageloop::rbf::fit_rbf;
use cageloop::shape::{
    add_noise, generate_shape, load_shape, save_points, ShapeFormat, ShapeKind,
};

#[derive(Parser)]
#[command(name = "cageloop", version, about = "Caging-loop and grasp-pose synthesis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline on a shape file and write loops, poses and a report
    Synthesize {
        /// input shape: .off mesh, or `x y z [nx ny nz]` lines
        #[arg(long)]
        input: PathBuf,
        /// pipeline config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// override the config's RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// also dump the voxel label grid
        #[arg(long)]
        debug: bool,
    },
    /// Generate an analytic test shape as an oriented point cloud
    #[command(subcommand_value_name = "KIND")]
    GenShape {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Re-run the invariant suite on a result directory
    Validate {
        /// directory holding loops.txt and poses.txt
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct GenCommon {
    /// number of surface samples
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian displacement σ, relative to the bbox diagonal
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// output file (`x y z nx ny nz` lines)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GenKind {
    Sphere {
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    Cylinder {
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        #[arg(long, default_value_t = 0.2)]
        height: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    Torus {
        #[arg(long, default_value_t = 0.08)]
        major: f64,
        #[arg(long, default_value_t = 0.025)]
        minor: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    /// two welded tori, ring centers at x = ±separation/2
    Genus2 {
        #[arg(long, default_value_t = 0.08)]
        major: f64,
        #[arg(long, default_value_t = 0.025)]
        minor: f64,
        #[arg(long, default_value_t = 0.18)]
        separation: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    /// square slab with one quadrant removed
    BlockyL {
        #[arg(long, default_value_t = 0.2)]
        size: f64,
        #[command(flatten)]
        common: GenCommon,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Synthesize {
            input,
            config,
            seed,
            out,
            debug,
        } => synthesize(&input, &config, seed, &out, debug),
        Cmd::GenShape { kind } => gen_shape(kind),
        Cmd::Validate { input } => validate(&input),
    }
}

fn synthesize(
    input: &Path,
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    debug: bool,
) -> Result<ExitCode> {
    let (mut cfg, raw) = PipelineConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let cloud = load_shape(input, ShapeFormat::from_path(input))?;
    let report = run(&cloud, &cfg, &raw)?;
    write_outputs(out, &report)?;
    if debug {
        dump_labels(&cloud, &cfg, out)?;
    }
    println!(
        "{} points → {} loops retained, {} of {} poses valid (seed {}) → {}",
        report.counts.cloud_points,
        report.counts.retained,
        report.counts.poses_valid,
        report.counts.poses_total,
        cfg.seed,
        out.display()
    );
    if !report.has_valid_pose() {
        return Err(Error::EmptyResult {
            stage: report.empty_stage.unwrap_or("interference").to_string(),
        });
    }
    Ok(ExitCode::SUCCESS)
}

fn gen_shape(kind: GenKind) -> Result<ExitCode> {
    let (shape, common) = match kind {
        GenKind::Sphere { radius, common } => (ShapeKind::Sphere { radius }, common),
        GenKind::Cylinder {
            radius,
            height,
            common,
        } => (ShapeKind::Cylinder { radius, height }, common),
        GenKind::Torus {
            major,
            minor,
            common,
        } => (ShapeKind::Torus { major, minor }, common),
        GenKind::Genus2 {
            major,
            minor,
            separation,
            common,
        } => (
            ShapeKind::Genus2 {
                major,
                minor,
                separation,
            },
            common,
        ),
        GenKind::BlockyL { size, common } => (ShapeKind::BlockyL { size }, common),
    };
    let mut cloud = generate_shape(shape, common.n, common.seed)?;
    if common.noise > 0.0 {
        cloud = add_noise(&cloud, common.noise, common.seed)?;
    }
    save_points(&cloud, &common.out)?;
    println!("{} points → {}", cloud.len(), common.out.display());
    Ok(ExitCode::SUCCESS)
}

fn validate(dir: &Path) -> Result<ExitCode> {
    let problems = validate_outputs(dir)?;
    if problems.is_empty() {
        println!("{}: ok", dir.display());
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &problems {
            eprintln!("{}: {p}", dir.display());
        }
        Ok(ExitCode::FAILURE)
    }
}

/// One char per voxel (`O`bject, `B`and, `G`rasping, `.` outside hull),
/// x-fastest rows, one blank-separated block per z slice.
fn dump_labels(cloud: &cageloop::shape::PointCloud, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let surface = fit_rbf(cloud, cfg.offset)?;
    let grid = build_grid(&surface, cloud, cfg.resolution, cfg.margin)?;
    let [nx, ny, nz] = grid.dims;
    let mut text = format!(
        "# dims {nx} {ny} {nz} spacing {} origin {} {} {}\n",
        grid.spacing, grid.origin.x, grid.origin.y, grid.origin.z
    );
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                text.push(match grid.label(grid.index(x, y, z)) {
                    Label::Object => 'O',
                    Label::Band => 'B',
                    Label::Grasping => 'G',
                    Label::OutsideHull => '.',
                });
            }
            text.push('\n');
        }
        let _ = writeln!(text);
    }
    std::fs::write(out.join("labels.txt"), text)?;
    Ok(())
}
