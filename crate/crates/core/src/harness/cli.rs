//! Command-line front end. Exit codes: 0 success, 1 configuration or
//! dimension error (including bad flags), 2 data error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use super::config::ExperimentConfig;
use super::ingest::load_image;
use super::output::{json_f64, write_json, write_png};
use super::sweep::{run_sweep, solve_one, CellChoice};
use crate::error::{Error, Result};
use crate::generator::{load_generator, manifest, save_generator, digits_generator, Shape, SyntheticArch, SyntheticSpec};
use crate::measure::tm::TmDataset;
use crate::solver::{project_to_range, SolverConfig};

#[derive(Parser, Debug)]
#[command(name = "prgen", version, about = "Phase retrieval under a generative prior")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, or output file for the make-* commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recover one image and write a report bundle.
    Solve(SolveArgs),
    /// Run every (image, m, noise, trial) cell of the config.
    Sweep,
    /// Project an image onto the generator range.
    ProjectRange(ProjectArgs),
    /// Print the layer manifest of a PRGW file.
    GenInfo(GenInfoArgs),
    /// Write a PRTM transmission-matrix file.
    MakeTm(MakeTmArgs),
    /// Write a PRGW file with seeded random weights.
    MakeSyntheticGen(MakeGenArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Index of the target image.
    #[arg(long, default_value_t = 0)]
    item: usize,
    /// Measurement count; defaults to the first of m_values.
    #[arg(long)]
    m: Option<usize>,
    /// Noise percent; defaults to the first of noise_percent.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// PRGW generator; defaults to the config's generator.
    #[arg(long)]
    generator: Option<PathBuf>,
    /// Image to project.
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    zero_pad: bool,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
}

#[derive(Args, Debug)]
struct GenInfoArgs {
    /// PRGW generator; defaults to the config's generator.
    generator: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MakeTmArgs {
    /// Complex matrix CSV (re,im pairs per entry).
    #[arg(long, requires = "residual_csv")]
    matrix_csv: Option<PathBuf>,
    /// One residual per row.
    #[arg(long)]
    residual_csv: Option<PathBuf>,
    /// Rows of a synthetic matrix.
    #[arg(long, default_value_t = 1500)]
    rows: usize,
    /// Columns of a synthetic matrix.
    #[arg(long, default_value_t = 1600)]
    cols: usize,
    /// Per-component standard deviation of synthetic entries.
    #[arg(long, default_value_t = 0.025)]
    entry_sd: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArchArg {
    Mlp,
    Conv,
    Dcgan,
    /// The fixed 40 → 28×28×1 digit architecture.
    Digits,
}

#[derive(Args, Debug)]
struct MakeGenArgs {
    #[arg(long, value_enum, default_value = "conv")]
    arch: ArchArg,
    #[arg(long, default_value_t = 20)]
    latent_dim: usize,
    #[arg(long, default_value_t = 28)]
    height: usize,
    #[arg(long, default_value_t = 28)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Hidden width or feature channels.
    #[arg(long)]
    hidden: Option<usize>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn experiment(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn out_file(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn generator_path(cli: &Cli, explicit: &Option<PathBuf>) -> Result<PathBuf> {
    match explicit {
        Some(p) => Ok(p.clone()),
        None => Ok(experiment(cli)?.generator),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => {
            let cfg = experiment(&cli)?;
            let choice = CellChoice {
                item: a.item,
                m: a.m,
                noise_percent: a.noise,
            };
            let out = solve_one(&cfg, choice)?;
            println!("{}", out.display());
        }
        Command::Sweep => {
            let cfg = experiment(&cli)?;
            let report = run_sweep(&cfg)?;
            println!(
                "{} cells, {} failed, bundle {}",
                report.records.len() + report.failures.len(),
                report.failures.len(),
                report.bundle.display()
            );
        }
        Command::ProjectRange(a) => project(&cli, a)?,
        Command::GenInfo(a) => {
            let model = load_generator(generator_path(&cli, &a.generator)?)?;
            print!("{}", manifest(&model));
        }
        Command::MakeTm(a) => {
            let ds = match (&a.matrix_csv, &a.residual_csv) {
                (Some(m), Some(r)) => TmDataset::from_csv(m, r)?,
                (None, None) => TmDataset::synthetic(a.rows, a.cols, a.entry_sd, cli.seed.unwrap_or(0))?,
                _ => return Err(Error::Config("--matrix-csv and --residual-csv go together".into())),
            };
            let out = out_file(&cli, "tm.prtm");
            ds.save(&out)?;
            println!("{} ({} x {})", out.display(), ds.rows, ds.cols);
        }
        Command::MakeSyntheticGen(a) => {
            let seed = cli.seed.unwrap_or(0);
            let model = match a.arch {
                ArchArg::Digits => digits_generator(seed)?,
                arch => {
                    let arch = match arch {
                        ArchArg::Mlp => SyntheticArch::Mlp,
                        ArchArg::Conv => SyntheticArch::Conv,
                        _ => SyntheticArch::Dcgan,
                    };
                    let mut spec = SyntheticSpec::new(a.latent_dim, Shape::new(a.height, a.width, a.channels), arch);
                    if let Some(h) = a.hidden {
                        spec.hidden = h;
                    }
                    spec.build(seed)?
                }
            };
            let out = out_file(&cli, "generator.prgw");
            save_generator(&model, &out)?;
            println!("{} (k = {}, output {})", out.display(), model.input_dim(), model.output_shape());
        }
    }
    Ok(())
}

fn project(cli: &Cli, a: &ProjectArgs) -> Result<()> {
    let base = match &cli.config {
        Some(_) => experiment(cli)?.range_solver(),
        None => SolverConfig::default(),
    };
    let solver = SolverConfig {
        restarts: a.restarts.unwrap_or(base.restarts),
        iterations: a.iterations.unwrap_or(base.iterations),
        step_size: a.step_size.unwrap_or(base.step_size),
        seed: cli.seed.unwrap_or(base.seed),
        ..base
    };
    let model = load_generator(generator_path(cli, &a.generator)?)?.cast::<f64>();
    let target = load_image(&a.image, model.output_shape(), a.zero_pad)?;
    let best = project_to_range(&model, &target, &solver)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_png(&target, &out.join("original.png"))?;
    write_png(&best.x_hat, &out.join("range.png"))?;
    write_json(
        &json!({
            "image": a.image.display().to_string(),
            "residual": json_f64(best.residual),
            "restart": best.restart,
            "z": best.z_final.as_slice(),
        }),
        &out.join("projection.json"),
    )?;
    println!("residual {:.6e}, {}", best.residual, Path::new(&out).display());
    Ok(())
}
