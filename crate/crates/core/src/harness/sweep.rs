//! Experiment sweeps over (target, m, noise level, trial) cells.
//!
//! Each cell gets its own seed,
//! `cell = seed::derive(master, [item, m, noise_percent.to_bits(), trial])`,
//! from which the operator (`derive(cell, [1])`), noise (`derive(cell, [2])`)
//! and solver (`derive(cell, [3])`) streams are derived. Cells therefore do
//! not depend on each other or on scheduling, and the CSV is sorted by cell
//! key before it is written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{DatasetSource, ExperimentConfig, MeasureTarget, OperatorFamily};
use super::ingest::{ingest_images, DatasetSpec};
use super::output::{csv_f64, json_f64, outcome_json, write_grid, write_json, write_png, write_raw_planar};
use crate::error::{Error, Result};
use crate::generator::{load_generator, GeneratorModel, ImageTensor};
use crate::measure::{self, make_cdp_grid, make_gaussian, measure_magnitude, MeasurementOperator};
use crate::metrics::{per_pixel_error, score, ScoreOptions};
use crate::scalar::Real;
use crate::seed;
use crate::solver::{project_to_range, sample_latent, solve, Precision, SolveOutcome};

pub const CSV_HEADER: [&str; 11] = [
    "item",
    "m",
    "noise_pct",
    "trial",
    "psnr_orig",
    "psnr_range",
    "ssim_orig",
    "ssim_range",
    "ppe",
    "residual",
    "wall_ms",
];

const TARGET_TAG: u64 = 0x7A26_E700;
const RANGE_TAG: u64 = 0x2A26_E000;

/// Seed of one sweep cell.
pub fn cell_seed(master: u64, item: usize, m: usize, noise_percent: f64, trial: usize) -> u64 {
    seed::derive(master, &[item as u64, m as u64, noise_percent.to_bits(), trial as u64])
}

/// One row of `records.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub item: String,
    pub item_index: usize,
    pub m: usize,
    pub noise_pct: f64,
    pub trial: usize,
    /// Cell seed; not written to the CSV.
    pub seed: u64,
    pub psnr_orig: f64,
    pub psnr_range: f64,
    pub ssim_orig: f64,
    pub ssim_range: f64,
    /// Mean squared error per pixel against the measured target.
    pub ppe: f64,
    pub residual: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub item: String,
    pub m: usize,
    pub noise_pct: f64,
    pub trial: usize,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub bundle: PathBuf,
    pub records: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

struct Target<T> {
    id: String,
    original: ImageTensor<T>,
    range: std::result::Result<ImageTensor<T>, String>,
}

struct Experiment<T: Real> {
    config: ExperimentConfig,
    model: GeneratorModel<T>,
    targets: Vec<Target<T>>,
    skipped: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    item: usize,
    m_index: usize,
    noise_index: usize,
    trial: usize,
}

struct CellOutput<T> {
    record: RunRecord,
    outcome: SolveOutcome<T>,
    measured: Vec<T>,
}

impl<T: Real> Experiment<T> {
    fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = load_generator(&config.generator)?.cast::<T>();
        let shape = model.output_shape();
        let (originals, skipped): (Vec<(String, ImageTensor<T>)>, _) = match config.dataset {
            DatasetSource::Synthetic => {
                let imgs = (0..config.dataset_count)
                    .map(|i| {
                        let mut rng = seed::rng(config.seed, &[TARGET_TAG, i as u64]);
                        let z: Vec<T> = sample_latent(config.latent_prior, model.input_dim(), &mut rng);
                        Ok((format!("synthetic_{i:03}"), model.forward(&z)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (imgs, Vec::new())
            }
            DatasetSource::Directory => {
                let spec = DatasetSpec {
                    dir: config.dataset_dir.clone().expect("validated"),
                    files: config.dataset_files.clone(),
                    count: Some(config.dataset_count),
                    sample_seed: config.dataset_sample_seed,
                    zero_pad: config.zero_pad,
                };
                let ing = ingest_images(&spec, shape)?;
                (
                    ing.images.into_iter().map(|(n, img)| (n, img.cast::<T>())).collect(),
                    ing.skipped,
                )
            }
        };
        let range_cfg = config.range_solver();
        let targets = originals
            .into_par_iter()
            .enumerate()
            .map(|(i, (id, original))| {
                let cfg = crate::solver::SolverConfig {
                    seed: seed::derive(config.seed, &[RANGE_TAG, i as u64]),
                    ..range_cfg.clone()
                };
                let range = project_to_range(&model, &original, &cfg)
                    .map(|r| r.x_hat)
                    .map_err(|e| e.to_string());
                Target { id, original, range }
            })
            .collect();
        Ok(Experiment {
            config: config.clone(),
            model,
            targets,
            skipped,
        })
    }

    fn operator(&self, m: usize, seed: u64) -> Result<MeasurementOperator<T>> {
        let shape = self.model.output_shape();
        let n = shape.len();
        let c = &self.config;
        match c.operator {
            OperatorFamily::Gaussian => make_gaussian(m, n, seed),
            OperatorFamily::Cdp => make_cdp_grid(shape, c.cdp_masks, m / c.cdp_masks, seed),
            OperatorFamily::Tm => {
                let tm = measure::load_tm::<T>(c.tm_path.as_ref().expect("validated"), c.tm_residual_threshold, m, seed)?;
                if tm.dense().cols() != n {
                    return Err(Error::Dimension(format!(
                        "transmission matrix acts on {} pixels, generator output {shape} has {n}",
                        tm.dense().cols()
                    )));
                }
                Ok(MeasurementOperator::TransmissionMatrix(tm))
            }
        }
    }

    fn run_cell(&self, key: CellKey) -> Result<CellOutput<T>> {
        let start = Instant::now();
        let c = &self.config;
        let target = &self.targets[key.item];
        let (m, noise) = (c.m_values[key.m_index], c.noise_percent[key.noise_index]);
        let cell = cell_seed(c.seed, key.item, m, noise, key.trial);
        let range = target.range.as_ref().ok();
        let measured = match c.measure_target {
            MeasureTarget::Original => &target.original,
            MeasureTarget::Range => range.ok_or_else(|| {
                Error::Data(format!("range projection of {} failed", target.id))
            })?,
        };
        let op = self.operator(m, seed::derive(cell, &[1]))?;
        let y = measure_magnitude(&op, measured, noise, c.noise_mode, seed::derive(cell, &[2]))?;
        let solver = crate::solver::SolverConfig {
            seed: seed::derive(cell, &[3]),
            ..c.solver()
        };
        let outcome = solve(&self.model, &op, &y.y, &solver)?;
        let best = outcome.best();
        let opts = ScoreOptions {
            peak: c.psnr_peak,
            resolve_sign: c.resolve_sign,
        };
        let orig = score(&target.original, &best.x_hat, opts)?;
        let (psnr_range, ssim_range) = match range {
            Some(r) => {
                let s = score(r, &best.x_hat, opts)?;
                (s.psnr_db, s.ssim)
            }
            None => (f64::NAN, f64::NAN),
        };
        let record = RunRecord {
            item: target.id.clone(),
            item_index: key.item,
            m,
            noise_pct: noise,
            trial: key.trial,
            seed: cell,
            psnr_orig: orig.psnr_db,
            psnr_range,
            ssim_orig: orig.ssim,
            ssim_range,
            ppe: per_pixel_error(measured, &best.x_hat)?,
            residual: best.residual,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        Ok(CellOutput {
            record,
            outcome,
            measured: y.y,
        })
    }

    fn keys(&self) -> Vec<CellKey> {
        let c = &self.config;
        let mut keys = Vec::new();
        for item in 0..self.targets.len() {
            for m_index in 0..c.m_values.len() {
                for noise_index in 0..c.noise_percent.len() {
                    for trial in 0..c.trials {
                        keys.push(CellKey {
                            item,
                            m_index,
                            noise_index,
                            trial,
                        });
                    }
                }
            }
        }
        keys
    }

    fn sweep(&self) -> Result<SweepReport> {
        let c = &self.config;
        let out = &c.out_dir;
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        std::fs::write(out.join("effective_config.toml"), c.to_toml())
            .map_err(|e| Error::io(out.join("effective_config.toml"), e))?;

        let mut results: Vec<(CellKey, Result<CellOutput<T>>)> =
            self.keys().into_par_iter().map(|k| (k, self.run_cell(k))).collect();
        results.sort_by_key(|(k, _)| *k);

        let mut records = Vec::new();
        let mut failures = Vec::new();
        let mut recon: std::collections::HashMap<(usize, usize, usize), ImageTensor<T>> = Default::default();
        for (key, res) in results {
            match res {
                Ok(cell) => {
                    if key.trial == 0 {
                        recon.insert((key.item, key.m_index, key.noise_index), cell.outcome.best().x_hat.clone());
                    }
                    records.push(cell.record);
                }
                Err(e) => failures.push(CellFailure {
                    item: self.targets[key.item].id.clone(),
                    m: c.m_values[key.m_index],
                    noise_pct: c.noise_percent[key.noise_index],
                    trial: key.trial,
                    error: e.to_string(),
                }),
            }
        }

        write_csv(&records, &out.join("records.csv"))?;
        write_json(&self.summary(&records, &failures), &out.join("summary.json"))?;
        let failure_json: Vec<Value> = failures
            .iter()
            .map(|f| json!({"item": f.item, "m": f.m, "noise_pct": json_f64(f.noise_pct), "trial": f.trial, "error": f.error}))
            .collect();
        let skipped: Vec<Value> = self.skipped.iter().map(|(n, e)| json!({"file": n, "error": e})).collect();
        write_json(
            &json!({"failures": failure_json, "skipped_inputs": skipped}),
            &out.join("failures.json"),
        )?;

        for (mi, &m) in c.m_values.iter().enumerate() {
            for (ni, &noise) in c.noise_percent.iter().enumerate() {
                let originals = self.targets.iter().map(|t| Some(&t.original)).collect();
                let ranges = self.targets.iter().map(|t| t.range.as_ref().ok()).collect();
                let recons = (0..self.targets.len()).map(|i| recon.get(&(i, mi, ni))).collect();
                let name = format!("grid_m{m}_noise{}.png", csv_f64(noise));
                write_grid(&[originals, ranges, recons], &out.join(name))?;
            }
        }
        Ok(SweepReport {
            bundle: out.clone(),
            records,
            failures,
        })
    }

    fn summary(&self, records: &[RunRecord], failures: &[CellFailure]) -> Value {
        let c = &self.config;
        let mut cells = Vec::new();
        for &m in &c.m_values {
            for &noise in &c.noise_percent {
                let rows: Vec<&RunRecord> = records.iter().filter(|r| r.m == m && r.noise_pct == noise).collect();
                let stat = |f: fn(&RunRecord) -> f64| {
                    let (mean, sd) = mean_sd(rows.iter().map(|r| f(r)));
                    json!({"mean": json_f64(mean), "sd": json_f64(sd)})
                };
                cells.push(json!({
                    "m": m,
                    "noise_pct": json_f64(noise),
                    "count": rows.len(),
                    "psnr_orig": stat(|r| r.psnr_orig),
                    "psnr_range": stat(|r| r.psnr_range),
                    "ssim_orig": stat(|r| r.ssim_orig),
                    "ssim_range": stat(|r| r.ssim_range),
                    "ppe": stat(|r| r.ppe),
                    "residual": stat(|r| r.residual),
                }));
            }
        }
        let config_json = serde_json::to_value(c).expect("config serializes");
        json!({
            "effective_config": config_json,
            "generator": {
                "latent_dim": self.model.input_dim(),
                "output_shape": [self.model.output_shape().height, self.model.output_shape().width, self.model.output_shape().channels],
            },
            "items": self.targets.iter().map(|t| t.id.clone()).collect::<Vec<_>>(),
            "dataset_sample_seed": c.dataset_sample_seed,
            "ppe": "mean squared error per pixel against the measured target",
            "psnr_peak": c.psnr_peak,
            "cells": cells,
            "failed_cells": failures.len(),
        })
    }
}

/// Mean and sample standard deviation; non-finite inputs propagate.
pub fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 || !mean.is_finite() {
        return (mean, if mean.is_finite() { 0.0 } else { f64::NAN });
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}

pub fn write_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.item.clone(),
            r.m.to_string(),
            csv_f64(r.noise_pct),
            r.trial.to_string(),
            csv_f64(r.psnr_orig),
            csv_f64(r.psnr_range),
            csv_f64(r.ssim_orig),
            csv_f64(r.ssim_range),
            csv_f64(r.ppe),
            csv_f64(r.residual),
            format!("{:.3}", r.wall_ms),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every cell of the sweep and writes the report bundle to `out_dir`.
/// `workers = 0` uses the global rayon pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    let run = || match config.precision {
        Precision::F32 => Experiment::<f32>::prepare(config)?.sweep(),
        Precision::F64 => Experiment::<f64>::prepare(config)?.sweep(),
    };
    if config.workers == 0 {
        return run();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?
        .install(run)
}

/// Selects one cell of an experiment for [`solve_one`].
#[derive(Clone, Copy, Debug, Default)]
pub struct CellChoice {
    pub item: usize,
    pub m: Option<usize>,
    pub noise_percent: Option<f64>,
}

/// Solves a single instance and writes `report.json`, `original.png`,
/// `reconstruction.png` and `reconstruction.f32` to `out_dir`.
pub fn solve_one(config: &ExperimentConfig, choice: CellChoice) -> Result<PathBuf> {
    let mut cfg = config.clone();
    cfg.m_values = vec![choice.m.unwrap_or_else(|| config.m_values.first().copied().unwrap_or(0))];
    cfg.noise_percent = vec![choice
        .noise_percent
        .unwrap_or_else(|| config.noise_percent.first().copied().unwrap_or(0.0))];
    cfg.trials = 1;
    if cfg.dataset == DatasetSource::Synthetic {
        cfg.dataset_count = choice.item + 1;
    }
    match cfg.precision {
        Precision::F32 => solve_one_typed::<f32>(&cfg, choice.item),
        Precision::F64 => solve_one_typed::<f64>(&cfg, choice.item),
    }
}

fn solve_one_typed<T: Real>(cfg: &ExperimentConfig, item: usize) -> Result<PathBuf> {
    cfg.validate()?;
    // Fail on generator/operator mismatches before any range projection.
    let model = load_generator(&cfg.generator)?;
    if cfg.operator == OperatorFamily::Tm {
        let tm = measure::load_tm::<f32>(cfg.tm_path.as_ref().expect("validated"), cfg.tm_residual_threshold, 1, 0);
        if let Ok(tm) = tm {
            if tm.dense().cols() != model.output_shape().len() {
                return Err(Error::Dimension(format!(
                    "transmission matrix acts on {} pixels, generator output {} has {}",
                    tm.dense().cols(),
                    model.output_shape(),
                    model.output_shape().len()
                )));
            }
        }
    }
    let exp = Experiment::<T>::prepare(cfg)?;
    if item >= exp.targets.len() {
        return Err(Error::Config(format!("item {item} out of range ({} targets)", exp.targets.len())));
    }
    let key = CellKey {
        item,
        m_index: 0,
        noise_index: 0,
        trial: 0,
    };
    let cell = exp.run_cell(key)?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let best = cell.outcome.best();
    let target = &exp.targets[item];
    write_png(&target.original, &out.join("original.png"))?;
    if let Ok(r) = &target.range {
        write_png(r, &out.join("range.png"))?;
    }
    write_png(&best.x_hat, &out.join("reconstruction.png"))?;
    write_raw_planar(&best.x_hat, &out.join("reconstruction.f32"))?;
    let r = &cell.record;
    let shape = best.x_hat.shape();
    let report = json!({
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "item": r.item,
        "m": r.m,
        "n": shape.len(),
        "image_shape": [shape.height, shape.width, shape.channels],
        "noise_pct": json_f64(r.noise_pct),
        "measurements": cell.measured.iter().map(|v| json_f64(v.to())).collect::<Vec<_>>(),
        "scores": {
            "psnr_orig": json_f64(r.psnr_orig),
            "psnr_range": json_f64(r.psnr_range),
            "ssim_orig": json_f64(r.ssim_orig),
            "ssim_range": json_f64(r.ssim_range),
            "ppe": json_f64(r.ppe),
        },
        "solve": outcome_json(&cell.outcome),
    });
    write_json(&report, &out.join("report.json"))?;
    Ok(out.clone())
}
