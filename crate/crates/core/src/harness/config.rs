//! Experiment configuration.
//!
//! A flat TOML file; every key is top level. Keys not marked required fall
//! back to the defaults listed here, and the fully resolved config is written
//! to `effective_config.toml` in every bundle.
//!
//! ```toml
//! # required
//! generator = "models/digits.prgw"   # PRGW weights
//! operator = "gaussian"               # gaussian | cdp | tm
//! m_values = [400, 500, 1000]         # measurement counts to sweep
//!
//! # operator parameters
//! cdp_masks = 1                       # masks; each takes m / cdp_masks samples
//! tm_path = "tm.prtm"                 # required for operator = "tm"
//! tm_residual_threshold = 0.4
//!
//! # targets
//! dataset = "synthetic"               # synthetic (G(z), z from latent_prior) | directory
//! dataset_dir = "images"              # for dataset = "directory"
//! dataset_files = []                  # explicit file names inside dataset_dir
//! dataset_count = 4                   # images used (first N, or sampled)
//! dataset_sample_seed = 17            # optional: sample dataset_count files with this seed
//! zero_pad = false                    # center-pad smaller images instead of resizing
//! measure_target = "original"         # original | range: which image is measured
//!
//! # noise
//! noise_percent = [1.0]
//! noise_mode = "relative"             # relative | absolute
//!
//! # solver (per restart chain)
//! restarts = 10
//! iterations = 10000
//! step_size = 0.001
//! latent_prior = "standard_normal"    # standard_normal | uniform
//! precision = "f32"                   # f32 | f64
//! loss_trace_stride = 100
//! line_search = false
//! # tolerance = 1e-10                 # optional early stop on loss
//!
//! # range projection of each target
//! range_restarts = 10
//! range_iterations = 10000
//! range_step_size = 0.001
//!
//! # sweep
//! trials = 1
//! out_dir = "out"
//! seed = 0
//! workers = 0                         # 0: one per core
//! psnr_peak = 1.0
//! resolve_sign = false
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::NoiseMode;
use crate::solver::{LatentPrior, Precision, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorFamily {
    Gaussian,
    Cdp,
    Tm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    #[default]
    Synthetic,
    Directory,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureTarget {
    #[default]
    Original,
    Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: PathBuf,
    pub operator: OperatorFamily,
    pub m_values: Vec<usize>,

    #[serde(default = "one")]
    pub cdp_masks: usize,
    #[serde(default)]
    pub tm_path: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub tm_residual_threshold: f64,

    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset_files: Vec<String>,
    #[serde(default = "default_count")]
    pub dataset_count: usize,
    #[serde(default)]
    pub dataset_sample_seed: Option<u64>,
    #[serde(default)]
    pub zero_pad: bool,
    #[serde(default)]
    pub measure_target: MeasureTarget,

    #[serde(default = "default_noise")]
    pub noise_percent: Vec<f64>,
    #[serde(default)]
    pub noise_mode: NoiseMode,

    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default)]
    pub latent_prior: LatentPrior,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default = "default_stride")]
    pub loss_trace_stride: usize,
    #[serde(default)]
    pub line_search: bool,
    #[serde(default)]
    pub tolerance: Option<f64>,

    #[serde(default = "default_restarts")]
    pub range_restarts: usize,
    #[serde(default = "default_iterations")]
    pub range_iterations: usize,
    #[serde(default = "default_step")]
    pub range_step_size: f64,

    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_peak")]
    pub psnr_peak: f64,
    #[serde(default)]
    pub resolve_sign: bool,
}

fn one() -> usize {
    1
}
fn default_threshold() -> f64 {
    0.4
}
fn default_count() -> usize {
    4
}
fn default_noise() -> Vec<f64> {
    vec![1.0]
}
fn default_restarts() -> usize {
    SolverConfig::default().restarts
}
fn default_iterations() -> usize {
    SolverConfig::default().iterations
}
fn default_step() -> f64 {
    SolverConfig::default().step_size
}
fn default_stride() -> usize {
    SolverConfig::default().loss_trace_stride
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_peak() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// A config with every optional key at its default.
    pub fn new(generator: impl Into<PathBuf>, operator: OperatorFamily, m_values: Vec<usize>) -> Self {
        let mut table = toml::Table::new();
        table.insert("generator".into(), toml::Value::String(generator.into().display().to_string()));
        table.insert(
            "operator".into(),
            toml::Value::try_from(operator).expect("enum serializes"),
        );
        table.insert(
            "m_values".into(),
            toml::Value::Array(m_values.iter().map(|&m| toml::Value::Integer(m as i64)).collect()),
        );
        toml::Value::Table(table).try_into().expect("defaults deserialize")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut cfg.generator);
            fix(&mut cfg.out_dir);
            if let Some(p) = cfg.tm_path.as_mut() {
                fix(p);
            }
            if let Some(p) = cfg.dataset_dir.as_mut() {
                fix(p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            restarts: self.restarts,
            iterations: self.iterations,
            step_size: self.step_size,
            latent_prior: self.latent_prior,
            seed: self.seed,
            precision: self.precision,
            loss_trace_stride: self.loss_trace_stride,
            line_search: self.line_search,
            tolerance: self.tolerance,
        }
    }

    pub fn range_solver(&self) -> SolverConfig {
        SolverConfig {
            restarts: self.range_restarts,
            iterations: self.range_iterations,
            step_size: self.range_step_size,
            tolerance: None,
            ..self.solver()
        }
    }

    /// Checks everything that can be checked without reading the generator.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.m_values.is_empty() {
            return bad("m_values is empty".into());
        }
        if self.m_values.contains(&0) {
            return bad("m_values must be positive".into());
        }
        if self.noise_percent.is_empty() {
            return bad("noise_percent is empty".into());
        }
        if self.noise_percent.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return bad("noise_percent entries must be finite and >= 0".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.psnr_peak > 0.0) {
            return bad("psnr_peak must be positive".into());
        }
        if !self.generator.is_file() {
            return bad(format!("generator file {} does not exist", self.generator.display()));
        }
        match self.operator {
            OperatorFamily::Cdp => {
                if self.cdp_masks == 0 {
                    return bad("cdp_masks must be >= 1".into());
                }
                if let Some(m) = self.m_values.iter().find(|&&m| m % self.cdp_masks != 0) {
                    return bad(format!("m = {m} is not divisible by cdp_masks = {}", self.cdp_masks));
                }
            }
            OperatorFamily::Tm => match &self.tm_path {
                Some(p) if p.is_file() => {}
                Some(p) => return bad(format!("tm_path {} does not exist", p.display())),
                None => return bad("operator = \"tm\" needs tm_path".into()),
            },
            OperatorFamily::Gaussian => {}
        }
        if self.dataset == DatasetSource::Directory {
            match &self.dataset_dir {
                Some(d) if d.is_dir() => {}
                Some(d) => return bad(format!("dataset_dir {} is not a directory", d.display())),
                None => return bad("dataset = \"directory\" needs dataset_dir".into()),
            }
        } else if self.dataset_count == 0 {
            return bad("dataset_count must be >= 1".into());
        }
        self.solver().validate()?;
        self.range_solver().validate()
    }
}
