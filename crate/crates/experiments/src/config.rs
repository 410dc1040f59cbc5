//! Study selection and configuration.
//!
//! A run is described by an [`ExperimentSpec`]: the model configuration from
//! `eki-core` plus the sweep parameters (sample sizes, replicate count,
//! output directory). Specs are assembled in three layers — per-study
//! defaults, then an optional flat TOML file, then command-line overrides —
//! and validated once at the end.

use std::path::{Path, PathBuf};

use eki_core::model::{ModelConfig, PriorForm};
use eki_core::{Error, Result};
use serde::Deserialize;

/// Which study the binary runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Fixed-time ensemble run checked against the conjugate posterior.
    Oracle,
    /// Estimation-error sweep over sample sizes with a fitted decay slope.
    Contraction,
    /// Credible-band coverage sweep over sample sizes.
    Coverage,
    /// Three-panel estimate/band/truth figure with CSV and SVG output.
    Figure1,
    /// Forward/inverse round-trip consistency under grid refinement.
    Roundtrip,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Oracle => "oracle",
            Study::Contraction => "contraction",
            Study::Coverage => "coverage",
            Study::Figure1 => "figure1",
            Study::Roundtrip => "roundtrip",
        }
    }
}

/// Fully resolved description of one study run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub model: ModelConfig,
    /// Sample sizes to sweep, strictly ascending.
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub study: Study,
    pub output_dir: PathBuf,
    /// Draw observations without noise (calibration runs).
    pub noise_free: bool,
    /// Decay exponent of the synthetic ground truth coefficients.
    pub truth_decay: f64,
    /// Worker threads for replicate-parallel studies.
    pub jobs: usize,
}

impl ExperimentSpec {
    /// Per-study defaults. The oracle and figure studies pin the dimension,
    /// step size, and ensemble size they are specified with; the sweeps start
    /// from the plain model defaults.
    pub fn defaults(study: Study) -> Self {
        let mut model = ModelConfig::default();
        let (n_list, replicates) = match study {
            Study::Oracle => {
                model.d_override = Some(10);
                model.particles = 2048;
                model.dt = 1e-3;
                (vec![10_000], 1)
            }
            Study::Contraction => (vec![1_000, 10_000, 100_000], 20),
            Study::Coverage => (vec![1_000, 10_000, 100_000], 400),
            Study::Figure1 => {
                model.d_override = Some(100);
                model.particles = 2048;
                (vec![100, 1_000, 10_000], 1)
            }
            Study::Roundtrip => (vec![10_000], 1),
        };
        ExperimentSpec {
            model,
            n_list,
            replicates,
            study,
            output_dir: PathBuf::from(format!("out_{}", study.name())),
            noise_free: false,
            truth_decay: 2.5,
            jobs: default_jobs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("n_list must be non-empty".into()));
        }
        if self.n_list.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("sample sizes must be positive".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "n_list must be strictly ascending".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if !(self.truth_decay.is_finite() && self.truth_decay > 0.5) {
            return Err(Error::InvalidArgument(
                "truth_decay must be finite and exceed 1/2".into(),
            ));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
}

/// Flat TOML configuration file. Every key is optional; unknown keys are
/// rejected so typos surface as configuration errors instead of silently
/// running the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    pub n_list: Option<Vec<u64>>,
    pub replicates: Option<usize>,
    pub particles: Option<usize>,
    pub dt: Option<f64>,
    pub k_max: Option<usize>,
    pub quantile_level: Option<f64>,
    pub kappa_constant: Option<f64>,
    pub dim_constant: Option<f64>,
    pub d_override: Option<usize>,
    pub prior_form: Option<String>,
    pub noise_free: Option<bool>,
    pub truth_decay: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

pub fn parse_file(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config file: {e}")))
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("config file {}: {e}", path.display())))?;
    parse_file(&text)
}

/// Command-line overrides; applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Replaces the whole n_list when non-empty.
    pub n: Vec<u64>,
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub particles: Option<usize>,
    pub kappa_const: Option<f64>,
    pub replicates: Option<usize>,
    pub noise_free: Option<bool>,
}

fn parse_prior_form(name: &str) -> Result<PriorForm> {
    match name.to_ascii_lowercase().as_str() {
        "standard" => Ok(PriorForm::Standard),
        "alternate" => Ok(PriorForm::Alternate),
        other => Err(Error::InvalidArgument(format!(
            "prior_form must be \"standard\" or \"alternate\", got \"{other}\""
        ))),
    }
}

/// Defaults, then file, then CLI; validates the result.
pub fn build_spec(study: Study, file: &FileConfig, cli: &Overrides) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::defaults(study);

    if let Some(v) = file.seed {
        spec.model.seed = v;
    }
    if let Some(v) = file.alpha {
        spec.model.alpha = v;
    }
    if let Some(v) = file.p {
        spec.model.p = v;
    }
    if let Some(ref v) = file.n_list {
        spec.n_list = v.clone();
    }
    if let Some(v) = file.replicates {
        spec.replicates = v;
    }
    if let Some(v) = file.particles {
        spec.model.particles = v;
    }
    if let Some(v) = file.dt {
        spec.model.dt = v;
    }
    if let Some(v) = file.k_max {
        spec.model.k_max = v;
    }
    if let Some(v) = file.quantile_level {
        spec.model.quantile_level = v;
    }
    if let Some(v) = file.kappa_constant {
        spec.model.kappa_constant = v;
    }
    if let Some(v) = file.dim_constant {
        spec.model.dim_constant = v;
    }
    if let Some(v) = file.d_override {
        spec.model.d_override = Some(v);
    }
    if let Some(ref v) = file.prior_form {
        spec.model.prior_form = parse_prior_form(v)?;
    }
    if let Some(v) = file.noise_free {
        spec.noise_free = v;
    }
    if let Some(v) = file.truth_decay {
        spec.truth_decay = v;
    }
    if let Some(ref v) = file.output_dir {
        spec.output_dir = v.clone();
    }
    if let Some(v) = file.jobs {
        spec.jobs = v;
    }

    if let Some(v) = cli.seed {
        spec.model.seed = v;
    }
    if let Some(ref v) = cli.out {
        spec.output_dir = v.clone();
    }
    if let Some(v) = cli.jobs {
        spec.jobs = v;
    }
    if !cli.n.is_empty() {
        spec.n_list = cli.n.clone();
    }
    if let Some(v) = cli.dim {
        spec.model.d_override = Some(v);
    }
    if let Some(v) = cli.alpha {
        spec.model.alpha = v;
    }
    if let Some(v) = cli.dt {
        spec.model.dt = v;
    }
    if let Some(v) = cli.particles {
        spec.model.particles = v;
    }
    if let Some(v) = cli.kappa_const {
        spec.model.kappa_constant = v;
    }
    if let Some(v) = cli.replicates {
        spec.replicates = v;
    }
    if let Some(v) = cli.noise_free {
        spec.noise_free = v;
    }

    spec.validate()?;
    Ok(spec)
}

/// Echo of every resolved field, one `key: value` line each, written next to
/// the study outputs so runs are reproducible from their artifacts alone.
pub fn resolved_text(spec: &ExperimentSpec) -> String {
    let m = &spec.model;
    let n_list = spec
        .n_list
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let d_override = match m.d_override {
        Some(d) => d.to_string(),
        None => "none".into(),
    };
    let prior_form = match m.prior_form {
        PriorForm::Standard => "standard",
        PriorForm::Alternate => "alternate",
    };
    format!(
        "study: {}\nseed: {}\nalpha: {}\np: {}\nn_list: {}\nreplicates: {}\n\
         particles: {}\ndt: {}\nk_max: {}\nquantile_level: {}\nkappa_constant: {}\n\
         dim_constant: {}\nd_override: {}\nprior_form: {}\nnoise_free: {}\n\
         truth_decay: {}\noutput_dir: {}\njobs: {}\n",
        spec.study.name(),
        m.seed,
        m.alpha,
        m.p,
        n_list,
        spec.replicates,
        m.particles,
        m.dt,
        m.k_max,
        m.quantile_level,
        m.kappa_constant,
        m.dim_constant,
        d_override,
        prior_form,
        spec.noise_free,
        spec.truth_decay,
        spec.output_dir.display(),
        spec.jobs,
    )
}
