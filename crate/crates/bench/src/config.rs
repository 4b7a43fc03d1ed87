use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Verify,
    Scaling,
    Autocorr,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Composite,
    #[value(name = "hitandrun")]
    #[serde(rename = "hitandrun")]
    HitAndRun,
    Rejection,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Composite => "composite",
            Algorithm::HitAndRun => "hitandrun",
            Algorithm::Rejection => "rejection",
        }
    }
}

/// Built-in target families for `sample`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianOrthant,
    GaussianBox,
    GaussianL1,
    GaussianUnrestricted,
}

pub const KNOWN_FAMILIES: [&str; 4] = [
    "gaussian-orthant",
    "gaussian-box",
    "gaussian-l1",
    "gaussian-unrestricted",
];

impl std::str::FromStr for Family {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-orthant" => Ok(Family::GaussianOrthant),
            "gaussian-box" => Ok(Family::GaussianBox),
            "gaussian-l1" => Ok(Family::GaussianL1),
            "gaussian-unrestricted" => Ok(Family::GaussianUnrestricted),
            other => Err(BenchError::UnknownFamily {
                name: other.to_string(),
                known: KNOWN_FAMILIES.join(", "),
            }),
        }
    }
}

/// Mirror of `compsamp::ThetaPolicy` with a serde representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Strict,
    Literal,
}

impl From<Policy> for compsamp::ThetaPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Strict => compsamp::ThetaPolicy::Strict,
            Policy::Literal => compsamp::ThetaPolicy::Literal,
        }
    }
}

/// Declarative description of one benchmark run.
///
/// Every field has an experiment-specific default (see [`ExperimentConfig::defaults`]).
/// A JSON file may set any subset of fields; the CLI then overrides those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    /// Dimension grid for `scaling`.
    pub dims: Vec<usize>,
    pub kappa: f64,
    pub smoothness: f64,
    pub mean_range: f64,
    /// Step size override. `None` means 0.3/d, or the closed form when
    /// `eta_theory` is set.
    pub eta: Option<f64>,
    pub eta_theory: bool,
    pub k_iters: Option<usize>,
    pub loop_constant: f64,
    pub paper_faithful: bool,
    pub epsilon: f64,
    pub theta_policy: Policy,
    pub accept_cap: f64,
    pub seeds: Vec<u64>,
    pub n_samples: usize,
    pub algorithms: Vec<Algorithm>,
    pub family: Option<Family>,
    pub out_dir: PathBuf,
    pub paper_grid: bool,
    pub max_steps: usize,
    pub step_block: usize,
    pub max_lag: usize,
    /// Random direction pairs for `verify`.
    pub projections: usize,
    pub rejection_budget: u64,
    /// Worker threads; `None` uses all cores. Output never depends on it.
    pub workers: Option<usize>,
    /// When false every `wall_ms` is written as 0, making the scaling CSV
    /// byte-reproducible.
    pub record_wall_clock: bool,
}

pub const DESK_SCALING_DIMS: [usize; 3] = [10, 20, 40];
pub const PAPER_SCALING_DIMS: [usize; 5] = [20, 35, 50, 65, 80];
pub const PAPER_AUTOCORR_DIM: usize = 500;
pub const PAPER_AUTOCORR_ETA: f64 = 0.0014;
/// Experiments use η = EMPIRICAL_ETA_SCALE / d unless told otherwise.
pub const EMPIRICAL_ETA_SCALE: f64 = 0.3;

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            dim: 10,
            dims: DESK_SCALING_DIMS.to_vec(),
            kappa: 10.0,
            smoothness: 5.0,
            mean_range: 0.5,
            eta: None,
            eta_theory: false,
            k_iters: None,
            loop_constant: compsamp::sampler::DEFAULT_LOOP_CONSTANT,
            paper_faithful: false,
            epsilon: 0.1,
            theta_policy: Policy::Strict,
            accept_cap: compsamp::sampler::DEFAULT_ACCEPT_CAP,
            seeds: vec![0],
            n_samples: 1000,
            algorithms: vec![Algorithm::Composite],
            family: None,
            out_dir: PathBuf::from("out"),
            paper_grid: false,
            max_steps: 1_000_000,
            step_block: 10,
            max_lag: 1000,
            projections: 5,
            rejection_budget: compsamp::baselines::DEFAULT_REJECTION_BUDGET,
            workers: None,
            record_wall_clock: true,
        };
        match experiment {
            Experiment::Verify => Self {
                eta: Some(0.01),
                k_iters: Some(500),
                n_samples: 3000,
                theta_policy: Policy::Literal,
                algorithms: vec![Algorithm::Composite, Algorithm::Rejection],
                ..base
            },
            Experiment::Scaling => Self {
                mean_range: 0.0,
                seeds: (0..10).collect(),
                algorithms: vec![Algorithm::Composite, Algorithm::HitAndRun],
                theta_policy: Policy::Literal,
                ..base
            },
            Experiment::Autocorr => Self {
                dim: 100,
                n_samples: 20_000,
                algorithms: vec![Algorithm::Composite, Algorithm::HitAndRun],
                theta_policy: Policy::Literal,
                ..base
            },
            Experiment::Sample => Self {
                eta: Some(0.01),
                k_iters: Some(500),
                family: Some(Family::GaussianOrthant),
                ..base
            },
        }
    }

    /// Defaults for `experiment`, overlaid with the fields present in a JSON
    /// document. A `params.json` sidecar is accepted too: its `config`
    /// object is used.
    pub fn from_json(experiment: Experiment, text: &str) -> Result<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text)?;
        if let Some(inner) = doc.get("config") {
            doc = inner.clone();
        }
        let serde_json::Value::Object(overrides) = doc else {
            return Err(BenchError::Config("config file must hold a JSON object".into()));
        };
        if let Some(file_kind) = overrides.get("experiment") {
            let file_kind: Experiment = serde_json::from_value(file_kind.clone())?;
            if file_kind != experiment {
                return Err(BenchError::Config(format!(
                    "config file is for {file_kind:?} but {experiment:?} was requested"
                )));
            }
        }
        let mut merged = serde_json::to_value(Self::defaults(experiment))?;
        let map = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in overrides {
            if !map.contains_key(&k) {
                return Err(BenchError::Config(format!("unknown config field `{k}`")));
            }
            map.insert(k, v);
        }
        Ok(serde_json::from_value(merged)?)
    }

    pub fn from_file(experiment: Experiment, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(experiment, &text)
    }

    /// Apply `paper_grid` and `paper_faithful`, then check invariants.
    pub fn resolve(mut self) -> Result<Self> {
        if self.paper_grid {
            match self.experiment {
                Experiment::Scaling => self.dims = PAPER_SCALING_DIMS.to_vec(),
                Experiment::Autocorr => {
                    self.dim = PAPER_AUTOCORR_DIM;
                    if self.eta.is_none() && !self.eta_theory {
                        self.eta = Some(PAPER_AUTOCORR_ETA);
                    }
                }
                _ => {}
            }
        }
        if self.paper_faithful {
            if self.eta.is_some() || self.k_iters.is_some() {
                return Err(BenchError::Config(
                    "paper_faithful derives eta and K from the closed forms; drop the eta/k_iters overrides".into(),
                ));
            }
            self.loop_constant = compsamp::sampler::PAPER_LOOP_CONSTANT;
            self.eta_theory = true;
            self.theta_policy = Policy::Strict;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.dim < 1 {
            return bad("dim must be at least 1".into());
        }
        if self.experiment == Experiment::Scaling && (self.dims.is_empty() || self.dims.contains(&0)) {
            return bad("dims must be a nonempty list of positive dimensions".into());
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be at least 1, got {}", self.kappa));
        }
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return bad(format!("smoothness must be positive, got {}", self.smoothness));
        }
        if !(self.mean_range >= 0.0 && self.mean_range.is_finite()) {
            return bad(format!("mean_range must be nonnegative, got {}", self.mean_range));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta must be positive, got {eta}"));
            }
            if self.eta_theory {
                return bad("eta and eta_theory are mutually exclusive".into());
            }
        }
        if self.k_iters == Some(0) {
            return bad("k_iters must be positive".into());
        }
        if self.loop_constant.is_nan() || self.loop_constant <= 0.0 {
            return bad("loop_constant must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must be nonempty".into());
        }
        if self.step_block == 0 || self.max_steps == 0 {
            return bad("step_block and max_steps must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        match self.experiment {
            Experiment::Verify if self.dim > 15 => bad(format!(
                "verify uses naive rejection, which is infeasible above d = 15 (got {})",
                self.dim
            )),
            Experiment::Verify if self.projections == 0 => bad("projections must be positive".into()),
            Experiment::Sample if self.family.is_none() => bad(format!(
                "sample needs a target family: one of {}",
                KNOWN_FAMILIES.join(", ")
            )),
            _ => Ok(()),
        }
    }

    /// Composite step size used at dimension `d`.
    pub fn eta_for(&self, d: usize) -> Option<f64> {
        if self.eta_theory {
            None
        } else {
            Some(self.eta.unwrap_or(EMPIRICAL_ETA_SCALE / d as f64))
        }
    }

    /// Sampler parameters for a target whose smooth part is `f`.
    pub fn sampler_params(&self, f: &dyn compsamp::SmoothPotential) -> Result<compsamp::SamplerParams> {
        let mut p = compsamp::SamplerParams::theory(f, self.epsilon)?
            .with_loop_constant(self.loop_constant)
            .with_accept_cap(self.accept_cap)
            .with_theta_policy(self.theta_policy.into());
        if self.paper_faithful {
            p = p.paper_faithful();
        }
        if let Some(eta) = self.eta_for(f.dim()) {
            p = p.with_eta(eta);
        }
        if let Some(k) = self.k_iters {
            p = p.with_k_iters(k);
        }
        p.validate()?;
        Ok(p)
    }
}
