use std::path::PathBuf;

use clap::{Args, Parser};

use crate::config::{Algorithm, Experiment, ExperimentConfig, Family, Policy};
use crate::error::Result;
use crate::output::Written;

#[derive(Debug, Parser)]
#[command(name = "compsamp", version, about = "Composite logconcave sampling experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Flags that override the config file (or the experiment defaults).
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file; a params.json sidecar also works.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub smoothness: Option<f64>,
    #[arg(long)]
    pub mean_range: Option<f64>,
    #[arg(long, conflicts_with = "eta_theory")]
    pub eta: Option<f64>,
    /// Use the closed-form step size instead of 0.3/d.
    #[arg(long)]
    pub eta_theory: bool,
    #[arg(long)]
    pub k_iters: Option<usize>,
    #[arg(long, conflicts_with = "paper_faithful")]
    pub loop_constant: Option<f64>,
    /// Analysis constants for K and η (impractically slow beyond toy sizes).
    #[arg(long)]
    pub paper_faithful: bool,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long = "algo", value_enum, value_delimiter = ',')]
    pub algorithms: Option<Vec<Algorithm>>,
    /// Target family for `sample`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full-size grids: d ∈ {20,35,50,65,80} for scaling, d = 500 for autocorr.
    #[arg(long)]
    pub paper_grid: bool,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub step_block: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long, value_enum)]
    pub theta_policy: Option<Policy>,
    #[arg(long)]
    pub accept_cap: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write wall_ms as 0 so scaling output is byte-reproducible.
    #[arg(long)]
    pub no_wall_clock: bool,
}

impl Overrides {
    pub fn apply(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(experiment, path)?,
            None => ExperimentConfig::defaults(experiment),
        };
        macro_rules! set {
            ($($field:ident <- $flag:expr),* $(,)?) => {
                $(if let Some(v) = $flag.clone() { c.$field = v; })*
            };
        }
        set!(
            dim <- self.dim,
            dims <- self.dims,
            kappa <- self.kappa,
            smoothness <- self.smoothness,
            mean_range <- self.mean_range,
            loop_constant <- self.loop_constant,
            epsilon <- self.epsilon,
            seeds <- self.seeds,
            n_samples <- self.samples,
            algorithms <- self.algorithms,
            out_dir <- self.out,
            max_steps <- self.max_steps,
            step_block <- self.step_block,
            max_lag <- self.max_lag,
            theta_policy <- self.theta_policy,
            accept_cap <- self.accept_cap,
        );
        if let Some(eta) = self.eta {
            c.eta = Some(eta);
            c.eta_theory = false;
        }
        if self.eta_theory {
            c.eta = None;
            c.eta_theory = true;
        }
        if let Some(k) = self.k_iters {
            c.k_iters = Some(k);
        }
        if let Some(name) = &self.family {
            c.family = Some(name.parse::<Family>()?);
        }
        if let Some(w) = self.workers {
            c.workers = Some(w);
        }
        c.paper_faithful |= self.paper_faithful;
        c.paper_grid |= self.paper_grid;
        if self.no_wall_clock {
            c.record_wall_clock = false;
        }
        c.resolve()
    }
}

/// Run one experiment and return the files it wrote.
pub fn run(cfg: &ExperimentConfig) -> Result<Written> {
    Ok(match cfg.experiment {
        Experiment::Verify => crate::run_verify(cfg)?.written,
        Experiment::Scaling => crate::run_scaling(cfg)?.written,
        Experiment::Autocorr => crate::run_autocorr(cfg)?.written,
        Experiment::Sample => crate::run_sample(cfg)?.written,
    })
}
