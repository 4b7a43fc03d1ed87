use std::time::Instant;

use compsamp::baselines::{naive_rejection, HitAndRunChain};
use compsamp::diagnostics::{autocorrelation, ks_two_sample, mixing_time, MixingOptions, BURN_IN_FRACTION};
use compsamp::sampler::{composite_sample_shared_min, prepare_shared_min, CompositeDraw, JointChain, SamplerParams};
use compsamp::{CompositeTarget, Vector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::output::{ensure_dir, fmt_float, write_csv, write_json, write_points, Written};
use crate::targets::{family_target, random_gaussian_target, stream_rng, GaussianInstance, Stream};

pub const SCALING_HEADER: [&str; 7] = [
    "algorithm",
    "d",
    "seed",
    "mixing_steps",
    "wall_ms",
    "gradient_calls",
    "oracle_calls",
];
/// Naive-rejection draws per parallel task in `verify`.
const REJECTION_CHUNK: usize = 100;

/// Resolved sampler settings recorded in every `params.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedParams {
    pub d: usize,
    pub eta: f64,
    pub k_iters: usize,
    pub loop_constant: f64,
    pub omega_radius: f64,
    pub accept_cap: f64,
    pub delta: f64,
    pub inner_delta: f64,
}

impl ResolvedParams {
    fn of(p: &SamplerParams) -> Self {
        Self {
            d: p.dim(),
            eta: p.eta,
            k_iters: p.k_iters,
            loop_constant: p.loop_constant,
            omega_radius: p.omega_radius,
            accept_cap: p.accept_cap,
            delta: p.delta,
            inner_delta: p.inner_delta(),
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    resolved: Vec<ResolvedParams>,
}

fn write_sidecar(cfg: &ExperimentConfig, resolved: Vec<ResolvedParams>, written: &mut Written) -> Result<()> {
    let path = cfg.out_dir.join("params.json");
    write_json(&path, &Sidecar { config: cfg, resolved })?;
    written.push(path);
    Ok(())
}

fn in_pool<T: Send>(cfg: &ExperimentConfig, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    builder.build()?.install(job)
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

fn instance(cfg: &ExperimentConfig, seed: u64, d: usize) -> Result<GaussianInstance> {
    let mut rng = stream_rng(seed, Stream::Target, d, 0);
    random_gaussian_target(d, cfg.kappa, cfg.smoothness, cfg.mean_range, &mut rng)
}

/// `n` independent draws, draw i using its own stream so the result does
/// not depend on scheduling.
pub fn composite_draws(
    shared: &CompositeTarget,
    params: &SamplerParams,
    seed: u64,
    n: usize,
) -> Result<Vec<CompositeDraw>> {
    let d = shared.dim();
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Composite, d, i);
            composite_sample_shared_min(shared, params, &mut rng).map_err(BenchError::from)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct KsRow {
    pub pair: usize,
    pub axis: char,
    pub ks: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifySeed {
    pub seed: u64,
    pub composite_samples: usize,
    pub rejection_samples: usize,
    pub rejection_trials: u64,
    pub mean_outer_loops: f64,
    pub theta_evaluations: u64,
    pub cap_exceedances: u64,
    pub max_theta: f64,
    pub max_ks: Option<f64>,
    pub ks: Vec<KsRow>,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub seeds: Vec<VerifySeed>,
    pub written: Written,
}

/// Composite sampler against naive rejection on a random orthant Gaussian.
///
/// Per seed writes `verify_seed{s}_composite.csv`, `verify_seed{s}_rejection.csv`,
/// `verify_seed{s}_projection_{j}.csv` (`algorithm,u,v`), `verify_seed{s}_ks.csv`
/// (`pair,axis,ks`) and `verify_seed{s}_stats.json`.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let cfg = cfg.clone().resolve()?;
    ensure_dir(&cfg.out_dir)?;
    in_pool(&cfg, || {
        let mut written = Written::default();
        let mut seeds = Vec::new();
        let mut resolved = Vec::new();
        for &seed in &cfg.seeds {
            let (entry, params) = verify_seed(&cfg, seed, &mut written)?;
            seeds.push(entry);
            if resolved.is_empty() {
                resolved.push(params);
            }
        }
        write_sidecar(&cfg, resolved, &mut written)?;
        Ok(VerifyReport { seeds, written })
    })
}

fn verify_seed(cfg: &ExperimentConfig, seed: u64, written: &mut Written) -> Result<(VerifySeed, ResolvedParams)> {
    let d = cfg.dim;
    let n = cfg.n_samples;
    let inst = instance(cfg, seed, d)?;
    let params = cfg.sampler_params(&*inst.target.f)?;
    let path = |name: &str| cfg.out_dir.join(format!("verify_seed{seed}_{name}"));
    let mut entry = VerifySeed {
        seed,
        ..Default::default()
    };

    let mut composite = Vec::new();
    if cfg.algorithms.contains(&Algorithm::Composite) {
        let shared = prepare_shared_min(&inst.target)?;
        let draws = composite_draws(&shared, &params, seed, n)?;
        entry.mean_outer_loops = draws.iter().map(|r| r.outer_loops as f64).sum::<f64>() / n.max(1) as f64;
        entry.theta_evaluations = draws.iter().map(|r| r.theta_evaluations).sum();
        entry.cap_exceedances = draws.iter().map(|r| r.cap_exceedances).sum();
        entry.max_theta = draws.iter().map(|r| r.max_log_theta).fold(f64::NEG_INFINITY, f64::max).exp();
        composite = draws.into_iter().map(|r| r.x).collect();
        write_points(written.push(path("composite.csv")), d, &composite)?;
    }

    let mut rejection = Vec::new();
    if cfg.algorithms.contains(&Algorithm::Rejection) {
        let chunks = n.div_ceil(REJECTION_CHUNK);
        let budget = cfg.rejection_budget / chunks.max(1) as u64;
        let runs = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let size = REJECTION_CHUNK.min(n - c * REJECTION_CHUNK);
                let mut rng = stream_rng(seed, Stream::Rejection, d, c as u64);
                naive_rejection(&inst.restricted, size, budget, &mut rng)
            })
            .collect::<compsamp::Result<Vec<_>>>()?;
        entry.rejection_trials = runs.iter().map(|r| r.trials).sum();
        if runs.iter().any(|r| r.exhausted) {
            return Err(BenchError::RejectionExhausted {
                budget: cfg.rejection_budget,
                accepted: runs.iter().map(|r| r.samples.len()).sum(),
                wanted: n,
            });
        }
        rejection = runs.into_iter().flat_map(|r| r.samples).collect();
        write_points(written.push(path("rejection.csv")), d, &rejection)?;
    }
    entry.composite_samples = composite.len();
    entry.rejection_samples = rejection.len();

    let mut proj_rng = stream_rng(seed, Stream::Projection, d, 0);
    let header = ["algorithm", "u", "v"].map(String::from);
    for j in 1..=cfg.projections {
        let u = random_unit(d, &mut proj_rng);
        let v = random_unit(d, &mut proj_rng);
        let rows = [("composite", &composite), ("rejection", &rejection)]
            .into_iter()
            .flat_map(|(name, pts)| pts.iter().map(move |p| (name, p)))
            .map(|(name, p)| vec![name.to_string(), fmt_float(p.dot(&u)), fmt_float(p.dot(&v))]);
        write_csv(written.push(path(&format!("projection_{j}.csv"))), &header, rows)?;
        if !composite.is_empty() && !rejection.is_empty() {
            for (axis, w) in [('u', &u), ('v', &v)] {
                let a: Vec<f64> = composite.iter().map(|p| p.dot(w)).collect();
                let b: Vec<f64> = rejection.iter().map(|p| p.dot(w)).collect();
                entry.ks.push(KsRow {
                    pair: j,
                    axis,
                    ks: ks_two_sample(&a, &b)?,
                });
            }
        }
    }
    entry.max_ks = entry.ks.iter().map(|r| r.ks).reduce(f64::max);
    let ks_rows = entry
        .ks
        .iter()
        .map(|r| vec![r.pair.to_string(), r.axis.to_string(), fmt_float(r.ks)]);
    write_csv(written.push(path("ks.csv")), &["pair", "axis", "ks"].map(String::from), ks_rows)?;
    write_json(written.push(path("stats.json")), &entry)?;
    Ok((entry, ResolvedParams::of(&params)))
}

/// One row of the scaling CSV. `mixing_steps` is `None` when the run hit
/// `max_steps` first (written as -1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub algorithm: Algorithm,
    pub d: usize,
    pub seed: u64,
    pub mixing_steps: Option<usize>,
    pub wall_ms: u64,
    pub gradient_calls: u64,
    pub oracle_calls: u64,
}

impl ScalingRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.algorithm.name().to_string(),
            self.d.to_string(),
            self.seed.to_string(),
            self.mixing_steps.map_or("-1".to_string(), |s| s.to_string()),
            self.wall_ms.to_string(),
            self.gradient_calls.to_string(),
            self.oracle_calls.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub written: Written,
}

impl ScalingReport {
    /// Seed-averaged mixing steps per d for one algorithm; failed runs are
    /// excluded, and a d with no successful run is omitted.
    pub fn mean_steps(&self, algorithm: Algorithm) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut dims: Vec<usize> = self.rows.iter().map(|r| r.d).collect();
        dims.sort_unstable();
        dims.dedup();
        for d in dims {
            let ok: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.d == d)
                .filter_map(|r| r.mixing_steps.map(|s| s as f64))
                .collect();
            if !ok.is_empty() {
                out.push((d, ok.iter().sum::<f64>() / ok.len() as f64));
            }
        }
        out
    }
}

/// Mixing time (ESS criterion) of composite and hit-and-run over a grid of
/// dimensions and seeds. Writes `scaling.csv` sorted by (algorithm, d, seed).
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    let cfg = cfg.clone().resolve()?;
    ensure_dir(&cfg.out_dir)?;
    in_pool(&cfg, || {
        let jobs: Vec<(usize, u64, Algorithm)> = cfg
            .dims
            .iter()
            .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
            .flat_map(|(d, s)| {
                cfg.algorithms
                    .iter()
                    .filter(|a| **a != Algorithm::Rejection)
                    .map(move |&a| (d, s, a))
            })
            .collect();
        let mut rows = jobs
            .into_par_iter()
            .map(|(d, seed, algorithm)| scaling_run(&cfg, d, seed, algorithm))
            .collect::<Result<Vec<_>>>()?;
        rows.sort_by_key(|r| (r.algorithm, r.d, r.seed));

        let mut written = Written::default();
        let header = SCALING_HEADER.map(String::from);
        write_csv(written.push(cfg.out_dir.join("scaling.csv")), &header, rows.iter().map(ScalingRow::record))?;
        let mut resolved = Vec::new();
        if cfg.algorithms.contains(&Algorithm::Composite) {
            for &d in &cfg.dims {
                let inst = instance(&cfg, cfg.seeds[0], d)?;
                resolved.push(ResolvedParams::of(&cfg.sampler_params(&*inst.target.f)?));
            }
        }
        write_sidecar(&cfg, resolved, &mut written)?;
        Ok(ScalingReport { rows, written })
    })
}

fn scaling_run(cfg: &ExperimentConfig, d: usize, seed: u64, algorithm: Algorithm) -> Result<ScalingRow> {
    let inst = instance(cfg, seed, d)?;
    let opts = MixingOptions {
        step_block: cfg.step_block,
        max_steps: cfg.max_steps,
        ..Default::default()
    };
    let start = Instant::now();
    // counters after each step, so costs can be read off at the crossing
    let mut calls: Vec<(u64, u64)> = Vec::new();
    let outcome = match algorithm {
        Algorithm::Composite => {
            let params = cfg.sampler_params(&*inst.target.f)?;
            let shared = prepare_shared_min(&inst.target)?;
            let mut rng = stream_rng(seed, Stream::Composite, d, 0);
            let mut chain = JointChain::start(&shared, &params, &mut rng)?;
            mixing_time(
                || {
                    let x = chain.step(&mut rng)?.clone();
                    calls.push((chain.gradient_calls, chain.oracle_calls));
                    Ok(x)
                },
                &opts,
            )?
        }
        Algorithm::HitAndRun => {
            let mut rng = stream_rng(seed, Stream::HitAndRun, d, 0);
            let mut chain = HitAndRunChain::new(inst.restricted.clone());
            mixing_time(
                || {
                    let x = chain.step(&mut rng)?.clone();
                    // one 1-D truncated-normal draw per step, no gradients
                    calls.push((0, calls.len() as u64 + 1));
                    Ok(x)
                },
                &opts,
            )?
        }
        Algorithm::Rejection => unreachable!("rejection has no mixing time"),
    };
    let wall_ms = if cfg.record_wall_clock {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let at = outcome.steps.unwrap_or(outcome.steps_run);
    let (gradient_calls, oracle_calls) = at.checked_sub(1).map_or((0, 0), |i| calls[i]);
    Ok(ScalingRow {
        algorithm,
        d,
        seed,
        mixing_steps: outcome.steps,
        wall_ms,
        gradient_calls,
        oracle_calls,
    })
}

#[derive(Debug, Clone)]
pub struct AutocorrReport {
    /// (algorithm, autocorrelation at lags 0..=max_lag), per seed in order.
    pub curves: Vec<(u64, Algorithm, Vec<f64>)>,
    pub written: Written,
}

impl AutocorrReport {
    pub fn curve(&self, seed: u64, algorithm: Algorithm) -> Option<&[f64]> {
        self.curves
            .iter()
            .find(|(s, a, _)| *s == seed && *a == algorithm)
            .map(|(_, _, c)| c.as_slice())
    }
}

/// Autocorrelation of a random 1-D projection of each chain. Writes
/// `autocorr_seed{s}_{algorithm}.csv` with header `lag,autocorrelation`.
pub fn run_autocorr(cfg: &ExperimentConfig) -> Result<AutocorrReport> {
    let cfg = cfg.clone().resolve()?;
    ensure_dir(&cfg.out_dir)?;
    in_pool(&cfg, || {
        let d = cfg.dim;
        let mut written = Written::default();
        let mut curves = Vec::new();
        let mut resolved = Vec::new();
        for &seed in &cfg.seeds {
            let inst = instance(&cfg, seed, d)?;
            let direction = random_unit(d, &mut stream_rng(seed, Stream::Projection, d, 0));
            let algos: Vec<Algorithm> = cfg
                .algorithms
                .iter()
                .copied()
                .filter(|a| *a != Algorithm::Rejection)
                .collect();
            let results = algos
                .par_iter()
                .map(|&a| projected_trace(&cfg, &inst, seed, a, &direction))
                .collect::<Result<Vec<_>>>()?;
            for (a, trace) in algos.into_iter().zip(results) {
                let burn = (trace.len() as f64 * BURN_IN_FRACTION).floor() as usize;
                let kept = &trace[burn..];
                let max_lag = cfg.max_lag.min(kept.len().saturating_sub(1));
                let acf = autocorrelation(kept, max_lag)?;
                let rows = acf.iter().enumerate().map(|(k, r)| vec![k.to_string(), fmt_float(*r)]);
                let path = cfg.out_dir.join(format!("autocorr_seed{seed}_{}.csv", a.name()));
                write_csv(written.push(path), &["lag", "autocorrelation"].map(String::from), rows)?;
                curves.push((seed, a, acf));
            }
            if resolved.is_empty() && cfg.algorithms.contains(&Algorithm::Composite) {
                resolved.push(ResolvedParams::of(&cfg.sampler_params(&*inst.target.f)?));
            }
        }
        write_sidecar(&cfg, resolved, &mut written)?;
        Ok(AutocorrReport { curves, written })
    })
}

fn projected_trace(
    cfg: &ExperimentConfig,
    inst: &GaussianInstance,
    seed: u64,
    algorithm: Algorithm,
    direction: &Vector,
) -> Result<Vec<f64>> {
    let d = inst.restricted.dim();
    let steps = cfg.n_samples;
    let mut out = Vec::with_capacity(steps);
    match algorithm {
        Algorithm::Composite => {
            let params = cfg.sampler_params(&*inst.target.f)?;
            let shared = prepare_shared_min(&inst.target)?;
            let mut rng = stream_rng(seed, Stream::Composite, d, 0);
            let mut chain = JointChain::start(&shared, &params, &mut rng)?;
            for _ in 0..steps {
                out.push(chain.step(&mut rng)?.dot(direction));
            }
        }
        Algorithm::HitAndRun => {
            let mut rng = stream_rng(seed, Stream::HitAndRun, d, 0);
            let mut chain = HitAndRunChain::new(inst.restricted.clone());
            for _ in 0..steps {
                out.push(chain.step(&mut rng)?.dot(direction));
            }
        }
        Algorithm::Rejection => unreachable!(),
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SampleReport {
    /// Draws per seed, in seed order.
    pub samples: Vec<(u64, Vec<Vector>)>,
    pub written: Written,
}

/// Independent composite-sampler draws from a built-in family. Writes
/// `samples_seed{s}.csv` (`x1,...,xd`) and the `params.json` sidecar.
pub fn run_sample(cfg: &ExperimentConfig) -> Result<SampleReport> {
    let cfg = cfg.clone().resolve()?;
    let family = cfg.family.expect("resolve checks the family");
    ensure_dir(&cfg.out_dir)?;
    in_pool(&cfg, || {
        let d = cfg.dim;
        let mut written = Written::default();
        let mut samples = Vec::new();
        let mut resolved = Vec::new();
        for &seed in &cfg.seeds {
            let mut rng = stream_rng(seed, Stream::Target, d, 0);
            let target = family_target(family, d, cfg.kappa, cfg.smoothness, cfg.mean_range, &mut rng)?;
            let params = cfg.sampler_params(&*target.f)?;
            let draws: Vec<Vector> = if cfg.n_samples == 0 {
                Vec::new()
            } else {
                let shared = prepare_shared_min(&target)?;
                composite_draws(&shared, &params, seed, cfg.n_samples)?
                    .into_iter()
                    .map(|r| r.x)
                    .collect()
            };
            write_points(written.push(cfg.out_dir.join(format!("samples_seed{seed}.csv"))), d, &draws)?;
            samples.push((seed, draws));
            if resolved.is_empty() {
                resolved.push(ResolvedParams::of(&params));
            }
        }
        write_sidecar(&cfg, resolved, &mut written)?;
        Ok(SampleReport { samples, written })
    })
}
