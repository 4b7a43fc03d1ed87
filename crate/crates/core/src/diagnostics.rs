//! Chain-quality metrics and the one-dimensional quadrature oracle.

use crate::error::{Error, Result};
use crate::Vector;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Minimum-ESS threshold used as the mixing criterion.
pub const MIXING_ESS_THRESHOLD: f64 = 10.0;

/// Fraction of a trace discarded as burn-in before computing diagnostics.
pub const BURN_IN_FRACTION: f64 = 0.1;

/// Biased autocovariance at every lag 0..n-1, via zero-padded FFT.
fn autocovariance(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::DegenerateSeries);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    let acov: Vec<f64> = buf[..n].iter().map(|c| c.re * scale).collect();
    // a constant series has only round-off left in its variance
    let spread = series.iter().fold(0.0_f64, |m, &x| m.max((x - mean).abs()));
    if !(acov[0] > 0.0) || spread <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateSeries);
    }
    Ok(acov)
}

/// Normalized sample autocorrelation at lags 0..=max_lag (centered, biased).
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 || max_lag >= series.len() {
        return Err(Error::InvalidParameter(format!(
            "max_lag must satisfy 1 <= max_lag < {}, got {max_lag}",
            series.len()
        )));
    }
    let acov = autocovariance(series)?;
    Ok(acov[..=max_lag].iter().map(|c| c / acov[0]).collect())
}

/// Per-coordinate effective sample sizes of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub ess_per_coordinate: Vec<f64>,
    pub min_ess: f64,
    pub lags_used: Vec<usize>,
}

/// ESS with the lag count the Geyer truncation kept.
pub fn ess_with_lags(series: &[f64]) -> Result<(f64, usize)> {
    let acov = autocovariance(series)?;
    let n = series.len();
    let rho: Vec<f64> = acov.iter().map(|c| c / acov[0]).collect();
    // initial monotone positive sequence over pairs Γ_m = ρ_{2m} + ρ_{2m+1}
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        m += 1;
    }
    let nf = n as f64;
    let ess = if tau > 0.0 { (nf / tau).clamp(1.0, nf) } else { nf };
    Ok((ess, 2 * m))
}

/// N / (1 + 2 Σ ρ(k)) with Geyer's initial monotone positive truncation,
/// clamped to [1, N].
pub fn ess(series: &[f64]) -> Result<f64> {
    ess_with_lags(series).map(|(e, _)| e)
}

/// ESS of every column of a row-major trace.
pub fn ess_report(rows: &[Vector]) -> Result<EssReport> {
    let d = rows.first().map(|r| r.len()).ok_or(Error::DegenerateSeries)?;
    let mut ess_per_coordinate = Vec::with_capacity(d);
    let mut lags_used = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (e, lags) = ess_with_lags(&col)?;
        ess_per_coordinate.push(e);
        lags_used.push(lags);
    }
    let min_ess = ess_per_coordinate.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EssReport {
        ess_per_coordinate,
        min_ess,
        lags_used,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct MixingOptions {
    pub threshold: f64,
    pub step_block: usize,
    pub max_steps: usize,
    /// A crossing at n steps counts only if the criterion still holds at
    /// every check up to `confirm_factor · n` steps. 1 disables this.
    pub confirm_factor: f64,
    /// Each check happens at least `check_growth` times later than the
    /// previous one (rounded up to a whole block), so long runs cost
    /// O(n log n) instead of O(n² / step_block). 1 checks every block.
    pub check_growth: f64,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self {
            threshold: MIXING_ESS_THRESHOLD,
            step_block: 100,
            max_steps: 1_000_000,
            confirm_factor: 2.0,
            check_growth: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingOutcome {
    /// Steps needed, or `None` if `max_steps` was reached first.
    pub steps: Option<usize>,
    pub steps_run: usize,
    /// Min-coordinate ESS at the last check.
    pub min_ess: f64,
}

/// Smallest checked step count (a multiple of `step_block`) at which every
/// coordinate's ESS, after discarding burn-in, exceeds the threshold.
///
/// `next_state` advances the chain by one step and returns the new state.
/// Short traces of a slowly mixing chain underestimate autocorrelation, so
/// a crossing must survive until the trace is `confirm_factor` times longer.
pub fn mixing_time<F>(mut next_state: F, options: &MixingOptions) -> Result<MixingOutcome>
where
    F: FnMut() -> Result<Vector>,
{
    if options.step_block == 0 || !(options.confirm_factor >= 1.0) || !(options.check_growth >= 1.0) {
        return Err(Error::InvalidParameter(
            "step_block must be positive, confirm_factor and check_growth at least 1".into(),
        ));
    }
    let mut trace: Vec<Vector> = Vec::new();
    let mut min_ess = 0.0;
    let mut candidate: Option<usize> = None;
    while trace.len() < options.max_steps {
        let grown = (trace.len() as f64 * options.check_growth).ceil() as usize;
        let next = grown.max(trace.len() + 1).div_ceil(options.step_block) * options.step_block;
        let block = next.min(options.max_steps) - trace.len();
        for _ in 0..block {
            trace.push(next_state()?);
        }
        let burn = (trace.len() as f64 * BURN_IN_FRACTION).floor() as usize;
        let kept = &trace[burn..];
        if kept.len() < 4 {
            continue;
        }
        min_ess = match ess_report(kept) {
            Ok(r) => r.min_ess,
            Err(Error::DegenerateSeries) => 0.0,
            Err(e) => return Err(e),
        };
        if min_ess > options.threshold {
            let n = *candidate.get_or_insert(trace.len());
            if trace.len() as f64 >= options.confirm_factor * n as f64 {
                return Ok(MixingOutcome {
                    steps: Some(n),
                    steps_run: trace.len(),
                    min_ess,
                });
            }
        } else {
            candidate = None;
        }
    }
    Ok(MixingOutcome {
        steps: None,
        steps_run: trace.len(),
        min_ess,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic sup |F_a − F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("KS needs nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against the density ∝ exp(log_density) on
/// [lo, hi], with the reference CDF obtained by quadrature.
pub fn ks_one_sample(
    samples: &[f64],
    log_density: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("KS needs a nonempty sample".into()));
    }
    let cdf = QuadratureCdf::new(log_density, lo, hi)?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let values = cdf.evaluate_sorted(&xs);
    let mut d: f64 = 0.0;
    for (k, &f) in values.iter().enumerate() {
        d = d.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// CDF of ∝ exp(log_density) on [lo, hi], evaluated by composite
/// Gauss–Legendre integration.
pub struct QuadratureCdf<'a> {
    log_density: &'a dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    log_z: f64,
    panel_width: f64,
}

impl<'a> QuadratureCdf<'a> {
    pub fn new(log_density: &'a dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Self> {
        let q = quadrature_1d(log_density, lo, hi, 256)?;
        Ok(Self {
            log_density,
            lo,
            hi,
            log_z: q.log_z,
            panel_width: (hi - lo) / q.nodes.max(4096) as f64 * GL_ORDER as f64,
        })
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let panels = ((b - a) / self.panel_width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let (nodes, weights) = gauss_legendre();
        let mut s = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (t, w) in nodes.iter().zip(weights.iter()) {
                let x = mid + 0.5 * h * t;
                s += 0.5 * h * w * ((self.log_density)(x) - self.log_z).exp();
            }
        }
        s
    }

    /// F at each point of an ascending list.
    pub fn evaluate_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        let mut prev = self.lo;
        xs.iter()
            .map(|&x| {
                let x = x.clamp(self.lo, self.hi);
                acc += self.mass(prev, x);
                prev = x;
                acc.min(1.0)
            })
            .collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.mass(self.lo, x.clamp(self.lo, self.hi)).min(1.0)
    }
}

const GL_ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on P_n.
fn gauss_legendre() -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| legendre_rule(GL_ORDER));
    (x, w)
}

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub log_z: f64,
    pub mean: f64,
    pub variance: f64,
    /// Node count of the accepted rule.
    pub nodes: usize,
}

fn composite_moments(log_density: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> (f64, f64, f64) {
    let (t, w) = gauss_legendre();
    let h = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(panels * GL_ORDER);
    let mut ws = Vec::with_capacity(panels * GL_ORDER);
    let mut ls = Vec::with_capacity(panels * GL_ORDER);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (ti, wi) in t.iter().zip(w.iter()) {
            let x = mid + 0.5 * h * ti;
            xs.push(x);
            ws.push(0.5 * h * wi);
            ls.push(log_density(x));
        }
    }
    let top = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NAN, f64::NAN);
    }
    let mut z = 0.0;
    let mut m1 = 0.0;
    for ((&x, &wt), &l) in xs.iter().zip(&ws).zip(&ls) {
        let e = wt * (l - top).exp();
        z += e;
        m1 += e * x;
    }
    let mean = m1 / z;
    let var = xs
        .iter()
        .zip(&ws)
        .zip(&ls)
        .map(|((&x, &wt), &l)| wt * (l - top).exp() * (x - mean).powi(2))
        .sum::<f64>()
        / z;
    (top + z.ln(), mean, var)
}

/// Log-partition, mean and variance of ∝ exp(log_density) on [lo, hi] by
/// composite 16-point Gauss–Legendre, doubling the node count until the
/// estimates change by less than 1e-10 (relative).
pub fn quadrature_1d(
    log_density: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n_nodes: usize,
) -> Result<QuadratureResult> {
    const MAX_NODES: usize = 1 << 20;
    const TOL: f64 = 1e-10;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs a finite interval, got [{lo}, {hi}]"
        )));
    }
    let mut panels = n_nodes.div_ceil(GL_ORDER).max(1);
    let mut prev = composite_moments(log_density, lo, hi, panels);
    loop {
        panels *= 2;
        if panels * GL_ORDER > MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                nodes: panels / 2 * GL_ORDER,
            });
        }
        let cur = composite_moments(log_density, lo, hi, panels);
        if !cur.0.is_finite() {
            return Err(Error::InvalidParameter(
                "density vanishes on the whole quadrature interval".into(),
            ));
        }
        let sd = cur.2.max(0.0).sqrt();
        let converged = (cur.0 - prev.0).abs() <= TOL * cur.0.abs().max(1.0)
            && (cur.1 - prev.1).abs() <= TOL * (cur.1.abs() + sd)
            && (cur.2 - prev.2).abs() <= TOL * cur.2.abs();
        if converged {
            return Ok(QuadratureResult {
                log_z: cur.0,
                mean: cur.1,
                variance: cur.2,
                nodes: panels * GL_ORDER,
            });
        }
        prev = cur;
    }
}
