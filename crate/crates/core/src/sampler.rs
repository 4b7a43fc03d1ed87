//! The composite sampler: linear shift to a shared minimizer, an
//! approximate rejection filter over an alternating (x, y) chain, and the
//! inner y-sampler.

use crate::error::{Error, Result};
use crate::model::{fold_factors, shift_linear, CompositePotential, CompositeTarget, IsotropicGaussianFactor, SmoothPotential};
use crate::optimize::{fista, FistaOptions};
use crate::Vector;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

/// Iteration constant of the theoretical analysis.
pub const PAPER_LOOP_CONSTANT: f64 = 6_710_886_400.0; // 2^26 · 100
/// Practical iteration constant.
pub const DEFAULT_LOOP_CONSTANT: f64 = 10.0;
/// Upper bound on the density-ratio estimate that the outer filter divides by.
pub const DEFAULT_ACCEPT_CAP: f64 = 4.0;
/// Steps of the Metropolized fallback are ⌈c · d · ln(d/δ)⌉.
pub const FALLBACK_CONSTANT: f64 = 20.0;

const MAX_REJECTION_ROUNDS: usize = 10_000_000;

/// 4·√(d·ln(log_arg)/μ), the radius of a high-probability ball around x*.
pub fn concentration_radius(d: usize, mu: f64, log_arg: f64) -> f64 {
    4.0 * (d as f64 * log_arg.ln().max(0.0) / mu).sqrt()
}

/// Radius of the region where the outer filter evaluates θ̂.
pub fn omega_radius(d: usize, kappa: f64, mu: f64, epsilon: f64) -> f64 {
    concentration_radius(d, mu, 288.0 * kappa / epsilon)
}

/// R_δ = 4·√(d·ln(16κ/δ)/μ).
pub fn r_delta(d: usize, kappa: f64, mu: f64, delta: f64) -> f64 {
    concentration_radius(d, mu, 16.0 * kappa / delta)
}

/// η = 1/(32·L·κ·d·ln(16κ/δ)).
pub fn theory_eta(l: f64, kappa: f64, d: usize, delta: f64) -> f64 {
    1.0 / (32.0 * l * kappa * d as f64 * (16.0 * kappa / delta).ln())
}

/// K = c/(ημ) · ln(d·ln(16κ)/(4δ)), rounded up.
pub fn theory_k(loop_constant: f64, eta: f64, mu: f64, d: usize, kappa: f64, delta: f64) -> usize {
    let log_term = (d as f64 * (16.0 * kappa).ln() / (4.0 * delta)).ln().max(1.0);
    (loop_constant / (eta * mu) * log_term).ceil().max(1.0) as usize
}

/// What the outer filter does when θ̂ exceeds the acceptance cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaPolicy {
    /// Fail with `ThetaBoundViolated`. The cap is a theorem at the
    /// closed-form η, so an excess means L or η is mis-set.
    #[default]
    Strict,
    /// Accept when τ ≤ θ̂/cap for τ ~ U[0, 1], so an excess means certain
    /// acceptance. Excesses are counted. Needed for step sizes larger than
    /// the closed-form η, where the cap no longer holds.
    Literal,
}

/// All step sizes and budgets of one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerParams {
    pub epsilon: f64,
    /// TV budget of the joint chain, ε/18.
    pub delta: f64,
    pub eta: f64,
    pub k_iters: usize,
    pub loop_constant: f64,
    pub omega_radius: f64,
    pub accept_cap: f64,
    pub fallback_constant: f64,
    pub paper_faithful: bool,
    pub theta_policy: ThetaPolicy,
    /// Outer-filter rounds before giving up.
    pub max_outer_loops: usize,
    dim: usize,
    smoothness: f64,
    strong_convexity: f64,
    k_fixed: bool,
}

impl SamplerParams {
    /// Parameters from the closed-form formulas for the given smooth part.
    pub fn theory(f: &dyn SmoothPotential, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        let (d, l, mu) = (f.dim(), f.smoothness(), f.strong_convexity());
        if !(l > 0.0 && mu > 0.0 && mu <= l) {
            return Err(Error::InvalidParameter(format!("need 0 < μ ≤ L, got μ={mu}, L={l}")));
        }
        let kappa = l / mu;
        let delta = epsilon / 18.0;
        let eta = theory_eta(l, kappa, d, delta);
        let mut p = Self {
            epsilon,
            delta,
            eta,
            k_iters: 1,
            loop_constant: DEFAULT_LOOP_CONSTANT,
            omega_radius: omega_radius(d, kappa, mu, epsilon),
            accept_cap: DEFAULT_ACCEPT_CAP,
            fallback_constant: FALLBACK_CONSTANT,
            paper_faithful: false,
            theta_policy: ThetaPolicy::Strict,
            max_outer_loops: 100_000,
            dim: d,
            smoothness: l,
            strong_convexity: mu,
            k_fixed: false,
        };
        p.refresh_k();
        Ok(p)
    }

    fn refresh_k(&mut self) {
        if !self.k_fixed {
            self.k_iters = theory_k(
                self.loop_constant,
                self.eta,
                self.strong_convexity,
                self.dim,
                self.kappa(),
                self.delta,
            );
        }
    }

    pub fn kappa(&self) -> f64 {
        self.smoothness / self.strong_convexity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    /// Override η; K follows unless it was fixed explicitly.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self.refresh_k();
        self
    }

    pub fn with_k_iters(mut self, k: usize) -> Self {
        self.k_iters = k;
        self.k_fixed = true;
        self
    }

    pub fn with_loop_constant(mut self, c: f64) -> Self {
        self.loop_constant = c;
        self.refresh_k();
        self
    }

    pub fn with_accept_cap(mut self, cap: f64) -> Self {
        self.accept_cap = cap;
        self
    }

    pub fn with_theta_policy(mut self, policy: ThetaPolicy) -> Self {
        self.theta_policy = policy;
        self
    }

    /// Restore the analysis constant for K and enforce the step-size
    /// preconditions of the analysis.
    pub fn paper_faithful(mut self) -> Self {
        self.paper_faithful = true;
        self.loop_constant = PAPER_LOOP_CONSTANT;
        self.refresh_k();
        self
    }

    /// Inner TV budget for each y-draw inside the joint chain.
    pub fn inner_delta(&self) -> f64 {
        let d = self.dim as f64;
        let log_term = (d * self.kappa() / self.delta).ln().max(1.0);
        self.delta / (2.0 * self.k_iters as f64 * d * log_term)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.eta * self.smoothness > 1.0 {
            return bad(format!("eta·L = {} exceeds 1", self.eta * self.smoothness));
        }
        if self.k_iters == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.accept_cap >= 1.0) {
            return bad(format!("acceptance cap must be at least 1, got {}", self.accept_cap));
        }
        if !(self.loop_constant > 0.0) || !(self.fallback_constant > 0.0) {
            return bad("loop and fallback constants must be positive".into());
        }
        if self.paper_faithful {
            let lhs = self.eta * self.smoothness.powi(2) * self.omega_radius.powi(2);
            // equality holds at the theoretical η, so allow round-off
            if lhs > 0.5 * (1.0 + 1e-9) {
                return bad(format!("eta·L²·Ω² = {lhs} exceeds 1/2"));
            }
        }
        Ok(())
    }
}

/// Recorded joint-chain run.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub initial: Vector,
    /// x₁ … x_K.
    pub iterates: Vec<Vector>,
    /// y₁ … y_K.
    pub y_iterates: Option<Vec<Vector>>,
    pub gradient_calls: u64,
    pub oracle_calls: u64,
    pub seed: Option<u64>,
    pub params: SamplerParams,
}

/// Log of the unbiased estimate of p(x)/p̂(x), the ratio between the target
/// and the x-marginal of the joint density, from one y ~ π_x.
///
/// The g(x) terms cancel, so g is never evaluated. The gradient term enters
/// with a minus sign: completing the square in the Gaussian integral over y
/// gives exp(+η‖∇f‖²/(2(1+ηL))) in E[α], which θ̂ has to divide out.
pub fn theta_hat(f: &dyn SmoothPotential, x: &Vector, x_star: &Vector, eta: f64, l: f64, y: &Vector) -> f64 {
    let grad = f.gradient(x);
    log_theta_with(f, x, &grad, f.value(x), x_star, eta, l, y)
}

#[allow(clippy::too_many_arguments)]
fn log_theta_with(
    f: &dyn SmoothPotential,
    x: &Vector,
    grad: &Vector,
    fx: f64,
    x_star: &Vector,
    eta: f64,
    l: f64,
    y: &Vector,
) -> f64 {
    let d = x.len() as f64;
    let step = y - x;
    0.5 * d * (eta * l).ln_1p() + f.value(y) - fx - grad.dot(&step) - 0.5 * l * step.norm_squared()
        - eta * grad.norm_squared() / (2.0 * (1.0 + eta * l))
        + 0.5 * eta * l * l * (x - x_star).norm_squared()
}

#[derive(Debug, Clone)]
pub struct SampleYOutcome {
    pub y: Vector,
    /// Rejection rounds, or Metropolized steps on the fallback path.
    pub iterations: usize,
    pub used_fallback: bool,
    pub gradient_calls: u64,
}

/// Draw y ∝ exp(−f(y) − ‖y − x‖²/(2η)).
///
/// Near x* this is exact rejection from the linearization of f; far from
/// x* it falls back to a Metropolis-adjusted Langevin chain.
pub fn sample_y(
    f: &dyn SmoothPotential,
    x: &Vector,
    x_star: &Vector,
    eta: f64,
    delta: f64,
    rng: &mut dyn RngCore,
) -> Result<SampleYOutcome> {
    sample_y_with(f, x, x_star, eta, delta, FALLBACK_CONSTANT, rng)
}

fn sample_y_with(
    f: &dyn SmoothPotential,
    x: &Vector,
    x_star: &Vector,
    eta: f64,
    delta: f64,
    fallback_constant: f64,
    rng: &mut dyn RngCore,
) -> Result<SampleYOutcome> {
    let (l, mu) = (f.smoothness(), f.strong_convexity());
    if !(eta > 0.0 && eta * l < 1.0) {
        return Err(Error::InvalidParameter(format!("Sample-Y needs 0 < ηL < 1, got ηL = {}", eta * l)));
    }
    let d = x.len();
    let kappa = l / mu;
    let radius = (kappa * d as f64 * (16.0 * kappa / delta).ln()).sqrt() * r_delta(d, kappa, mu, delta);
    let grad = f.gradient(x);
    let proposal_mean = x - &grad * eta;

    if (x - x_star).norm() > radius {
        let steps = (fallback_constant * d as f64 * (d as f64 / delta).ln().max(1.0)).ceil() as usize;
        let h = 1.0 / ((l + 1.0 / eta) * d as f64).sqrt();
        let potential = |y: &Vector| f.value(y) + (y - x).norm_squared() / (2.0 * eta);
        let potential_grad = |y: &Vector| f.gradient(y) + (y - x) / eta;
        let run = fallback_metropolized_chain(&potential, &potential_grad, &proposal_mean, steps, h, rng)?;
        return Ok(SampleYOutcome {
            y: run.state,
            iterations: steps,
            used_fallback: true,
            gradient_calls: 1 + run.gradient_calls,
        });
    }

    let fx = f.value(x);
    let sd = eta.sqrt();
    for round in 1..=MAX_REJECTION_ROUNDS {
        let y = Vector::from_fn(d, |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            proposal_mean[i] + sd * z
        });
        let fy = f.value(&y);
        let log_accept = fx + grad.dot(&(&y - x)) - fy;
        // round-off in f scales with its magnitude
        let slack = 1e-12 * fx.abs().max(fy.abs()).max(1.0);
        if log_accept > slack {
            return Err(Error::ConvexityViolated {
                probability: log_accept.exp(),
            });
        }
        if rng.random::<f64>().ln() < log_accept {
            return Ok(SampleYOutcome {
                y,
                iterations: round,
                used_fallback: false,
                gradient_calls: 1,
            });
        }
    }
    Err(Error::RejectionBudget {
        trials: MAX_REJECTION_ROUNDS as u64,
    })
}

#[derive(Debug, Clone)]
pub struct MalaRun {
    pub state: Vector,
    pub accepted: usize,
    pub gradient_calls: u64,
}

/// Metropolis-adjusted Langevin chain on exp(−U):
/// propose y′ ~ N(y − (h²/2)∇U(y), h²I), accept by the exact ratio.
pub fn fallback_metropolized_chain(
    potential: &dyn Fn(&Vector) -> f64,
    potential_grad: &dyn Fn(&Vector) -> Vector,
    x0: &Vector,
    steps: usize,
    step_size: f64,
    rng: &mut dyn RngCore,
) -> Result<MalaRun> {
    if steps == 0 || !(step_size > 0.0) {
        return Err(Error::InvalidParameter("fallback needs steps ≥ 1 and a positive step size".into()));
    }
    let h2 = step_size * step_size;
    let log_q = |to: &Vector, from: &Vector, grad_from: &Vector| -> f64 {
        -(to - from + grad_from * (0.5 * h2)).norm_squared() / (2.0 * h2)
    };
    let mut y = x0.clone();
    let mut u = potential(&y);
    let mut g = potential_grad(&y);
    let mut accepted = 0;
    let mut calls = 1;
    for _ in 0..steps {
        let prop = Vector::from_fn(y.len(), |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            y[i] - 0.5 * h2 * g[i] + step_size * z
        });
        let u_prop = potential(&prop);
        let g_prop = potential_grad(&prop);
        calls += 1;
        let log_ratio = u - u_prop + log_q(&y, &prop, &g_prop) - log_q(&prop, &y, &g);
        if rng.random::<f64>().ln() < log_ratio {
            y = prop;
            u = u_prop;
            g = g_prop;
            accepted += 1;
        }
    }
    Ok(MalaRun {
        state: y,
        accepted,
        gradient_calls: calls,
    })
}

/// Log acceptance ratio of one MALA move y → y′.
pub fn mala_log_ratio(
    potential: &dyn Fn(&Vector) -> f64,
    potential_grad: &dyn Fn(&Vector) -> Vector,
    y: &Vector,
    prop: &Vector,
    step_size: f64,
) -> f64 {
    let h2 = step_size * step_size;
    let (gy, gp) = (potential_grad(y), potential_grad(prop));
    let fwd = -(prop - y + &gy * (0.5 * h2)).norm_squared() / (2.0 * h2);
    let bwd = -(y - prop + &gp * (0.5 * h2)).norm_squared() / (2.0 * h2);
    potential(y) - potential(prop) + bwd - fwd
}

/// The alternating chain x → y ~ π_x → x′ ~ π_y on the joint density
/// ∝ exp(−f(y) − g(x) − ‖y − x‖²/(2η) − (ηL²/2)‖x − x*‖²).
///
/// `f` and `g` must share the minimizer `x_star`.
pub struct JointChain {
    f: std::sync::Arc<dyn SmoothPotential>,
    g: std::sync::Arc<dyn CompositePotential>,
    x_star: Vector,
    eta: f64,
    inner_delta: f64,
    fallback_constant: f64,
    x: Vector,
    last_y: Option<Vector>,
    pub gradient_calls: u64,
    pub oracle_calls: u64,
    pub fallback_calls: u64,
}

impl JointChain {
    /// Start from x₀ ∝ exp(−((L + ηL²)/2)‖x − x*‖² − g(x)).
    pub fn start(shared: &CompositeTarget, params: &SamplerParams, rng: &mut dyn RngCore) -> Result<Self> {
        params.validate()?;
        let x_star = shared
            .x_star
            .clone()
            .ok_or_else(|| Error::MissingMinimizer("joint chain needs x*".into()))?;
        shared.check_dim(&x_star)?;
        let l = shared.f.smoothness();
        let eta = params.eta;
        let start = IsotropicGaussianFactor::new(1.0 / (l + eta * l * l), x_star.clone())?;
        let x = shared.g.sample_restricted(&start, rng)?;
        Ok(Self {
            f: shared.f.clone(),
            g: shared.g.clone(),
            x_star,
            eta,
            inner_delta: params.inner_delta(),
            fallback_constant: params.fallback_constant,
            x,
            last_y: None,
            gradient_calls: 0,
            oracle_calls: 1,
            fallback_calls: 0,
        })
    }

    /// Replace the current x, e.g. with an exact draw from the x-marginal.
    pub fn with_state(mut self, x: Vector) -> Result<Self> {
        if x.len() != self.x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                got: x.len(),
            });
        }
        self.x = x;
        self.last_y = None;
        Ok(self)
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn last_y(&self) -> Option<&Vector> {
        self.last_y.as_ref()
    }

    /// One y-update followed by one x-update.
    pub fn step(&mut self, rng: &mut dyn RngCore) -> Result<&Vector> {
        let out = sample_y_with(
            &*self.f,
            &self.x,
            &self.x_star,
            self.eta,
            self.inner_delta,
            self.fallback_constant,
            rng,
        )?;
        self.gradient_calls += out.gradient_calls;
        self.fallback_calls += out.used_fallback as u64;
        let l = self.f.smoothness();
        let coupling = IsotropicGaussianFactor::new(self.eta, out.y.clone())?;
        let anchor = IsotropicGaussianFactor::new(1.0 / (self.eta * l * l), self.x_star.clone())?;
        let factor = fold_factors(&coupling, &anchor)?;
        self.x = self.g.sample_restricted(&factor, rng)?;
        self.oracle_calls += 1;
        self.last_y = Some(out.y);
        Ok(&self.x)
    }
}

/// Run the joint chain for `params.k_iters` rounds and keep the whole path.
pub fn sample_joint_dist(shared: &CompositeTarget, params: &SamplerParams, rng: &mut dyn RngCore) -> Result<ChainTrace> {
    let mut chain = JointChain::start(shared, params, rng)?;
    let initial = chain.state().clone();
    let mut iterates = Vec::with_capacity(params.k_iters);
    let mut ys = Vec::with_capacity(params.k_iters);
    for _ in 0..params.k_iters {
        iterates.push(chain.step(rng)?.clone());
        ys.push(chain.last_y().cloned().expect("step records y"));
    }
    Ok(ChainTrace {
        initial,
        iterates,
        y_iterates: Some(ys),
        gradient_calls: chain.gradient_calls,
        oracle_calls: chain.oracle_calls,
        seed: None,
        params: params.clone(),
    })
}

/// One accepted draw with its cost.
#[derive(Debug, Clone)]
pub struct CompositeDraw {
    pub x: Vector,
    pub outer_loops: usize,
    pub gradient_calls: u64,
    pub oracle_calls: u64,
    /// Largest log θ̂ seen while producing this draw.
    pub max_log_theta: f64,
    /// θ̂ evaluations inside Ω.
    pub theta_evaluations: u64,
    /// Evaluations with θ̂ above the cap (only nonzero under
    /// [`ThetaPolicy::Literal`]).
    pub cap_exceedances: u64,
}

/// Approximate rejection filter over joint-chain endpoints, for f and g
/// that share the minimizer `shared.x_star`.
pub fn composite_sample_shared_min(
    shared: &CompositeTarget,
    params: &SamplerParams,
    rng: &mut dyn RngCore,
) -> Result<CompositeDraw> {
    params.validate()?;
    let x_star = shared
        .x_star
        .as_ref()
        .ok_or_else(|| Error::MissingMinimizer("shared-minimizer sampler needs x*".into()))?;
    let f = &*shared.f;
    let l = f.smoothness();
    let log_cap = params.accept_cap.ln();
    let mut gradient_calls = 0;
    let mut oracle_calls = 0;
    let mut max_log_theta = f64::NEG_INFINITY;
    let mut theta_evaluations = 0;
    let mut cap_exceedances = 0;
    for outer in 1..=params.max_outer_loops {
        let mut chain = JointChain::start(shared, params, rng)?;
        for _ in 0..params.k_iters {
            chain.step(rng)?;
        }
        gradient_calls += chain.gradient_calls;
        oracle_calls += chain.oracle_calls;
        let x = chain.state().clone();
        let distance = (&x - x_star).norm();
        if distance > params.omega_radius {
            continue;
        }
        let y = sample_y_with(f, &x, x_star, params.eta, params.delta, params.fallback_constant, rng)?;
        let grad = f.gradient(&x);
        gradient_calls += y.gradient_calls + 1;
        let log_theta = log_theta_with(f, &x, &grad, f.value(&x), x_star, params.eta, l, &y.y);
        max_log_theta = max_log_theta.max(log_theta);
        theta_evaluations += 1;
        if log_theta > log_cap {
            if params.theta_policy == ThetaPolicy::Strict {
                return Err(Error::ThetaBoundViolated {
                    theta: log_theta.exp(),
                    cap: params.accept_cap,
                    distance,
                });
            }
            cap_exceedances += 1;
        }
        if rng.random::<f64>().ln() <= log_theta - log_cap {
            return Ok(CompositeDraw {
                x,
                outer_loops: outer,
                gradient_calls,
                oracle_calls,
                max_log_theta,
                theta_evaluations,
                cap_exceedances,
            });
        }
    }
    Err(Error::RejectionBudget {
        trials: params.max_outer_loops as u64,
    })
}

/// Shift `target` so f and g share its minimizer, computing x* by FISTA
/// when it is not cached.
pub fn prepare_shared_min(target: &CompositeTarget) -> Result<CompositeTarget> {
    let x_star = match &target.x_star {
        Some(x) => x.clone(),
        None => {
            let start = Vector::zeros(target.dim());
            let opt = fista(&*target.f, &*target.g, &start, &FistaOptions::default())?;
            if !opt.converged {
                return Err(Error::MissingMinimizer(format!(
                    "FISTA stopped at residual {} without converging",
                    opt.residual
                )));
            }
            opt.x_star
        }
    };
    let c = target.f.gradient(&x_star);
    shift_linear(target, &c)?.with_minimizer(x_star)
}

/// One draw from ∝ exp(−f − g) with explicit parameters.
pub fn composite_sample_with(target: &CompositeTarget, params: &SamplerParams, rng: &mut dyn RngCore) -> Result<CompositeDraw> {
    let shared = prepare_shared_min(target)?;
    composite_sample_shared_min(&shared, params, rng)
}

/// One draw within total variation ε of ∝ exp(−f − g), using the
/// closed-form parameters.
pub fn composite_sample(target: &CompositeTarget, epsilon: f64, rng: &mut dyn RngCore) -> Result<Vector> {
    let params = SamplerParams::theory(&*target.f, epsilon)?;
    composite_sample_with(target, &params, rng).map(|d| d.x)
}

/// Repeated draws sharing one minimizer computation.
pub fn composite_sample_many(
    target: &CompositeTarget,
    params: &SamplerParams,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<CompositeDraw>> {
    let shared = prepare_shared_min(target)?;
    (0..n).map(|_| composite_sample_shared_min(&shared, params, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LogCoshPotential, QuadraticPotential};
    use crate::oracles::{Orthant, Unconstrained};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn gaussian_target(d: usize, mu: f64) -> CompositeTarget {
        let f = Arc::new(QuadraticPotential::isotropic(d, mu).unwrap());
        CompositeTarget::new(f, Arc::new(Unconstrained::new(d))).unwrap()
    }

    #[test]
    fn theta_at_minimizer_is_volume_term() {
        let f = QuadraticPotential::isotropic(4, 2.0).unwrap();
        let x = Vector::zeros(4);
        let lt = theta_hat(&f, &x, &x, 0.05, 2.0, &x);
        assert!((lt - 2.0 * 0.1_f64.ln_1p()).abs() < 1e-15);
    }

    #[test]
    fn theta_respects_smoothness_bound() {
        let f = LogCoshPotential::new(Vector::from_vec(vec![1.0, 3.0]), Vector::from_vec(vec![0.5, -1.0]), 0.5).unwrap();
        let l = f.smoothness();
        let eta = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x_star = Vector::from_vec(vec![0.5, -1.0]);
        for _ in 0..1000 {
            let x = Vector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let y = Vector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let g = f.gradient(&x);
            let bound = (eta * l).ln_1p() - eta * g.norm_squared() / (2.0 * (1.0 + eta * l))
                + 0.5 * eta * l * l * (&x - &x_star).norm_squared();
            assert!(theta_hat(&f, &x, &x_star, eta, l, &y) <= bound + 1e-12);
        }
    }

    #[test]
    fn theory_eta_matches_formula() {
        let f = QuadraticPotential::diagonal(&[0.5, 5.0], Vector::zeros(2)).unwrap();
        let p = SamplerParams::theory(&f, 0.1).unwrap();
        let delta: f64 = 0.1 / 18.0;
        let expected = 1.0 / (32.0 * 5.0 * 10.0 * 2.0 * (160.0 / delta).ln());
        assert!((p.eta - expected).abs() < 1e-18);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn paper_faithful_constraint_is_tight_at_theory_eta() {
        let f = QuadraticPotential::diagonal(&[0.5, 5.0, 1.0], Vector::zeros(3)).unwrap();
        let p = SamplerParams::theory(&f, 0.2).unwrap().paper_faithful();
        let lhs = p.eta * 25.0 * p.omega_radius.powi(2);
        assert!((lhs - 0.5).abs() < 1e-12);
        assert!(p.validate().is_ok());
        assert!(p.clone().with_eta(p.eta * 1.01).validate().is_err());
        assert!(p.k_iters > 1_000_000_000);
    }

    #[test]
    fn invalid_params_rejected() {
        let f = QuadraticPotential::isotropic(2, 1.0).unwrap();
        assert!(SamplerParams::theory(&f, 0.0).is_err());
        assert!(SamplerParams::theory(&f, 1.5).is_err());
        let p = SamplerParams::theory(&f, 0.5).unwrap();
        assert!(p.clone().with_eta(2.0).validate().is_err());
        assert!(p.clone().with_k_iters(0).validate().is_err());
        assert!(p.with_accept_cap(0.5).validate().is_err());
    }

    #[test]
    fn explicit_k_survives_eta_override() {
        let f = QuadraticPotential::isotropic(2, 1.0).unwrap();
        let p = SamplerParams::theory(&f, 0.5).unwrap().with_k_iters(500).with_eta(0.01);
        assert_eq!(p.k_iters, 500);
    }

    #[test]
    fn sample_y_quadratic_matches_completed_square() {
        let (mu, eta, d) = (2.0, 0.1, 3);
        let f = QuadraticPotential::isotropic(d, mu).unwrap();
        let x = Vector::zeros(d);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n = 100_000;
        let var = 1.0 / (1.0 / eta + mu);
        let mut s1 = Vector::zeros(d);
        let mut s2 = Vector::zeros(d);
        let mut rounds = 0;
        for _ in 0..n {
            let out = sample_y(&f, &x, &x, eta, 0.01, &mut rng).unwrap();
            assert!(!out.used_fallback);
            rounds += out.iterations;
            s1 += &out.y;
            s2 += out.y.map(|v| v * v);
        }
        for i in 0..d {
            let m = s1[i] / n as f64;
            let v = s2[i] / n as f64 - m * m;
            assert!(m.abs() < 3.0 * (var / n as f64).sqrt(), "mean {m}");
            // sd of the sample variance is √(2/n)·σ²
            assert!((v - var).abs() < 3.0 * (2.0 / n as f64).sqrt() * var, "var {v} vs {var}");
        }
        // acceptance rate is the Gaussian normalizer ratio (1 + ημ)^{-d/2}
        let p = (1.0 + eta * mu).powf(-(d as f64) / 2.0);
        let mean_rounds = rounds as f64 / n as f64;
        let se = ((1.0 - p) / (p * p) / n as f64).sqrt();
        assert!((mean_rounds - 1.0 / p).abs() < 3.0 * se, "{mean_rounds}");
    }

    #[test]
    fn sample_y_flat_f_accepts_first_round() {
        let f = QuadraticPotential::isotropic(2, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Vector::zeros(2);
        for _ in 0..100 {
            assert_eq!(sample_y(&f, &x, &x, 0.1, 0.01, &mut rng).unwrap().iterations, 1);
        }
    }

    #[test]
    fn sample_y_far_point_uses_fallback() {
        let f = QuadraticPotential::isotropic(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Vector::from_element(2, 1e4);
        let out = sample_y(&f, &x, &Vector::zeros(2), 0.1, 0.1, &mut rng).unwrap();
        assert!(out.used_fallback);
        // π_x is N(x/(1+η), η/(1+η)); the draw should sit near its mean
        assert!((out.y - &x / 1.1).norm() < 10.0);
    }

    struct Concave;
    impl SmoothPotential for Concave {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector) -> f64 {
            -x[0] * x[0]
        }
        fn gradient(&self, x: &Vector) -> Vector {
            x * -2.0
        }
        fn smoothness(&self) -> f64 {
            1.0
        }
        fn strong_convexity(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn sample_y_detects_nonconvex_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Vector::from_element(1, 0.0);
        let err = sample_y(&Concave, &x, &x, 0.5, 0.1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::ConvexityViolated { .. }));
    }

    #[test]
    fn mala_moments_on_standard_normal() {
        let u = |y: &Vector| 0.5 * y.norm_squared();
        let gu = |y: &Vector| y.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut s1, mut s2) = (0.0, 0.0);
        let n = 10_000;
        let mut y = Vector::zeros(1);
        for _ in 0..n {
            y = fallback_metropolized_chain(&u, &gu, &y, 1, 1.0, &mut rng).unwrap().state;
            s1 += y[0];
            s2 += y[0] * y[0];
        }
        let m = s1 / n as f64;
        let v = s2 / n as f64 - m * m;
        // consecutive states are correlated; allow a generous effective size
        let se = (1.0 / (n as f64 / 4.0)).sqrt();
        assert!(m.abs() < 3.0 * se, "{m}");
        assert!((v - 1.0).abs() < 3.0 * 2f64.sqrt() * se, "{v}");
    }

    #[test]
    fn mala_zero_move_ratio_is_one() {
        let u = |y: &Vector| y.map(|v| v.cosh().ln()).sum();
        let gu = |y: &Vector| y.map(f64::tanh);
        let y = Vector::from_vec(vec![0.3, -1.2]);
        assert_eq!(mala_log_ratio(&u, &gu, &y, &y, 0.5), 0.0);
    }

    #[test]
    fn mala_small_step_accepts_almost_always() {
        let u = |y: &Vector| 0.5 * y.norm_squared();
        let gu = |y: &Vector| y.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let run = fallback_metropolized_chain(&u, &gu, &Vector::from_element(3, 1.0), 10_000, 1e-4, &mut rng).unwrap();
        assert!(run.accepted as f64 / 10_000.0 >= 0.99);
    }

    #[test]
    fn joint_chain_counts_calls() {
        let t = gaussian_target(2, 1.0).with_minimizer(Vector::zeros(2)).unwrap();
        let p = SamplerParams::theory(&*t.f, 0.5).unwrap().with_eta(0.05).with_k_iters(20);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tr = sample_joint_dist(&t, &p, &mut rng).unwrap();
        assert_eq!(tr.iterates.len(), 20);
        assert_eq!(tr.y_iterates.as_ref().unwrap().len(), 20);
        assert_eq!(tr.oracle_calls, 21);
        assert!(tr.gradient_calls >= 20);
    }

    #[test]
    fn missing_minimizer_without_prox_is_an_error() {
        struct NoProx;
        impl CompositePotential for NoProx {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _x: &Vector) -> f64 {
                0.0
            }
            fn sample_restricted(&self, f: &IsotropicGaussianFactor, _rng: &mut dyn RngCore) -> Result<Vector> {
                Ok(f.center.clone())
            }
        }
        let f = Arc::new(QuadraticPotential::isotropic(1, 1.0).unwrap());
        let t = CompositeTarget::new(f, Arc::new(NoProx)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let err = composite_sample(&t, 0.5, &mut rng).unwrap_err();
        assert!(matches!(err, Error::MissingMinimizer(_)));
    }

    #[test]
    fn shift_is_identity_when_minimizer_already_shared() {
        let t = gaussian_target(3, 1.0);
        let s = prepare_shared_min(&t).unwrap();
        let x = Vector::from_vec(vec![0.2, -1.0, 4.0]);
        assert!((s.f.value(&x) - t.f.value(&x)).abs() < 1e-12);
        assert!((s.g.value(&x) - t.g.value(&x)).abs() < 1e-12);
    }

    #[test]
    fn orthant_target_draws_stay_in_support() {
        let f = Arc::new(QuadraticPotential::diagonal(&[1.0, 2.0], Vector::from_vec(vec![-0.5, 0.3])).unwrap());
        let t = CompositeTarget::new(f.clone(), Arc::new(Orthant::positive(2))).unwrap();
        let p = SamplerParams::theory(&*f, 0.5).unwrap().with_eta(0.02).with_k_iters(200);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in composite_sample_many(&t, &p, 50, &mut rng).unwrap() {
            assert!(d.x.iter().all(|&v| v >= 0.0));
            assert!(d.max_log_theta <= DEFAULT_ACCEPT_CAP.ln());
        }
    }

    #[test]
    fn theta_policy_strict_errors_literal_counts() {
        // a large η and unit cap force θ̂ over the cap
        let t = gaussian_target(4, 1.0);
        let base = SamplerParams::theory(&*t.f, 0.5).unwrap().with_eta(0.5).with_k_iters(5).with_accept_cap(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let strict = (0..200).map(|_| composite_sample_with(&t, &base, &mut rng)).find(|r| r.is_err());
        assert!(matches!(strict, Some(Err(Error::ThetaBoundViolated { .. }))));

        let literal = base.with_theta_policy(ThetaPolicy::Literal);
        let exceed: u64 = (0..200)
            .map(|_| composite_sample_with(&t, &literal, &mut rng).unwrap().cap_exceedances)
            .sum();
        assert!(exceed > 0);
    }
}
