//! Reference samplers for orthant-restricted Gaussians: hit-and-run and
//! naive rejection.

use crate::error::{Error, Result};
use crate::model::{CompositePotential, CompositeTarget, QuadraticPotential};
use crate::oracles::{sample_trunc_normal_1d, Orthant, OrthantSpec, TruncSpec, Unconstrained};
use crate::Vector;
use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Default total trial budget for naive rejection.
pub const DEFAULT_REJECTION_BUDGET: u64 = 1_000_000_000;

/// N(m, Σ) restricted to an orthant, or unrestricted when `orthant` is None.
#[derive(Debug, Clone)]
pub struct RestrictedGaussian {
    pub mean: Vector,
    /// Lower Cholesky factor of Σ.
    pub covariance_factor: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub orthant: Option<OrthantSpec>,
}

impl RestrictedGaussian {
    pub fn from_precision(precision: DMatrix<f64>, mean: Vector, orthant: Option<OrthantSpec>) -> Result<Self> {
        let d = mean.len();
        if precision.nrows() != d || precision.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: precision.nrows(),
            });
        }
        if let Some(o) = &orthant {
            if o.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: o.dim() });
            }
        }
        let chol = precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("precision is not positive definite".into()))?;
        let mut covariance = chol.inverse();
        covariance = (&covariance + covariance.transpose()) * 0.5;
        let covariance_factor = covariance
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("covariance lost definiteness".into()))?
            .l();
        Ok(Self {
            mean,
            covariance_factor,
            precision,
            orthant,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.covariance_factor * self.covariance_factor.transpose()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.orthant.as_ref().is_none_or(|o| o.contains(x))
    }

    /// The same law as f = ½(x − m)ᵀΣ⁻¹(x − m) plus the orthant indicator.
    pub fn composite_target(&self) -> Result<CompositeTarget> {
        let f = Arc::new(QuadraticPotential::new(self.precision.clone(), self.mean.clone())?);
        let g: Arc<dyn CompositePotential> = match &self.orthant {
            Some(o) => Arc::new(Orthant::new(o.clone())),
            None => Arc::new(Unconstrained::new(self.dim())),
        };
        CompositeTarget::new(f, g)
    }

    /// Start point s_i·(|m_i| + σ_i), inside the orthant.
    pub fn start_point(&self) -> Vector {
        let cov = self.covariance();
        Vector::from_fn(self.dim(), |i, _| {
            let r = self.mean[i].abs() + cov[(i, i)].sqrt();
            match &self.orthant {
                Some(o) if o.signs()[i] < 0 => -r,
                _ => r,
            }
        })
    }
}

/// {t : x + t·u in the orthant} as [t_lo, t_hi].
pub fn feasible_interval(x: &Vector, u: &Vector, orthant: Option<&OrthantSpec>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    if let Some(o) = orthant {
        for i in 0..x.len() {
            let s = o.signs()[i] as f64;
            let su = s * u[i];
            if su == 0.0 {
                continue;
            }
            // s·(x_i + t u_i) ≥ 0
            let t = -x[i] / u[i];
            if su > 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
        }
    }
    (lo, hi)
}

/// One hit-and-run move: uniform direction, exact Gaussian draw along the
/// feasible chord.
pub fn hit_and_run_step(target: &RestrictedGaussian, x: &Vector, rng: &mut dyn RngCore) -> Result<Vector> {
    if x.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x.len(),
        });
    }
    if !target.contains(x) {
        return Err(Error::OutsideSupport("hit-and-run start lies outside the orthant".into()));
    }
    let d = x.len();
    let u = loop {
        let z = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut *rng));
        let n = z.norm();
        if n > 0.0 {
            break z / n;
        }
    };
    let pu = &target.precision * &u;
    let quad = u.dot(&pu);
    let lin = pu.dot(&(x - &target.mean));
    let (lo, hi) = feasible_interval(x, &u, target.orthant.as_ref());
    let spec = TruncSpec::new(-lin / quad, 1.0 / quad.sqrt(), lo.min(0.0), hi.max(0.0))?;
    let t = sample_trunc_normal_1d(&spec, rng)?;
    let mut next = x + &u * t;
    if let Some(o) = &target.orthant {
        // the chord endpoint can land a rounding error outside
        next = o.project(&next);
    }
    Ok(next)
}

/// Stateful hit-and-run chain.
#[derive(Debug, Clone)]
pub struct HitAndRunChain {
    target: RestrictedGaussian,
    x: Vector,
    pub steps: u64,
}

impl HitAndRunChain {
    pub fn new(target: RestrictedGaussian) -> Self {
        let x = target.start_point();
        Self { target, x, steps: 0 }
    }

    pub fn with_start(target: RestrictedGaussian, x: Vector) -> Result<Self> {
        if !target.contains(&x) {
            return Err(Error::OutsideSupport("start lies outside the orthant".into()));
        }
        Ok(Self { target, x, steps: 0 })
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn step(&mut self, rng: &mut dyn RngCore) -> Result<&Vector> {
        self.x = hit_and_run_step(&self.target, &self.x, rng)?;
        self.steps += 1;
        Ok(&self.x)
    }
}

#[derive(Debug, Clone)]
pub struct RejectionRun {
    pub samples: Vec<Vector>,
    pub trials: u64,
    /// True when the budget ran out before `n` samples were accepted.
    pub exhausted: bool,
}

/// Draw m + Lz until `n` draws land in the orthant.
pub fn naive_rejection(target: &RestrictedGaussian, n: usize, budget: u64, rng: &mut dyn RngCore) -> Result<RejectionRun> {
    if n == 0 {
        return Err(Error::InvalidParameter("naive rejection needs n ≥ 1".into()));
    }
    let d = target.dim();
    let mut samples = Vec::with_capacity(n);
    let mut trials = 0;
    while samples.len() < n {
        if trials >= budget {
            return Ok(RejectionRun {
                samples,
                trials,
                exhausted: true,
            });
        }
        trials += 1;
        let z = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut *rng));
        let x = &target.mean + &target.covariance_factor * z;
        if target.contains(&x) {
            samples.push(x);
        }
    }
    Ok(RejectionRun {
        samples,
        trials,
        exhausted: false,
    })
}
