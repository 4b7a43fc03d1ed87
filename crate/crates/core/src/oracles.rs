//! Exact restricted Gaussian oracles for coordinate-separable `g`.
//!
//! Every oracle here reduces to independent one-dimensional truncated normals,
//! drawn by [`sample_trunc_normal_1d`].

use crate::error::{Error, Result};
use crate::model::{CompositePotential, IsotropicGaussianFactor};
use crate::special::{norm_cdf, norm_log_cdf, norm_log_interval, norm_quantile, norm_sf};
use crate::Vector;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

/// Standardized distance from the mean beyond which the tail sampler is used.
pub const TAIL_CROSSOVER: f64 = 4.0;

/// N(mean, sd²) conditioned on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncSpec {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncSpec {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        let spec = Self { mean, sd, lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sd.is_finite() && self.sd > 0.0) || !self.mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncated normal needs finite mean and positive finite sd, got mean {} sd {}",
                self.mean, self.sd
            )));
        }
        if !(self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "truncation interval [{}, {}] is empty",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn standardized(&self) -> (f64, f64) {
        ((self.lo - self.mean) / self.sd, (self.hi - self.mean) / self.sd)
    }

    /// ln P(lo ≤ X ≤ hi).
    pub fn log_mass(&self) -> f64 {
        let (a, b) = self.standardized();
        norm_log_interval(a, b)
    }
}

/// A draw together with the number of proposals it consumed
/// (1 for the inverse-CDF branch).
#[derive(Debug, Clone, Copy)]
pub struct TruncDraw {
    pub value: f64,
    pub rounds: u32,
}

/// Exact draw from a truncated normal.
pub fn sample_trunc_normal_1d<R: RngCore + ?Sized>(spec: &TruncSpec, rng: &mut R) -> Result<f64> {
    sample_trunc_normal_counted(spec, rng).map(|d| d.value)
}

/// [`sample_trunc_normal_1d`], also reporting the rejection rounds used.
pub fn sample_trunc_normal_counted<R: RngCore + ?Sized>(
    spec: &TruncSpec,
    rng: &mut R,
) -> Result<TruncDraw> {
    spec.validate()?;
    let (a, b) = spec.standardized();
    let underflow = || Error::IntervalUnderflow {
        mean: spec.mean,
        sd: spec.sd,
        lo: spec.lo,
        hi: spec.hi,
    };
    if !(b > a) {
        return Err(underflow());
    }
    let far = a > TAIL_CROSSOVER || b < -TAIL_CROSSOVER;
    if far && !norm_log_interval(a, b).is_finite() {
        return Err(underflow());
    }
    let (z, rounds) = if a > TAIL_CROSSOVER {
        tail_standard(a, b, rng)
    } else if b < -TAIL_CROSSOVER {
        let (z, r) = tail_standard(-b, -a, rng);
        (-z, r)
    } else {
        (inverse_cdf_standard(a, b, rng), 1)
    };
    if !z.is_finite() {
        return Err(underflow());
    }
    let value = (spec.mean + spec.sd * z).clamp(spec.lo, spec.hi);
    Ok(TruncDraw { value, rounds })
}

fn inverse_cdf_standard<R: RngCore + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    // Work on whichever side keeps the CDF values small, so the quantile is
    // evaluated where it is accurate.
    let z = if a >= 0.0 {
        let (pa, pb) = (norm_sf(a), norm_sf(b));
        -norm_quantile(pb + u * (pa - pb))
    } else if b <= 0.0 {
        let (pa, pb) = (norm_cdf(a), norm_cdf(b));
        norm_quantile(pa + u * (pb - pa))
    } else {
        let lower = 0.5 - norm_cdf(a);
        let upper = 0.5 - norm_sf(b);
        let t = u * (lower + upper);
        if t < lower {
            // below zero: Φ(z) = Φ(a) + t
            norm_quantile(norm_cdf(a) + t)
        } else {
            // above zero: 1 − Φ(z) = ½ − (t − lower)
            -norm_quantile(0.5 - (t - lower))
        }
    };
    z.clamp(a, b)
}

/// Rejection from a (truncated) exponential proposal with the optimal rate,
/// for 0 < a < b ≤ ∞.
fn tail_standard<R: RngCore + ?Sized>(a: f64, b: f64, rng: &mut R) -> (f64, u32) {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let width = b - a;
    // log of the target/proposal ratio peaks at the point of [a, b] nearest the rate
    let peak = rate.clamp(a, b);
    let mass = if width.is_finite() {
        -(-rate * width).exp_m1()
    } else {
        1.0
    };
    let mut rounds = 0u32;
    loop {
        rounds += 1;
        let u: f64 = rng.random();
        let z = a - (-u * mass).ln_1p() / rate;
        if z > b {
            continue;
        }
        let log_accept = -0.5 * (z - rate).powi(2) + 0.5 * (peak - rate).powi(2);
        let v: f64 = rng.random();
        if v.ln() <= log_accept {
            return (z, rounds);
        }
    }
}

/// Orthant given by coordinatewise signs.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthantSpec {
    signs: Vec<i8>,
}

impl OrthantSpec {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter(
                "orthant signs must be +1 or -1".into(),
            ));
        }
        Ok(Self { signs })
    }

    pub fn positive(d: usize) -> Self {
        Self { signs: vec![1; d] }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.signs.len()
            && x.iter().zip(&self.signs).all(|(&xi, &s)| f64::from(s) * xi >= 0.0)
    }

    /// Bounds of coordinate i.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        if self.signs[i] > 0 {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, 0.0)
        }
    }

    pub fn project(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            x.len(),
            x.iter().enumerate().map(|(i, &xi)| {
                let (lo, hi) = self.bounds(i);
                xi.clamp(lo, hi)
            }),
        )
    }
}

fn check_rgo_args(lambda: f64, v: &Vector, d: usize) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "oracle variance scale must be positive, got {lambda}"
        )));
    }
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    Ok(lambda.sqrt())
}

/// Exact draw from ∝ exp(−‖x − v‖²/(2λ)) restricted to the orthant.
pub fn rgo_orthant<R: RngCore + ?Sized>(
    lambda: f64,
    v: &Vector,
    spec: &OrthantSpec,
    rng: &mut R,
) -> Result<Vector> {
    let sd = check_rgo_args(lambda, v, spec.dim())?;
    let mut out = Vector::zeros(v.len());
    for i in 0..v.len() {
        let (lo, hi) = spec.bounds(i);
        out[i] = sample_trunc_normal_1d(&TruncSpec::new(v[i], sd, lo, hi)?, rng)?;
    }
    Ok(out)
}

/// Exact draw from ∝ exp(−‖x − v‖²/(2λ)) restricted to the box [lo, hi].
pub fn rgo_box<R: RngCore + ?Sized>(
    lambda: f64,
    v: &Vector,
    lo: &Vector,
    hi: &Vector,
    rng: &mut R,
) -> Result<Vector> {
    let sd = check_rgo_args(lambda, v, lo.len())?;
    if hi.len() != lo.len() {
        return Err(Error::DimensionMismatch {
            expected: lo.len(),
            got: hi.len(),
        });
    }
    let mut out = Vector::zeros(v.len());
    for i in 0..v.len() {
        out[i] = sample_trunc_normal_1d(&TruncSpec::new(v[i], sd, lo[i], hi[i])?, rng)?;
    }
    Ok(out)
}

/// Exact draw from ∝ exp(−‖x − v‖²/(2λ) − α‖x‖₁).
///
/// Each coordinate is a two-piece mixture: N(vᵢ − αλ, λ) on [0, ∞) and
/// N(vᵢ + αλ, λ) on (−∞, 0], weighted in log space.
pub fn rgo_l1<R: RngCore + ?Sized>(lambda: f64, v: &Vector, alpha: f64, rng: &mut R) -> Result<Vector> {
    let sd = check_rgo_args(lambda, v, v.len())?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "l1 weight must be finite and nonnegative, got {alpha}"
        )));
    }
    let mut out = Vector::zeros(v.len());
    for i in 0..v.len() {
        let (pos, neg) = l1_branch_log_weights(lambda, v[i], alpha);
        let p_pos = 1.0 / (1.0 + (neg - pos).exp());
        let u: f64 = rng.random();
        let spec = if u < p_pos {
            TruncSpec::new(v[i] - alpha * lambda, sd, 0.0, f64::INFINITY)?
        } else {
            TruncSpec::new(v[i] + alpha * lambda, sd, f64::NEG_INFINITY, 0.0)?
        };
        out[i] = sample_trunc_normal_1d(&spec, rng)?;
    }
    Ok(out)
}

/// Unnormalized log masses of the positive and negative halves of the
/// one-dimensional ℓ1-tilted Gaussian (common factors dropped).
pub fn l1_branch_log_weights(lambda: f64, v: f64, alpha: f64) -> (f64, f64) {
    let sd = lambda.sqrt();
    let pos = -alpha * v + norm_log_cdf((v - alpha * lambda) / sd);
    let neg = alpha * v + norm_log_cdf(-(v + alpha * lambda) / sd);
    (pos, neg)
}

/// Exact draw from ∝ exp(−‖x − v‖²/(2λ) − ½xᵀdiag(A)x − ⟨b, x⟩).
pub fn rgo_quadratic<R: RngCore + ?Sized>(
    lambda: f64,
    v: &Vector,
    a_diag: &Vector,
    b: &Vector,
    rng: &mut R,
) -> Result<Vector> {
    check_rgo_args(lambda, v, a_diag.len())?;
    if b.len() != a_diag.len() {
        return Err(Error::DimensionMismatch {
            expected: a_diag.len(),
            got: b.len(),
        });
    }
    let mut out = Vector::zeros(v.len());
    for i in 0..v.len() {
        let precision = 1.0 / lambda + a_diag[i];
        let mean = (v[i] / lambda - b[i]) / precision;
        let z: f64 = StandardNormal.sample(rng);
        out[i] = mean + z / precision.sqrt();
    }
    Ok(out)
}

/// g = 0.
#[derive(Debug, Clone)]
pub struct Unconstrained {
    dim: usize,
}

impl Unconstrained {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl CompositePotential for Unconstrained {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn prox(&self, _lambda: f64, v: &Vector) -> Option<Vector> {
        Some(v.clone())
    }
    fn sample_restricted(
        &self,
        factor: &IsotropicGaussianFactor,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        let sd = check_rgo_args(factor.lambda, &factor.center, self.dim)?;
        Ok(Vector::from_fn(self.dim, |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            factor.center[i] + sd * z
        }))
    }
}

/// Indicator of an orthant: 0 inside, +∞ outside.
#[derive(Debug, Clone)]
pub struct Orthant {
    spec: OrthantSpec,
}

impl Orthant {
    pub fn new(spec: OrthantSpec) -> Self {
        Self { spec }
    }

    pub fn positive(d: usize) -> Self {
        Self::new(OrthantSpec::positive(d))
    }

    pub fn spec(&self) -> &OrthantSpec {
        &self.spec
    }
}

impl CompositePotential for Orthant {
    fn dim(&self) -> usize {
        self.spec.dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        if self.spec.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, _lambda: f64, v: &Vector) -> Option<Vector> {
        Some(self.spec.project(v))
    }
    fn sample_restricted(
        &self,
        factor: &IsotropicGaussianFactor,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        rgo_orthant(factor.lambda, &factor.center, &self.spec, rng)
    }
}

/// Indicator of the box [lo, hi].
#[derive(Debug, Clone)]
pub struct BoxConstraint {
    lo: Vector,
    hi: Vector,
}

impl BoxConstraint {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidParameter("box needs lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(&xi, (&l, &h))| l <= xi && xi <= h)
    }
}

impl CompositePotential for BoxConstraint {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, _lambda: f64, v: &Vector) -> Option<Vector> {
        Some(Vector::from_fn(v.len(), |i, _| v[i].clamp(self.lo[i], self.hi[i])))
    }
    fn sample_restricted(
        &self,
        factor: &IsotropicGaussianFactor,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        rgo_box(factor.lambda, &factor.center, &self.lo, &self.hi, rng)
    }
}

/// g(x) = α‖x‖₁.
#[derive(Debug, Clone)]
pub struct L1Norm {
    dim: usize,
    alpha: f64,
}

impl L1Norm {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("l1 weight {alpha} must be >= 0")));
        }
        Ok(Self { dim, alpha })
    }
}

impl CompositePotential for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        self.alpha * x.iter().map(|v| v.abs()).sum::<f64>()
    }
    fn prox(&self, lambda: f64, v: &Vector) -> Option<Vector> {
        let t = lambda * self.alpha;
        Some(v.map(|vi| vi.signum() * (vi.abs() - t).max(0.0)))
    }
    fn sample_restricted(
        &self,
        factor: &IsotropicGaussianFactor,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        rgo_l1(factor.lambda, &factor.center, self.alpha, rng)
    }
}

/// g(x) = ½xᵀdiag(A)x + ⟨b, x⟩ with A ≥ 0.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    a_diag: Vector,
    b: Vector,
}

impl DiagonalQuadratic {
    pub fn new(a_diag: Vector, b: Vector) -> Result<Self> {
        if a_diag.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a_diag.len(),
                got: b.len(),
            });
        }
        if a_diag.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::InvalidParameter("diagonal curvature must be >= 0".into()));
        }
        Ok(Self { a_diag, b })
    }

    pub fn curvature(&self) -> &Vector {
        &self.a_diag
    }

    pub fn linear(&self) -> &Vector {
        &self.b
    }
}

impl CompositePotential for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.a_diag.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        x.iter()
            .zip(self.a_diag.iter().zip(self.b.iter()))
            .map(|(&xi, (&a, &b))| 0.5 * a * xi * xi + b * xi)
            .sum()
    }
    fn prox(&self, lambda: f64, v: &Vector) -> Option<Vector> {
        Some(Vector::from_fn(v.len(), |i, _| {
            (v[i] / lambda - self.b[i]) / (1.0 / lambda + self.a_diag[i])
        }))
    }
    fn sample_restricted(
        &self,
        factor: &IsotropicGaussianFactor,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        rgo_quadratic(factor.lambda, &factor.center, &self.a_diag, &self.b, rng)
    }
}
