//! Target-distribution abstractions.
//!
//! A composite target has density ∝ exp(−f(x) − g(x)) where `f` is smooth and
//! strongly convex ([`SmoothPotential`]) and `g` is convex, possibly an
//! indicator, and reachable only through a restricted Gaussian oracle
//! ([`CompositePotential`]).

use crate::error::{Error, Result};
use crate::Vector;
use nalgebra::DMatrix;
use rand::RngCore;
use std::sync::Arc;

/// Smooth, strongly convex part `f`. The declared constants are trusted.
pub trait SmoothPotential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Gradient Lipschitz constant L.
    fn smoothness(&self) -> f64;
    /// Strong convexity modulus μ.
    fn strong_convexity(&self) -> f64;

    fn condition_number(&self) -> f64 {
        self.smoothness() / self.strong_convexity()
    }
}

/// Convex part `g`. `value` may return `f64::INFINITY` off the support.
pub trait CompositePotential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;

    /// argmin_x (1/2λ)‖x − v‖² + g(x), when available in closed form.
    fn prox(&self, _lambda: f64, _v: &Vector) -> Option<Vector> {
        None
    }

    /// Restricted Gaussian oracle: an exact draw from the density
    /// ∝ exp(−‖x − v‖²/(2λ) − g(x)).
    fn sample_restricted(&self, factor: &IsotropicGaussianFactor, rng: &mut dyn RngCore) -> Result<Vector>;
}

/// The quadratic exp(−‖x − v‖²/(2λ)) carried by every oracle call.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicGaussianFactor {
    pub lambda: f64,
    pub center: Vector,
}

impl IsotropicGaussianFactor {
    pub fn new(lambda: f64, center: Vector) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "factor variance scale must be finite and positive, got {lambda}"
            )));
        }
        Ok(Self { lambda, center })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The exponent (1/2λ)‖x − v‖².
    pub fn exponent(&self, x: &Vector) -> f64 {
        (x - &self.center).norm_squared() / (2.0 * self.lambda)
    }

    /// Precision 1/λ.
    pub fn precision(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Precision-weighted center v/λ.
    pub fn shift(&self) -> Vector {
        &self.center / self.lambda
    }
}

/// Product of two isotropic quadratics as one isotropic quadratic.
///
/// The summed exponents differ from the folded exponent by a constant in x.
pub fn fold_factors(a: &IsotropicGaussianFactor, b: &IsotropicGaussianFactor) -> Result<IsotropicGaussianFactor> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let precision = a.precision() + b.precision();
    let lambda = 1.0 / precision;
    let center = (a.shift() + b.shift()) * lambda;
    IsotropicGaussianFactor::new(lambda, center)
}

/// [`fold_factors`] where an absent second factor is the vacuous λ → ∞ limit.
pub fn fold_optional(a: &IsotropicGaussianFactor, b: Option<&IsotropicGaussianFactor>) -> Result<IsotropicGaussianFactor> {
    match b {
        Some(b) => fold_factors(a, b),
        None => Ok(a.clone()),
    }
}

/// f together with g and, optionally, the minimizer of f + g.
#[derive(Clone)]
pub struct CompositeTarget {
    pub f: Arc<dyn SmoothPotential>,
    pub g: Arc<dyn CompositePotential>,
    pub x_star: Option<Vector>,
}

impl CompositeTarget {
    pub fn new(f: Arc<dyn SmoothPotential>, g: Arc<dyn CompositePotential>) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: g.dim(),
            });
        }
        Ok(Self { f, g, x_star: None })
    }

    pub fn with_minimizer(mut self, x_star: Vector) -> Result<Self> {
        self.check_dim(&x_star)?;
        self.x_star = Some(x_star);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// f(x) + g(x).
    pub fn neg_log_density(&self, x: &Vector) -> f64 {
        self.f.value(x) + self.g.value(x)
    }

    pub(crate) fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for CompositeTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeTarget")
            .field("dim", &self.dim())
            .field("smoothness", &self.f.smoothness())
            .field("strong_convexity", &self.f.strong_convexity())
            .field("x_star", &self.x_star)
            .finish()
    }
}

/// f̃ = f − ⟨c, ·⟩.
pub struct LinearlyShifted {
    inner: Arc<dyn SmoothPotential>,
    c: Vector,
}

impl SmoothPotential for LinearlyShifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.inner.value(x) - self.c.dot(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.inner.gradient(x) - &self.c
    }
    fn smoothness(&self) -> f64 {
        self.inner.smoothness()
    }
    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity()
    }
}

/// g̃ = g + ⟨c, ·⟩. Its oracle and prox delegate to g at the center v − λc.
pub struct TiltedComposite {
    inner: Arc<dyn CompositePotential>,
    c: Vector,
}

impl CompositePotential for TiltedComposite {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.inner.value(x) + self.c.dot(x)
    }
    fn prox(&self, lambda: f64, v: &Vector) -> Option<Vector> {
        self.inner.prox(lambda, &(v - &self.c * lambda))
    }
    fn sample_restricted(&self, factor: &IsotropicGaussianFactor, rng: &mut dyn RngCore) -> Result<Vector> {
        let moved = IsotropicGaussianFactor {
            lambda: factor.lambda,
            center: &factor.center - &self.c * factor.lambda,
        };
        self.inner.sample_restricted(&moved, rng)
    }
}

/// Moves the linear term ⟨c, ·⟩ from f to g. The sum f + g is unchanged.
pub fn shift_linear(target: &CompositeTarget, c: &Vector) -> Result<CompositeTarget> {
    target.check_dim(c)?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("linear shift must be finite".into()));
    }
    Ok(CompositeTarget {
        f: Arc::new(LinearlyShifted {
            inner: target.f.clone(),
            c: c.clone(),
        }),
        g: Arc::new(TiltedComposite {
            inner: target.g.clone(),
            c: c.clone(),
        }),
        x_star: target.x_star.clone(),
    })
}

/// f(x) = ½(x − m)ᵀP(x − m) for symmetric positive definite P.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    precision: DMatrix<f64>,
    mean: Vector,
    smoothness: f64,
    strong_convexity: f64,
}

impl QuadraticPotential {
    /// L and μ are read off the extreme eigenvalues of `precision`.
    pub fn new(precision: DMatrix<f64>, mean: Vector) -> Result<Self> {
        let d = mean.len();
        if precision.nrows() != d || precision.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: precision.nrows(),
            });
        }
        let eig = precision.clone().symmetric_eigen();
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "precision matrix must be positive definite (min eigenvalue {lo})"
            )));
        }
        Ok(Self {
            precision,
            mean,
            smoothness: hi,
            strong_convexity: lo,
        })
    }

    pub fn isotropic(d: usize, precision: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal_element(d, d, precision),
            Vector::zeros(d),
        )
    }

    pub fn diagonal(precisions: &[f64], mean: Vector) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&Vector::from_column_slice(precisions)),
            mean,
        )
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }
}

impl SmoothPotential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        let r = x - &self.mean;
        0.5 * r.dot(&(&self.precision * &r))
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.precision * (x - &self.mean)
    }
    fn smoothness(&self) -> f64 {
        self.smoothness
    }
    fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }
}

/// f(x) = Σᵢ wᵢ·ln cosh(xᵢ − mᵢ) + (μ/2)‖x − m‖²: a non-Gaussian test potential
/// with L = max wᵢ + μ.
#[derive(Debug, Clone)]
pub struct LogCoshPotential {
    weights: Vector,
    mean: Vector,
    mu: f64,
}

impl LogCoshPotential {
    pub fn new(weights: Vector, mean: Vector, mu: f64) -> Result<Self> {
        if weights.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| w < 0.0) || !(mu > 0.0) {
            return Err(Error::InvalidParameter(
                "log-cosh weights must be nonnegative and mu positive".into(),
            ));
        }
        Ok(Self { weights, mean, mu })
    }
}

fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl SmoothPotential for LogCoshPotential {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        x.iter()
            .zip(self.mean.iter())
            .zip(self.weights.iter())
            .map(|((&xi, &mi), &wi)| wi * ln_cosh(xi - mi) + 0.5 * self.mu * (xi - mi).powi(2))
            .sum()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.mean.iter())
                .zip(self.weights.iter())
                .map(|((&xi, &mi), &wi)| wi * (xi - mi).tanh() + self.mu * (xi - mi)),
        )
    }
    fn smoothness(&self) -> f64 {
        self.weights.max() + self.mu
    }
    fn strong_convexity(&self) -> f64 {
        self.mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::Unconstrained;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vector {
        Vector::from_fn(d, |_, _| rng.random_range(-scale..scale))
    }

    #[test]
    fn fold_identical_unit_factors() {
        let a = IsotropicGaussianFactor::new(1.0, Vector::zeros(2)).unwrap();
        let out = fold_factors(&a, &a).unwrap();
        assert_eq!(out.lambda, 0.5);
        assert_eq!(out.center, Vector::zeros(2));
    }

    #[test]
    fn fold_with_absent_factor_is_identity() {
        let a = IsotropicGaussianFactor::new(0.3, Vector::from_vec(vec![1.0, -2.0])).unwrap();
        assert_eq!(fold_optional(&a, None).unwrap(), a);
        // a very flat second factor approaches the same limit
        let flat = IsotropicGaussianFactor::new(1e300, Vector::from_vec(vec![5.0, 5.0])).unwrap();
        let out = fold_factors(&a, &flat).unwrap();
        assert!((out.lambda - 0.3).abs() < 1e-12);
        assert!((out.center - &a.center).norm() < 1e-12);
    }

    #[test]
    fn fold_rejects_dimension_mismatch() {
        let a = IsotropicGaussianFactor::new(1.0, Vector::zeros(2)).unwrap();
        let b = IsotropicGaussianFactor::new(1.0, Vector::zeros(3)).unwrap();
        assert!(matches!(
            fold_factors(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn folded_exponent_equals_sum_up_to_constant() {
        // (η, y) and (1/(ηL²), x*) with η = 0.1, L = 2, y = (1,0), x* = 0
        let eta = 0.1;
        let l = 2.0;
        let a = IsotropicGaussianFactor::new(eta, Vector::from_vec(vec![1.0, 0.0])).unwrap();
        let b = IsotropicGaussianFactor::new(1.0 / (eta * l * l), Vector::zeros(2)).unwrap();
        let folded = fold_factors(&a, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut offset = None;
        for _ in 0..100 {
            let x = random_vec(&mut rng, 2, 5.0);
            // expand each quadratic coordinate by coordinate
            let sum: f64 = (0..2)
                .map(|i| {
                    (x[i] - a.center[i]).powi(2) / (2.0 * a.lambda)
                        + (x[i] - b.center[i]).powi(2) / (2.0 * b.lambda)
                })
                .sum();
            let diff = sum - folded.exponent(&x);
            let c = *offset.get_or_insert(diff);
            assert!((diff - c).abs() < 1e-10, "diff {diff} vs {c}");
        }
    }

    #[test]
    fn invalid_lambda_rejected() {
        assert!(IsotropicGaussianFactor::new(0.0, Vector::zeros(1)).is_err());
        assert!(IsotropicGaussianFactor::new(f64::INFINITY, Vector::zeros(1)).is_err());
        assert!(IsotropicGaussianFactor::new(-1.0, Vector::zeros(1)).is_err());
    }

    #[test]
    fn zero_shift_leaves_target_unchanged() {
        let f = Arc::new(QuadraticPotential::diagonal(&[1.0, 3.0], Vector::from_vec(vec![0.5, -1.0])).unwrap());
        let g = Arc::new(Unconstrained::new(2));
        let t = CompositeTarget::new(f, g).unwrap();
        let s = shift_linear(&t, &Vector::zeros(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_vec(&mut rng, 2, 3.0);
            assert_eq!(s.f.value(&x), t.f.value(&x));
            assert_eq!(s.g.value(&x), t.g.value(&x));
        }
    }

    #[test]
    fn shift_preserves_composite_sum() {
        let f = Arc::new(QuadraticPotential::diagonal(&[2.0, 5.0, 1.0], Vector::from_vec(vec![0.5, -1.0, 2.0])).unwrap());
        let g = Arc::new(crate::oracles::L1Norm::new(3, 0.7).unwrap());
        let t = CompositeTarget::new(f, g).unwrap();
        let c = Vector::from_vec(vec![1.5, -0.25, 3.0]);
        let s = shift_linear(&t, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = random_vec(&mut rng, 3, 4.0);
            let a = t.neg_log_density(&x);
            let b = s.neg_log_density(&x);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn shifted_gaussian_oracle_mean_moves_by_lambda_c() {
        let g = Arc::new(Unconstrained::new(2));
        let f = Arc::new(QuadraticPotential::isotropic(2, 1.0).unwrap());
        let t = CompositeTarget::new(f, g).unwrap();
        let c = Vector::from_vec(vec![2.0, -1.0]);
        let s = shift_linear(&t, &c).unwrap();
        let lambda = 0.5;
        let v = Vector::from_vec(vec![0.3, 0.3]);
        let factor = IsotropicGaussianFactor::new(lambda, v.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut sum = Vector::zeros(2);
        for _ in 0..n {
            sum += s.g.sample_restricted(&factor, &mut rng).unwrap();
        }
        let mean = sum / n as f64;
        let expected = &v - &c * lambda;
        let se = (lambda / n as f64).sqrt();
        for i in 0..2 {
            assert!((mean[i] - expected[i]).abs() < 3.0 * se, "coord {i}");
        }
    }

    #[test]
    fn shifted_prox_delegates() {
        let g = Arc::new(crate::oracles::Orthant::positive(2));
        let f = Arc::new(QuadraticPotential::isotropic(2, 1.0).unwrap());
        let t = CompositeTarget::new(f, g).unwrap();
        let c = Vector::from_vec(vec![1.0, -1.0]);
        let s = shift_linear(&t, &c).unwrap();
        // argmin ‖x − v‖²/(2λ) + ⟨c,x⟩ over x ≥ 0 is max(v − λc, 0)
        let p = s.g.prox(2.0, &Vector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(p, Vector::from_vec(vec![0.0, 3.0]));
    }

    #[test]
    fn shift_by_gradient_at_minimizer_zeroes_shifted_gradient() {
        // f = (μ/2)‖x − m‖², g = positive orthant, x* = max(m, 0)
        let mu = 2.0;
        let m = Vector::from_vec(vec![1.0, -0.5]);
        let f = Arc::new(QuadraticPotential::new(DMatrix::from_diagonal_element(2, 2, mu), m.clone()).unwrap());
        let g = Arc::new(crate::oracles::Orthant::positive(2));
        let t = CompositeTarget::new(f.clone(), g).unwrap();
        let x_star = crate::optimize::fista(&*t.f, &*t.g, &Vector::zeros(2), &Default::default()).unwrap();
        let c = f.gradient(&x_star.x_star);
        let s = shift_linear(&t, &c).unwrap();
        assert!(s.f.gradient(&x_star.x_star).norm() < 1e-12);
    }

    fn check_potential(f: &dyn SmoothPotential, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = f.dim();
        let (l, mu) = (f.smoothness(), f.strong_convexity());
        assert!(mu <= l);
        for _ in 0..1000 {
            let x = random_vec(&mut rng, d, scale);
            let y = random_vec(&mut rng, d, scale);
            let gx = f.gradient(&x);
            let gy = f.gradient(&y);
            let dist = (&x - &y).norm();
            assert!((&gx - &gy).norm() <= l * dist * (1.0 + 1e-10) + 1e-12);
            let lower = f.value(&x) + gx.dot(&(&y - &x)) + 0.5 * mu * dist * dist;
            assert!(f.value(&y) >= lower - 1e-9 * lower.abs().max(1.0));
        }
        // central finite differences
        for _ in 0..20 {
            let x = random_vec(&mut rng, d, scale);
            let g = f.gradient(&x);
            for i in 0..d {
                let h = 1e-5 * (1.0 + x[i].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-5 * g.norm().max(1.0),
                    "coord {i}: fd {fd} vs grad {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn quadratic_potential_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let p = &a * a.transpose() + DMatrix::identity(4, 4) * 0.5;
        let f = QuadraticPotential::new(p, random_vec(&mut rng, 4, 1.0)).unwrap();
        check_potential(&f, 12, 3.0);
    }

    #[test]
    fn log_cosh_potential_properties() {
        let f = LogCoshPotential::new(
            Vector::from_vec(vec![1.0, 3.0, 0.5]),
            Vector::from_vec(vec![0.2, -1.0, 0.0]),
            0.4,
        )
        .unwrap();
        assert!((f.smoothness() - 3.4).abs() < 1e-15);
        check_potential(&f, 13, 4.0);
    }

    #[test]
    fn non_positive_definite_precision_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(QuadraticPotential::new(p, Vector::zeros(2)).is_err());
    }
}
