use std::sync::Arc;

use compsamp::baselines::RestrictedGaussian;
use compsamp::model::QuadraticPotential;
use compsamp::oracles::{BoxConstraint, L1Norm, OrthantSpec, Unconstrained};
use compsamp::{CompositePotential, CompositeTarget, Vector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::Family;
use crate::error::Result;

/// Independent random streams derived from one seed. Each stream id names
/// one consumer, so adding draws to one consumer never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Target,
    Composite,
    HitAndRun,
    Rejection,
    Projection,
}

/// RNG for `(seed, stream, dim, index)`; `index` separates parallel tasks.
pub fn stream_rng(seed: u64, stream: Stream, dim: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag = stream as u64 + 1;
    rng.set_stream((tag << 56) ^ ((dim as u64) << 32) ^ index);
    rng
}

/// One random test target in both representations.
#[derive(Debug, Clone)]
pub struct GaussianInstance {
    /// View used by hit-and-run and naive rejection.
    pub restricted: RestrictedGaussian,
    /// The same law as f + g for the composite sampler.
    pub target: CompositeTarget,
    pub eigenvalues: Vec<f64>,
}

/// N(m, Σ) on a random orthant with a dense random Σ.
///
/// Eigenvalues of Σ⁻¹ are log-uniform on [L/κ, L] with both endpoints
/// present (for d ≥ 2), so the realized condition number is exactly κ.
/// The eigenbasis is Haar distributed and m is uniform on the cube
/// [−mean_range, mean_range]^d.
pub fn random_gaussian_target<R: Rng + ?Sized>(
    d: usize,
    kappa: f64,
    smoothness: f64,
    mean_range: f64,
    rng: &mut R,
) -> Result<GaussianInstance> {
    let (precision, mean, eigenvalues) = random_precision_and_mean(d, kappa, smoothness, mean_range, rng);
    let signs: Vec<i8> = (0..d).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let restricted = RestrictedGaussian::from_precision(precision, mean, Some(OrthantSpec::new(signs)?))?;
    let target = restricted.composite_target()?;
    Ok(GaussianInstance {
        restricted,
        target,
        eigenvalues,
    })
}

fn random_precision_and_mean<R: Rng + ?Sized>(
    d: usize,
    kappa: f64,
    smoothness: f64,
    mean_range: f64,
    rng: &mut R,
) -> (DMatrix<f64>, Vector, Vec<f64>) {
    let lo = smoothness / kappa;
    let eigenvalues: Vec<f64> = (0..d)
        .map(|i| match i {
            _ if d == 1 => smoothness,
            0 => lo,
            1 => smoothness,
            _ if kappa == 1.0 => smoothness,
            _ => rng.random_range(lo.ln()..smoothness.ln()).exp(),
        })
        .collect();
    let gauss = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    // sign-fix the columns so Q is Haar rather than biased by the QR convention
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let lambda = DMatrix::from_diagonal(&Vector::from_vec(eigenvalues.clone()));
    let p = &q * lambda * q.transpose();
    let precision = (&p + p.transpose()) * 0.5;
    let mean = Vector::from_fn(d, |_, _| {
        if mean_range > 0.0 {
            rng.random_range(-mean_range..=mean_range)
        } else {
            0.0
        }
    });
    (precision, mean, eigenvalues)
}

/// Target of a built-in family: a random dense Gaussian f as above,
/// combined with the family's g.
pub fn family_target<R: Rng + ?Sized>(
    family: Family,
    d: usize,
    kappa: f64,
    smoothness: f64,
    mean_range: f64,
    rng: &mut R,
) -> Result<CompositeTarget> {
    if family == Family::GaussianOrthant {
        return Ok(random_gaussian_target(d, kappa, smoothness, mean_range, rng)?.target);
    }
    let (precision, mean, _) = random_precision_and_mean(d, kappa, smoothness, mean_range, rng);
    let f = Arc::new(QuadraticPotential::new(precision, mean)?);
    let g: Arc<dyn CompositePotential> = match family {
        Family::GaussianBox => Arc::new(BoxConstraint::new(
            Vector::from_element(d, -1.0),
            Vector::from_element(d, 1.0),
        )?),
        Family::GaussianL1 => Arc::new(L1Norm::new(d, 1.0)?),
        Family::GaussianUnrestricted => Arc::new(Unconstrained::new(d)),
        Family::GaussianOrthant => unreachable!(),
    };
    Ok(CompositeTarget::new(f, g)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_fix_the_condition_number() {
        let mut rng = stream_rng(3, Stream::Target, 8, 0);
        let inst = random_gaussian_target(8, 10.0, 5.0, 0.5, &mut rng).unwrap();
        let eig = inst.restricted.precision.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        assert!((hi - 5.0).abs() < 1e-10 && (lo - 0.5).abs() < 1e-10);
        assert!((hi / lo - 10.0).abs() < 1e-8);
    }

    #[test]
    fn precision_is_symmetric_and_inverts_covariance() {
        let mut rng = stream_rng(1, Stream::Target, 12, 0);
        let inst = random_gaussian_target(12, 10.0, 5.0, 0.5, &mut rng).unwrap();
        let p = &inst.restricted.precision;
        assert!((p - p.transpose()).amax() < 1e-12);
        let id = inst.restricted.covariance() * p;
        assert!((id - DMatrix::identity(12, 12)).amax() < 1e-8);
        assert!(inst.restricted.mean.iter().all(|m| m.abs() <= 0.5));
    }

    #[test]
    fn zero_mean_range_gives_zero_mean() {
        let mut rng = stream_rng(1, Stream::Target, 4, 0);
        let inst = random_gaussian_target(4, 10.0, 5.0, 0.0, &mut rng).unwrap();
        assert!(inst.restricted.mean.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn one_dimensional_and_unit_kappa() {
        let mut rng = stream_rng(1, Stream::Target, 1, 0);
        let inst = random_gaussian_target(1, 10.0, 5.0, 0.5, &mut rng).unwrap();
        assert!((inst.restricted.precision[(0, 0)] - 5.0).abs() < 1e-12);
        let inst = random_gaussian_target(5, 1.0, 2.0, 0.5, &mut rng).unwrap();
        assert!(inst.eigenvalues.iter().all(|&e| e == 2.0));
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let a: u64 = stream_rng(7, Stream::Composite, 10, 0).random();
        let b: u64 = stream_rng(7, Stream::Composite, 10, 1).random();
        let c: u64 = stream_rng(7, Stream::Rejection, 10, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, stream_rng(7, Stream::Composite, 10, 0).random::<u64>());
    }
}
