//! Proximal-gradient minimization of f + g.

use crate::error::{Error, Result};
use crate::model::{CompositePotential, SmoothPotential};
use crate::Vector;

#[derive(Debug, Clone, Copy)]
pub struct FistaOptions {
    /// Stop once L·‖x − prox(x − ∇f(x)/L)‖ falls below this. `None` picks
    /// 1e-8·L·(1 + ‖x0‖).
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for FistaOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x_star: Vector,
    pub iterations: usize,
    /// Final gradient-mapping norm.
    pub residual: f64,
    pub converged: bool,
}

/// Accelerated proximal gradient with function-value restarts.
///
/// Needs a closed-form `prox` on `g`; fails with `MissingMinimizer`
/// otherwise.
pub fn fista(
    f: &dyn SmoothPotential,
    g: &dyn CompositePotential,
    x0: &Vector,
    options: &FistaOptions,
) -> Result<OptResult> {
    if x0.len() != f.dim() || g.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    let l = f.smoothness();
    let step = 1.0 / l;
    let prox = |v: &Vector| {
        g.prox(step, v)
            .ok_or_else(|| Error::MissingMinimizer("g has no closed-form prox; supply x* explicitly".into()))
    };
    let tol = options.tol.unwrap_or(1e-8 * l * (1.0 + x0.norm()));
    let objective = |x: &Vector| f.value(x) + g.value(x);

    let mut x = prox(x0)?;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut obj = objective(&x);
    let mut restarted = false;
    let mut residual = f64::INFINITY;
    for it in 0..options.max_iter {
        let x_next = prox(&(&y - f.gradient(&y) * step))?;
        let obj_next = objective(&x_next);
        // momentum overshot: restart from the last iterate. A step taken right
        // after a restart is a plain proximal-gradient step, which is monotone
        // in exact arithmetic, so an increase there is round-off and is accepted
        // (refusing it would repeat the same step forever).
        if obj_next > obj && !restarted {
            y = x.clone();
            t = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
        x = x_next;
        t = t_next;
        obj = obj_next;

        let mapped = prox(&(&x - f.gradient(&x) * step))?;
        residual = l * (&x - &mapped).norm();
        if residual <= tol {
            return Ok(OptResult {
                x_star: mapped,
                iterations: it + 1,
                residual,
                converged: true,
            });
        }
    }
    Ok(OptResult {
        x_star: x,
        iterations: options.max_iter,
        residual,
        converged: false,
    })
}
