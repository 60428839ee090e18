//! Damped Newton iterations for minimization and root finding.

use std::time::Instant;

use log::debug;

use super::band::{BandMatrix, banded_solve};
use crate::error::{Error, Result};

/// A smooth objective on `ℝⁿ` with banded Hessian.
pub trait Objective {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, x: &[f64]) -> Result<BandMatrix>;
}

/// A nonlinear system `R(x) = 0` with banded Jacobian.
pub trait ResidualSystem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, x: &[f64]) -> Result<BandMatrix>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Sup-norm threshold on the gradient or residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Step reduction factor in the backtracking line search.
    pub backtrack: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, backtrack: 0.5, armijo: 1e-4, max_backtracks: 40 }
    }
}

impl NewtonConfig {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        let cfg = Self { tol, max_iter, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config(format!("backtrack factor must lie in (0, 1), got {}", self.backtrack)));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::Config(format!("Armijo constant must lie in (0, 1/2), got {}", self.armijo)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// Final objective value; `None` for root finding.
    pub energy: Option<f64>,
    pub converged: bool,
    pub wall_time: f64,
    /// Merit value before the first step and after every accepted step:
    /// the energy for minimization, `½‖R‖²` for root finding.
    pub merit_history: Vec<f64>,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape { expected, got: x.len() });
    }
    Ok(())
}

/// Newton direction `−H⁻¹g` by Cholesky, with one diagonal-shift retry
/// when `H` is not positive definite.
fn descent_direction(h: BandMatrix, g: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut err = match h.cholesky() {
        Ok(c) => return c.solve(&rhs),
        Err(e @ Error::NotPositiveDefinite { .. }) => e,
        Err(e) => return Err(e),
    };
    let mut shift = 1e-3 * h.max_abs_diagonal().max(1e-12);
    for _ in 0..16 {
        debug!("Hessian indefinite ({err}); retrying with diagonal shift {shift:e}");
        let mut shifted = h.clone();
        shifted.add_to_diagonal(shift);
        match shifted.cholesky() {
            Ok(c) => return c.solve(&rhs),
            Err(e @ Error::NotPositiveDefinite { .. }) => err = e,
            Err(e) => return Err(e),
        }
        shift *= 10.0;
    }
    Err(err)
}

/// Minimizes `obj` from `x0` with Armijo backtracking.
///
/// Converges when `‖∇E‖_∞ ≤ tol`. When the energy change of a trial step
/// drops to rounding level the step is accepted if it lowers the gradient
/// norm instead.
pub fn newton_minimize(obj: &dyn Objective, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_dim(obj.dim(), &x0)?;
    let start = Instant::now();
    let mut x = x0;
    let mut e = obj.energy(&x)?;
    let mut g = obj.gradient(&x)?;
    let mut history = vec![e];
    for it in 0..cfg.max_iter {
        let gnorm = sup_norm(&g);
        if gnorm <= cfg.tol {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    final_residual_norm: gnorm,
                    energy: Some(e),
                    converged: true,
                    wall_time: start.elapsed().as_secs_f64(),
                    merit_history: history,
                },
            ));
        }
        let p = descent_direction(obj.hessian(&x)?, &g)?;
        let slope = dot(&g, &p);
        if !(slope < 0.0) {
            return Err(Error::LineSearch { iteration: it, residual: gnorm, best: x });
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let xn = axpy(&x, alpha, &p);
            if let Ok(en) = obj.energy(&xn) {
                if en.is_finite() {
                    if en <= e + cfg.armijo * alpha * slope {
                        accepted = Some((xn, en, None));
                        break;
                    }
                    if (en - e).abs() <= 1e-13 * e.abs().max(1.0) {
                        let gn = obj.gradient(&xn)?;
                        if sup_norm(&gn) < gnorm {
                            accepted = Some((xn, en, Some(gn)));
                            break;
                        }
                    }
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some((xn, en, gn)) = accepted else {
            return Err(Error::LineSearch { iteration: it, residual: gnorm, best: x });
        };
        debug!("newton_minimize it {it}: |g| {gnorm:e}, step {alpha}, E {en}");
        x = xn;
        e = en;
        g = match gn {
            Some(gn) => gn,
            None => obj.gradient(&x)?,
        };
        history.push(e);
    }
    let gnorm = sup_norm(&g);
    if gnorm <= cfg.tol {
        return Ok((
            x,
            SolveReport {
                iterations: cfg.max_iter,
                final_residual_norm: gnorm,
                energy: Some(e),
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
                merit_history: history,
            },
        ));
    }
    Err(Error::NoConvergence { what: "Newton minimization".into(), iterations: cfg.max_iter, residual: gnorm, best: x })
}

/// Solves `R(x) = 0` from `x0`, backtracking on `½‖R‖²`.
pub fn newton_root(sys: &dyn ResidualSystem, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_dim(sys.dim(), &x0)?;
    let start = Instant::now();
    let mut x = x0;
    let mut r = sys.residual(&x)?;
    let mut merit = 0.5 * dot(&r, &r);
    let mut history = vec![merit];
    for it in 0..=cfg.max_iter {
        let rnorm = sup_norm(&r);
        if rnorm <= cfg.tol {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    final_residual_norm: rnorm,
                    energy: None,
                    converged: true,
                    wall_time: start.elapsed().as_secs_f64(),
                    merit_history: history,
                },
            ));
        }
        if it == cfg.max_iter {
            return Err(Error::NoConvergence {
                what: "Newton root finding".into(),
                iterations: it,
                residual: rnorm,
                best: x,
            });
        }
        let j = sys.jacobian(&x)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let p = banded_solve(&j, &rhs)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let xn = axpy(&x, alpha, &p);
            if let Ok(rn) = sys.residual(&xn) {
                let mn = 0.5 * dot(&rn, &rn);
                if mn.is_finite()
                    && (mn <= (1.0 - 2.0 * cfg.armijo * alpha) * merit
                        || (mn <= merit * (1.0 + 1e-13) && sup_norm(&rn) < rnorm))
                {
                    accepted = Some((xn, rn, mn));
                    break;
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some((xn, rn, mn)) = accepted else {
            return Err(Error::LineSearch { iteration: it, residual: rnorm, best: x });
        };
        debug!("newton_root it {it}: |R| {rnorm:e}, step {alpha}");
        x = xn;
        r = rn;
        merit = mn;
        history.push(merit);
    }
    unreachable!("loop returns on its last iteration")
}
