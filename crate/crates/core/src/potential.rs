//! Pair potentials with derivatives up to third order.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Highest derivative order exposed by [`PairPotential`].
pub const MAX_ORDER: usize = 3;

type UserFn = dyn Fn(f64, usize) -> f64 + Send + Sync;

/// Which family a [`PairPotential`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Harmonic,
    LennardJones,
    User,
}

#[derive(Clone)]
enum Inner {
    Harmonic,
    LennardJones { depth: f64, r_min: f64 },
    User { name: String, f: Arc<UserFn> },
}

/// A pair potential `φ(r)` of the bond length `r`.
///
/// `derivatives(r)` returns `[φ, φ', φ'', φ''']`.
#[derive(Clone)]
pub struct PairPotential {
    inner: Inner,
}

impl fmt::Debug for PairPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner {
            Inner::Harmonic => write!(f, "Harmonic"),
            Inner::LennardJones { depth, r_min } => {
                write!(f, "LennardJones {{ depth: {depth}, r_min: {r_min} }}")
            }
            Inner::User { name, .. } => write!(f, "User({name})"),
        }
    }
}

impl PairPotential {
    /// `φ(r) = ½(r − 1)²`.
    pub fn harmonic() -> Self {
        Self { inner: Inner::Harmonic }
    }

    /// `φ(r) = r⁻¹² − 2r⁻⁶`: minimum at `r = 1` with depth 1.
    pub fn lennard_jones() -> Self {
        Self::lennard_jones_with(1.0, 1.0).expect("default parameters are valid")
    }

    /// `φ(r) = depth·[(r_min/r)¹² − 2(r_min/r)⁶]`.
    pub fn lennard_jones_with(depth: f64, r_min: f64) -> Result<Self> {
        if !(depth > 0.0 && r_min > 0.0 && depth.is_finite() && r_min.is_finite()) {
            return Err(Error::Config(format!(
                "Lennard-Jones parameters must be positive (depth {depth}, r_min {r_min})"
            )));
        }
        Ok(Self { inner: Inner::LennardJones { depth, r_min } })
    }

    /// A user-supplied potential `f(r, order)` for `order ≤ 3`.
    ///
    /// The derivatives are checked against central differences at every
    /// probe point; a relative mismatch above `1e-5` is rejected.
    pub fn user<F>(name: impl Into<String>, f: F, probes: &[f64]) -> Result<Self>
    where
        F: Fn(f64, usize) -> f64 + Send + Sync + 'static,
    {
        let pot = Self { inner: Inner::User { name: name.into(), f: Arc::new(f) } };
        pot.check_derivatives(probes, 1e-5)?;
        Ok(pot)
    }

    pub fn kind(&self) -> PotentialKind {
        match self.inner {
            Inner::Harmonic => PotentialKind::Harmonic,
            Inner::LennardJones { .. } => PotentialKind::LennardJones,
            Inner::User { .. } => PotentialKind::User,
        }
    }

    /// `[φ(r), φ'(r), φ''(r), φ'''(r)]`.
    #[inline]
    pub fn derivatives(&self, r: f64) -> Result<[f64; 4]> {
        match &self.inner {
            Inner::Harmonic => {
                let d = r - 1.0;
                Ok([0.5 * d * d, d, 1.0, 0.0])
            }
            Inner::LennardJones { depth, r_min } => {
                if !(r > 0.0) {
                    return Err(Error::PotentialDomain { r });
                }
                let s = r_min / r;
                let s6 = s.powi(6);
                let s12 = s6 * s6;
                let inv = 1.0 / r;
                Ok([
                    depth * (s12 - 2.0 * s6),
                    depth * (-12.0 * s12 + 12.0 * s6) * inv,
                    depth * (156.0 * s12 - 84.0 * s6) * inv * inv,
                    depth * (-2184.0 * s12 + 672.0 * s6) * inv * inv * inv,
                ])
            }
            Inner::User { f, .. } => {
                let out = [f(r, 0), f(r, 1), f(r, 2), f(r, 3)];
                if out.iter().all(|v| v.is_finite()) { Ok(out) } else { Err(Error::PotentialDomain { r }) }
            }
        }
    }

    /// `φ^(order)(r)`.
    pub fn eval(&self, r: f64, order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::OrderOutOfRange { order, max: MAX_ORDER });
        }
        Ok(self.derivatives(r)?[order])
    }

    /// Checks each derivative against a central difference of the order
    /// below it.
    pub fn check_derivatives(&self, probes: &[f64], rel_tol: f64) -> Result<()> {
        for &r in probes {
            let h = 1e-5 * r.abs().max(1.0);
            let lo = self.derivatives(r - h)?;
            let hi = self.derivatives(r + h)?;
            let mid = self.derivatives(r)?;
            for j in 0..MAX_ORDER {
                let fd = (hi[j] - lo[j]) / (2.0 * h);
                let exact = mid[j + 1];
                if (fd - exact).abs() > rel_tol * exact.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "derivative of order {} disagrees with finite differences at r = {r}: {exact} vs {fd}",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `φ^(order)(r + F·ρ)`: the potential seen by a bond of reference length `F·ρ`
/// carrying the displacement difference `r`.
pub fn potential_shifted(pot: &PairPotential, macro_strain: f64, rho: i64, r: f64, order: usize) -> Result<f64> {
    pot.eval(r + macro_strain * rho as f64, order)
}
