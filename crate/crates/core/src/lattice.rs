//! The periodic chain: sites, displacements, finite differences and loads.
//!
//! Coordinates are lattice units throughout: spacing 1, period `2N`, sites
//! `Λ = {−N+1, …, N}`. Physical coordinates `X = εx` with `ε = 1/(2N)` only
//! appear when sampling an [`ExternalLoad`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potential::PairPotential;

/// Periodic chain of `2N` sites under macroscopic strain `F` with a finite
/// interaction range.
#[derive(Clone, Debug)]
pub struct LatticeSystem {
    half_count: usize,
    macro_strain: f64,
    range: Vec<i64>,
    potential: PairPotential,
}

impl LatticeSystem {
    pub fn new(half_count: usize, macro_strain: f64, range: &[i64], potential: PairPotential) -> Result<Self> {
        if half_count == 0 {
            return Err(Error::Config("half count N must be positive".into()));
        }
        if !(macro_strain > 0.0 && macro_strain.is_finite()) {
            return Err(Error::Config(format!("macroscopic strain must be positive, got {macro_strain}")));
        }
        if range.is_empty() {
            return Err(Error::Config("interaction range is empty".into()));
        }
        let mut sorted = range.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != range.len() {
            return Err(Error::Config(format!("interaction range {range:?} has repeated entries")));
        }
        if sorted[0] <= 0 {
            return Err(Error::Config(format!("interaction range {range:?} must be positive")));
        }
        let r_cut = *sorted.last().unwrap();
        if 2 * half_count as i64 <= 4 * r_cut {
            return Err(Error::Config(format!(
                "chain of {} sites is too short for cut-off {r_cut} (need 2N > 4·r_cut)",
                2 * half_count
            )));
        }
        Ok(Self { half_count, macro_strain, range: sorted, potential })
    }

    /// Harmonic potential `½(r−1)²` at `F = 1`.
    pub fn harmonic(half_count: usize, range: &[i64]) -> Result<Self> {
        Self::new(half_count, 1.0, range, PairPotential::harmonic())
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    /// Number of sites, `2N`.
    pub fn site_count(&self) -> usize {
        2 * self.half_count
    }

    /// Period length in lattice units, `2N`.
    pub fn period(&self) -> f64 {
        self.site_count() as f64
    }

    /// Lattice spacing in physical units, `ε = 1/(2N)`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.period()
    }

    pub fn macro_strain(&self) -> f64 {
        self.macro_strain
    }

    pub fn range(&self) -> &[i64] {
        &self.range
    }

    pub fn r_cut(&self) -> i64 {
        *self.range.last().unwrap()
    }

    pub fn potential(&self) -> &PairPotential {
        &self.potential
    }

    /// Sites of `Λ` in increasing order.
    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let n = self.half_count as i64;
        (-n + 1)..=n
    }

    /// Storage index of a site (any integer, reduced periodically).
    #[inline]
    pub fn index_of(&self, site: i64) -> usize {
        let n = self.half_count as i64;
        (site + n - 1).rem_euclid(2 * n) as usize
    }

    /// The site stored at `index`.
    #[inline]
    pub fn site_of(&self, index: usize) -> i64 {
        index as i64 - self.half_count as i64 + 1
    }

    /// Reduces any integer to its representative in `Λ`.
    #[inline]
    pub fn wrap_site(&self, site: i64) -> i64 {
        self.site_of(self.index_of(site))
    }

    /// Reduces a real coordinate to `(−N, N]`.
    #[inline]
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let n = self.half_count as f64;
        let p = 2.0 * n;
        let mut y = (x + n).rem_euclid(p) - n;
        if y <= -n {
            y += p;
        }
        y
    }

    /// `[φ_ρ, φ_ρ', φ_ρ'', φ_ρ''']` at displacement difference `r`, where
    /// `φ_ρ(r) = φ(r + Fρ)`.
    #[inline]
    pub fn bond(&self, rho: i64, r: f64) -> Result<[f64; 4]> {
        self.potential.derivatives(r + self.macro_strain * rho as f64)
    }

    fn check_offset(&self, rho: i64) -> Result<()> {
        if self.range.contains(&rho.abs()) { Ok(()) } else { Err(Error::RangeViolation { rho }) }
    }
}

/// A `2N`-periodic displacement field on `Λ`.
///
/// Values are stored by [`LatticeSystem::index_of`]. Solver outputs are
/// pinned (`u(0) = 0`); test fixtures may be unpinned.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFunction {
    half_count: usize,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn zeros(half_count: usize) -> Self {
        Self { half_count, values: vec![0.0; 2 * half_count] }
    }

    /// Values in storage order (site `−N+1` first).
    pub fn from_values(half_count: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * half_count {
            return Err(Error::Shape { expected: 2 * half_count, got: values.len() });
        }
        Ok(Self { half_count, values })
    }

    /// Samples `f` at every site of `Λ`.
    pub fn from_fn(half_count: usize, f: impl FnMut(i64) -> f64) -> Self {
        let n = half_count as i64;
        Self { half_count, values: ((-n + 1)..=n).map(f).collect() }
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    fn index(&self, site: i64) -> usize {
        let n = self.half_count as i64;
        (site + n - 1).rem_euclid(2 * n) as usize
    }

    /// Value at any integer site, using the periodic extension.
    #[inline]
    pub fn get(&self, site: i64) -> f64 {
        self.values[self.index(site)]
    }

    #[inline]
    pub fn set(&mut self, site: i64, value: f64) {
        let i = self.index(site);
        self.values[i] = value;
    }

    pub fn is_pinned(&self) -> bool {
        self.get(0) == 0.0
    }

    /// Subtracts the value at site 0 from every site.
    pub fn pinned(mut self) -> Self {
        let c = self.get(0);
        self.values.iter_mut().for_each(|v| *v -= c);
        self
    }

    /// `u(ξ+ρ) − u(ξ)` without range checking.
    #[inline]
    pub fn diff(&self, site: i64, rho: i64) -> f64 {
        self.get(site + rho) - self.get(site)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { half_count: self.half_count, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `D_ρu(ξ) = u(ξ+ρ) − u(ξ)` for `ρ ∈ ±ℛ`.
pub fn finite_difference(sys: &LatticeSystem, u: &LatticeFunction, site: i64, rho: i64) -> Result<f64> {
    sys.check_offset(rho)?;
    check_shape(sys, u)?;
    Ok(u.diff(site, rho))
}

/// `⟨f, u⟩_Λ = Σ_ξ f(ξ)u(ξ)`.
pub fn lattice_pairing(f: &LatticeFunction, u: &LatticeFunction) -> Result<f64> {
    if f.half_count != u.half_count {
        return Err(Error::Shape { expected: f.values.len(), got: u.values.len() });
    }
    Ok(f.values.iter().zip(&u.values).map(|(a, b)| a * b).sum())
}

pub(crate) fn check_shape(sys: &LatticeSystem, u: &LatticeFunction) -> Result<()> {
    if u.half_count != sys.half_count {
        return Err(Error::Shape { expected: sys.site_count(), got: u.values.len() });
    }
    Ok(())
}

/// Folded ordering of the free (unpinned) sites: `1, −1, 2, −2, …, N`.
///
/// Sites adjacent on the ring stay within a few positions of each other in
/// this ordering, so periodic operators assemble into plain band matrices.
#[derive(Clone, Debug)]
pub struct LatticeDofs {
    half_count: usize,
    /// storage index → free index (None for the pinned site).
    to_free: Vec<Option<usize>>,
    /// free index → site.
    sites: Vec<i64>,
}

impl LatticeDofs {
    pub fn new(sys: &LatticeSystem) -> Self {
        let n = sys.half_count() as i64;
        let mut sites = Vec::with_capacity(sys.site_count() - 1);
        for m in 1..=n {
            sites.push(m);
            if m < n {
                sites.push(-m);
            }
        }
        let mut to_free = vec![None; sys.site_count()];
        for (k, &s) in sites.iter().enumerate() {
            to_free[sys.index_of(s)] = Some(k);
        }
        Self { half_count: sys.half_count(), to_free, sites }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn free_index(&self, site: i64) -> Option<usize> {
        let n = self.half_count as i64;
        self.to_free[(site + n - 1).rem_euclid(2 * n) as usize]
    }

    pub fn site(&self, k: usize) -> i64 {
        self.sites[k]
    }

    pub fn to_free(&self, u: &LatticeFunction) -> Vec<f64> {
        self.sites.iter().map(|&s| u.get(s)).collect()
    }

    /// Pinned lattice function with the given free values.
    pub fn from_free(&self, x: &[f64]) -> LatticeFunction {
        let mut u = LatticeFunction::zeros(self.half_count);
        for (k, &s) in self.sites.iter().enumerate() {
            u.set(s, x[k]);
        }
        u
    }

    /// Restricts a per-site covector to the free sites.
    pub fn restrict(&self, g: &LatticeFunction) -> Vec<f64> {
        self.to_free(g)
    }
}

/// Family of an [`ExternalLoad`] profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadKind {
    /// `f_scale·(1/2 − x)/x` for `x > 0`, `−f_scale·(x + 1/2)/x` for `x < 0`, 0 at `x = 0`.
    Singular,
    /// `f_scale·sin(2πx)`.
    Smooth,
    User,
}

type ProfileFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A dead load given as a profile on the physical cell `[−1/2, 1/2]`.
#[derive(Clone)]
pub struct ExternalLoad {
    kind: LoadKind,
    scale: f64,
    user: Option<Arc<ProfileFn>>,
}

impl fmt::Debug for ExternalLoad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalLoad").field("kind", &self.kind).field("scale", &self.scale).finish()
    }
}

impl ExternalLoad {
    pub fn singular(scale: f64) -> Self {
        Self { kind: LoadKind::Singular, scale, user: None }
    }

    pub fn smooth(scale: f64) -> Self {
        Self { kind: LoadKind::Smooth, scale, user: None }
    }

    pub fn zero() -> Self {
        Self::smooth(0.0)
    }

    /// A 1-periodic user profile, multiplied by `scale`. The value at `x = 0`
    /// is forced to 0.
    pub fn user(scale: f64, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: LoadKind::User, scale, user: Some(Arc::new(profile)) }
    }

    pub fn kind(&self) -> LoadKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    /// Reduces a physical coordinate to `[−1/2, 1/2)`.
    fn wrap(x: f64) -> f64 {
        (x + 0.5).rem_euclid(1.0) - 0.5
    }

    /// Profile value at physical coordinate `x`.
    pub fn profile(&self, x: f64) -> f64 {
        let x = Self::wrap(x);
        if x == 0.0 {
            return 0.0;
        }
        match self.kind {
            LoadKind::Singular => {
                if x > 0.0 {
                    self.scale * (0.5 - x) / x
                } else {
                    -self.scale * (x + 0.5) / x
                }
            }
            LoadKind::Smooth => self.scale * (2.0 * PI * x).sin(),
            LoadKind::User => self.scale * (self.user.as_ref().unwrap())(x),
        }
    }

    /// Third derivative of the profile at physical coordinate `x`.
    ///
    /// Analytic for the built-in kinds; a six-point fourth-order difference
    /// for user profiles.
    pub fn profile_d3(&self, x: f64) -> f64 {
        let x = Self::wrap(x);
        match self.kind {
            LoadKind::Singular => {
                if x == 0.0 {
                    0.0
                } else {
                    -3.0 * self.scale * x.signum() / x.powi(4)
                }
            }
            LoadKind::Smooth => {
                let w = 2.0 * PI;
                -self.scale * w.powi(3) * (w * x).cos()
            }
            LoadKind::User => {
                let h = 5e-3;
                let p = |t: f64| self.profile(t);
                (-p(x + 3.0 * h) + 8.0 * p(x + 2.0 * h) - 13.0 * p(x + h) + 13.0 * p(x - h) - 8.0 * p(x - 2.0 * h)
                    + p(x - 3.0 * h))
                    / (8.0 * h * h * h)
            }
        }
    }

    /// Load density in lattice units at lattice coordinate `x`:
    /// `f(x) = ε·profile(εx)`.
    #[inline]
    pub fn density(&self, sys: &LatticeSystem, x: f64) -> f64 {
        let eps = sys.spacing();
        eps * self.profile(eps * x)
    }

    /// Third derivative of [`Self::density`] in lattice units: `ε⁴·profile'''(εx)`.
    pub fn density_d3(&self, sys: &LatticeSystem, x: f64) -> f64 {
        let eps = sys.spacing();
        eps.powi(4) * self.profile_d3(eps * x)
    }
}

/// Per-site lattice load `f(ξ) = ε·profile(εξ)`, with `f(0) = 0`.
pub fn sample_load(load: &ExternalLoad, sys: &LatticeSystem) -> LatticeFunction {
    LatticeFunction::from_fn(sys.half_count(), |xi| if xi == 0 { 0.0 } else { load.density(sys, xi as f64) })
}
