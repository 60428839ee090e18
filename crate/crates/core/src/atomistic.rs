//! The reference atomistic model: energy, variations, minimization and a
//! numerical stability margin.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::{Execution, map_chunks};
use crate::lattice::{ExternalLoad, LatticeDofs, LatticeFunction, LatticeSystem, check_shape, sample_load};
use crate::solver::{BandMatrix, NewtonConfig, Objective, SolveReport, Triplets, newton_minimize};

const CHUNK: usize = 256;

/// `w(ξ, ρ)·φ_ρ^(order)(D_ρu(ξ))` for every site `ξ` (storage order) and
/// every `ρ ∈ ℛ`, flattened as `[site][ρ]`.
pub(crate) fn bond_terms<W>(
    sys: &LatticeSystem,
    u: &LatticeFunction,
    exec: Execution,
    order: usize,
    weight: &W,
) -> Result<Vec<f64>>
where
    W: Fn(i64, i64) -> f64 + Sync,
{
    let range = sys.range();
    let terms = map_chunks(exec, sys.site_count(), CHUNK, |idx| {
        let mut out = Vec::with_capacity(idx.len() * range.len());
        for i in idx {
            let xi = sys.site_of(i);
            for &rho in range {
                let w = weight(xi, rho);
                out.push(if w == 0.0 { Ok(0.0) } else { sys.bond(rho, u.diff(xi, rho)).map(|d| w * d[order]) });
            }
        }
        out
    });
    terms.into_iter().collect()
}

/// `Σ_ξ Σ_ρ w(ξ, ρ)·φ_ρ(D_ρu(ξ))`.
pub(crate) fn weighted_energy<W>(sys: &LatticeSystem, u: &LatticeFunction, exec: Execution, weight: &W) -> Result<f64>
where
    W: Fn(i64, i64) -> f64 + Sync,
{
    Ok(bond_terms(sys, u, exec, 0, weight)?.iter().sum())
}

/// Gradient of [`weighted_energy`] with respect to every site value.
pub(crate) fn weighted_gradient<W>(
    sys: &LatticeSystem,
    u: &LatticeFunction,
    exec: Execution,
    weight: &W,
) -> Result<LatticeFunction>
where
    W: Fn(i64, i64) -> f64 + Sync,
{
    let t = bond_terms(sys, u, exec, 1, weight)?;
    let k = sys.range().len();
    let mut g = LatticeFunction::zeros(sys.half_count());
    for i in 0..sys.site_count() {
        let xi = sys.site_of(i);
        for (j, &rho) in sys.range().iter().enumerate() {
            let f = t[i * k + j];
            if f != 0.0 {
                g.set(xi + rho, g.get(xi + rho) + f);
                g.set(xi, g.get(xi) - f);
            }
        }
    }
    Ok(g)
}

/// Hessian of [`weighted_energy`] on the free sites.
pub(crate) fn weighted_hessian<W>(
    sys: &LatticeSystem,
    dofs: &LatticeDofs,
    u: &LatticeFunction,
    exec: Execution,
    weight: &W,
) -> Result<Triplets>
where
    W: Fn(i64, i64) -> f64 + Sync,
{
    let t = bond_terms(sys, u, exec, 2, weight)?;
    let k = sys.range().len();
    let mut trip = Triplets::new(dofs.len());
    for i in 0..sys.site_count() {
        let xi = sys.site_of(i);
        for (j, &rho) in sys.range().iter().enumerate() {
            push_bond(&mut trip, dofs, xi, xi + rho, t[i * k + j]);
        }
    }
    Ok(trip)
}

/// Adds `s·(e_b − e_a)(e_b − e_a)ᵀ`, skipping the pinned site.
pub(crate) fn push_bond(trip: &mut Triplets, dofs: &LatticeDofs, a: i64, b: i64, s: f64) {
    if s == 0.0 {
        return;
    }
    let (ia, ib) = (dofs.free_index(a), dofs.free_index(b));
    if let Some(p) = ia {
        trip.push(p, p, s);
    }
    if let Some(q) = ib {
        trip.push(q, q, s);
    }
    if let (Some(p), Some(q)) = (ia, ib) {
        trip.push(p, q, -s);
        trip.push(q, p, -s);
    }
}

fn unit(_: i64, _: i64) -> f64 {
    1.0
}

/// `ℰ^a(u) = Σ_ξ Σ_ρ φ_ρ(D_ρu(ξ))`.
pub fn energy_atomistic(sys: &LatticeSystem, u: &LatticeFunction) -> Result<f64> {
    check_shape(sys, u)?;
    weighted_energy(sys, u, Execution::Auto, &unit)
}

/// `∂ℰ^a/∂u(η)` at every site, including the pinned one.
pub fn gradient_atomistic(sys: &LatticeSystem, u: &LatticeFunction) -> Result<LatticeFunction> {
    check_shape(sys, u)?;
    weighted_gradient(sys, u, Execution::Auto, &unit)
}

/// Hessian on the free sites in folded order (see [`LatticeDofs`]).
pub fn hessian_atomistic(sys: &LatticeSystem, u: &LatticeFunction) -> Result<BandMatrix> {
    check_shape(sys, u)?;
    Ok(weighted_hessian(sys, &LatticeDofs::new(sys), u, Execution::Auto, &unit)?.to_band())
}

/// Atomistic energy, variations and objective `ℰ^a(u) − ⟨f, u⟩_Λ`.
#[derive(Clone, Debug)]
pub struct AtomisticOperator {
    sys: LatticeSystem,
    load: LatticeFunction,
    dofs: LatticeDofs,
    exec: Execution,
}

impl AtomisticOperator {
    pub fn new(sys: LatticeSystem, load: LatticeFunction) -> Result<Self> {
        check_shape(&sys, &load)?;
        let dofs = LatticeDofs::new(&sys);
        Ok(Self { sys, load, dofs, exec: Execution::Auto })
    }

    pub fn with_load(sys: LatticeSystem, load: &ExternalLoad) -> Result<Self> {
        let f = sample_load(load, &sys);
        Self::new(sys, f)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn system(&self) -> &LatticeSystem {
        &self.sys
    }

    pub fn load(&self) -> &LatticeFunction {
        &self.load
    }

    pub fn dofs(&self) -> &LatticeDofs {
        &self.dofs
    }

    pub fn energy(&self, u: &LatticeFunction) -> Result<f64> {
        check_shape(&self.sys, u)?;
        weighted_energy(&self.sys, u, self.exec, &unit)
    }

    pub fn gradient(&self, u: &LatticeFunction) -> Result<LatticeFunction> {
        check_shape(&self.sys, u)?;
        weighted_gradient(&self.sys, u, self.exec, &unit)
    }

    pub fn hessian(&self, u: &LatticeFunction) -> Result<BandMatrix> {
        check_shape(&self.sys, u)?;
        Ok(weighted_hessian(&self.sys, &self.dofs, u, self.exec, &unit)?.to_band())
    }

    /// Minimizes from `u ≡ 0`.
    pub fn solve(&self, cfg: &NewtonConfig) -> Result<(LatticeFunction, SolveReport)> {
        let (x, report) = newton_minimize(self, vec![0.0; self.dofs.len()], cfg)?;
        Ok((self.dofs.from_free(&x), report))
    }
}

impl Objective for AtomisticOperator {
    fn dim(&self) -> usize {
        self.dofs.len()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        let u = self.dofs.from_free(x);
        let work: f64 = self.dofs.to_free(&self.load).iter().zip(x).map(|(f, v)| f * v).sum();
        Ok(AtomisticOperator::energy(self, &u)? - work)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = AtomisticOperator::gradient(self, &self.dofs.from_free(x))?;
        Ok(self.dofs.to_free(&g).iter().zip(self.dofs.to_free(&self.load)).map(|(a, b)| a - b).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<BandMatrix> {
        AtomisticOperator::hessian(self, &self.dofs.from_free(x))
    }
}

/// Minimizes `ℰ^a(u) − ⟨f, u⟩_Λ` by Newton's method starting from `u ≡ 0`.
pub fn solve_atomistic(
    sys: &LatticeSystem,
    load: &ExternalLoad,
    cfg: &NewtonConfig,
) -> Result<(LatticeFunction, SolveReport)> {
    AtomisticOperator::with_load(sys.clone(), load)?.solve(cfg)
}

/// Nearest-neighbour Laplacian `Σ_ξ (v(ξ+1) − v(ξ))²` on the free sites.
pub fn laplacian(sys: &LatticeSystem) -> BandMatrix {
    let dofs = LatticeDofs::new(sys);
    let mut t = Triplets::new(dofs.len());
    for xi in sys.sites() {
        push_bond(&mut t, &dofs, xi, xi + 1, 1.0);
    }
    t.to_band()
}

/// `min_v ⟨δ²ℰ^a(u)v, v⟩ / ‖∇v‖²`: the smallest generalized eigenvalue of
/// the Hessian against the nearest-neighbour Laplacian.
///
/// Dense, so intended for chains up to a few thousand sites.
pub fn stability_margin(sys: &LatticeSystem, u: &LatticeFunction) -> Result<f64> {
    let h = hessian_atomistic(sys, u)?;
    let l = laplacian(sys);
    smallest_generalized_eigenvalue(&h, &l)
}

pub(crate) fn smallest_generalized_eigenvalue(h: &BandMatrix, l: &BandMatrix) -> Result<f64> {
    let n = h.dim();
    if l.dim() != n {
        return Err(Error::Shape { expected: n, got: l.dim() });
    }
    let dense = |m: &BandMatrix| DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let chol = dense(l).cholesky().ok_or_else(|| Error::Numerical("reference form is not positive definite".into()))?;
    let lower = chol.l();
    let inv = lower.clone().try_inverse().ok_or_else(|| Error::Numerical("reference factor is singular".into()))?;
    let mut m = &inv * dense(h) * inv.transpose();
    m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Numerical("eigenvalue computation failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PairPotential;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn harmonic(n: usize, range: &[i64]) -> LatticeSystem {
        LatticeSystem::harmonic(n, range).unwrap()
    }

    fn random_u(n: usize, amp: f64, seed: u64) -> LatticeFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatticeFunction::from_fn(n, |_| amp * rng.gen_range(-1.0..1.0)).pinned()
    }

    #[test]
    fn energy_examples() {
        let s = harmonic(4, &[1]);
        assert_eq!(energy_atomistic(&s, &LatticeFunction::zeros(4)).unwrap(), 0.0);
        let mut u = LatticeFunction::zeros(4);
        u.set(1, 1.0);
        assert_eq!(energy_atomistic(&s, &u).unwrap(), 1.0);
        let s2 = harmonic(6, &[1, 2]);
        assert_eq!(energy_atomistic(&s2, &LatticeFunction::zeros(6)).unwrap(), 12.0 * 0.5);
    }

    #[test]
    fn gradient_examples() {
        let s = harmonic(6, &[1, 2]);
        let g = gradient_atomistic(&s, &LatticeFunction::zeros(6)).unwrap();
        assert!(g.max_abs() == 0.0);
        let s1 = harmonic(4, &[1]);
        let mut u = LatticeFunction::zeros(4);
        u.set(1, 0.3);
        assert!((gradient_atomistic(&s1, &u).unwrap().get(1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_energy_differences() {
        for pot in [PairPotential::harmonic(), PairPotential::lennard_jones()] {
            let s = LatticeSystem::new(8, 1.0, &[1, 2], pot).unwrap();
            let u = random_u(8, 0.05, 11);
            let g = gradient_atomistic(&s, &u).unwrap();
            let h = 1e-6;
            for xi in s.sites() {
                let (mut up, mut dn) = (u.clone(), u.clone());
                up.set(xi, u.get(xi) + h);
                dn.set(xi, u.get(xi) - h);
                let fd = (energy_atomistic(&s, &up).unwrap() - energy_atomistic(&s, &dn).unwrap()) / (2.0 * h);
                assert!((fd - g.get(xi)).abs() <= 1e-6 * g.get(xi).abs().max(1.0), "{xi}: {fd} vs {}", g.get(xi));
            }
        }
    }

    #[test]
    fn hessian_is_periodic_laplacian() {
        let s = harmonic(4, &[1]);
        let d = LatticeDofs::new(&s);
        let h = hessian_atomistic(&s, &LatticeFunction::zeros(4)).unwrap();
        assert!(h.is_symmetric(0.0));
        for a in s.sites().filter(|&x| x != 0) {
            for b in s.sites().filter(|&x| x != 0) {
                let expected = if a == b {
                    2.0
                } else if s.wrap_site(a - b).abs() == 1 || s.wrap_site(b - a).abs() == 1 {
                    -1.0
                } else {
                    0.0
                };
                assert_eq!(h.get(d.free_index(a).unwrap(), d.free_index(b).unwrap()), expected, "({a},{b})");
            }
        }
        // Sites 4 and −3 are neighbours across the period.
        assert_eq!(h.get(d.free_index(4).unwrap(), d.free_index(-3).unwrap()), -1.0);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let s = LatticeSystem::new(8, 1.0, &[1, 2, 3], PairPotential::lennard_jones()).unwrap();
        let d = LatticeDofs::new(&s);
        let u = random_u(8, 0.03, 5);
        let h = hessian_atomistic(&s, &u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let step = 1e-6;
        let shift = |sgn: f64| {
            let x: Vec<f64> = d.to_free(&u).iter().zip(&v).map(|(a, b)| a + sgn * step * b).collect();
            d.to_free(&gradient_atomistic(&s, &d.from_free(&x)).unwrap())
        };
        let (gp, gm) = (shift(1.0), shift(-1.0));
        let hv = h.mul_vec(&v);
        for k in 0..d.len() {
            let fd = (gp[k] - gm[k]) / (2.0 * step);
            assert!((fd - hv[k]).abs() <= 1e-5 * hv[k].abs().max(1.0));
        }
    }

    #[test]
    fn shift_invariance() {
        let s = LatticeSystem::new(8, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let u = random_u(8, 0.05, 3);
        let shifted = LatticeFunction::from_fn(8, |xi| u.get(xi) + 0.37);
        let (a, b) = (energy_atomistic(&s, &u).unwrap(), energy_atomistic(&s, &shifted).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn unloaded_and_harmonic_solves() {
        let s = harmonic(20, &[1, 2]);
        let cfg = NewtonConfig::default();
        let (u, rep) = solve_atomistic(&s, &ExternalLoad::zero(), &cfg).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(u.max_abs(), 0.0);

        let load = ExternalLoad::smooth(3.0);
        let (u, rep) = solve_atomistic(&s, &load, &cfg).unwrap();
        assert_eq!(rep.iterations, 1);
        let f = sample_load(&load, &s);
        let g = gradient_atomistic(&s, &u).unwrap();
        let d = LatticeDofs::new(&s);
        let res = d.to_free(&g).iter().zip(d.to_free(&f)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res <= 1e-10 * f.max_abs());
    }

    #[test]
    fn singular_load_gives_odd_strain() {
        let s = harmonic(50, &[1, 2]);
        let (u, _) = solve_atomistic(&s, &ExternalLoad::singular(20.0), &NewtonConfig::default()).unwrap();
        let scale = u.max_abs();
        for xi in 0..50 {
            let right = u.get(xi + 1) - u.get(xi);
            let left = u.get(-xi) - u.get(-xi - 1);
            assert!((right + left).abs() <= 1e-10 * scale.max(1.0), "{xi}");
        }
    }

    #[test]
    fn lennard_jones_smooth_load_decreases_energy() {
        let s = LatticeSystem::new(20, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let (_, rep) = solve_atomistic(&s, &ExternalLoad::smooth(0.5), &NewtonConfig::default()).unwrap();
        assert!(rep.converged);
        // Steps at rounding level are accepted on gradient decrease instead.
        let e0 = rep.merit_history[0].abs();
        assert!(rep.merit_history.windows(2).all(|w| w[1] < w[0] || (w[1] - w[0]).abs() <= 1e-13 * e0));
        assert!(rep.merit_history[1] < rep.merit_history[0]);
    }

    #[test]
    fn stability_margins() {
        let s = harmonic(6, &[1]);
        let m = stability_margin(&s, &LatticeFunction::zeros(6)).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
        let s2 = harmonic(6, &[1, 2]);
        assert!(stability_margin(&s2, &LatticeFunction::zeros(6)).unwrap() >= 1.0 - 1e-10);
    }
}
