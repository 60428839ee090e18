//! Cauchy-Born and higher-order Cauchy-Born continuum models.
//!
//! `W_cb(g) = Σ_ρ φ_ρ(ρg)` and `W_hoc(g₁, g₃) = Σ_ρ φ_ρ(ρg₁ + ρ³g₃/24)`,
//! so `W_hoc(g, 0) = W_cb(g)`. P1 elements see `g₃ = 0` and therefore the
//! Cauchy-Born density; quintic elements see the full higher-order density.

use std::sync::Arc;

use crate::coupling::decomposition::DomainDecomposition;
use crate::error::{Error, Result};
use crate::exec::{Execution, map_range};
use crate::fem::mesh::{ElementKind, build_canonical_mesh};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{MixedFEFunction, MixedFESpace};
use crate::lattice::{ExternalLoad, LatticeSystem};
use crate::solver::{BandMatrix, NewtonConfig, Objective, SolveReport, Triplets, newton_minimize};

/// `Σ_ρ ρ^order·φ_ρ^(order)(ρg)`: the `order`-th derivative of `W_cb`.
pub fn density_cb(sys: &LatticeSystem, g: f64, order: usize) -> Result<f64> {
    if order > 3 {
        return Err(Error::OrderOutOfRange { order, max: 3 });
    }
    let mut s = 0.0;
    for &rho in sys.range() {
        let r = rho as f64;
        s += r.powi(order as i32) * sys.bond(rho, r * g)?[order];
    }
    Ok(s)
}

/// `W_hoc` with its gradient and Hessian in `(g₁, g₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HocEval {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Evaluates `W_hoc(g₁, g₃)` and its first and second partials.
pub fn density_hoc(sys: &LatticeSystem, g1: f64, g3: f64) -> Result<HocEval> {
    let mut out = HocEval { value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
    for &rho in sys.range() {
        let r = rho as f64;
        let c = [r, r * r * r / 24.0];
        let d = sys.bond(rho, c[0] * g1 + c[1] * g3)?;
        out.value += d[0];
        for i in 0..2 {
            out.grad[i] += c[i] * d[1];
            for j in 0..2 {
                out.hess[i][j] += c[i] * c[j] * d[2];
            }
        }
    }
    Ok(out)
}

/// Load vector `∫ f·v_k` for every free DOF, by Gauss quadrature of the
/// continuous profile, weighted by `weight(x)`.
pub(crate) fn load_vector_weighted(
    sys: &LatticeSystem,
    space: &MixedFESpace,
    load: &ExternalLoad,
    rule: &QuadratureRule,
    weight: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mesh = space.mesh();
    let mut f = vec![0.0; space.dof_count()];
    if load.is_zero() {
        return f;
    }
    for e in 0..mesh.element_count() {
        let (a, _) = mesh.element_span(e);
        let h = mesh.element_len(e);
        let dofs = space.element_dofs(e);
        for (t, w) in rule.iter() {
            let x = a as f64 + h * t;
            let c = weight(x);
            if c == 0.0 {
                continue;
            }
            let val = w * h * c * load.density(sys, x);
            let s = space.shape(e, 0, t);
            for j in 0..6 {
                if let Some(i) = dofs[j] {
                    f[i] += val * s[j];
                }
            }
        }
    }
    f
}

/// `∫ f·v_k` for every free DOF.
pub fn load_vector(sys: &LatticeSystem, space: &MixedFESpace, load: &ExternalLoad, rule: &QuadratureRule) -> Vec<f64> {
    load_vector_weighted(sys, space, load, rule, |_| 1.0)
}

/// Per-element gradient and Hessian blocks in the six-slot layout.
type ElementBlock = (f64, [f64; 6], [[f64; 6]; 6]);

/// Continuum energy `∫ W_hoc(u', u''')` on an all-affine (Cauchy-Born) or
/// all-quintic (higher-order) space, with objective `∫W − Fᵀx`.
#[derive(Clone, Debug)]
pub struct ContinuumOperator {
    sys: LatticeSystem,
    space: Arc<MixedFESpace>,
    load: Vec<f64>,
    rule: QuadratureRule,
    exec: Execution,
}

impl ContinuumOperator {
    /// `load` is the free-DOF load vector.
    pub fn new(sys: LatticeSystem, space: Arc<MixedFESpace>, load: Vec<f64>) -> Result<Self> {
        if load.len() != space.dof_count() {
            return Err(Error::Shape { expected: space.dof_count(), got: load.len() });
        }
        if space.mesh().half_count() != sys.half_count() {
            return Err(Error::Shape { expected: sys.site_count(), got: 2 * space.mesh().half_count() });
        }
        Ok(Self { sys, space, load, rule: QuadratureRule::default_rule(), exec: Execution::Auto })
    }

    /// Load by quadrature of the continuous profile.
    pub fn with_load(sys: LatticeSystem, space: Arc<MixedFESpace>, load: &ExternalLoad) -> Result<Self> {
        let rule = QuadratureRule::default_rule();
        let f = load_vector(&sys, &space, load, &rule);
        Self::new(sys, space, f)
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn space(&self) -> &Arc<MixedFESpace> {
        &self.space
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    fn element(&self, u: &MixedFEFunction, e: usize, order: usize) -> Result<ElementBlock> {
        let mesh = self.space.mesh();
        let h = mesh.element_len(e);
        let mut c = u.element_coeffs(e);
        // Derivatives ignore constants; shifting the values avoids cancellation.
        let base = c[0];
        c[0] = 0.0;
        c[3] -= base;
        let quintic = mesh.kind(e) == ElementKind::Quintic;
        let mut energy = 0.0;
        let mut grad = [0.0; 6];
        let mut hess = [[0.0; 6]; 6];
        for (t, w) in self.rule.iter() {
            let b1 = self.space.shape(e, 1, t);
            let b3 = if quintic { self.space.shape(e, 3, t) } else { [0.0; 6] };
            let g1: f64 = b1.iter().zip(&c).map(|(a, b)| a * b).sum();
            let g3: f64 = b3.iter().zip(&c).map(|(a, b)| a * b).sum();
            let d = density_hoc(&self.sys, g1, g3)?;
            let wh = w * h;
            energy += wh * d.value;
            if order >= 1 {
                for j in 0..6 {
                    grad[j] += wh * (d.grad[0] * b1[j] + d.grad[1] * b3[j]);
                }
            }
            if order >= 2 {
                for i in 0..6 {
                    let ri = [b1[i], b3[i]];
                    for j in 0..6 {
                        let rj = [b1[j], b3[j]];
                        let mut s = 0.0;
                        for p in 0..2 {
                            for q in 0..2 {
                                s += ri[p] * d.hess[p][q] * rj[q];
                            }
                        }
                        hess[i][j] += wh * s;
                    }
                }
            }
        }
        Ok((energy, grad, hess))
    }

    fn blocks(&self, u: &MixedFEFunction, order: usize) -> Result<Vec<ElementBlock>> {
        map_range(self.exec, self.space.mesh().element_count(), |e| self.element(u, e, order)).into_iter().collect()
    }

    fn check(&self, u: &MixedFEFunction) -> Result<()> {
        if !Arc::ptr_eq(u.space(), &self.space) && **u.space() != *self.space {
            return Err(Error::Config("function belongs to a different space".into()));
        }
        Ok(())
    }

    /// `∫ W(u', u''')`.
    pub fn energy(&self, u: &MixedFEFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.blocks(u, 0)?.iter().map(|b| b.0).sum())
    }

    /// First variation on the free DOFs (without the load).
    pub fn variation(&self, u: &MixedFEFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        let mut g = vec![0.0; self.space.dof_count()];
        for (e, (_, ge, _)) in self.blocks(u, 1)?.into_iter().enumerate() {
            for (j, d) in self.space.element_dofs(e).iter().enumerate() {
                if let Some(i) = d {
                    g[*i] += ge[j];
                }
            }
        }
        Ok(g)
    }

    pub fn hessian(&self, u: &MixedFEFunction) -> Result<BandMatrix> {
        self.check(u)?;
        let mut t = Triplets::new(self.space.dof_count());
        for (e, (_, _, he)) in self.blocks(u, 2)?.into_iter().enumerate() {
            let dofs = self.space.element_dofs(e);
            for i in 0..6 {
                for j in 0..6 {
                    if let (Some(p), Some(q)) = (dofs[i], dofs[j]) {
                        t.push(p, q, he[i][j]);
                    }
                }
            }
        }
        Ok(t.to_band())
    }

    /// Minimizes `∫W − Fᵀx` from `u ≡ 0`.
    pub fn solve(&self, cfg: &NewtonConfig) -> Result<(MixedFEFunction, SolveReport)> {
        let (x, rep) = newton_minimize(self, vec![0.0; self.space.dof_count()], cfg)?;
        Ok((MixedFEFunction::from_free(self.space.clone(), &x)?, rep))
    }
}

impl Objective for ContinuumOperator {
    fn dim(&self) -> usize {
        self.space.dof_count()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        let u = MixedFEFunction::from_free(self.space.clone(), x)?;
        let work: f64 = self.load.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(ContinuumOperator::energy(self, &u)? - work)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = MixedFEFunction::from_free(self.space.clone(), x)?;
        Ok(self.variation(&u)?.iter().zip(&self.load).map(|(a, b)| a - b).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<BandMatrix> {
        ContinuumOperator::hessian(self, &MixedFEFunction::from_free(self.space.clone(), x)?)
    }
}

/// Periodic all-quintic space on the unit mesh.
pub fn hoc_space(sys: &LatticeSystem) -> Result<Arc<MixedFESpace>> {
    MixedFESpace::new(build_canonical_mesh(sys, &DomainDecomposition::all_continuum(sys))?)
}

/// Periodic all-affine space on the unit mesh.
pub fn cb_space(sys: &LatticeSystem) -> Result<Arc<MixedFESpace>> {
    MixedFESpace::new(build_canonical_mesh(sys, &DomainDecomposition::all_atomistic(sys))?)
}

fn require_kind(u: &MixedFEFunction, kind: ElementKind) -> Result<()> {
    if !u.space().mesh().all_of_kind(kind) {
        return Err(Error::Config(format!("expected an all-{kind:?} mesh")));
    }
    Ok(())
}

/// `∫ W_hoc(u', u''')` for `u` on an all-quintic mesh.
pub fn energy_hoc(sys: &LatticeSystem, u: &MixedFEFunction) -> Result<f64> {
    require_kind(u, ElementKind::Quintic)?;
    let space = u.space().clone();
    let n = space.dof_count();
    ContinuumOperator::new(sys.clone(), space, vec![0.0; n])?.energy(u)
}

/// `∫ ∂₁W·v' + ∂₃W·v'''` for every free basis function `v`.
pub fn variation_hoc(sys: &LatticeSystem, u: &MixedFEFunction) -> Result<Vec<f64>> {
    require_kind(u, ElementKind::Quintic)?;
    let space = u.space().clone();
    let n = space.dof_count();
    ContinuumOperator::new(sys.clone(), space, vec![0.0; n])?.variation(u)
}

pub fn hessian_hoc(sys: &LatticeSystem, u: &MixedFEFunction) -> Result<BandMatrix> {
    require_kind(u, ElementKind::Quintic)?;
    let space = u.space().clone();
    let n = space.dof_count();
    ContinuumOperator::new(sys.clone(), space, vec![0.0; n])?.hessian(u)
}

/// Minimizes the higher-order Cauchy-Born energy minus `∫f·u` over the
/// periodic quintic space with `u(0) = 0`.
pub fn solve_hoc(
    sys: &LatticeSystem,
    load: &ExternalLoad,
    cfg: &NewtonConfig,
) -> Result<(MixedFEFunction, SolveReport)> {
    ContinuumOperator::with_load(sys.clone(), hoc_space(sys)?, load)?.solve(cfg)
}

/// P1 Cauchy-Born counterpart of [`solve_hoc`] on the unit mesh.
pub fn solve_cb(
    sys: &LatticeSystem,
    load: &ExternalLoad,
    cfg: &NewtonConfig,
) -> Result<(MixedFEFunction, SolveReport)> {
    ContinuumOperator::with_load(sys.clone(), cb_space(sys)?, load)?.solve(cfg)
}

/// Higher-order stress `S = ∂₁W + (∂₃W)''` at `x` from the closed form
/// `Σ_ρ ρφ' + (ρ³/24)φ'''·A'² + (ρ⁴/24)φ''·u''' + (ρ⁶/576)φ''·u⁽⁵⁾`
/// with `A = ρu' + ρ³u'''/24`.
pub fn stress_hoc(sys: &LatticeSystem, u: &MixedFEFunction, x: f64) -> Result<f64> {
    let (e, t) = u.space().mesh().locate(x);
    if u.space().mesh().kind(e) != ElementKind::Quintic {
        return Err(Error::Config(format!("x = {x} does not lie in a quintic element")));
    }
    let d: Vec<f64> = (1..=5).map(|k| u.eval_local(e, t, k)).collect();
    let (u1, u2, u3, u4, u5) = (d[0], d[1], d[2], d[3], d[4]);
    let mut s = 0.0;
    for &rho in sys.range() {
        let r = rho as f64;
        let c3 = r * r * r / 24.0;
        let a = r * u1 + c3 * u3;
        let da = r * u2 + c3 * u4;
        let p = sys.bond(rho, a)?;
        s += r * p[1] + c3 * p[3] * da * da + r * c3 * p[2] * u3 + c3 * c3 * p[2] * u5;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomistic::hessian_atomistic;
    use crate::lattice::{LatticeDofs, LatticeFunction, sample_load};
    use crate::potential::PairPotential;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(space: &Arc<MixedFESpace>, amp: f64, seed: u64) -> MixedFEFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..space.dof_count()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        MixedFEFunction::from_free(space.clone(), &x).unwrap()
    }

    #[test]
    fn density_examples() {
        let s1 = LatticeSystem::harmonic(8, &[1]).unwrap();
        let s2 = LatticeSystem::harmonic(8, &[1, 2]).unwrap();
        assert_eq!(density_cb(&s1, 0.0, 0).unwrap(), 0.0);
        assert!((density_cb(&s1, 0.3, 0).unwrap() - 0.045).abs() < 1e-15);
        assert_eq!(density_cb(&s2, 0.0, 0).unwrap(), 0.5);
        assert!((density_cb(&s1, 0.2, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!(density_hoc(&s1, 0.12, -2.88).unwrap().value.abs() < 1e-15);
        assert!((density_hoc(&s1, 0.1, 0.24).unwrap().value - 0.00605).abs() < 1e-15);
    }

    #[test]
    fn restriction_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for pot in [PairPotential::harmonic(), PairPotential::lennard_jones()] {
            let s = LatticeSystem::new(10, 1.0, &[1, 2, 3], pot).unwrap();
            for _ in 0..20 {
                let g = rng.gen_range(-0.1..0.1);
                assert_eq!(density_hoc(&s, g, 0.0).unwrap().value, density_cb(&s, g, 0).unwrap());
            }
        }
    }

    #[test]
    fn density_derivatives_match_differences() {
        let s = LatticeSystem::new(10, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let (g1, g3, h) = (0.03, -0.2, 1e-6);
        let d = density_hoc(&s, g1, g3).unwrap();
        let f = |a: f64, b: f64| density_hoc(&s, a, b).unwrap();
        let fd1 = (f(g1 + h, g3).value - f(g1 - h, g3).value) / (2.0 * h);
        let fd3 = (f(g1, g3 + h).value - f(g1, g3 - h).value) / (2.0 * h);
        assert!((fd1 - d.grad[0]).abs() < 1e-6 * d.grad[0].abs().max(1.0));
        assert!((fd3 - d.grad[1]).abs() < 1e-6 * d.grad[1].abs().max(1.0));
        let h13 = (f(g1, g3 + h).grad[0] - f(g1, g3 - h).grad[0]) / (2.0 * h);
        assert!((h13 - d.hess[0][1]).abs() < 1e-5 * d.hess[0][1].abs().max(1.0));
        assert_eq!(d.hess[0][1], d.hess[1][0]);
    }

    #[test]
    fn homogeneous_state_is_stress_free_for_nn_harmonic() {
        let s = LatticeSystem::harmonic(8, &[1]).unwrap();
        let sp = hoc_space(&s).unwrap();
        let u = MixedFEFunction::zeros(sp);
        assert_eq!(energy_hoc(&s, &u).unwrap(), 0.0);
        assert!(variation_hoc(&s, &u).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(stress_hoc(&s, &u, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn variation_and_hessian_match_differences() {
        let s = LatticeSystem::new(8, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let sp = hoc_space(&s).unwrap();
        let u = random_fn(&sp, 0.02, 4);
        let g = variation_hoc(&s, &u).unwrap();
        let h = hessian_hoc(&s, &u).unwrap();
        assert!(h.is_symmetric(1e-12));
        let x = u.to_free();
        let step = 1e-6;
        let at = |k: usize, sgn: f64| {
            let mut y = x.clone();
            y[k] += sgn * step;
            MixedFEFunction::from_free(sp.clone(), &y).unwrap()
        };
        for k in 0..x.len() {
            let fd = (energy_hoc(&s, &at(k, 1.0)).unwrap() - energy_hoc(&s, &at(k, -1.0)).unwrap()) / (2.0 * step);
            assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0), "dof {k}: {fd} vs {}", g[k]);
        }
        for k in [0, 5, 17, 40] {
            let gp = variation_hoc(&s, &at(k, 1.0)).unwrap();
            let gm = variation_hoc(&s, &at(k, -1.0)).unwrap();
            for i in 0..x.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert!((fd - h.get(i, k)).abs() <= 1e-5 * h.get(i, k).abs().max(1.0));
            }
        }
    }

    #[test]
    fn energy_matches_oversampled_trapezoid() {
        let s = LatticeSystem::new(6, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let sp = hoc_space(&s).unwrap();
        let u = random_fn(&sp, 0.02, 8);
        let e = energy_hoc(&s, &u).unwrap();
        let midpoint = |m: usize| {
            let mut acc = 0.0;
            for i in 0..m {
                let x = -5.0 + 12.0 * (i as f64 + 0.5) / m as f64;
                let w = density_hoc(&s, u.eval(x, 1).unwrap(), u.eval(x, 3).unwrap()).unwrap().value;
                acc += w * 12.0 / m as f64;
            }
            acc
        };
        // Richardson-extrapolated midpoint rule on element-aligned cells.
        let trap = (4.0 * midpoint(12 * 400) - midpoint(12 * 200)) / 3.0;
        assert!((e - trap).abs() <= 1e-5 * e.abs(), "{e} vs {trap}");
        let n = sp.dof_count();
        let fine = ContinuumOperator::new(s.clone(), sp, vec![0.0; n])
            .unwrap()
            .with_rule(QuadratureRule::gauss_legendre(24).unwrap());
        let e = fine.energy(&u).unwrap();
        assert!((e - trap).abs() <= 1e-9 * e.abs(), "{e} vs {trap}");
    }

    #[test]
    fn harmonic_energy_is_exact_quadratic() {
        let s = LatticeSystem::harmonic(8, &[1, 2]).unwrap();
        let sp = hoc_space(&s).unwrap();
        let u = random_fn(&sp, 0.3, 6);
        let zero = MixedFEFunction::zeros(sp.clone());
        let x = u.to_free();
        let h = hessian_hoc(&s, &zero).unwrap();
        let g0 = variation_hoc(&s, &zero).unwrap();
        let e0 = energy_hoc(&s, &zero).unwrap();
        let quad = e0
            + g0.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
            + 0.5 * h.mul_vec(&x).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        assert!((energy_hoc(&s, &u).unwrap() - quad).abs() < 1e-12 * quad.abs().max(1.0));
    }

    #[test]
    fn cb_matches_atomistic_for_nearest_neighbours() {
        let s = LatticeSystem::harmonic(12, &[1]).unwrap();
        let sp = cb_space(&s).unwrap();
        let op = ContinuumOperator::new(s.clone(), sp.clone(), vec![0.0; sp.dof_count()]).unwrap();
        let hc = op.hessian(&MixedFEFunction::zeros(sp.clone())).unwrap();
        let ha = hessian_atomistic(&s, &LatticeFunction::zeros(12)).unwrap();
        let dofs = LatticeDofs::new(&s);
        for a in s.sites().filter(|&x| x != 0) {
            for b in s.sites().filter(|&x| x != 0) {
                let node = |x: i64| sp.mesh().nodes().iter().position(|&n| n == x).unwrap();
                let (p, q) = (sp.node_dofs(node(a))[0].unwrap(), sp.node_dofs(node(b))[0].unwrap());
                assert_eq!(hc.get(p, q), ha.get(dofs.free_index(a).unwrap(), dofs.free_index(b).unwrap()));
            }
        }
        // Same lattice load gives the same nodal solution.
        let f = sample_load(&ExternalLoad::smooth(2.0), &s);
        let mut fv = vec![0.0; sp.dof_count()];
        for (k, &x) in sp.mesh().nodes().iter().enumerate() {
            if let Some(i) = sp.node_dofs(k)[0] {
                fv[i] = f.get(x);
            }
        }
        let (uc, _) =
            ContinuumOperator::new(s.clone(), sp.clone(), fv).unwrap().solve(&NewtonConfig::default()).unwrap();
        let (ua, _) =
            crate::atomistic::AtomisticOperator::new(s.clone(), f).unwrap().solve(&NewtonConfig::default()).unwrap();
        for (k, &x) in sp.mesh().nodes().iter().enumerate() {
            assert!((uc.nodal()[k][0] - ua.get(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn solves_are_one_step_for_harmonic() {
        let s = LatticeSystem::harmonic(16, &[1, 2]).unwrap();
        let cfg = NewtonConfig::default();
        let (u, rep) = solve_hoc(&s, &ExternalLoad::zero(), &cfg).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(u.nodal().iter().all(|v| *v == [0.0; 3]));
        let (_, rep) = solve_hoc(&s, &ExternalLoad::smooth(1.0), &cfg).unwrap();
        assert_eq!(rep.iterations, 1);
        let (_, rep) = solve_cb(&s, &ExternalLoad::smooth(1.0), &cfg).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn stress_of_pure_cubic() {
        // u = c·x³/6 near x = 0.5 has u' = c/8, u'' = c/2, u''' = c, u⁽⁴⁾ = u⁽⁵⁾ = 0.
        let s = LatticeSystem::new(8, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let sp = hoc_space(&s).unwrap();
        let c = 0.05;
        let p = |x: f64| [c * x.powi(3) / 6.0, c * x * x / 2.0, c * x];
        let mut nodal = vec![[0.0; 3]; sp.mesh().node_count()];
        for (k, &x) in sp.mesh().nodes().iter().enumerate() {
            nodal[k] = p(x as f64);
        }
        let u = MixedFEFunction::from_nodal(sp, nodal).unwrap();
        let x = 0.0;
        let got = stress_hoc(&s, &u, x).unwrap();
        let mut expected = 0.0;
        for &rho in s.range() {
            let r = rho as f64;
            let a = r.powi(3) * c / 24.0;
            let d = s.bond(rho, a).unwrap();
            expected += r * d[1] + r.powi(4) / 24.0 * d[2] * c;
        }
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn stress_matches_weak_form_oracle() {
        // S = ∂₁W + (∂₃W)'' with the second derivative by differences.
        let s = LatticeSystem::new(8, 1.0, &[1, 2], PairPotential::lennard_jones()).unwrap();
        let sp = hoc_space(&s).unwrap();
        let u = random_fn(&sp, 0.01, 12);
        let d3 = |x: f64| density_hoc(&s, u.eval(x, 1).unwrap(), u.eval(x, 3).unwrap()).unwrap();
        for x in [0.3, 2.5, -3.6] {
            let h = 1e-3;
            let dd = (d3(x + h).grad[1] - 2.0 * d3(x).grad[1] + d3(x - h).grad[1]) / (h * h);
            let oracle = d3(x).grad[0] + dd;
            let got = stress_hoc(&s, &u, x).unwrap();
            assert!((got - oracle).abs() <= 1e-4 * oracle.abs().max(1e-3), "{x}: {got} vs {oracle}");
        }
    }
}
