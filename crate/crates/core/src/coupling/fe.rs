//! Blended couplings on the mixed P1 / quintic space: B-QHOCE (energy) and
//! B-QHOCF (force).
//!
//! Both share one residual form. With `ℓ_b` the stencil of the bond
//! difference `u(ξ+ρ) − u(ξ)` and `B_k` the `k`-th derivative rows at a
//! quadrature point,
//!
//! `r = Σ_b φ'_ρ(ℓ_b·x)·m_b + Σ_q w_q (∂₁W·T₁ + ∂₃W·T₃) − F`.
//!
//! The energy method has `m_b = w_b ℓ_b`, `T₁ = βB₁`, `T₃ = βB₃`. The force
//! method tests against `(1 − β)v` on the lattice and `βv` in the
//! continuum, so `m_b = (1 − β(ξ+ρ))s_{ξ+ρ} − (1 − β(ξ))s_ξ` and the
//! product rule gives `T₁ = β'B₀ + βB₁`,
//! `T₃ = β'''B₀ + 3β''B₁ + 3β'B₂ + βB₃`.

use std::sync::Arc;

use crate::continuum::{density_hoc, load_vector_weighted};
use crate::error::{Error, Result};
use crate::exec::{Execution, map_range, map_slice};
use crate::fem::mesh::ElementKind;
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{MixedFEFunction, MixedFESpace};
use crate::lattice::{ExternalLoad, LatticeSystem};
use crate::solver::{
    BandMatrix, NewtonConfig, Objective, ResidualSystem, SolveReport, Triplets, newton_minimize, newton_root,
};

use super::decomposition::{BlendFunction, DomainDecomposition, Region};
use super::{LoadForm, SiteSplit};

/// Sparse row over free DOFs.
type Stencil = Vec<(usize, f64)>;

fn merge(mut s: Stencil) -> Stencil {
    s.sort_by_key(|e| e.0);
    let mut out: Stencil = Vec::with_capacity(s.len());
    for (i, v) in s {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

fn dot(s: &Stencil, x: &[f64]) -> f64 {
    s.iter().map(|&(i, v)| v * x[i]).sum()
}

/// Point evaluation `v ↦ v(ξ)` as a free-DOF stencil.
fn site_stencil(space: &MixedFESpace, site: i64) -> Stencil {
    let (e, t) = space.mesh().locate(site as f64);
    let s = space.shape(e, 0, t);
    space.element_dofs(e).iter().zip(s).filter_map(|(d, v)| d.map(|i| (i, v))).filter(|e| e.1 != 0.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Energy,
    Force,
}

#[derive(Clone, Debug)]
struct Bond {
    rho: i64,
    ell: Stencil,
    m: Stencil,
    /// Energy weight (energy method only).
    weight: f64,
}

#[derive(Clone, Debug)]
struct QuadPoint {
    dofs: [Option<usize>; 6],
    wh: f64,
    beta: f64,
    b1: [f64; 6],
    b3: [f64; 6],
    t1: [f64; 6],
    t3: [f64; 6],
}

/// Precomputed blended operator on a mixed space.
#[derive(Clone, Debug)]
struct Blended {
    sys: LatticeSystem,
    space: Arc<MixedFESpace>,
    bonds: Vec<Bond>,
    points: Vec<QuadPoint>,
    load: Vec<f64>,
    exec: Execution,
}

struct Setup<'a> {
    sys: &'a LatticeSystem,
    space: &'a Arc<MixedFESpace>,
    decomposition: &'a DomainDecomposition,
    load: &'a ExternalLoad,
    split: SiteSplit,
    load_form: LoadForm,
    rule: &'a QuadratureRule,
    exec: Execution,
}

impl Blended {
    fn build(kind: Kind, p: Setup<'_>) -> Result<Self> {
        let Setup { sys, space, decomposition, load, split, load_form, rule, exec } = p;
        if space.mesh().half_count() != sys.half_count() || decomposition.half_count() != sys.half_count() {
            return Err(Error::Shape { expected: sys.site_count(), got: 2 * space.mesh().half_count() });
        }
        let blend = BlendFunction::new(*decomposition);
        let beta = |x: i64| blend.value(x as f64);

        // Sites whose lattice weight can be nonzero, with their stencils.
        let mut bonds = Vec::new();
        let stencil = |x: i64| site_stencil(space, sys.wrap_site(x));
        for xi in sys.sites() {
            let bx = beta(xi);
            for &rho in sys.range() {
                let by = beta(xi + rho);
                if bx == 1.0 && by == 1.0 {
                    continue;
                }
                let (sa, sb) = (stencil(xi), stencil(xi + rho));
                let ell = merge(sb.iter().copied().chain(sa.iter().map(|&(i, v)| (i, -v))).collect());
                let (m, weight) = match kind {
                    Kind::Energy => {
                        let w = split.weight(bx, by);
                        (ell.iter().map(|&(i, v)| (i, w * v)).collect(), w)
                    }
                    Kind::Force => (
                        merge(
                            sb.iter()
                                .map(|&(i, v)| (i, (1.0 - by) * v))
                                .chain(sa.iter().map(|&(i, v)| (i, -(1.0 - bx) * v)))
                                .collect(),
                        ),
                        0.0,
                    ),
                };
                if ell.is_empty() && m.is_empty() && weight == 0.0 {
                    continue;
                }
                bonds.push(Bond { rho, ell, m, weight });
            }
        }

        let mesh = space.mesh();
        let mut points = Vec::new();
        for e in 0..mesh.element_count() {
            if mesh.kind(e) != ElementKind::Quintic {
                continue;
            }
            let (a, _) = mesh.element_span(e);
            let h = mesh.element_len(e);
            let dofs = space.element_dofs(e);
            for (t, w) in rule.iter() {
                let x = a as f64 + h * t;
                let bt = blend.eval(x);
                if bt == [0.0; 4] {
                    continue;
                }
                let b: Vec<[f64; 6]> = (0..4).map(|k| space.shape(e, k, t)).collect();
                let (t1, t3) = match kind {
                    Kind::Energy => (b[1].map(|v| bt[0] * v), b[3].map(|v| bt[0] * v)),
                    Kind::Force => {
                        let mut t1 = [0.0; 6];
                        let mut t3 = [0.0; 6];
                        for j in 0..6 {
                            t1[j] = bt[1] * b[0][j] + bt[0] * b[1][j];
                            t3[j] = bt[3] * b[0][j] + 3.0 * bt[2] * b[1][j] + 3.0 * bt[1] * b[2][j] + bt[0] * b[3][j];
                        }
                        (t1, t3)
                    }
                };
                points.push(QuadPoint { dofs, wh: w * h, beta: bt[0], b1: b[1], b3: b[3], t1, t3 });
            }
        }

        let mut f = vec![0.0; space.dof_count()];
        if !load.is_zero() {
            let sharp = kind == Kind::Energy && load_form == LoadForm::Sharp;
            for xi in sys.sites() {
                let c = if sharp {
                    if decomposition.region(xi as f64) == Region::Atomistic { 1.0 } else { 0.0 }
                } else {
                    1.0 - beta(xi)
                };
                if c == 0.0 {
                    continue;
                }
                let fx = c * load.density(sys, xi as f64);
                for (i, v) in stencil(xi) {
                    f[i] += fx * v;
                }
            }
            let cont = if sharp {
                load_vector_weighted(sys, space, load, rule, |x| {
                    if decomposition.region(x) == Region::Atomistic { 0.0 } else { 1.0 }
                })
            } else {
                load_vector_weighted(sys, space, load, rule, |x| blend.value(x))
            };
            for (a, b) in f.iter_mut().zip(cont) {
                *a += b;
            }
        }

        Ok(Self { sys: sys.clone(), space: space.clone(), bonds, points, load: f, exec })
    }

    fn dim(&self) -> usize {
        self.space.dof_count()
    }

    fn point_density(&self, q: &QuadPoint, x: &[f64]) -> Result<crate::continuum::HocEval> {
        let mut g1 = 0.0;
        let mut g3 = 0.0;
        for j in 0..6 {
            if let Some(i) = q.dofs[j] {
                g1 += q.b1[j] * x[i];
                g3 += q.b3[j] * x[i];
            }
        }
        density_hoc(&self.sys, g1, g3)
    }

    /// Internal energy; meaningful for the energy method only.
    fn internal_energy(&self, x: &[f64]) -> Result<f64> {
        let a: Result<Vec<f64>> = map_slice(self.exec, &self.bonds, |b| {
            if b.weight == 0.0 { Ok(0.0) } else { Ok(b.weight * self.sys.bond(b.rho, dot(&b.ell, x))?[0]) }
        })
        .into_iter()
        .collect();
        let c: Result<Vec<f64>> =
            map_slice(self.exec, &self.points, |q| Ok(q.wh * q.beta * self.point_density(q, x)?.value))
                .into_iter()
                .collect();
        Ok(a?.iter().sum::<f64>() + c?.iter().sum::<f64>())
    }

    /// Residual without the load.
    fn internal_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let a: Result<Vec<f64>> =
            map_slice(self.exec, &self.bonds, |b| Ok(self.sys.bond(b.rho, dot(&b.ell, x))?[1])).into_iter().collect();
        let c: Result<Vec<[f64; 2]>> =
            map_slice(self.exec, &self.points, |q| Ok(self.point_density(q, x)?.grad)).into_iter().collect();
        let mut r = vec![0.0; self.dim()];
        for (b, d) in self.bonds.iter().zip(a?) {
            for &(i, v) in &b.m {
                r[i] += d * v;
            }
        }
        for (q, g) in self.points.iter().zip(c?) {
            for j in 0..6 {
                if let Some(i) = q.dofs[j] {
                    r[i] += q.wh * (g[0] * q.t1[j] + g[1] * q.t3[j]);
                }
            }
        }
        Ok(r)
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.internal_residual(x)?;
        for (a, f) in r.iter_mut().zip(&self.load) {
            *a -= f;
        }
        Ok(r)
    }

    fn jacobian(&self, x: &[f64]) -> Result<BandMatrix> {
        let a: Result<Vec<f64>> =
            map_slice(self.exec, &self.bonds, |b| Ok(self.sys.bond(b.rho, dot(&b.ell, x))?[2])).into_iter().collect();
        let c: Result<Vec<[[f64; 2]; 2]>> =
            map_slice(self.exec, &self.points, |q| Ok(self.point_density(q, x)?.hess)).into_iter().collect();
        let mut t = Triplets::new(self.dim());
        for (b, d) in self.bonds.iter().zip(a?) {
            if d == 0.0 {
                continue;
            }
            for &(i, mv) in &b.m {
                for &(j, lv) in &b.ell {
                    t.push(i, j, d * mv * lv);
                }
            }
        }
        for (q, h) in self.points.iter().zip(c?) {
            for p in 0..6 {
                let Some(i) = q.dofs[p] else { continue };
                let row = [q.t1[p], q.t3[p]];
                for s in 0..6 {
                    let Some(j) = q.dofs[s] else { continue };
                    let col = [q.b1[s], q.b3[s]];
                    let v =
                        row[0] * (h[0][0] * col[0] + h[0][1] * col[1]) + row[1] * (h[1][0] * col[0] + h[1][1] * col[1]);
                    t.push(i, j, q.wh * v);
                }
            }
        }
        Ok(t.to_band())
    }
}

/// Options shared by the mixed-space couplings.
#[derive(Clone, Debug)]
pub struct FeOptions {
    pub split: SiteSplit,
    pub load_form: LoadForm,
    pub rule: QuadratureRule,
    pub exec: Execution,
}

impl Default for FeOptions {
    fn default() -> Self {
        Self {
            split: SiteSplit::default(),
            load_form: LoadForm::default(),
            rule: QuadratureRule::default_rule(),
            exec: Execution::Auto,
        }
    }
}

macro_rules! common_accessors {
    () => {
        pub fn space(&self) -> &Arc<MixedFESpace> {
            &self.0.space
        }

        pub fn system(&self) -> &LatticeSystem {
            &self.0.sys
        }

        /// Free-DOF load vector.
        pub fn load(&self) -> &[f64] {
            &self.0.load
        }

        pub fn dim(&self) -> usize {
            self.0.dim()
        }
    };
}

/// Blended energy-based coupling with the higher-order continuum.
#[derive(Clone, Debug)]
pub struct Bqhoce(Blended);

impl Bqhoce {
    pub fn new(
        sys: &LatticeSystem,
        space: &Arc<MixedFESpace>,
        decomposition: &DomainDecomposition,
        load: &ExternalLoad,
        opts: &FeOptions,
    ) -> Result<Self> {
        Blended::build(
            Kind::Energy,
            Setup {
                sys,
                space,
                decomposition,
                load,
                split: opts.split,
                load_form: opts.load_form,
                rule: &opts.rule,
                exec: opts.exec,
            },
        )
        .map(Self)
    }

    common_accessors!();

    /// Internal energy (without the load).
    pub fn energy(&self, u: &MixedFEFunction) -> Result<f64> {
        self.0.internal_energy(&u.to_free())
    }

    /// Gradient of the internal energy on the free DOFs.
    pub fn gradient(&self, u: &MixedFEFunction) -> Result<Vec<f64>> {
        self.0.internal_residual(&u.to_free())
    }

    pub fn hessian(&self, u: &MixedFEFunction) -> Result<BandMatrix> {
        self.0.jacobian(&u.to_free())
    }

    pub fn solve(&self, cfg: &NewtonConfig) -> Result<(MixedFEFunction, SolveReport)> {
        let (x, rep) = newton_minimize(self, vec![0.0; self.dim()], cfg)?;
        Ok((MixedFEFunction::from_free(self.0.space.clone(), &x)?, rep))
    }
}

impl Objective for Bqhoce {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        let work: f64 = self.0.load.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(self.0.internal_energy(x)? - work)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.residual(x)
    }

    fn hessian(&self, x: &[f64]) -> Result<BandMatrix> {
        self.0.jacobian(x)
    }
}

/// Blended force-based coupling with the higher-order continuum.
#[derive(Clone, Debug)]
pub struct Bqhocf(Blended);

impl Bqhocf {
    /// The load is always tested against `(1 − β)v` on the lattice and
    /// `βv` in the continuum; `opts.split` and `opts.load_form` are unused.
    pub fn new(
        sys: &LatticeSystem,
        space: &Arc<MixedFESpace>,
        decomposition: &DomainDecomposition,
        load: &ExternalLoad,
        opts: &FeOptions,
    ) -> Result<Self> {
        Blended::build(
            Kind::Force,
            Setup {
                sys,
                space,
                decomposition,
                load,
                split: opts.split,
                load_form: LoadForm::Blended,
                rule: &opts.rule,
                exec: opts.exec,
            },
        )
        .map(Self)
    }

    common_accessors!();

    /// Residual on the free DOFs including the load.
    pub fn residual(&self, u: &MixedFEFunction) -> Result<Vec<f64>> {
        self.0.residual(&u.to_free())
    }

    pub fn jacobian(&self, u: &MixedFEFunction) -> Result<BandMatrix> {
        self.0.jacobian(&u.to_free())
    }

    pub fn solve(&self, cfg: &NewtonConfig) -> Result<(MixedFEFunction, SolveReport)> {
        let (x, rep) = newton_root(self, vec![0.0; self.dim()], cfg)?;
        Ok((MixedFEFunction::from_free(self.0.space.clone(), &x)?, rep))
    }
}

impl ResidualSystem for Bqhocf {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.residual(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<BandMatrix> {
        self.0.jacobian(x)
    }
}

/// Stiffness of `∫ v'w'` on the free DOFs, used as the reference form for
/// dual norms on a mixed space.
pub fn h1_seminorm_matrix(space: &MixedFESpace, rule: &QuadratureRule) -> BandMatrix {
    let mesh = space.mesh();
    let blocks = map_range(Execution::Auto, mesh.element_count(), |e| {
        let h = mesh.element_len(e);
        let mut k = [[0.0; 6]; 6];
        for (t, w) in rule.iter() {
            let b = space.shape(e, 1, t);
            for i in 0..6 {
                for j in 0..6 {
                    k[i][j] += w * h * b[i] * b[j];
                }
            }
        }
        k
    });
    let mut t = Triplets::new(space.dof_count());
    for (e, k) in blocks.iter().enumerate() {
        let d = space.element_dofs(e);
        for i in 0..6 {
            for j in 0..6 {
                if let (Some(p), Some(q)) = (d[i], d[j]) {
                    t.push(p, q, k[i][j]);
                }
            }
        }
    }
    t.to_band()
}

/// B-QHOCE internal energy of `u` on its own space.
pub fn energy_bqhoce(sys: &LatticeSystem, decomposition: &DomainDecomposition, u: &MixedFEFunction) -> Result<f64> {
    Bqhoce::new(sys, u.space(), decomposition, &ExternalLoad::zero(), &FeOptions::default())?.energy(u)
}

/// B-QHOCF residual of `u` on its own space.
pub fn residual_bqhocf(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    load: &ExternalLoad,
    u: &MixedFEFunction,
) -> Result<Vec<f64>> {
    Bqhocf::new(sys, u.space(), decomposition, load, &FeOptions::default())?.residual(u)
}
