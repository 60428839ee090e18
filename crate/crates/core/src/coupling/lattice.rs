//! Blended couplings posed directly on the lattice: B-QCE (energy) and
//! B-QCF (force). The continuum part is P1 Cauchy-Born on the unit mesh,
//! so every element `[ξ, ξ+1]` carries `W_cb(u(ξ+1) − u(ξ))`.

use crate::atomistic::{push_bond, weighted_energy, weighted_gradient, weighted_hessian};
use crate::continuum::density_cb;
use crate::error::Result;
use crate::exec::{Execution, map_chunks};
use crate::lattice::{ExternalLoad, LatticeDofs, LatticeFunction, LatticeSystem, check_shape, sample_load};
use crate::solver::{
    BandMatrix, NewtonConfig, Objective, ResidualSystem, SolveReport, Triplets, newton_minimize, newton_root,
};

use super::SiteSplit;
use super::decomposition::{BlendFunction, DomainDecomposition};

const CHUNK: usize = 256;

/// `c(ξ)·W_cb^(order)(u(ξ+1) − u(ξ))` for every site in storage order.
fn element_terms<C>(sys: &LatticeSystem, u: &LatticeFunction, exec: Execution, order: usize, c: &C) -> Result<Vec<f64>>
where
    C: Fn(i64) -> f64 + Sync,
{
    let terms = map_chunks(exec, sys.site_count(), CHUNK, |idx| {
        idx.map(|i| {
            let xi = sys.site_of(i);
            let w = c(xi);
            if w == 0.0 { Ok(0.0) } else { density_cb(sys, u.diff(xi, 1), order).map(|d| w * d) }
        })
        .collect::<Vec<_>>()
    });
    terms.into_iter().collect()
}

/// Sampled blend values `β(ξ)` in storage order.
fn sample_blend(sys: &LatticeSystem, blend: &BlendFunction) -> Vec<f64> {
    (0..sys.site_count()).map(|i| blend.value(sys.site_of(i) as f64)).collect()
}

/// Blended energy-based coupling
/// `Σ w(ξ,ρ)φ_ρ(D_ρu(ξ)) + Σ_elements Qβ·W_cb(∇u) − ⟨f, u⟩_Λ`.
#[derive(Clone, Debug)]
pub struct Bqce {
    sys: LatticeSystem,
    beta: Vec<f64>,
    load: LatticeFunction,
    split: SiteSplit,
    dofs: LatticeDofs,
    exec: Execution,
}

impl Bqce {
    pub fn new(sys: LatticeSystem, decomposition: &DomainDecomposition, load: LatticeFunction) -> Result<Self> {
        check_shape(&sys, &load)?;
        let beta = sample_blend(&sys, &BlendFunction::new(*decomposition));
        let dofs = LatticeDofs::new(&sys);
        Ok(Self { sys, beta, load, split: SiteSplit::default(), dofs, exec: Execution::Auto })
    }

    pub fn with_load(sys: LatticeSystem, decomposition: &DomainDecomposition, load: &ExternalLoad) -> Result<Self> {
        let f = sample_load(load, &sys);
        Self::new(sys, decomposition, f)
    }

    pub fn with_split(mut self, split: SiteSplit) -> Self {
        self.split = split;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn system(&self) -> &LatticeSystem {
        &self.sys
    }

    pub fn dofs(&self) -> &LatticeDofs {
        &self.dofs
    }

    fn beta(&self, xi: i64) -> f64 {
        self.beta[self.sys.index_of(self.sys.wrap_site(xi))]
    }

    fn bond_weight(&self, xi: i64, rho: i64) -> f64 {
        self.split.weight(self.beta(xi), self.beta(xi + rho))
    }

    /// `Qβ` averaged over the element `[ξ, ξ+1]`.
    fn element_weight(&self, xi: i64) -> f64 {
        0.5 * (self.beta(xi) + self.beta(xi + 1))
    }

    /// Internal energy (without the load).
    pub fn energy(&self, u: &LatticeFunction) -> Result<f64> {
        check_shape(&self.sys, u)?;
        let a = weighted_energy(&self.sys, u, self.exec, &|x, r| self.bond_weight(x, r))?;
        let c: f64 = element_terms(&self.sys, u, self.exec, 0, &|x| self.element_weight(x))?.iter().sum();
        Ok(a + c)
    }

    /// Per-site gradient of the internal energy.
    pub fn gradient(&self, u: &LatticeFunction) -> Result<LatticeFunction> {
        check_shape(&self.sys, u)?;
        let mut g = weighted_gradient(&self.sys, u, self.exec, &|x, r| self.bond_weight(x, r))?;
        let t = element_terms(&self.sys, u, self.exec, 1, &|x| self.element_weight(x))?;
        for (i, s) in t.iter().enumerate() {
            if *s != 0.0 {
                let xi = self.sys.site_of(i);
                g.set(xi + 1, g.get(xi + 1) + s);
                g.set(xi, g.get(xi) - s);
            }
        }
        Ok(g)
    }

    /// Hessian of the internal energy on the free sites.
    pub fn hessian(&self, u: &LatticeFunction) -> Result<BandMatrix> {
        check_shape(&self.sys, u)?;
        let mut trip = weighted_hessian(&self.sys, &self.dofs, u, self.exec, &|x, r| self.bond_weight(x, r))?;
        let t = element_terms(&self.sys, u, self.exec, 2, &|x| self.element_weight(x))?;
        for (i, s) in t.iter().enumerate() {
            let xi = self.sys.site_of(i);
            push_bond(&mut trip, &self.dofs, xi, xi + 1, *s);
        }
        Ok(trip.to_band())
    }

    pub fn solve(&self, cfg: &NewtonConfig) -> Result<(LatticeFunction, SolveReport)> {
        let (x, rep) = newton_minimize(self, vec![0.0; self.dofs.len()], cfg)?;
        Ok((self.dofs.from_free(&x), rep))
    }
}

impl Objective for Bqce {
    fn dim(&self) -> usize {
        self.dofs.len()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        let u = self.dofs.from_free(x);
        let work: f64 = self.dofs.to_free(&self.load).iter().zip(x).map(|(f, v)| f * v).sum();
        Ok(Bqce::energy(self, &u)? - work)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = Bqce::gradient(self, &self.dofs.from_free(x))?;
        Ok(self.dofs.to_free(&g).iter().zip(self.dofs.to_free(&self.load)).map(|(a, b)| a - b).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<BandMatrix> {
        Bqce::hessian(self, &self.dofs.from_free(x))
    }
}

/// Blended force-based coupling:
/// `r(η) = (1 − β(η))·∂_η ℰ^a(u) + β(η)·∂_η ℰ^cb(u) − f(η)`.
#[derive(Clone, Debug)]
pub struct Bqcf {
    sys: LatticeSystem,
    beta: Vec<f64>,
    load: LatticeFunction,
    dofs: LatticeDofs,
    exec: Execution,
}

impl Bqcf {
    pub fn new(sys: LatticeSystem, decomposition: &DomainDecomposition, load: LatticeFunction) -> Result<Self> {
        check_shape(&sys, &load)?;
        let beta = sample_blend(&sys, &BlendFunction::new(*decomposition));
        let dofs = LatticeDofs::new(&sys);
        Ok(Self { sys, beta, load, dofs, exec: Execution::Auto })
    }

    pub fn with_load(sys: LatticeSystem, decomposition: &DomainDecomposition, load: &ExternalLoad) -> Result<Self> {
        let f = sample_load(load, &sys);
        Self::new(sys, decomposition, f)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn system(&self) -> &LatticeSystem {
        &self.sys
    }

    pub fn dofs(&self) -> &LatticeDofs {
        &self.dofs
    }

    fn beta(&self, xi: i64) -> f64 {
        self.beta[self.sys.index_of(self.sys.wrap_site(xi))]
    }

    /// Per-site residual including the load.
    pub fn residual(&self, u: &LatticeFunction) -> Result<LatticeFunction> {
        check_shape(&self.sys, u)?;
        let ga = weighted_gradient(&self.sys, u, self.exec, &|_, _| 1.0)?;
        let t = element_terms(&self.sys, u, self.exec, 1, &|_| 1.0)?;
        let mut gc = LatticeFunction::zeros(self.sys.half_count());
        for (i, s) in t.iter().enumerate() {
            let xi = self.sys.site_of(i);
            gc.set(xi + 1, gc.get(xi + 1) + s);
            gc.set(xi, gc.get(xi) - s);
        }
        Ok(LatticeFunction::from_fn(self.sys.half_count(), |xi| {
            let b = self.beta(xi);
            (1.0 - b) * ga.get(xi) + b * gc.get(xi) - self.load.get(xi)
        }))
    }

    /// Jacobian on the free sites (non-symmetric).
    pub fn jacobian(&self, u: &LatticeFunction) -> Result<BandMatrix> {
        check_shape(&self.sys, u)?;
        let ta = crate::atomistic::bond_terms(&self.sys, u, self.exec, 2, &|_, _| 1.0)?;
        let tc = element_terms(&self.sys, u, self.exec, 2, &|_| 1.0)?;
        let k = self.sys.range().len();
        let mut trip = Triplets::new(self.dofs.len());
        let mut push = |a: i64, b: i64, s: f64, wa: f64, wb: f64| {
            let (ia, ib) = (self.dofs.free_index(a), self.dofs.free_index(b));
            if let Some(p) = ia {
                trip.push(p, p, wa * s);
                if let Some(q) = ib {
                    trip.push(p, q, -wa * s);
                }
            }
            if let Some(q) = ib {
                trip.push(q, q, wb * s);
                if let Some(p) = ia {
                    trip.push(q, p, -wb * s);
                }
            }
        };
        for i in 0..self.sys.site_count() {
            let xi = self.sys.site_of(i);
            for (j, &rho) in self.sys.range().iter().enumerate() {
                let s = ta[i * k + j];
                if s != 0.0 {
                    push(xi, xi + rho, s, 1.0 - self.beta(xi), 1.0 - self.beta(xi + rho));
                }
            }
            if tc[i] != 0.0 {
                push(xi, xi + 1, tc[i], self.beta(xi), self.beta(xi + 1));
            }
        }
        Ok(trip.to_band())
    }

    pub fn solve(&self, cfg: &NewtonConfig) -> Result<(LatticeFunction, SolveReport)> {
        let (x, rep) = newton_root(self, vec![0.0; self.dofs.len()], cfg)?;
        Ok((self.dofs.from_free(&x), rep))
    }
}

impl ResidualSystem for Bqcf {
    fn dim(&self) -> usize {
        self.dofs.len()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.dofs.to_free(&Bqcf::residual(self, &self.dofs.from_free(x))?))
    }

    fn jacobian(&self, x: &[f64]) -> Result<BandMatrix> {
        Bqcf::jacobian(self, &self.dofs.from_free(x))
    }
}

/// B-QCE internal energy of `u`.
pub fn energy_bqce(sys: &LatticeSystem, decomposition: &DomainDecomposition, u: &LatticeFunction) -> Result<f64> {
    Bqce::new(sys.clone(), decomposition, LatticeFunction::zeros(sys.half_count()))?.energy(u)
}

/// B-QCF residual of `u` under the sampled load.
pub fn residual_bqcf(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    load: &ExternalLoad,
    u: &LatticeFunction,
) -> Result<LatticeFunction> {
    Bqcf::with_load(sys.clone(), decomposition, load)?.residual(u)
}
