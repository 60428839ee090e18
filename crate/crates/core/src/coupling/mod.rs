//! Domain decomposition, blending and the four blended coupling methods.

pub mod decomposition;
pub mod fe;
pub mod lattice;

pub use decomposition::{BlendFunction, DomainDecomposition, Region, build_blend, smoothstep};
pub use fe::{Bqhoce, Bqhocf, FeOptions, energy_bqhoce, residual_bqhocf};
pub use lattice::{Bqce, Bqcf, energy_bqce, residual_bqcf};

/// How a bond `(ξ, ξ+ρ)` of an energy-based coupling is weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SiteSplit {
    /// `1 − (β(ξ) + β(ξ+ρ))/2`.
    #[default]
    Symmetric,
    /// `1 − β(ξ)`: the weight of the site the bond starts from.
    Forward,
}

impl SiteSplit {
    #[inline]
    pub fn weight(self, beta_from: f64, beta_to: f64) -> f64 {
        match self {
            SiteSplit::Symmetric => 1.0 - 0.5 * (beta_from + beta_to),
            SiteSplit::Forward => 1.0 - beta_from,
        }
    }
}

/// External work of the energy-based mixed-space coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoadForm {
    /// `⟨f, (1 − β)v⟩_Λ + ∫ βf·v`.
    #[default]
    Blended,
    /// `⟨f, v⟩_{Λ_a} + ∫_{Ω_b ∪ Ω_c} f·v`.
    Sharp,
}

use std::fmt;
use std::str::FromStr;

use crate::atomistic::laplacian;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fem::mesh::build_coarse_mesh;
use crate::fem::space::{MixedFEFunction, MixedFESpace};
use crate::lattice::{ExternalLoad, LatticeDofs, LatticeFunction, LatticeSystem};
use crate::solver::{NewtonConfig, Objective, ResidualSystem, SolveReport, banded_solve};

/// The four blended couplings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Bqce,
    Bqcf,
    Bqhoce,
    Bqhocf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bqce, Method::Bqcf, Method::Bqhoce, Method::Bqhocf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bqce => "bqce",
            Method::Bqcf => "bqcf",
            Method::Bqhoce => "bqhoce",
            Method::Bqhocf => "bqhocf",
        }
    }

    /// Energy-based (minimization) rather than force-based (root finding).
    pub fn is_energy(self) -> bool {
        matches!(self, Method::Bqce | Method::Bqhoce)
    }

    /// Posed on the lattice with a P1 Cauchy-Born continuum.
    pub fn is_lattice(self) -> bool {
        matches!(self, Method::Bqce | Method::Bqcf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected bqce, bqcf, bqhoce or bqhocf)")))
    }
}

/// Options of [`solve_coupled`] and [`ghost_force_diagnostic`].
#[derive(Clone, Debug)]
pub struct CouplingOptions {
    pub split: SiteSplit,
    pub load_form: LoadForm,
    /// Target continuum element size for the mixed-space methods; 1 is the
    /// unit mesh.
    pub mesh_size: i64,
    pub exec: Execution,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self { split: SiteSplit::default(), load_form: LoadForm::default(), mesh_size: 1, exec: Execution::Auto }
    }
}

impl CouplingOptions {
    fn fe(&self) -> FeOptions {
        FeOptions { split: self.split, load_form: self.load_form, exec: self.exec, ..FeOptions::default() }
    }
}

/// Solution of a coupled problem.
#[derive(Clone, Debug)]
pub enum CoupledSolution {
    Lattice(LatticeFunction),
    Field(MixedFEFunction),
}

impl CoupledSolution {
    /// Displacement at `x`: piecewise linear between sites for lattice
    /// solutions, the finite element function otherwise.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            CoupledSolution::Lattice(u) => {
                let a = x.floor();
                let t = x - a;
                let a = a as i64;
                (1.0 - t) * u.get(a) + t * u.get(a + 1)
            }
            CoupledSolution::Field(u) => u.value(x),
        }
    }
}

fn mixed_space(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    h: i64,
) -> Result<std::sync::Arc<MixedFESpace>> {
    MixedFESpace::new(build_coarse_mesh(sys, decomposition, h)?)
}

/// Solves one coupled problem from `u ≡ 0`: Newton minimization for the
/// energy methods, Newton root finding for the force methods.
pub fn solve_coupled(
    method: Method,
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    load: &ExternalLoad,
    opts: &CouplingOptions,
    cfg: &NewtonConfig,
) -> Result<(CoupledSolution, SolveReport)> {
    if method.is_lattice() && opts.mesh_size != 1 {
        return Err(Error::Config(format!("{method} is posed on the lattice and cannot be coarsened")));
    }
    match method {
        Method::Bqce => {
            let op =
                Bqce::with_load(sys.clone(), decomposition, load)?.with_split(opts.split).with_execution(opts.exec);
            op.solve(cfg).map(|(u, r)| (CoupledSolution::Lattice(u), r))
        }
        Method::Bqcf => {
            let op = Bqcf::with_load(sys.clone(), decomposition, load)?.with_execution(opts.exec);
            op.solve(cfg).map(|(u, r)| (CoupledSolution::Lattice(u), r))
        }
        Method::Bqhoce => {
            let sp = mixed_space(sys, decomposition, opts.mesh_size)?;
            let op = Bqhoce::new(sys, &sp, decomposition, load, &opts.fe())?;
            op.solve(cfg).map(|(u, r)| (CoupledSolution::Field(u), r))
        }
        Method::Bqhocf => {
            let sp = mixed_space(sys, decomposition, opts.mesh_size)?;
            let op = Bqhocf::new(sys, &sp, decomposition, load, &opts.fe())?;
            op.solve(cfg).map(|(u, r)| (CoupledSolution::Field(u), r))
        }
    }
}

/// Residual of a coupled method at `u ≡ 0` with `f ≡ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhostForce {
    /// Euclidean norm over the free DOFs.
    pub l2: f64,
    /// `√(gᵀL⁻¹g)`, with `L` the nearest-neighbour Laplacian for the lattice
    /// methods and the `∫ v'w'` stiffness for the mixed-space methods.
    pub dual: f64,
    pub max: f64,
}

fn ghost_from(g: &[f64], l: &crate::solver::BandMatrix) -> Result<GhostForce> {
    let l2 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let y = banded_solve(l, g)?;
    let dual = g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
    Ok(GhostForce { l2, dual, max })
}

/// Ghost force of `method`: its residual at the homogeneous state.
pub fn ghost_force_diagnostic(
    method: Method,
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    opts: &CouplingOptions,
) -> Result<GhostForce> {
    let zero = ExternalLoad::zero();
    match method {
        Method::Bqce | Method::Bqcf => {
            let dofs = LatticeDofs::new(sys);
            let x = vec![0.0; dofs.len()];
            let g = if method == Method::Bqce {
                let op = Bqce::with_load(sys.clone(), decomposition, &zero)?
                    .with_split(opts.split)
                    .with_execution(opts.exec);
                Objective::gradient(&op, &x)?
            } else {
                let op = Bqcf::with_load(sys.clone(), decomposition, &zero)?.with_execution(opts.exec);
                ResidualSystem::residual(&op, &x)?
            };
            ghost_from(&g, &laplacian(sys))
        }
        Method::Bqhoce | Method::Bqhocf => {
            let sp = mixed_space(sys, decomposition, opts.mesh_size)?;
            let fe = opts.fe();
            let x = vec![0.0; sp.dof_count()];
            let g = if method == Method::Bqhoce {
                Objective::gradient(&Bqhoce::new(sys, &sp, decomposition, &zero, &fe)?, &x)?
            } else {
                ResidualSystem::residual(&Bqhocf::new(sys, &sp, decomposition, &zero, &fe)?, &x)?
            };
            ghost_from(&g, &fe::h1_seminorm_matrix(&sp, &fe.rule))
        }
    }
}
