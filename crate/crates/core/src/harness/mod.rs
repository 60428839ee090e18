//! Experiment driver: error measures, convergence studies in `ε`,
//! coarsening studies in `h`, ghost-force sweeps, strain-profile dumps and
//! slope fitting.

pub mod measure;
pub mod study;

pub use measure::{
    ErrorRegion, StrainError, element_strain_errors, error_indicator_hoc, nodal_strain_error, reference_for, strain_at,
    strain_error, strain_error_against,
};
pub use study::{
    ConvergenceRecord, Fits, GhostRecord, SlopeFit, StudyResult, dump_strain_profile, fit_slope, read_records,
    region_errors, run_coarsening_study, run_convergence_study, run_ghost_sweep, write_records, write_strain_profile,
};

use std::fmt;
use std::str::FromStr;

use crate::continuum::{solve_cb, solve_hoc};
use crate::coupling::{CoupledSolution, CouplingOptions, DomainDecomposition, Method, solve_coupled};
use crate::error::{Error, Result};
use crate::lattice::{ExternalLoad, LatticeSystem, LoadKind, sample_load};
use crate::potential::PairPotential;
use crate::solver::{NewtonConfig, SolveReport};

/// A coupled method or one of the two pure continuum models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    Coupled(Method),
    Cb,
    Hoc,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Coupled(m) => m.name(),
            Model::Cb => "cb",
            Model::Hoc => "hoc",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cb" => Ok(Model::Cb),
            "hoc" => Ok(Model::Hoc),
            other => other.parse().map(Model::Coupled).map_err(|_| {
                Error::Config(format!("unknown method '{s}' (expected bqce, bqcf, bqhoce, bqhocf, cb or hoc)"))
            }),
        }
    }
}

/// Pair potential selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PotentialChoice {
    #[default]
    Harmonic,
    LennardJones,
}

impl PotentialChoice {
    pub fn build(self) -> PairPotential {
        match self {
            PotentialChoice::Harmonic => PairPotential::harmonic(),
            PotentialChoice::LennardJones => PairPotential::lennard_jones(),
        }
    }
}

impl FromStr for PotentialChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "harmonic" => Ok(PotentialChoice::Harmonic),
            "lj" | "lennard-jones" | "lennard_jones" => Ok(PotentialChoice::LennardJones),
            _ => Err(Error::Config(format!("unknown potential '{s}' (expected harmonic or lj)"))),
        }
    }
}

/// How `L_a` and `L_b` follow the resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WidthRule {
    /// `L_a = L_b = round(c·2N)`.
    Proportional(f64),
    Fixed {
        la: i64,
        lb: i64,
    },
}

impl Default for WidthRule {
    fn default() -> Self {
        WidthRule::Proportional(1.0 / 8.0)
    }
}

impl WidthRule {
    pub fn widths(self, half_count: usize) -> (i64, i64) {
        match self {
            WidthRule::Proportional(c) => {
                let w = (c * 2.0 * half_count as f64).round() as i64;
                (w, w)
            }
            WidthRule::Fixed { la, lb } => (la, lb),
        }
    }
}

/// Parameters of a study.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub models: Vec<Model>,
    /// Half-counts `N` (`2N` sites, `ε = 1/(2N)`).
    pub half_counts: Vec<usize>,
    pub potential: PotentialChoice,
    pub range: Vec<i64>,
    /// Macroscopic strain `F`.
    pub macro_strain: f64,
    pub f_scale: f64,
    pub load: LoadKind,
    pub widths: WidthRule,
    /// Continuum element sizes for coarsening studies.
    pub h_list: Vec<i64>,
    /// Blend widths for ghost-force sweeps.
    pub lb_list: Vec<i64>,
    /// Newton tolerance, scaled by `max(1, ‖f‖_∞)`.
    pub tol: f64,
    pub max_iter: usize,
    pub coupling: CouplingOptions,
    pub region: ErrorRegion,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: Method::ALL.into_iter().map(Model::Coupled).collect(),
            half_counts: vec![50, 100, 200, 400, 800],
            potential: PotentialChoice::Harmonic,
            range: vec![1, 2],
            macro_strain: 1.0,
            f_scale: 20.0,
            load: LoadKind::Singular,
            widths: WidthRule::default(),
            h_list: vec![2000, 1000, 500, 250],
            lb_list: vec![8, 16, 32, 64],
            tol: 1e-10,
            max_iter: 50,
            coupling: CouplingOptions::default(),
            region: ErrorRegion::All,
        }
    }
}

impl ExperimentConfig {
    /// The desk-scale coarsening setup: `2N = 20000`, `L_a = L_b = 100`.
    pub fn coarsening() -> Self {
        Self {
            models: vec![Model::Coupled(Method::Bqhoce)],
            half_counts: vec![10_000],
            widths: WidthRule::Fixed { la: 100, lb: 100 },
            region: ErrorRegion::Continuum,
            ..Self::default()
        }
    }

    /// The ghost-force sweep setup: `2N = 1024`, `L_a = 16`.
    pub fn ghost() -> Self {
        Self {
            models: vec![Model::Coupled(Method::Bqce)],
            half_counts: vec![512],
            widths: WidthRule::Fixed { la: 16, lb: 8 },
            ..Self::default()
        }
    }

    pub fn system(&self, half_count: usize) -> Result<LatticeSystem> {
        LatticeSystem::new(half_count, self.macro_strain, &self.range, self.potential.build())
    }

    pub fn external_load(&self) -> ExternalLoad {
        match self.load {
            LoadKind::Singular => ExternalLoad::singular(self.f_scale),
            LoadKind::Smooth => ExternalLoad::smooth(self.f_scale),
            LoadKind::User => ExternalLoad::zero(),
        }
    }

    pub fn decomposition(&self, sys: &LatticeSystem) -> Result<DomainDecomposition> {
        let (la, lb) = self.widths.widths(sys.half_count());
        DomainDecomposition::new(sys, la, lb)
    }

    /// Newton settings with the tolerance scaled by the load size.
    pub fn newton(&self, sys: &LatticeSystem, load: &ExternalLoad) -> Result<NewtonConfig> {
        let fmax = sample_load(load, sys).max_abs();
        NewtonConfig::new(self.tol * fmax.max(1.0), self.max_iter)
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_counts.is_empty() {
            return Err(Error::Config("at least one half-count is required".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if !self.f_scale.is_finite() {
            return Err(Error::Config(format!("f_scale must be finite, got {}", self.f_scale)));
        }
        if self.load == LoadKind::User {
            return Err(Error::Config("user load profiles cannot be configured from a study".into()));
        }
        for &n in &self.half_counts {
            let sys = self.system(n)?;
            self.decomposition(&sys)?;
        }
        NewtonConfig::new(self.tol, self.max_iter)?;
        Ok(())
    }
}

/// Solves one model from `u ≡ 0`.
pub fn solve_model(
    model: Model,
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    load: &ExternalLoad,
    opts: &CouplingOptions,
    cfg: &NewtonConfig,
) -> Result<(CoupledSolution, SolveReport)> {
    match model {
        Model::Coupled(m) => solve_coupled(m, sys, decomposition, load, opts, cfg),
        Model::Cb => solve_cb(sys, load, cfg).map(|(u, r)| (CoupledSolution::Field(u), r)),
        Model::Hoc => solve_hoc(sys, load, cfg).map(|(u, r)| (CoupledSolution::Field(u), r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_parsing() {
        assert_eq!("cb".parse::<Model>().unwrap(), Model::Cb);
        assert_eq!("HOC".parse::<Model>().unwrap(), Model::Hoc);
        assert_eq!("bqhocf".parse::<Model>().unwrap(), Model::Coupled(Method::Bqhocf));
        assert!("fem".parse::<Model>().is_err());
        assert_eq!("lj".parse::<PotentialChoice>().unwrap(), PotentialChoice::LennardJones);
    }

    #[test]
    fn default_widths() {
        assert_eq!(WidthRule::default().widths(50), (13, 13));
        assert_eq!(WidthRule::default().widths(800), (200, 200));
        ExperimentConfig::default().validate().unwrap();
        ExperimentConfig::coarsening().validate().unwrap();
        ExperimentConfig::ghost().validate().unwrap();
    }
}
