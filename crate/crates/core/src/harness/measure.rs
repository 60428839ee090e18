//! Strain errors against the interpolated atomistic reference and the
//! higher-order consistency indicator.

use std::sync::Arc;

use crate::continuum::{cb_space, hoc_space};
use crate::coupling::{CoupledSolution, DomainDecomposition, Region};
use crate::error::{Error, Result};
use crate::fem::mesh::{ElementKind, build_canonical_mesh};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{MixedFEFunction, MixedFESpace};
use crate::fem::{interpolate_p1, interpolate_pi};
use crate::lattice::{ExternalLoad, LatticeFunction, LatticeSystem};

/// Part of the period an error is measured over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorRegion {
    #[default]
    All,
    Atomistic,
    Blend,
    Continuum,
}

impl ErrorRegion {
    pub fn contains(self, d: &DomainDecomposition, x: f64) -> bool {
        match self {
            ErrorRegion::All => true,
            ErrorRegion::Atomistic => d.region(x) == Region::Atomistic,
            ErrorRegion::Blend => d.region(x) == Region::Blend,
            ErrorRegion::Continuum => d.region(x) == Region::Continuum,
        }
    }
}

/// Absolute and relative `L²` strain error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrainError {
    pub absolute: f64,
    /// `absolute / ‖∇R‖_{L²(Ω)}` with `R` the reference interpolant.
    pub relative: f64,
}

/// `u'(x)` of a coupled solution; lattice solutions are read as their P1
/// interpolant.
pub fn strain_at(u: &CoupledSolution, x: f64) -> f64 {
    match u {
        CoupledSolution::Lattice(v) => {
            let a = x.floor() as i64;
            v.get(a + 1) - v.get(a)
        }
        CoupledSolution::Field(v) => {
            let (e, t) = v.space().mesh().locate(x);
            v.eval_local(e, t, 1)
        }
    }
}

/// The interpolant of `u_ref` that `u_m` is compared with: `Qu_ref` for
/// P1 solutions, `Πu_ref` on the unit mesh with the same element kinds
/// otherwise.
pub fn reference_for(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    u_ref: &LatticeFunction,
    u_m: &CoupledSolution,
) -> Result<MixedFEFunction> {
    match u_m {
        CoupledSolution::Lattice(_) => interpolate_p1(u_ref, &cb_space(sys)?),
        CoupledSolution::Field(v) => {
            let mesh = v.space().mesh();
            let space: Arc<MixedFESpace> = if mesh.all_of_kind(ElementKind::Affine) {
                cb_space(sys)?
            } else if mesh.all_of_kind(ElementKind::Quintic) {
                hoc_space(sys)?
            } else {
                MixedFESpace::new(build_canonical_mesh(sys, decomposition)?)?
            };
            if space.mesh().all_of_kind(ElementKind::Affine) {
                interpolate_p1(u_ref, &space)
            } else {
                interpolate_pi(u_ref, &space)
            }
        }
    }
}

/// `‖∇R − ∇u_m‖_{L²(region)}` over the unit elements of the reference mesh,
/// with six Gauss points per element. Coarse candidates have nodes at
/// sites, so every unit element lies inside one coarse element.
pub fn strain_error_against(
    reference: &MixedFEFunction,
    u_m: &CoupledSolution,
    decomposition: &DomainDecomposition,
    region: ErrorRegion,
) -> Result<StrainError> {
    let rule = QuadratureRule::default_rule();
    let mesh = reference.space().mesh();
    let (mut err, mut norm, mut seen) = (0.0, 0.0, false);
    for e in 0..mesh.element_count() {
        let (a, b) = mesh.element_span(e);
        let inside = region.contains(decomposition, 0.5 * (a + b) as f64);
        seen |= inside;
        let h = (b - a) as f64;
        for (t, w) in rule.iter() {
            let r = reference.eval_local(e, t, 1);
            norm += w * h * r * r;
            if inside {
                let d = r - strain_at(u_m, a as f64 + h * t);
                err += w * h * d * d;
            }
        }
    }
    if !seen {
        return Err(Error::Config(format!("error region {region:?} is empty")));
    }
    let absolute = err.sqrt();
    let norm = norm.sqrt();
    Ok(StrainError { absolute, relative: if norm > 0.0 { absolute / norm } else { absolute } })
}

/// Strain error of `u_m` against the matching interpolant of `u_ref`.
pub fn strain_error(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    u_ref: &LatticeFunction,
    u_m: &CoupledSolution,
    region: ErrorRegion,
) -> Result<StrainError> {
    let reference = reference_for(sys, decomposition, u_ref, u_m)?;
    strain_error_against(&reference, u_m, decomposition, region)
}

/// Error of the nodal strains `u(ξ+1) − u(ξ)`, read from point values at
/// lattice sites, in `ℓ²` over the bonds whose midpoint lies in `region`.
/// Relative to the `ℓ²` norm of the reference strains over the whole period.
pub fn nodal_strain_error(
    decomposition: &DomainDecomposition,
    u_ref: &LatticeFunction,
    u_m: &CoupledSolution,
    region: ErrorRegion,
) -> Result<StrainError> {
    let n = u_ref.half_count() as i64;
    let (mut err, mut norm, mut seen) = (0.0, 0.0, false);
    for xi in -n..n {
        let a = u_ref.diff(xi, 1);
        norm += a * a;
        if region.contains(decomposition, xi as f64 + 0.5) {
            let b = u_m.value((xi + 1) as f64) - u_m.value(xi as f64);
            err += (a - b).powi(2);
            seen = true;
        }
    }
    if !seen {
        return Err(Error::Config(format!("region {region:?} contains no bonds")));
    }
    let absolute = err.sqrt();
    Ok(StrainError { absolute, relative: if norm > 0.0 { absolute / norm.sqrt() } else { absolute } })
}

/// `L²` strain error on every unit element `[ξ, ξ+1]`, keyed by the
/// element midpoint, in increasing `x`.
pub fn element_strain_errors(reference: &MixedFEFunction, u_m: &CoupledSolution) -> Vec<(f64, f64)> {
    let rule = QuadratureRule::default_rule();
    let mesh = reference.space().mesh();
    let mut out: Vec<(f64, f64)> = (0..mesh.element_count())
        .flat_map(|e| {
            let (a, b) = mesh.element_span(e);
            (a..b).map(move |xi| (e, a, b, xi))
        })
        .map(|(e, a, b, xi)| {
            let h = (b - a) as f64;
            let mut s = 0.0;
            for (t, w) in rule.iter() {
                let x = xi as f64 + t;
                let d = reference.eval_local(e, (x - a as f64) / h, 1) - strain_at(u_m, x);
                s += w * d * d;
            }
            let mid = xi as f64 + 0.5;
            let n = mesh.period() / 2.0;
            (if mid > n { mid - mesh.period() } else { mid }, s.sqrt())
        })
        .collect();
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// The five-term higher-order consistency indicator
/// `‖u⁽⁵⁾‖ + ‖u''u⁽⁴⁾‖ + ‖u'''(u'')²‖ + ‖u'''‖²_{L⁴}‖u''‖⁴_{L⁸} + ‖f'''‖`,
/// integrated over the quintic elements inside `region`.
pub fn error_indicator_hoc(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    u: &MixedFEFunction,
    load: &ExternalLoad,
    region: ErrorRegion,
) -> Result<f64> {
    indicator_over(sys, u, load, &|mid| region.contains(decomposition, mid))
        .ok_or_else(|| Error::Config("the indicator needs at least one quintic element in the region".into()))
}

/// The indicator over the quintic elements whose midpoint passes `keep`.
fn indicator_over(
    sys: &LatticeSystem,
    u: &MixedFEFunction,
    load: &ExternalLoad,
    keep: &dyn Fn(f64) -> bool,
) -> Option<f64> {
    // Nine points integrate the degree-16 term `u''⁸` of a quintic exactly.
    let rule = QuadratureRule::gauss_legendre(9).expect("valid point count");
    let mesh = u.space().mesh();
    let mut acc = [0.0; 6];
    let mut seen = false;
    for e in 0..mesh.element_count() {
        let (a, b) = mesh.element_span(e);
        if mesh.kind(e) != ElementKind::Quintic || !keep(0.5 * (a + b) as f64) {
            continue;
        }
        seen = true;
        let h = (b - a) as f64;
        for (t, w) in rule.iter() {
            let d: Vec<f64> = (2..=5).map(|k| u.eval_local(e, t, k)).collect();
            let (u2, u3, u4, u5) = (d[0], d[1], d[2], d[3]);
            let f3 = load.density_d3(sys, a as f64 + h * t);
            let wh = w * h;
            acc[0] += wh * u5 * u5;
            acc[1] += wh * (u2 * u4).powi(2);
            acc[2] += wh * (u3 * u2 * u2).powi(2);
            acc[3] += wh * u3.powi(4);
            acc[4] += wh * u2.powi(8);
            acc[5] += wh * f3 * f3;
        }
    }
    seen.then(|| acc[0].sqrt() + acc[1].sqrt() + acc[2].sqrt() + acc[3].sqrt() * acc[4].sqrt() + acc[5].sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_error_of_single_site_perturbation() {
        let s = LatticeSystem::harmonic(20, &[1]).unwrap();
        let d = DomainDecomposition::new(&s, 4, 5).unwrap();
        let u = LatticeFunction::from_fn(20, |x| (x as f64 * 0.2).sin()).pinned();
        let mut v = u.clone();
        v.set(7, v.get(7) + 1e-3);
        let e = nodal_strain_error(&d, &u, &CoupledSolution::Lattice(v), ErrorRegion::All).unwrap();
        assert!((e.absolute - 1e-3 * 2f64.sqrt()).abs() < 1e-15);
        let norm: f64 = (-20..20).map(|x| u.diff(x, 1).powi(2)).sum::<f64>().sqrt();
        assert!((e.relative - e.absolute / norm).abs() < 1e-15);
    }

    #[test]
    fn self_comparison_is_zero() {
        let s = LatticeSystem::harmonic(20, &[1, 2]).unwrap();
        let d = DomainDecomposition::new(&s, 4, 5).unwrap();
        let u = LatticeFunction::from_fn(20, |x| (x as f64 * 0.2).sin()).pinned();
        let lat = CoupledSolution::Lattice(u.clone());
        assert_eq!(strain_error(&s, &d, &u, &lat, ErrorRegion::All).unwrap().absolute, 0.0);
        let sp = MixedFESpace::new(build_canonical_mesh(&s, &d).unwrap()).unwrap();
        let pi = CoupledSolution::Field(interpolate_pi(&u, &sp).unwrap());
        assert!(strain_error(&s, &d, &u, &pi, ErrorRegion::All).unwrap().absolute < 1e-14);
    }

    #[test]
    fn single_site_perturbation() {
        // Moving one site by δ changes the strain by ±δ on its two elements.
        let s = LatticeSystem::harmonic(20, &[1, 2]).unwrap();
        let d = DomainDecomposition::new(&s, 4, 5).unwrap();
        let u = LatticeFunction::from_fn(20, |x| 0.01 * x as f64 * (x as f64 - 3.0)).pinned();
        let delta = 0.3;
        let mut v = u.clone();
        v.set(5, u.get(5) + delta);
        let v = CoupledSolution::Lattice(v);
        let e = strain_error(&s, &d, &u, &v, ErrorRegion::All).unwrap();
        assert!((e.absolute - delta * 2f64.sqrt()).abs() < 1e-12);
        let b = strain_error(&s, &d, &u, &v, ErrorRegion::Blend).unwrap();
        assert!((b.absolute - delta * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(strain_error(&s, &d, &u, &v, ErrorRegion::Atomistic).unwrap().absolute, 0.0);
        let per = element_strain_errors(&reference_for(&s, &d, &u, &v).unwrap(), &v);
        assert_eq!(per.len(), 40);
        assert_eq!(per.iter().filter(|p| p.1 > 0.0).map(|p| p.0).collect::<Vec<_>>(), vec![4.5, 5.5]);
    }

    #[test]
    fn empty_region_is_an_error() {
        let s = LatticeSystem::harmonic(10, &[1]).unwrap();
        let d = DomainDecomposition::all_continuum(&s);
        let u = LatticeFunction::zeros(10);
        assert!(strain_error(&s, &d, &u, &CoupledSolution::Lattice(u.clone()), ErrorRegion::Atomistic).is_err());
    }

    #[test]
    fn indicator_of_zero_and_quartic() {
        let s = LatticeSystem::harmonic(10, &[1, 2]).unwrap();
        let d = DomainDecomposition::all_continuum(&s);
        let sp = hoc_space(&s).unwrap();
        let zero = MixedFEFunction::zeros(sp.clone());
        assert_eq!(error_indicator_hoc(&s, &d, &zero, &ExternalLoad::zero(), ErrorRegion::All).unwrap(), 0.0);

        // u = x⁴/24 on [0, 1]: u'' = x²/2, u''' = x, u⁽⁴⁾ = 1, u⁽⁵⁾ = 0.
        // ∫(u''u⁽⁴⁾)² = 1/20, ∫(u'''u''²)² = 1/176, ∫u'''⁴ = 1/5, ∫u''⁸ = 1/4352.
        let mut nodal = vec![[0.0; 3]; sp.mesh().node_count()];
        for (k, &x) in sp.mesh().nodes().iter().enumerate() {
            let x = x as f64;
            nodal[k] = [x.powi(4) / 24.0, x.powi(3) / 6.0, x * x / 2.0];
        }
        let u = MixedFEFunction::from_nodal(sp, nodal).unwrap();
        let got = indicator_over(&s, &u, &ExternalLoad::zero(), &|mid| mid == 0.5).unwrap();
        let expected = (1.0f64 / 20.0).sqrt() + (1.0f64 / 176.0).sqrt() + 0.2f64.sqrt() * (1.0f64 / 4352.0).sqrt();
        assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");
    }

    #[test]
    fn indicator_load_term() {
        // f = ε·A·sin(2πεx) has ‖f'''‖² = ε⁸A²(2π)⁶·N over a period of 2N.
        let s = LatticeSystem::harmonic(16, &[1]).unwrap();
        let d = DomainDecomposition::all_continuum(&s);
        let u = MixedFEFunction::zeros(hoc_space(&s).unwrap());
        let got = error_indicator_hoc(&s, &d, &u, &ExternalLoad::smooth(2.0), ErrorRegion::All).unwrap();
        let eps: f64 = 1.0 / 32.0;
        let expected = (eps.powi(8) * 4.0 * (2.0 * std::f64::consts::PI).powi(6) * 16.0).sqrt();
        assert!((got - expected).abs() < 1e-6 * expected);
    }
}
