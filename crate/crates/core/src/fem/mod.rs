//! Meshes, quadrature, P1 and quintic Hermite elements, and interpolation
//! from the lattice.

pub mod hermite;
pub mod interp;
pub mod mesh;
pub mod quadrature;
pub mod space;

pub use interp::{interpolate_p1, interpolate_pi, interpolate_pi_h};
pub use mesh::{ElementKind, Mesh1D, build_canonical_mesh, build_coarse_mesh};
pub use quadrature::QuadratureRule;
pub use space::{MixedFEFunction, MixedFESpace};

/// `Σ_elements Σ_points w·h·f(x)` over one period.
pub fn integrate(rule: &QuadratureRule, mesh: &Mesh1D, f: impl Fn(f64) -> f64) -> f64 {
    (0..mesh.element_count())
        .map(|e| {
            let (a, b) = mesh.element_span(e);
            rule.integrate(a as f64, b as f64, &f)
        })
        .sum()
}
