//! Interpolation of lattice functions into finite element spaces.

use std::sync::Arc;

use super::hermite::quintic_shape;
use super::mesh::ElementKind;
use super::space::{MixedFEFunction, MixedFESpace};
use crate::error::{Error, Result};
use crate::lattice::LatticeFunction;
use crate::solver::{Triplets, banded_solve};

/// Sixth-order central difference weights on offsets `−3..=3`.
const D1: [f64; 7] = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
const D2: [f64; 7] = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];

fn check_half_count(space: &MixedFESpace, u: &LatticeFunction) -> Result<()> {
    if space.mesh().half_count() != u.half_count() {
        return Err(Error::Shape { expected: 2 * space.mesh().half_count(), got: 2 * u.half_count() });
    }
    Ok(())
}

/// Nodal P1 interpolant `Qu` on an all-affine space.
pub fn interpolate_p1(u: &LatticeFunction, space: &Arc<MixedFESpace>) -> Result<MixedFEFunction> {
    check_half_count(space, u)?;
    if !space.mesh().all_of_kind(ElementKind::Affine) {
        return Err(Error::Config("P1 interpolation needs an all-affine mesh".into()));
    }
    let nodal = space.mesh().nodes().iter().map(|&x| [u.get(x), 0.0, 0.0]).collect();
    MixedFEFunction::from_nodal(space.clone(), nodal)
}

/// Interpolant `Πu`: nodal P1 on affine elements and a C⁴ quintic spline
/// through the nodal values on every run of quintic elements.
///
/// A run that covers the whole period is a periodic spline. Otherwise the
/// derivative DOFs at the two ends of the run are sixth-order central
/// differences of the lattice values. On a coarse mesh this is `Π_h`: the
/// spline passes through the representative atoms only.
pub fn interpolate_pi(u: &LatticeFunction, space: &Arc<MixedFESpace>) -> Result<MixedFEFunction> {
    check_half_count(space, u)?;
    let mesh = space.mesh();
    let m = mesh.node_count();
    let mut nodal: Vec<[f64; 3]> = mesh.nodes().iter().map(|&x| [u.get(x), 0.0, 0.0]).collect();
    for run in quintic_runs(space) {
        spline_run(u, space, &run, &mut nodal)?;
    }
    debug_assert_eq!(nodal.len(), m);
    MixedFEFunction::from_nodal(space.clone(), nodal)
}

/// Coarse interpolant `Π_h`; identical construction to [`interpolate_pi`].
pub fn interpolate_pi_h(u: &LatticeFunction, space: &Arc<MixedFESpace>) -> Result<MixedFEFunction> {
    interpolate_pi(u, space)
}

/// A maximal chain of consecutive quintic elements.
struct Run {
    /// Elements in order.
    elements: Vec<usize>,
    periodic: bool,
}

fn quintic_runs(space: &MixedFESpace) -> Vec<Run> {
    let mesh = space.mesh();
    let m = mesh.element_count();
    let quintic = |e: usize| mesh.kind(e) == ElementKind::Quintic;
    if (0..m).all(quintic) {
        return vec![Run { elements: (0..m).collect(), periodic: true }];
    }
    let mut runs = Vec::new();
    for start in (0..m).filter(|&e| quintic(e) && !quintic((e + m - 1) % m)) {
        let mut elements = vec![start];
        let mut e = (start + 1) % m;
        while quintic(e) {
            elements.push(e);
            e = (e + 1) % m;
        }
        runs.push(Run { elements, periodic: false });
    }
    runs
}

/// End-node derivatives `(u', u'')` from lattice differences.
fn lattice_derivatives(u: &LatticeFunction, site: i64) -> (f64, f64) {
    let mut d = (0.0, 0.0);
    for (k, (a, b)) in D1.iter().zip(&D2).enumerate() {
        let v = u.get(site + k as i64 - 3);
        d.0 += a * v;
        d.1 += b * v;
    }
    d
}

fn spline_run(u: &LatticeFunction, space: &MixedFESpace, run: &Run, nodal: &mut [[f64; 3]]) -> Result<()> {
    let mesh = space.mesh();
    let elems = &run.elements;
    // Chain nodes: node j sits between elements j−1 and j.
    let chain_nodes: Vec<usize> = if run.periodic {
        elems.iter().map(|&e| mesh.element_nodes(e).0).collect()
    } else {
        let mut v: Vec<usize> = elems.iter().map(|&e| mesh.element_nodes(e).0).collect();
        v.push(mesh.element_nodes(*elems.last().unwrap()).1);
        v
    };
    let len = chain_nodes.len();
    // Unknown slot of each chain node (None for clamped ends).
    let slot: Vec<Option<usize>> = if run.periodic {
        let mut s = vec![None; len];
        let mut next = 0;
        let (mut up, mut down) = (0, 1);
        while next < len {
            s[up] = Some(next);
            next += 1;
            up += 1;
            if next < len {
                s[len - down] = Some(next);
                next += 1;
                down += 1;
            }
        }
        s
    } else {
        let (l, r) = (chain_nodes[0], chain_nodes[len - 1]);
        for node in [l, r] {
            let (d1, d2) = lattice_derivatives(u, mesh.node(node));
            nodal[node][1] = d1;
            nodal[node][2] = d2;
        }
        (0..len).map(|j| if j == 0 || j == len - 1 { None } else { Some(j - 1) }).collect()
    };
    let unknowns = slot.iter().flatten().count();
    if unknowns == 0 {
        return Ok(());
    }
    let n = 2 * unknowns;
    let mut trip = Triplets::new(n);
    let mut rhs = vec![0.0; n];
    let interior = if run.periodic { 0..len } else { 1..len - 1 };
    for j in interior {
        let row = 2 * slot[j].unwrap();
        let left = elems[(j + len - 1) % len];
        let right = elems[j % elems.len()];
        let (jl, jr) = ((j + len - 1) % len, (j + 1) % len);
        for (dk, k) in [3usize, 4].into_iter().enumerate() {
            let sl = quintic_shape(mesh.element_len(left), k, 1.0);
            let sr = quintic_shape(mesh.element_len(right), k, 0.0);
            // Left element local nodes (jl, j), right element (j, jr).
            let terms = [
                (jl, sl[0], sl[1], sl[2]),
                (j, sl[3] - sr[0], sl[4] - sr[1], sl[5] - sr[2]),
                (jr, -sr[3], -sr[4], -sr[5]),
            ];
            for (node_j, cv, c1, c2) in terms {
                let node = chain_nodes[node_j];
                rhs[row + dk] -= cv * nodal[node][0];
                match slot[node_j] {
                    Some(s) => {
                        trip.push(row + dk, 2 * s, c1);
                        trip.push(row + dk, 2 * s + 1, c2);
                    }
                    None => rhs[row + dk] -= c1 * nodal[node][1] + c2 * nodal[node][2],
                }
            }
        }
    }
    let sol = banded_solve(&trip.to_band(), &rhs)
        .map_err(|e| Error::Numerical(format!("quintic spline system failed: {e}")))?;
    for (j, s) in slot.iter().enumerate() {
        if let Some(s) = s {
            let node = chain_nodes[j];
            nodal[node][1] = sol[2 * s];
            nodal[node][2] = sol[2 * s + 1];
        }
    }
    Ok(())
}
