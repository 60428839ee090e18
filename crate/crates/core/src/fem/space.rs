use std::sync::Arc;

use super::hermite::{MAX_DERIVATIVE, affine_shape, quintic_shape};
use super::mesh::{ElementKind, Mesh1D};
use crate::error::{Error, Result};

/// Free-DOF numbers of one node: value, first and second derivative.
pub type NodeDofs = [Option<usize>; 3];

/// Mixed P1 / quintic Hermite space on a periodic mesh with `u(0) = 0`.
///
/// Nodes touching a quintic element carry three DOFs, the others carry a
/// value only. Nodes are numbered in folded order (`0, x₁ > 0, x₋₁ < 0,
/// …`) so that the assembled operators are banded despite the periodic
/// wrap.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedFESpace {
    mesh: Mesh1D,
    node_dofs: Vec<NodeDofs>,
    hermite: Vec<bool>,
    dof_count: usize,
    pinned_node: usize,
}

impl MixedFESpace {
    pub fn new(mesh: Mesh1D) -> Result<Arc<Self>> {
        let m = mesh.node_count();
        let pinned_node = mesh
            .nodes()
            .iter()
            .position(|&x| x == 0)
            .ok_or_else(|| Error::Config("the mesh has no node at x = 0 to pin".into()))?;
        let hermite: Vec<bool> = (0..m)
            .map(|i| {
                let left = (i + m - 1) % m;
                mesh.kind(i) == ElementKind::Quintic || mesh.kind(left) == ElementKind::Quintic
            })
            .collect();
        let mut order = Vec::with_capacity(m);
        order.push(pinned_node);
        let (mut up, mut down) = (1, 1);
        while order.len() < m {
            if up + down <= m {
                order.push((pinned_node + up) % m);
                up += 1;
            }
            if order.len() < m {
                order.push((pinned_node + m - down) % m);
                down += 1;
            }
        }
        let mut node_dofs = vec![[None; 3]; m];
        let mut next = 0;
        for &i in &order {
            if i != pinned_node {
                node_dofs[i][0] = Some(next);
                next += 1;
            }
            if hermite[i] {
                node_dofs[i][1] = Some(next);
                node_dofs[i][2] = Some(next + 1);
                next += 2;
            }
        }
        Ok(Arc::new(Self { mesh, node_dofs, hermite, dof_count: next, pinned_node }))
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn pinned_node(&self) -> usize {
        self.pinned_node
    }

    pub fn node_dofs(&self, node: usize) -> NodeDofs {
        self.node_dofs[node]
    }

    /// Whether the node carries derivative DOFs.
    pub fn is_hermite(&self, node: usize) -> bool {
        self.hermite[node]
    }

    /// Free DOFs in the six-slot local layout `(a, a', a'', b, b', b'')`.
    /// Affine elements fill slots 0 and 3 only.
    pub fn element_dofs(&self, k: usize) -> [Option<usize>; 6] {
        let (a, b) = self.mesh.element_nodes(k);
        let (da, db) = (self.node_dofs[a], self.node_dofs[b]);
        match self.mesh.kind(k) {
            ElementKind::Affine => [da[0], None, None, db[0], None, None],
            ElementKind::Quintic => [da[0], da[1], da[2], db[0], db[1], db[2]],
        }
    }

    /// `k`-th derivative of the six local shape functions of element `e`.
    pub fn shape(&self, e: usize, k: usize, t: f64) -> [f64; 6] {
        let h = self.mesh.element_len(e);
        match self.mesh.kind(e) {
            ElementKind::Affine => affine_shape(h, k, t),
            ElementKind::Quintic => quintic_shape(h, k, t),
        }
    }
}

/// A function in a [`MixedFESpace`], stored as per-node
/// `(u, u', u'')`. Derivative entries of value-only nodes are zero.
///
/// The value at the pinned node is normally 0, but interpolants of unpinned
/// fixtures are representable too.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedFEFunction {
    space: Arc<MixedFESpace>,
    nodal: Vec<[f64; 3]>,
}

impl MixedFEFunction {
    pub fn zeros(space: Arc<MixedFESpace>) -> Self {
        let m = space.mesh.node_count();
        Self { space, nodal: vec![[0.0; 3]; m] }
    }

    pub fn from_nodal(space: Arc<MixedFESpace>, mut nodal: Vec<[f64; 3]>) -> Result<Self> {
        if nodal.len() != space.mesh.node_count() {
            return Err(Error::Shape { expected: space.mesh.node_count(), got: nodal.len() });
        }
        for (i, v) in nodal.iter_mut().enumerate() {
            if !space.hermite[i] {
                v[1] = 0.0;
                v[2] = 0.0;
            }
        }
        Ok(Self { space, nodal })
    }

    pub fn from_free(space: Arc<MixedFESpace>, x: &[f64]) -> Result<Self> {
        if x.len() != space.dof_count {
            return Err(Error::Shape { expected: space.dof_count, got: x.len() });
        }
        let nodal = space
            .node_dofs
            .iter()
            .map(|d| [d[0].map_or(0.0, |i| x[i]), d[1].map_or(0.0, |i| x[i]), d[2].map_or(0.0, |i| x[i])])
            .collect();
        Ok(Self { space, nodal })
    }

    pub fn to_free(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.space.dof_count];
        for (d, v) in self.space.node_dofs.iter().zip(&self.nodal) {
            for j in 0..3 {
                if let Some(i) = d[j] {
                    x[i] = v[j];
                }
            }
        }
        x
    }

    pub fn space(&self) -> &Arc<MixedFESpace> {
        &self.space
    }

    pub fn nodal(&self) -> &[[f64; 3]] {
        &self.nodal
    }

    pub fn nodal_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.nodal
    }

    /// Local coefficients of element `e` in the six-slot layout.
    pub fn element_coeffs(&self, e: usize) -> [f64; 6] {
        let (a, b) = self.space.mesh.element_nodes(e);
        let (va, vb) = (self.nodal[a], self.nodal[b]);
        [va[0], va[1], va[2], vb[0], vb[1], vb[2]]
    }

    /// `k`-th derivative at local coordinate `t` of element `e`.
    pub fn eval_local(&self, e: usize, t: f64, k: usize) -> f64 {
        let c = self.element_coeffs(e);
        self.space.shape(e, k, t).iter().zip(&c).map(|(s, v)| s * v).sum()
    }

    /// `u^(k)(x)`. At element boundaries the element to the right is used.
    pub fn eval(&self, x: f64, k: usize) -> Result<f64> {
        if k > MAX_DERIVATIVE {
            return Err(Error::OrderOutOfRange { order: k, max: MAX_DERIVATIVE });
        }
        let (e, t) = self.space.mesh.locate(x);
        Ok(self.eval_local(e, t, k))
    }

    /// `u(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let (e, t) = self.space.mesh.locate(x);
        self.eval_local(e, t, 0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { space: self.space.clone(), nodal: self.nodal.iter().map(|v| [a * v[0], a * v[1], a * v[2]]).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::decomposition::DomainDecomposition;
    use crate::fem::mesh::build_canonical_mesh;
    use crate::lattice::LatticeSystem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, la: i64, lb: i64) -> Arc<MixedFESpace> {
        let s = LatticeSystem::harmonic(n, &[1, 2]).unwrap();
        let d = DomainDecomposition::new(&s, la, lb).unwrap();
        MixedFESpace::new(build_canonical_mesh(&s, &d).unwrap()).unwrap()
    }

    #[test]
    fn dof_count_formula() {
        // 2N = 32, Ω_a = [−4, 4]: 7 value-only nodes, 25 Hermite nodes, one pin.
        let sp = space(16, 4, 4);
        assert_eq!(sp.dof_count(), 7 + 3 * 25 - 1);
        let s = LatticeSystem::harmonic(16, &[1]).unwrap();
        let c = MixedFESpace::new(build_canonical_mesh(&s, &DomainDecomposition::all_continuum(&s)).unwrap()).unwrap();
        assert_eq!(c.dof_count(), 3 * 32 - 1);
        assert_eq!(c.node_dofs(c.pinned_node())[0], None);
    }

    #[test]
    fn free_round_trip_and_continuity() {
        let sp = space(16, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..sp.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = MixedFEFunction::from_free(sp.clone(), &x).unwrap();
        assert_eq!(u.to_free(), x);
        let mesh = sp.mesh();
        for e in 0..mesh.element_count() {
            let next = (e + 1) % mesh.element_count();
            let both = mesh.kind(e) == ElementKind::Quintic && mesh.kind(next) == ElementKind::Quintic;
            let orders = if both { 3 } else { 1 };
            for k in 0..orders {
                let jump = u.eval_local(e, 1.0, k) - u.eval_local(next, 0.0, k);
                assert!(jump.abs() <= 1e-10, "element {e} order {k}");
            }
        }
    }

    #[test]
    fn folded_numbering_is_banded() {
        let sp = space(50, 10, 10);
        let mut width = 0;
        for e in 0..sp.mesh().element_count() {
            let d: Vec<usize> = sp.element_dofs(e).iter().flatten().copied().collect();
            let (lo, hi) = (d.iter().min().unwrap(), d.iter().max().unwrap());
            width = width.max(hi - lo);
        }
        assert!(width <= 12, "{width}");
    }
}
