use crate::coupling::decomposition::{DomainDecomposition, Region};
use crate::error::{Error, Result};
use crate::lattice::LatticeSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// P1 element with value DOFs only.
    Affine,
    /// Two-node quintic Hermite element with value, first and second
    /// derivative DOFs at each node.
    Quintic,
}

/// Periodic lattice-aligned mesh of one period.
///
/// Nodes are sites in `(−N, N]`, strictly increasing. Element `k` joins
/// node `k` to node `k + 1`; the last element wraps to `nodes[0] + 2N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    half_count: usize,
    nodes: Vec<i64>,
    kinds: Vec<ElementKind>,
}

impl Mesh1D {
    pub fn from_nodes(half_count: usize, nodes: Vec<i64>, kinds: Vec<ElementKind>) -> Result<Self> {
        let n = half_count as i64;
        if nodes.len() < 3 {
            return Err(Error::Config(format!("a periodic mesh needs at least 3 nodes, got {}", nodes.len())));
        }
        if kinds.len() != nodes.len() {
            return Err(Error::Shape { expected: nodes.len(), got: kinds.len() });
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("mesh nodes must be strictly increasing".into()));
        }
        if nodes[0] <= -n || *nodes.last().unwrap() > n {
            return Err(Error::Config(format!("mesh nodes must lie in (−{n}, {n}]")));
        }
        Ok(Self { half_count, nodes, kinds })
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_count as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[i64] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> i64 {
        self.nodes[k]
    }

    pub fn kind(&self, k: usize) -> ElementKind {
        self.kinds[k]
    }

    pub fn kinds(&self) -> &[ElementKind] {
        &self.kinds
    }

    /// Node indices of element `k`.
    #[inline]
    pub fn element_nodes(&self, k: usize) -> (usize, usize) {
        (k, (k + 1) % self.nodes.len())
    }

    /// `[start, end]` of element `k` in unwrapped coordinates.
    #[inline]
    pub fn element_span(&self, k: usize) -> (i64, i64) {
        let a = self.nodes[k];
        let b = if k + 1 < self.nodes.len() { self.nodes[k + 1] } else { self.nodes[0] + 2 * self.half_count as i64 };
        (a, b)
    }

    #[inline]
    pub fn element_len(&self, k: usize) -> f64 {
        let (a, b) = self.element_span(k);
        (b - a) as f64
    }

    pub fn max_element_len(&self) -> f64 {
        (0..self.element_count()).map(|k| self.element_len(k)).fold(0.0, f64::max)
    }

    /// Element containing `x` (reduced periodically) and the local
    /// coordinate `t ∈ [0, 1)`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let x0 = self.nodes[0] as f64;
        let y = x0 + (x - x0).rem_euclid(self.period());
        let k = self.nodes.partition_point(|&n| (n as f64) <= y).saturating_sub(1);
        let (a, _) = self.element_span(k);
        (k, ((y - a as f64) / self.element_len(k)).clamp(0.0, 1.0))
    }

    pub fn all_of_kind(&self, kind: ElementKind) -> bool {
        self.kinds.iter().all(|&k| k == kind)
    }
}

fn kind_of(decomposition: &DomainDecomposition, a: i64, b: i64) -> ElementKind {
    if decomposition.region(0.5 * (a + b) as f64) == Region::Atomistic {
        ElementKind::Affine
    } else {
        ElementKind::Quintic
    }
}

/// Unit elements on every bond; affine in `Ω_a`, quintic elsewhere.
pub fn build_canonical_mesh(sys: &LatticeSystem, decomposition: &DomainDecomposition) -> Result<Mesh1D> {
    build_coarse_mesh(sys, decomposition, 1)
}

/// Unit elements in `Ω_a ∪ Ω_b` and near-uniform lattice-aligned elements
/// of size about `target_h` on the continuum arc. The nodes are the
/// representative atoms.
pub fn build_coarse_mesh(sys: &LatticeSystem, decomposition: &DomainDecomposition, target_h: i64) -> Result<Mesh1D> {
    if decomposition.half_count() != sys.half_count() {
        return Err(Error::Shape { expected: sys.site_count(), got: 2 * decomposition.half_count() });
    }
    if target_h < 1 {
        return Err(Error::Config(format!("target mesh size must be at least 1, got {target_h}")));
    }
    let mut nodes: Vec<i64> = sys.sites().filter(|&s| decomposition.region(s as f64) != Region::Continuum).collect();
    if let Some((start, end)) = decomposition.continuum_arc() {
        let len = end - start;
        if target_h > len {
            return Err(Error::Config(format!(
                "target mesh size {target_h} exceeds the continuum region length {len}"
            )));
        }
        let m = ((len as f64 / target_h as f64).round() as i64).max(1);
        for k in 0..=m {
            let x = start + (k as f64 * len as f64 / m as f64).round() as i64;
            nodes.push(sys.wrap_site(x));
        }
        if target_h > 1 && decomposition.region(0.0) == Region::Continuum {
            nodes.push(0);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    let m = nodes.len();
    let kinds = (0..m)
        .map(|k| {
            let a = nodes[k];
            let b = if k + 1 < m { nodes[k + 1] } else { nodes[0] + sys.site_count() as i64 };
            kind_of(decomposition, a, b)
        })
        .collect();
    Mesh1D::from_nodes(sys.half_count(), nodes, kinds)
}
