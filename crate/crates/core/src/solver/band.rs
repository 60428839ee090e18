//! Band matrices with LU (partial pivoting) and Cholesky factorizations.
//!
//! Periodic operators are assembled in a folded degree-of-freedom ordering
//! (see [`crate::lattice::LatticeDofs`]), which turns the periodic wrap into
//! ordinary band structure, so no corner correction is needed here.

use crate::error::{Error, Result};

/// Square `n × n` matrix with `kl` sub- and `ku` super-diagonals, stored by
/// rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) { self.data[self.offset(i, j)] } else { 0.0 }
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band (kl {}, ku {})", self.kl, self.ku);
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band (kl {}, ku {})", self.kl, self.ku);
        let k = self.offset(i, j);
        self.data[k] = v;
    }

    /// Columns of row `i` that lie inside the band.
    fn row_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row_cols(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// `Aᵀx`.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in self.row_cols(i) {
                y[j] += self.get(i, j) * x[i];
            }
        }
        y
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            self.add(i, i, shift);
        }
    }

    /// `max |A_ij − A_ji| ≤ tol·max |A_ij|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|i| self.row_cols(i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * scale))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    /// Cholesky factorization of the lower band. The matrix must be
    /// symmetric; only entries on and below the diagonal are read.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

/// Collects `(row, col, value)` contributions and sizes the band to fit.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = (usize, usize, f64)>) {
        self.entries.extend(other);
    }

    /// Sums duplicates in insertion order.
    pub fn to_band(&self) -> BandMatrix {
        let (mut kl, mut ku) = (0, 0);
        for &(i, j, _) in &self.entries {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let mut m = BandMatrix::zeros(self.n, kl, ku);
        for &(i, j, v) in &self.entries {
            m.add(i, j, v);
        }
        m
    }
}

/// Band LU factors; upper bandwidth grows to `kl + ku` under pivoting.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = kl + a.ku;
        let width = kl + ku + 1;
        let mut lu = Self { n, kl, width, data: vec![0.0; n * width], piv: vec![0; n] };
        for i in 0..n {
            for j in a.row_cols(i) {
                let k = lu.at(i, j);
                lu.data[k] = a.get(i, j);
            }
        }
        let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.at(k, k)].abs();
            for i in (k + 1)..=last_row {
                let v = lu.data[lu.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || best <= 1e-300 * scale.max(1e-300) {
                return Err(Error::Singular { row: k });
            }
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (ik, ip) = (lu.at(k, j), lu.at(p, j));
                    lu.data.swap(ik, ip);
                }
            }
            let pivot = lu.data[lu.at(k, k)];
            for i in (k + 1)..=last_row {
                let ik = lu.at(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l != 0.0 {
                    for j in (k + 1)..=last_col {
                        let (ij, kj) = (lu.at(i, j), lu.at(k, j));
                        lu.data[ij] -= l * lu.data[kj];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let ku = self.width - self.kl - 1;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=(k + self.kl).min(n - 1) {
                    x[i] -= self.data[self.at(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in (k + 1)..=(k + ku).min(n - 1) {
                s -= self.data[self.at(k, j)] * x[j];
            }
            x[k] = s / self.data[self.at(k, k)];
        }
        Ok(x)
    }
}

/// Lower-triangular band Cholesky factor `L` with `A = LLᵀ`.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    kl: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.kl + 1) + (j + self.kl - i)
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl.max(a.ku);
        let mut c = Self { n, kl, data: vec![0.0; n * (kl + 1)] };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=i {
                let mut s = a.get(i, j);
                for k in i.saturating_sub(kl)..j {
                    s -= c.data[c.at(i, k)] * c.data[c.at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    let k = c.at(i, i);
                    c.data[k] = s.sqrt();
                } else {
                    let k = c.at(i, j);
                    c.data[k] = s / c.data[c.at(j, j)];
                }
            }
        }
        Ok(c)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.kl)..i {
                s -= self.data[self.at(i, k)] * y[k];
            }
            y[i] = s / self.data[self.at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..=(i + self.kl).min(n - 1) {
                s -= self.data[self.at(k, i)] * y[k];
            }
            y[i] = s / self.data[self.at(i, i)];
        }
        Ok(y)
    }
}

/// Which factorization [`banded_solve_with_path`] used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolvePath {
    Cholesky,
    Lu,
}

/// Solves `Ax = b`. Symmetric matrices try Cholesky first and fall back to
/// LU when the matrix is not positive definite.
pub fn banded_solve(a: &BandMatrix, b: &[f64]) -> Result<Vec<f64>> {
    banded_solve_with_path(a, b).map(|(x, _)| x)
}

pub fn banded_solve_with_path(a: &BandMatrix, b: &[f64]) -> Result<(Vec<f64>, SolvePath)> {
    if b.len() != a.n {
        return Err(Error::Shape { expected: a.n, got: b.len() });
    }
    // Two-sided power-of-two equilibration: exact in floating point, keeps
    // symmetry, and tames rows whose entries are many orders smaller than
    // their neighbours'.
    let scale: Vec<f64> = (0..a.n)
        .map(|i| {
            let m = a.row_cols(i).map(|j| a.get(i, j).abs()).fold(0.0, f64::max);
            if m > 0.0 && m.is_finite() { (-0.5 * m.log2()).round().exp2() } else { 1.0 }
        })
        .collect();
    let mut s = a.clone();
    for i in 0..a.n {
        for j in a.row_cols(i) {
            let k = s.offset(i, j);
            s.data[k] *= scale[i] * scale[j];
        }
    }
    let sb: Vec<f64> = b.iter().zip(&scale).map(|(v, c)| v * c).collect();
    let unscale = |y: Vec<f64>| y.into_iter().zip(&scale).map(|(v, c)| v * c).collect::<Vec<_>>();
    if s.kl == s.ku && s.is_symmetric(0.0) {
        if let Ok(c) = s.cholesky() {
            return Ok((unscale(c.solve(&sb)?), SolvePath::Cholesky));
        }
    }
    Ok((unscale(s.lu()?.solve(&sb)?), SolvePath::Lu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &BandMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(banded_solve(&BandMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn dirichlet_laplacian_hand_solution() {
        // tridiag(−1, 2, −1) on 8 unknowns with b = e_1 + e_8 has x ≡ 1.
        let n = 8;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
                a.set(i + 1, i, -1.0);
            }
        }
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        b[n - 1] = 1.0;
        let (x, path) = banded_solve_with_path(&a, &b).unwrap();
        assert_eq!(path, SolvePath::Cholesky);
        for v in &x {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // b = (1, 0, …, 0) gives x_i = (n − i)/(n + 1) for 0-based i.
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let x = a.lu().unwrap().solve(&b).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((v - (n - i) as f64 / (n + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsymmetric_needs_pivoting() {
        // Zero leading pivot forces a row swap.
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 2.0);
        a.set(2, 1, 3.0);
        a.set(2, 2, 1.0);
        let b = vec![1.0, 2.0, 3.0];
        let (x, path) = banded_solve_with_path(&a, &b).unwrap();
        assert_eq!(path, SolvePath::Lu);
        assert!(residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn random_band_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 2), (40, 3, 1), (200, 6, 6), (64, 10, 4)] {
            let mut a = BandMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for j in a.row_cols(i) {
                    a.set(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = banded_solve(&a, &b).unwrap();
            assert!(residual(&a, &x, &b) <= 1e-10 * norm(&b) * (1.0 + norm(&x)), "n={n}");
        }
    }

    #[test]
    fn spd_uses_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50;
        let k = 4;
        let mut t = Triplets::new(n);
        // Sum of rank-one bond terms plus a diagonal shift.
        for i in 0..n {
            t.push(i, i, 0.5);
            for r in 1..=k {
                if i + r < n {
                    let w: f64 = rng.gen_range(0.1..1.0);
                    t.push(i, i, w);
                    t.push(i + r, i + r, w);
                    t.push(i, i + r, -w);
                    t.push(i + r, i, -w);
                }
            }
        }
        let a = t.to_band();
        assert_eq!((a.lower_bandwidth(), a.upper_bandwidth()), (k, k));
        assert!(a.is_symmetric(0.0));
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (x, path) = banded_solve_with_path(&a, &b).unwrap();
        assert_eq!(path, SolvePath::Cholesky);
        assert!(residual(&a, &x, &b) <= 1e-10 * norm(&b));
        let y = a.lu().unwrap().solve(&b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_and_indefinite_are_reported() {
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        assert!(matches!(a.lu(), Err(Error::Singular { .. })));
        let mut b = BandMatrix::identity(2);
        b.set(1, 1, -1.0);
        assert!(matches!(b.cholesky(), Err(Error::NotPositiveDefinite { row: 1 })));
        assert!(banded_solve(&b, &[1.0, 1.0]).is_ok());
    }

    #[test]
    fn transpose_product() {
        let mut a = BandMatrix::zeros(3, 1, 0);
        a.set(0, 0, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 3.0);
        a.set(2, 1, 4.0);
        a.set(2, 2, 5.0);
        assert_eq!(a.mul_vec_transpose(&[1.0, 1.0, 1.0]), vec![3.0, 7.0, 5.0]);
    }
}
