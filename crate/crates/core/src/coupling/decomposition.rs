//! Atomistic, blending and continuum regions and the blending function.

use crate::error::{Error, Result};
use crate::lattice::LatticeSystem;

/// Region of a point or site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Atomistic,
    Blend,
    Continuum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Layout {
    /// `Ω_a = [c − L_a, c + L_a]`, `Ω_b` the two shells of width `L_b`.
    Shells { la: i64, lb: i64 },
    /// Whole period atomistic (`β ≡ 0`).
    Atomistic,
    /// Whole period continuum (`β ≡ 1`).
    Continuum,
}

/// Partition of the period into `Ω_a`, `Ω_b` and `Ω_c`, centred at a
/// lattice site.
///
/// With distance `d = |x − c|` (periodic), `Ω_a` is `d ≤ L_a`, `Ω_b` is
/// `L_a < d < L_a + L_b` and `Ω_c` is the rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainDecomposition {
    half_count: usize,
    center: i64,
    layout: Layout,
}

impl DomainDecomposition {
    /// Shells centred at 0.
    pub fn new(sys: &LatticeSystem, la: i64, lb: i64) -> Result<Self> {
        Self::centered(sys, 0, la, lb)
    }

    pub fn centered(sys: &LatticeSystem, center: i64, la: i64, lb: i64) -> Result<Self> {
        if la < sys.r_cut() {
            return Err(Error::Config(format!("L_a = {la} is below the cut-off {}", sys.r_cut())));
        }
        if lb < 2 {
            return Err(Error::Config(format!("L_b = {lb} must be at least 2")));
        }
        let n = sys.half_count() as i64;
        if la + lb >= n {
            return Err(Error::Config(format!(
                "L_a + L_b = {} leaves no continuum region in a chain of {} sites",
                la + lb,
                2 * n
            )));
        }
        Ok(Self { half_count: sys.half_count(), center: sys.wrap_site(center), layout: Layout::Shells { la, lb } })
    }

    /// `Ω = Ω_a`: every blended model reduces to the atomistic one.
    pub fn all_atomistic(sys: &LatticeSystem) -> Self {
        Self { half_count: sys.half_count(), center: 0, layout: Layout::Atomistic }
    }

    /// `Ω = Ω_c`: every blended model reduces to its continuum part.
    pub fn all_continuum(sys: &LatticeSystem) -> Self {
        Self { half_count: sys.half_count(), center: 0, layout: Layout::Continuum }
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn center(&self) -> i64 {
        self.center
    }

    /// `(L_a, L_b)` for shell layouts.
    pub fn widths(&self) -> Option<(i64, i64)> {
        match self.layout {
            Layout::Shells { la, lb } => Some((la, lb)),
            _ => None,
        }
    }

    pub fn is_all_atomistic(&self) -> bool {
        self.layout == Layout::Atomistic
    }

    pub fn is_all_continuum(&self) -> bool {
        self.layout == Layout::Continuum
    }

    /// Signed periodic offset `x − c` in `(−N, N]`.
    pub fn offset(&self, x: f64) -> f64 {
        let n = self.half_count as f64;
        let p = 2.0 * n;
        let y = x - self.center as f64;
        if y > -n && y <= n {
            return y;
        }
        let mut y = (y + n).rem_euclid(p) - n;
        if y <= -n {
            y += p;
        }
        y
    }

    pub fn region(&self, x: f64) -> Region {
        match self.layout {
            Layout::Atomistic => Region::Atomistic,
            Layout::Continuum => Region::Continuum,
            Layout::Shells { la, lb } => {
                let d = self.offset(x).abs();
                if d <= la as f64 {
                    Region::Atomistic
                } else if d < (la + lb) as f64 {
                    Region::Blend
                } else {
                    Region::Continuum
                }
            }
        }
    }

    /// Sites of `Λ` in a region, in increasing order.
    pub fn sites_in(&self, sys: &LatticeSystem, region: Region) -> Vec<i64> {
        sys.sites().filter(|&s| self.region(s as f64) == region).collect()
    }

    /// Lattice-aligned `[start, end]` of the continuum arc `Ω_c` in
    /// unwrapped coordinates (`end − start` is its length).
    pub fn continuum_arc(&self) -> Option<(i64, i64)> {
        match self.layout {
            Layout::Shells { la, lb } => {
                let start = self.center + la + lb;
                Some((start, self.center - la - lb + 2 * self.half_count as i64))
            }
            Layout::Continuum => Some((0, 2 * self.half_count as i64)),
            Layout::Atomistic => None,
        }
    }

    /// Length of `Ω_b`, zero when there is no blend region.
    pub fn blend_length(&self) -> f64 {
        match self.layout {
            Layout::Shells { lb, .. } => 2.0 * lb as f64,
            _ => 0.0,
        }
    }
}

/// Quintic smoothstep `s(t) = 6t⁵ − 15t⁴ + 10t³` and its first three
/// derivatives, clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> [f64; 4] {
    if t <= 0.0 {
        return [0.0; 4];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let t2 = t * t;
    [
        t2 * t * (10.0 + t * (-15.0 + 6.0 * t)),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 + t * (-3.0 + 2.0 * t)),
        60.0 + t * (-360.0 + 360.0 * t),
    ]
}

/// Blending function `β`: 0 on `Ω_a`, 1 on `Ω_c`, a smoothstep across each
/// shell of `Ω_b`. Globally `C^{2,1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendFunction {
    decomposition: DomainDecomposition,
}

impl BlendFunction {
    pub fn new(decomposition: DomainDecomposition) -> Self {
        Self { decomposition }
    }

    pub fn decomposition(&self) -> &DomainDecomposition {
        &self.decomposition
    }

    /// `[β, β', β'', β''']` at lattice coordinate `x`. The third derivative
    /// jumps at the shell ends and takes its one-sided interior value there.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        let d = &self.decomposition;
        match d.layout {
            Layout::Atomistic => [0.0; 4],
            Layout::Continuum => [1.0, 0.0, 0.0, 0.0],
            Layout::Shells { la, lb } => {
                let y = d.offset(x);
                let sign = if y < 0.0 { -1.0 } else { 1.0 };
                let lb = lb as f64;
                let t = (y.abs() - la as f64) / lb;
                if t <= 0.0 || t >= 1.0 {
                    return smoothstep(t);
                }
                let s = smoothstep(t);
                [s[0], sign * s[1] / lb, s[2] / (lb * lb), sign * s[3] / (lb * lb * lb)]
            }
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    pub fn gradient(&self, x: f64) -> f64 {
        self.eval(x)[1]
    }

    pub fn hessian(&self, x: f64) -> f64 {
        self.eval(x)[2]
    }
}

/// Builds the blending function of a decomposition.
pub fn build_blend(decomposition: &DomainDecomposition) -> BlendFunction {
    BlendFunction::new(*decomposition)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: usize) -> LatticeSystem {
        LatticeSystem::harmonic(n, &[1, 2]).unwrap()
    }

    #[test]
    fn smoothstep_values() {
        assert_eq!(smoothstep(0.0), [0.0; 4]);
        assert_eq!(smoothstep(1.0)[0], 1.0);
        assert!((smoothstep(0.5)[0] - 0.5).abs() < 1e-15);
        assert!((smoothstep(0.25)[0] - 0.103515625).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_derivatives_match_differences() {
        let h = 1e-6;
        for t in [0.1, 0.37, 0.5, 0.81] {
            let (p, m, c) = (smoothstep(t + h), smoothstep(t - h), smoothstep(t));
            for k in 0..3 {
                assert!(((p[k] - m[k]) / (2.0 * h) - c[k + 1]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn decomposition_invariants() {
        let s = sys(32);
        assert!(DomainDecomposition::new(&s, 1, 4).is_err());
        assert!(DomainDecomposition::new(&s, 4, 1).is_err());
        assert!(DomainDecomposition::new(&s, 16, 16).is_err());
        let d = DomainDecomposition::new(&s, 8, 8).unwrap();
        let a = d.sites_in(&s, Region::Atomistic);
        let b = d.sites_in(&s, Region::Blend);
        let c = d.sites_in(&s, Region::Continuum);
        assert_eq!(a.len() + b.len() + c.len(), 64);
        assert_eq!(a.len(), 17);
        assert_eq!(b.len(), 14);
        assert_eq!(d.continuum_arc(), Some((16, 48)));
        assert_eq!(d.region(-8.0), Region::Atomistic);
        assert_eq!(d.region(16.0), Region::Continuum);
        assert_eq!(d.region(-15.5), Region::Blend);
    }

    #[test]
    fn blend_is_c2_and_monotone() {
        let s = sys(40);
        let d = DomainDecomposition::new(&s, 10, 12).unwrap();
        let b = build_blend(&d);
        assert_eq!(b.eval(0.0), [0.0; 4]);
        assert_eq!(b.eval(-10.0), [0.0; 4]);
        assert_eq!(b.eval(40.0), [1.0, 0.0, 0.0, 0.0]);
        assert!((b.value(16.0) - 0.5).abs() < 1e-15);
        assert!((b.value(-16.0) - 0.5).abs() < 1e-15);
        let eps = 1e-9;
        for x in [10.0, 22.0, -10.0, -22.0] {
            let (l, r) = (b.eval(x - eps), b.eval(x + eps));
            for k in 0..3 {
                assert!((l[k] - r[k]).abs() < 1e-7, "x {x} order {k}");
            }
        }
        let mut prev = 0.0;
        for i in 0..=240 {
            let v = b.value(10.0 + i as f64 * 0.05);
            assert!((0.0..=1.0).contains(&v) && v >= prev);
            prev = v;
        }
        // Odd derivatives flip sign under reflection.
        let (l, r) = (b.eval(-14.3), b.eval(14.3));
        assert_eq!(l[0], r[0]);
        assert_eq!(l[1], -r[1]);
        assert_eq!(l[2], r[2]);
        assert_eq!(l[3], -r[3]);
    }

    #[test]
    fn partition_of_unity() {
        let s = sys(40);
        let b = build_blend(&DomainDecomposition::new(&s, 10, 12).unwrap());
        for i in -400..400 {
            let x = i as f64 * 0.1;
            let v = b.value(x);
            assert!(((1.0 - v) + v - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn degenerate_layouts() {
        let s = sys(10);
        assert_eq!(build_blend(&DomainDecomposition::all_atomistic(&s)).value(3.0), 0.0);
        assert_eq!(build_blend(&DomainDecomposition::all_continuum(&s)).value(3.0), 1.0);
        assert_eq!(DomainDecomposition::all_continuum(&s).continuum_arc(), Some((0, 20)));
    }
}
