//! Reference shape functions on `[0, 1]`.
//!
//! Quintic Hermite local DOFs are `(u_a, u'_a, u''_a, u_b, u'_b, u''_b)`.
//! The reference basis `H_j` interpolates them on the unit interval; on an
//! element of length `h` the derivative DOFs are scaled by `h` and `h²` and
//! `d/dx = h⁻¹ d/dt`.

/// Highest derivative order of a quintic that is not identically zero.
pub const MAX_DERIVATIVE: usize = 5;

/// Monomial coefficients `c_0 … c_5` of `H_0 … H_5`.
const HERMITE: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
];

/// `k`-th derivative of `Σ c_i tⁱ` at `t`.
fn poly_derivative(c: &[f64; 6], k: usize, t: f64) -> f64 {
    let mut acc = 0.0;
    for i in (k..6).rev() {
        let mut f = 1.0;
        for m in 0..k {
            f *= (i - m) as f64;
        }
        acc = acc * t + f * c[i];
    }
    acc
}

/// `H_j^(k)(t)` for `j = 0..6`.
pub fn reference_quintic(k: usize, t: f64) -> [f64; 6] {
    if k > MAX_DERIVATIVE {
        return [0.0; 6];
    }
    let mut out = [0.0; 6];
    for (j, c) in HERMITE.iter().enumerate() {
        out[j] = poly_derivative(c, k, t);
    }
    out
}

/// `k`-th physical derivative of the six quintic basis functions on an
/// element of length `h`, local coordinate `t`.
pub fn quintic_shape(h: f64, k: usize, t: f64) -> [f64; 6] {
    let r = reference_quintic(k, t);
    let inv = h.powi(-(k as i32));
    let scale = [1.0, h, h * h, 1.0, h, h * h];
    let mut out = [0.0; 6];
    for j in 0..6 {
        out[j] = r[j] * scale[j] * inv;
    }
    out
}

/// `k`-th physical derivative of the two P1 basis functions, placed in
/// slots 0 and 3 of the six-slot local layout.
pub fn affine_shape(h: f64, k: usize, t: f64) -> [f64; 6] {
    match k {
        0 => [1.0 - t, 0.0, 0.0, t, 0.0, 0.0],
        1 => [-1.0 / h, 0.0, 0.0, 1.0 / h, 0.0, 0.0],
        _ => [0.0; 6],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_endpoint_dofs() {
        for j in 0..6 {
            for k in 0..3 {
                let at0 = reference_quintic(k, 0.0)[j];
                let at1 = reference_quintic(k, 1.0)[j];
                let e0 = if j == k { 1.0 } else { 0.0 };
                let e1 = if j == k + 3 { 1.0 } else { 0.0 };
                assert!((at0 - e0).abs() < 1e-14, "H{j}^({k})(0)");
                assert!((at1 - e1).abs() < 1e-14, "H{j}^({k})(1)");
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-6;
        for k in 0..5 {
            for t in [0.13, 0.5, 0.77] {
                let (p, m, d) = (reference_quintic(k, t + h), reference_quintic(k, t - h), reference_quintic(k + 1, t));
                for j in 0..6 {
                    assert!(((p[j] - m[j]) / (2.0 * h) - d[j]).abs() < 1e-5 * d[j].abs().max(1.0));
                }
            }
        }
        assert_eq!(reference_quintic(6, 0.3), [0.0; 6]);
    }

    #[test]
    fn reproduces_quintics_on_scaled_element() {
        // p(x) = x⁵ − 2x³ + x on [2, 2 + h].
        let p = |x: f64| {
            [x.powi(5) - 2.0 * x.powi(3) + x, 5.0 * x.powi(4) - 6.0 * x * x + 1.0, 20.0 * x.powi(3) - 12.0 * x]
        };
        let (a, h) = (2.0, 0.7);
        let (pa, pb) = (p(a), p(a + h));
        let dofs = [pa[0], pa[1], pa[2], pb[0], pb[1], pb[2]];
        for t in [0.0, 0.3, 0.9] {
            let x = a + h * t;
            let v: f64 = quintic_shape(h, 0, t).iter().zip(&dofs).map(|(s, c)| s * c).sum();
            let d: f64 = quintic_shape(h, 1, t).iter().zip(&dofs).map(|(s, c)| s * c).sum();
            let d5: f64 = quintic_shape(h, 5, t).iter().zip(&dofs).map(|(s, c)| s * c).sum();
            assert!((v - p(x)[0]).abs() < 1e-11);
            assert!((d - p(x)[1]).abs() < 1e-10);
            assert!((d5 - 120.0).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_layout() {
        assert_eq!(affine_shape(2.0, 0, 0.25), [0.75, 0.0, 0.0, 0.25, 0.0, 0.0]);
        assert_eq!(affine_shape(2.0, 1, 0.25), [-0.5, 0.0, 0.0, 0.5, 0.0, 0.0]);
        assert_eq!(affine_shape(2.0, 3, 0.25), [0.0; 6]);
    }
}
