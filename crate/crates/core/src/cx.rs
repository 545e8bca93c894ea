//! Small complex-vector helpers and the complex-to-real boundary.
//!
//! The optimizer works over real variables only: a complex vector of
//! length `n` is flattened to `[Re(0..n), Im(0..n)]` of length `2n`, and
//! each Hermitian inner product `h^H p` becomes a pair of real linear
//! forms in the flattened coordinates.

use num_complex::Complex64;

/// Hermitian inner product `h^H p`.
pub fn inner(h: &[Complex64], p: &[Complex64]) -> Complex64 {
    debug_assert_eq!(h.len(), p.len());
    h.iter().zip(p).map(|(a, b)| a.conj() * b).sum()
}

/// `|h^H p|^2`.
pub fn gain(h: &[Complex64], p: &[Complex64]) -> f64 {
    inner(h, p).norm_sqr()
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Flatten to `[Re..., Im...]`.
pub fn realify(p: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * p.len());
    out.extend(p.iter().map(|z| z.re));
    out.extend(p.iter().map(|z| z.im));
    out
}

/// Inverse of [`realify`].
pub fn unrealify(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    debug_assert_eq!(x.len(), 2 * n);
    (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect()
}

/// Real linear forms of `h^H p` in the flattened coordinates of `p`:
/// returns `(r, s)` with `Re(h^H p) = r . realify(p)` and
/// `Im(h^H p) = s . realify(p)`.
pub fn herm_rows(h: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let mut re_row = Vec::with_capacity(2 * n);
    let mut im_row = Vec::with_capacity(2 * n);
    re_row.extend(h.iter().map(|z| z.re));
    re_row.extend(h.iter().map(|z| z.im));
    im_row.extend(h.iter().map(|z| -z.im));
    im_row.extend(h.iter().map(|z| z.re));
    (re_row, im_row)
}

/// Component of `v` orthogonal to `onto` (returns `v` when `onto` is
/// negligible).
pub fn project_orthogonal(v: &[Complex64], onto: &[Complex64]) -> Vec<Complex64> {
    let n2 = norm_sq(onto);
    if n2 < 1e-24 {
        return v.to_vec();
    }
    let c = inner(onto, v) / n2;
    v.iter().zip(onto).map(|(a, b)| a - b * c).collect()
}

/// Linear form of `2 Re{p0^H h h^H p}` in the flattened coordinates of `p`.
///
/// This is the gradient-side coefficient of the tangent plane of
/// `|h^H p|^2` at `p0`.
pub fn quad_tangent_row(h: &[Complex64], p0: &[Complex64]) -> Vec<f64> {
    let c0 = inner(h, p0); // h^H p0
    let (re_row, im_row) = herm_rows(h);
    re_row
        .iter()
        .zip(&im_row)
        .map(|(r, s)| 2.0 * (c0.re * r + c0.im * s))
        .collect()
}
