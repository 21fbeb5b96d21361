use nalgebra::DMatrix;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Extreme eigenvalues of a symmetric matrix stored row-major.
pub(crate) fn sym_eig_range(m: &[f64], n: usize) -> (f64, f64) {
    let mat = DMatrix::from_row_slice(n, n, m);
    let eig = mat.symmetric_eigen();
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Angle of a planar vector in `(-pi, pi]`.
pub(crate) fn angle(v: &[f64]) -> f64 {
    v[1].atan2(v[0])
}

pub(crate) fn unit_at(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}
