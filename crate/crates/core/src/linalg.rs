//! Dense complex linear algebra helpers shared by the oracle paths.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type Matrix = DMatrix<Complex64>;

pub const DEFAULT_DENSE_LIMIT: usize = 12;

/// Dense limit in qubits; `TELEPORTAL_DENSE_LIMIT` overrides the default.
pub fn dense_limit() -> usize {
    std::env::var("TELEPORTAL_DENSE_LIMIT")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_LIMIT)
}

pub const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    Matrix::identity(dim, dim)
}

/// Tensor product where `low` acts on the low-order qubits and `high` on the ones above.
pub fn tensor_lsb(low: &Matrix, high: &Matrix) -> Matrix {
    high.kronecker(low)
}

pub fn from_rows(rows: &[&[Complex64]]) -> Matrix {
    let n = rows.len();
    Matrix::from_fn(n, n, |r, col| rows[r][col])
}

pub fn diag(entries: &[Complex64]) -> Matrix {
    let n = entries.len();
    Matrix::from_fn(n, n, |r, col| if r == col { entries[r] } else { Complex64::new(0.0, 0.0) })
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entry of `|U U† - I|`.
pub fn unitarity_deviation(m: &Matrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    max_abs_diff(&(m * m.adjoint()), &identity(m.nrows()))
}

/// Divides out the phase of the first entry of column 0 with magnitude above `tol`.
pub fn normalize_global_phase(m: &Matrix, tol: f64) -> Matrix {
    match m.column(0).iter().find(|z| z.norm() > tol) {
        Some(z) => {
            let phase = z / z.norm();
            m.map(|e| e / phase)
        }
        None => m.clone(),
    }
}

/// Rounded integer fingerprint of a matrix, for memo keys.
pub fn fingerprint(m: &Matrix, grid: f64) -> Vec<i64> {
    let mut out = Vec::with_capacity(2 * m.len() + 1);
    out.push(m.nrows() as i64);
    for z in m.iter() {
        out.push(snap(z.re, grid));
        out.push(snap(z.im, grid));
    }
    out
}

fn snap(x: f64, grid: f64) -> i64 {
    let v = (x / grid).round() as i64;
    if v == -0 {
        0
    } else {
        v
    }
}

pub fn is_zero(z: Complex64, tol: f64) -> bool {
    z.norm() < tol
}

/// Snaps `z` to the nearest of {1, i, -1, -i}, returning the exponent of `i`.
pub fn snap_quarter_phase(z: Complex64, tol: f64) -> Option<u8> {
    const UNITS: [Complex64; 4] = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
    UNITS
        .iter()
        .position(|u| (z - u).norm() < tol)
        .map(|p| p as u8)
}
