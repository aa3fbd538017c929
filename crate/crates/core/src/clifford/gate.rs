//! Dense gate unitaries and the named gate library.
//!
//! Multi-qubit matrices use the crate-wide ordering: gate qubit 0 is the least
//! significant bit of the matrix index. `CNOT` therefore has its control on gate
//! qubit 0 and its target on gate qubit 1; `TOFFOLI` has controls 0 and 1.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, Matrix};

/// Unitarity tolerance for [`GateUnitary::new`].
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GateUnitary {
    n: usize,
    matrix: Matrix,
    name: Option<String>,
}

impl GateUnitary {
    pub fn new(matrix: Matrix, name: Option<String>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim || !dim.is_power_of_two() {
            return Err(Error::Invalid(format!("gate matrix must be square with power-of-two size, got {}x{}", dim, matrix.ncols())));
        }
        let deviation = linalg::unitarity_deviation(&matrix);
        if deviation.is_nan() || deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(GateUnitary { n: dim.trailing_zeros() as usize, matrix, name })
    }

    pub fn named(name: &str) -> Result<Self> {
        let key = name.trim();
        let upper = key.to_ascii_uppercase();
        let h = 1.0 / 2f64.sqrt();
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let m = match upper.as_str() {
            "I" => linalg::identity(2),
            "X" => linalg::from_rows(&[&[o, l], &[l, o]]),
            "Y" => linalg::from_rows(&[&[o, c(0.0, -1.0)], &[c(0.0, 1.0), o]]),
            "Z" => linalg::diag(&[l, c(-1.0, 0.0)]),
            "H" => linalg::from_rows(&[&[c(h, 0.0), c(h, 0.0)], &[c(h, 0.0), c(-h, 0.0)]]),
            "P" => linalg::diag(&[l, c(0.0, 1.0)]),
            "T" => linalg::diag(&[l, Complex64::from_polar(1.0, PI / 4.0)]),
            "CNOT" => permutation(2, |i| if i & 1 == 1 { i ^ 2 } else { i }),
            "CZ" => linalg::diag(&[l, l, l, c(-1.0, 0.0)]),
            "SWAP" => permutation(2, |i| ((i & 1) << 1) | ((i >> 1) & 1)),
            "TOFFOLI" | "CCNOT" => permutation(3, |i| if i & 3 == 3 { i ^ 4 } else { i }),
            "CPHASE_I" => linalg::diag(&[l, l, l, c(0.0, 1.0)]),
            _ => match parse_rz_exponent(&upper) {
                Some(k) => return Ok(Self::rz_pow2(k)),
                None => return Err(Error::Invalid(format!("unknown gate {key:?}"))),
            },
        };
        Self::new(m, Some(canonical_name(&upper)))
    }

    /// `diag(1, e^{iπ/2^k})`, named `RZ(pi/2^k)`.
    pub fn rz_pow2(k: u32) -> Self {
        let angle = PI / 2f64.powi(k as i32);
        let m = linalg::diag(&[c(1.0, 0.0), Complex64::from_polar(1.0, angle)]);
        GateUnitary { n: 1, matrix: m, name: Some(format!("RZ(pi/2^{k})")) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn adjoint(&self) -> Self {
        GateUnitary {
            n: self.n,
            matrix: self.matrix.adjoint(),
            name: self.name.as_ref().map(|s| format!("{s}^dag")),
        }
    }

    /// `e^{iθ} U`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let ph = Complex64::from_polar(1.0, theta);
        GateUnitary { n: self.n, matrix: self.matrix.map(|e| e * ph), name: self.name.clone() }
    }

    /// `self ⊗ other` with `self` on the low qubits.
    pub fn tensor(&self, other: &GateUnitary) -> GateUnitary {
        GateUnitary {
            n: self.n + other.n,
            matrix: linalg::tensor_lsb(&self.matrix, &other.matrix),
            name: None,
        }
    }

    /// `U P U†` for a dense operator `p` of matching size.
    pub fn conjugate_matrix(&self, p: &Matrix) -> Matrix {
        &self.matrix * p * self.matrix.adjoint()
    }
}

impl fmt::Display for GateUnitary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => f.write_str(n),
            None => write!(f, "<{}-qubit unitary>", self.n),
        }
    }
}

/// Names resolvable by [`GateUnitary::named`], excluding the `RZ(pi/2^k)` family.
pub const LIBRARY: &[&str] = &["I", "X", "Y", "Z", "H", "P", "T", "CNOT", "CZ", "SWAP", "TOFFOLI", "CPHASE_I"];

fn canonical_name(upper: &str) -> String {
    if upper == "CCNOT" {
        "TOFFOLI".into()
    } else {
        upper.into()
    }
}

/// Accepts `RZ(pi/2^k)` (any case, optional spaces).
fn parse_rz_exponent(upper: &str) -> Option<u32> {
    let compact: String = upper.chars().filter(|ch| !ch.is_whitespace()).collect();
    let inner = compact.strip_prefix("RZ(")?.strip_suffix(')')?;
    let k = inner.strip_prefix("PI/2^")?;
    let k: u32 = k.parse().ok()?;
    (k <= 52).then_some(k)
}

/// Permutation matrix on `n` qubits sending basis index `i` to `f(i)`.
pub fn permutation(n: usize, f: impl Fn(usize) -> usize) -> Matrix {
    let dim = 1 << n;
    let mut m = Matrix::zeros(dim, dim);
    for i in 0..dim {
        m[(f(i), i)] = c(1.0, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_is_unitary_and_named() {
        for name in LIBRARY {
            let g = GateUnitary::named(name).unwrap();
            assert_eq!(g.name(), Some(*name));
        }
        assert_eq!(GateUnitary::named("ccnot").unwrap().name(), Some("TOFFOLI"));
        assert_eq!(GateUnitary::named("RZ(pi/2^3)").unwrap().name(), Some("RZ(pi/2^3)"));
        assert!(GateUnitary::named("FOO").is_err());
    }

    #[test]
    fn cnot_control_is_gate_qubit_zero() {
        let g = GateUnitary::named("CNOT").unwrap();
        // |control=1, target=0> is index 1 and maps to index 3
        assert_eq!(g.matrix()[(3, 1)], c(1.0, 0.0));
        assert_eq!(g.matrix()[(2, 2)], c(1.0, 0.0));
    }

    #[test]
    fn rejects_non_unitary() {
        let m = linalg::diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(GateUnitary::new(m, None), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn t_matches_rz_pi_over_4() {
        let t = GateUnitary::named("T").unwrap();
        let rz = GateUnitary::rz_pow2(2);
        assert!(linalg::max_abs_diff(t.matrix(), rz.matrix()) < 1e-15);
    }
}
