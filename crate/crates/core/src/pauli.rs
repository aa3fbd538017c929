//! Phased Pauli strings over `n` qubits.
//!
//! A [`PauliString`] stores `i^phase · σ_0 ⊗ σ_1 ⊗ … ⊗ σ_{n-1}` where each `σ_q` is one of
//! `I, X, Y, Z` encoded by an `(x, z)` bit pair: `(0,0)=I`, `(1,0)=X`, `(0,1)=Z`,
//! `(1,1)=Y`. The phase is the one printed in front of the letters, so `Y` itself has
//! phase 0 and `XZ = -iY` comes out as phase 3.
//!
//! Bits are packed 64 per word; the dense export is only an oracle path.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Entry magnitude below which a matrix element counts as zero.
pub const ZERO_TOL: f64 = 1e-10;
/// Distance within which a phase snaps to one of {1, i, -1, -i}.
pub const PHASE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(ch: char) -> Option<Self> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> Matrix {
        PauliString::single(1, 0, self).to_matrix_with_limit(1).expect("one qubit")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    phase: u8,
    x: Vec<u64>,
    z: Vec<u64>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(p, q)| (p & q).count_ones()).sum()
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { n, phase: 0, x: vec![0; words(n)], z: vec![0; words(n)] }
    }

    /// `pauli` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, pauli: Pauli) -> Self {
        let mut p = Self::identity(n);
        p.set(q, pauli);
        p
    }

    pub fn from_paulis(paulis: &[Pauli], phase: u8) -> Self {
        let mut p = Self::identity(paulis.len());
        for (q, &s) in paulis.iter().enumerate() {
            p.set(q, s);
        }
        p.phase = phase % 4;
        p
    }

    pub fn from_bits(phase: u8, x_bits: &[bool], z_bits: &[bool]) -> Result<Self> {
        if x_bits.len() != z_bits.len() {
            return Err(Error::SizeMismatch { left: x_bits.len(), right: z_bits.len() });
        }
        let mut p = Self::identity(x_bits.len());
        for q in 0..x_bits.len() {
            p.set(q, Pauli::from_bits(x_bits[q], z_bits[q]));
        }
        p.phase = phase % 4;
        Ok(p)
    }

    /// Builds a string from the low `n` bits of `x` and `z`.
    pub fn from_masks(n: usize, phase: u8, x: u64, z: u64) -> Self {
        assert!(n <= 64, "mask constructor is limited to 64 qubits");
        let mut p = Self::identity(n);
        if n > 0 {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            p.x[0] = x & mask;
            p.z[0] = z & mask;
        }
        p.phase = phase % 4;
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set(&mut self, q: usize, pauli: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (xb, zb) = pauli.bits();
        let (w, b) = (q / 64, q % 64);
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// Phase of the `X^x Z^z` ordered form, i.e. `self = i^q ∏ X^x Z^z`.
    fn xz_phase(&self) -> u8 {
        ((self.phase as u32 + popcount_and(&self.x, &self.z)) % 4) as u8
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::SizeMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// Group product `self · other` with exact phase.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let x: Vec<u64> = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z: Vec<u64> = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        // X^a Z^b X^c Z^d = (-1)^{b·c} X^{a+c} Z^{b+d}
        let q = self.xz_phase() as u32 + other.xz_phase() as u32 + 2 * popcount_and(&self.z, &other.x);
        let phase = ((q + 4 * 64 - popcount_and(&x, &z) % 4) % 4) as u8;
        Ok(PauliString { n: self.n, phase, x, z })
    }

    /// Symplectic form: `true` when the strings anticommute.
    pub fn anticommutes(&self, other: &Self) -> Result<bool> {
        self.check_len(other)?;
        let s = popcount_and(&self.x, &other.z) + popcount_and(&self.z, &other.x);
        Ok(s % 2 == 1)
    }

    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.anticommutes(other).map(|a| !a)
    }

    pub fn adjoint(&self) -> Self {
        // each letter is Hermitian, so only the scalar conjugates
        let mut p = self.clone();
        p.phase = (4 - self.phase) % 4;
        p
    }

    pub fn is_identity(&self) -> bool {
        self.phase == 0 && self.is_identity_up_to_phase()
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    /// Same letters, ignoring phase.
    pub fn eq_up_to_phase(&self, other: &Self) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    /// Qubits on which the string acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.x_bit(q) || self.z_bit(q)).collect()
    }

    /// Per-block count of non-identity positions.
    pub fn block_weight(&self, partition: &[Vec<usize>]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.n];
        for block in partition {
            for &q in block {
                if q >= self.n {
                    return Err(Error::QubitOutOfRange { index: q, n: self.n });
                }
                if seen[q] {
                    return Err(Error::OverlappingBlocks(q));
                }
                seen[q] = true;
            }
        }
        Ok(partition
            .iter()
            .map(|block| block.iter().filter(|&&q| self.get(q) != Pauli::I).count())
            .collect())
    }

    /// Sub-string on `qubits` (in that order); phase is dropped.
    pub fn restrict(&self, qubits: &[usize]) -> Self {
        let mut p = Self::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            p.set(i, self.get(q));
        }
        p
    }

    /// Overwrites the letters on `qubits` with those of `local` and multiplies in its phase.
    pub fn splice(&mut self, qubits: &[usize], local: &PauliString) {
        assert_eq!(qubits.len(), local.n);
        for (i, &q) in qubits.iter().enumerate() {
            self.set(q, local.get(i));
        }
        self.phase = (self.phase + local.phase) % 4;
    }

    /// Scalar `i^phase` as a complex number.
    pub fn phase_factor(&self) -> Complex64 {
        i_pow(self.phase)
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        self.to_matrix_with_limit(linalg::dense_limit())
    }

    pub fn to_matrix_with_limit(&self, limit: usize) -> Result<Matrix> {
        if self.n > limit || self.n >= 32 {
            return Err(Error::DenseLimit { n: self.n, limit });
        }
        let dim = 1usize << self.n;
        let xm = self.x.first().copied().unwrap_or(0) as usize;
        let zm = self.z.first().copied().unwrap_or(0) as usize;
        let base = i_pow(self.xz_phase());
        let mut m = Matrix::zeros(dim, dim);
        for j in 0..dim {
            let sign = if (zm & j).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            m[(j ^ xm, j)] = base * sign;
        }
        Ok(m)
    }

    /// Recognises `m` as a phased Pauli string, or `None`.
    ///
    /// Entries below [`ZERO_TOL`] count as zero and the phase must lie within
    /// [`PHASE_TOL`] of a power of `i`.
    pub fn from_matrix(m: &Matrix) -> Option<Self> {
        let dim = m.nrows();
        if dim == 0 || m.ncols() != dim || !dim.is_power_of_two() {
            return None;
        }
        let n = dim.trailing_zeros() as usize;
        if n > 30 {
            return None;
        }
        let mut rows = (0..dim).filter(|&r| !linalg::is_zero(m[(r, 0)], ZERO_TOL));
        let xm = rows.next()?;
        if rows.next().is_some() {
            return None;
        }
        let q = linalg::snap_quarter_phase(m[(xm, 0)], PHASE_TOL)?;
        let base = i_pow(q);
        let mut zm = 0usize;
        for b in 0..n {
            let j = 1usize << b;
            let ratio = m[(j ^ xm, j)] / base;
            if (ratio + 1.0).norm() < PHASE_TOL {
                zm |= j;
            } else if (ratio - 1.0).norm() >= PHASE_TOL {
                return None;
            }
        }
        for col in 0..dim {
            let target = col ^ xm;
            let sign = if (zm & col).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            for row in 0..dim {
                let e = m[(row, col)];
                if row == target {
                    if (e - base * sign).norm() >= PHASE_TOL {
                        return None;
                    }
                } else if !linalg::is_zero(e, ZERO_TOL) {
                    return None;
                }
            }
        }
        let xz = PauliString::from_masks(n, 0, xm as u64, zm as u64);
        let phase = ((q as u32 + 4 - popcount_and(&xz.x, &xz.z) % 4) % 4) as u8;
        Some(xz.with_phase(phase))
    }

    /// All `4^n` phase-free strings, in mask order (`x` major, `z` minor).
    pub fn enumerate(n: usize) -> impl Iterator<Item = PauliString> {
        assert!(n <= 16, "enumeration limited to 16 qubits");
        let dim = 1u64 << n;
        (0..dim).flat_map(move |x| (0..dim).map(move |z| PauliString::from_masks(n, 0, x, z)))
    }
}

pub(crate) fn i_pow(p: u8) -> Complex64 {
    match p % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q).letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts an optional `+`, `-`, `+i`, `-i` or `i` prefix followed by `IXYZ` letters.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else {
            (0, s)
        };
        let letters = body
            .chars()
            .map(|ch| Pauli::from_letter(ch).ok_or_else(|| Error::Parse(format!("bad Pauli letter {ch:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_paulis(&letters, phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_rows, max_abs_diff};

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    // 2x2 oracle matrices written out by hand
    fn x() -> Matrix {
        from_rows(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]])
    }
    fn y() -> Matrix {
        from_rows(&[&[c(0., 0.), c(0., -1.)], &[c(0., 1.), c(0., 0.)]])
    }
    fn z() -> Matrix {
        from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]])
    }

    #[test]
    fn x_times_x_is_identity() {
        let r = p("X").multiply(&p("X")).unwrap();
        assert!(r.is_identity());
        assert_eq!(r.phase_exp(), 0);
    }

    #[test]
    fn x_times_z_is_minus_i_y() {
        let oracle = x() * z();
        let r = p("X").multiply(&p("Z")).unwrap();
        assert_eq!(r.to_string(), "-iY");
        assert_eq!(r.phase_exp(), 3);
        assert!(max_abs_diff(&r.to_matrix().unwrap(), &oracle) < 1e-15);
        // the oracle itself: XZ = -iY
        assert!(max_abs_diff(&oracle, &y().map(|e| e * c(0., -1.))) < 1e-15);
    }

    #[test]
    fn disjoint_product_has_no_phase() {
        let r = p("XI").multiply(&p("IZ")).unwrap();
        assert_eq!(r, p("XZ"));
        assert_eq!(r.phase_exp(), 0);
        let oracle = p("XI").to_matrix().unwrap() * p("IZ").to_matrix().unwrap();
        assert!(max_abs_diff(&r.to_matrix().unwrap(), &oracle) < 1e-15);
    }

    #[test]
    fn commutation_examples() {
        assert!(!p("X").commutes(&p("Z")).unwrap());
        assert!(p("X").commutes(&p("X")).unwrap());
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(p("X").commutes(&p("XZ")).is_err());
    }

    #[test]
    fn dense_export() {
        assert!(max_abs_diff(&p("I").to_matrix().unwrap(), &crate::linalg::identity(2)) < 1e-15);
        assert!(max_abs_diff(&p("Z").to_matrix().unwrap(), &z()) < 1e-15);
        assert!(max_abs_diff(&p("Y").to_matrix().unwrap(), &y()) < 1e-15);
        let mi_y = from_rows(&[&[c(0., 0.), c(-1., 0.)], &[c(1., 0.), c(0., 0.)]]);
        assert!(max_abs_diff(&p("-iY").to_matrix().unwrap(), &mi_y) < 1e-15);
    }

    #[test]
    fn dense_export_respects_limit() {
        let big = PauliString::identity(5);
        assert_eq!(big.to_matrix_with_limit(4), Err(Error::DenseLimit { n: 5, limit: 4 }));
    }

    #[test]
    fn qubit_zero_is_least_significant() {
        // X on qubit 1 of two qubits maps |00> (index 0) to |01> written qubit-0-first, index 2
        let m = p("IX").to_matrix().unwrap();
        assert_eq!(m[(2, 0)], c(1., 0.));
    }

    #[test]
    fn block_weights() {
        let parts = vec![vec![0, 1], vec![2, 3]];
        assert_eq!(p("IIII").block_weight(&parts).unwrap(), vec![0, 0]);
        assert_eq!(p("XIIZ").block_weight(&parts).unwrap(), vec![1, 1]);
        assert_eq!(p("YZII").block_weight(&parts).unwrap(), vec![2, 0]);
        assert_eq!(
            p("YZII").block_weight(&[vec![0, 1], vec![1, 2]]),
            Err(Error::OverlappingBlocks(1))
        );
    }

    #[test]
    fn text_round_trip_examples() {
        for s in ["+XIZY", "-iYZ", "+iI", "-ZZ", "+"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert_eq!(p("XZ").to_string(), "+XZ");
        assert_eq!(p("iX").to_string(), "+iX");
        assert!("+XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn recognition_of_dense_paulis() {
        for s in ["+X", "-iY", "+iZX", "-XYZ"] {
            let m = p(s).to_matrix().unwrap();
            assert_eq!(PauliString::from_matrix(&m).unwrap(), p(s));
        }
        let h = from_rows(&[&[c(1., 0.), c(1., 0.)], &[c(1., 0.), c(-1., 0.)]]).map(|e| e / 2f64.sqrt());
        assert!(PauliString::from_matrix(&h).is_none());
    }

    #[test]
    fn wide_strings_cross_word_boundaries() {
        let mut a = PauliString::identity(130);
        a.set(0, Pauli::X);
        a.set(100, Pauli::Z);
        a.set(129, Pauli::Y);
        let mut b = PauliString::identity(130);
        b.set(100, Pauli::X);
        b.set(129, Pauli::Z);
        assert_eq!(a.weight(), 3);
        // Z·X on 100 anticommutes, Y·Z on 129 anticommutes: overall commute
        assert!(a.commutes(&b).unwrap());
        let ab = a.multiply(&b).unwrap();
        assert_eq!(ab.get(100), Pauli::Y);
        assert_eq!(ab.get(129), Pauli::X);
        // ZX = iY, YZ = iX
        assert_eq!(ab.phase_exp(), 2);
    }
}
