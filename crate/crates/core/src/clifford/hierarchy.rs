//! Clifford-hierarchy classification.
//!
//! Membership is decided recursively on dense matrices:
//!
//! * `C_1`: the matrix is a phased Pauli string;
//! * `C_2`: conjugating every generator `X_i`, `Z_i` lands in `C_1`;
//! * `C_k` for `k ≥ 3`: conjugating every one of the `4^n` Pauli strings lands in
//!   `C_{k-1}`. Generators are not enough here because `C_{k-1}` need not be closed
//!   under products once `k - 1 ≥ 3`.
//!
//! Global phase is divided out before every test and verdicts are memoised by a rounded
//! fingerprint of the phase-normalised matrix.

use std::collections::HashMap;
use std::fmt;

use serde::{Serialize, Serializer};

use super::{CliffordMap, GateUnitary};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pauli::{PauliString, ZERO_TOL};

const FINGERPRINT_GRID: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HierarchyLevel {
    Level(u32),
    /// Not a member of any `C_k` with `k ≤ k_max`.
    Above(u32),
}

impl HierarchyLevel {
    pub fn level(self) -> Option<u32> {
        match self {
            HierarchyLevel::Level(k) => Some(k),
            HierarchyLevel::Above(_) => None,
        }
    }
}

impl fmt::Display for HierarchyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HierarchyLevel::Level(k) => write!(f, "{k}"),
            HierarchyLevel::Above(k) => write!(f, ">{k}"),
        }
    }
}

impl Serialize for HierarchyLevel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HierarchyLevel::Level(k) => s.serialize_u32(*k),
            HierarchyLevel::Above(_) => s.collect_str(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub level: HierarchyLevel,
    /// A Pauli `g` whose conjugate `U g U†` shows that `U` is not one level lower.
    /// For level 2 this is a `g` that `U` does not map to `±g`; for level 1 there is none.
    pub witness: Option<PauliString>,
}

#[derive(Debug, Default)]
pub struct HierarchyClassifier {
    memo: HashMap<(Vec<i64>, u32), bool>,
}

impl HierarchyClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of memoised verdicts.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// Membership predicate for `C_k` (`k ≥ 1`).
    pub fn is_member(&mut self, u: &GateUnitary, k: u32) -> Result<bool> {
        check_dense(u)?;
        if k == 0 {
            return Err(Error::Invalid("hierarchy levels start at 1".into()));
        }
        Ok(self.member(u.matrix(), k))
    }

    pub fn classify(&mut self, u: &GateUnitary, k_max: u32) -> Result<Classification> {
        check_dense(u)?;
        if k_max == 0 {
            return Err(Error::Invalid("k_max must be at least 1".into()));
        }
        let m = u.matrix();
        let level = (1..=k_max).find(|&k| self.member(m, k));
        let (level, lower) = match level {
            Some(k) => (HierarchyLevel::Level(k), k - 1),
            None => (HierarchyLevel::Above(k_max), k_max),
        };
        let witness = match lower {
            0 => None,
            _ => self.witness(m, lower),
        };
        Ok(Classification { level, witness })
    }

    /// A Pauli whose conjugate fails `C_{k-1}`, certifying `U ∉ C_k`.
    fn witness(&mut self, m: &Matrix, k: u32) -> Option<PauliString> {
        let n = m.nrows().trailing_zeros() as usize;
        let adj = m.adjoint();
        for g in PauliString::enumerate(n).skip(1) {
            let gm = g.to_matrix_with_limit(usize::MAX).ok()?;
            let conj = m * &gm * &adj;
            let fails = if k == 1 {
                // U ∈ C_1 exactly when every g is mapped to ±g
                !PauliString::from_matrix(&conj).is_some_and(|img| img.eq_up_to_phase(&g))
            } else {
                !self.member(&conj, k - 1)
            };
            if fails {
                return Some(g);
            }
        }
        None
    }

    fn member(&mut self, m: &Matrix, k: u32) -> bool {
        let norm = linalg::normalize_global_phase(m, ZERO_TOL);
        let key = (linalg::fingerprint(&norm, FINGERPRINT_GRID), k);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let verdict = match k {
            1 => PauliString::from_matrix(&norm).is_some(),
            2 => CliffordMap::from_matrix_unchecked(&norm).is_some(),
            _ => {
                let n = norm.nrows().trailing_zeros() as usize;
                let adj = norm.adjoint();
                PauliString::enumerate(n).skip(1).all(|g| {
                    let gm = g.to_matrix_with_limit(usize::MAX).expect("small n");
                    let conj = &norm * gm * &adj;
                    self.member(&conj, k - 1)
                })
            }
        };
        self.memo.insert(key, verdict);
        verdict
    }
}

fn check_dense(u: &GateUnitary) -> Result<()> {
    let limit = linalg::dense_limit();
    if u.n() > limit {
        return Err(Error::DenseLimit { n: u.n(), limit });
    }
    Ok(())
}

/// Smallest `k ≤ k_max` with `U ∈ C_k`.
pub fn hierarchy_level(u: &GateUnitary, k_max: u32) -> Result<HierarchyLevel> {
    HierarchyClassifier::new().classify(u, k_max).map(|c| c.level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(name: &str) -> HierarchyLevel {
        hierarchy_level(&GateUnitary::named(name).unwrap(), 6).unwrap()
    }

    #[test]
    fn paulis_are_level_one() {
        for g in ["I", "X", "Y", "Z"] {
            assert_eq!(level(g), HierarchyLevel::Level(1), "{g}");
        }
    }

    #[test]
    fn cliffords_are_level_two() {
        for g in ["H", "P", "CNOT", "CZ", "SWAP"] {
            assert_eq!(level(g), HierarchyLevel::Level(2), "{g}");
        }
    }

    #[test]
    fn third_level_gates() {
        for g in ["T", "TOFFOLI", "CPHASE_I"] {
            assert_eq!(level(g), HierarchyLevel::Level(3), "{g}");
        }
    }

    #[test]
    fn t_conjugates_x_to_p_times_x() {
        let t = GateUnitary::named("T").unwrap();
        let x = GateUnitary::named("X").unwrap();
        let p = GateUnitary::named("P").unwrap();
        let conj = t.conjugate_matrix(x.matrix());
        let px = p.matrix() * x.matrix();
        // T X T† = e^{-iπ/4} P X
        let ratio = conj[(1, 0)] / px[(1, 0)];
        assert!((ratio.norm() - 1.0).abs() < 1e-12);
        assert!(linalg::max_abs_diff(&conj, &px.map(|e| e * ratio)) < 1e-12);
    }

    #[test]
    fn rotation_ladder() {
        for k in 1..=5u32 {
            let g = GateUnitary::rz_pow2(k - 1);
            assert_eq!(hierarchy_level(&g, 6).unwrap(), HierarchyLevel::Level(k), "k={k}");
        }
    }

    #[test]
    fn above_k_max_and_witness() {
        let t = GateUnitary::named("T").unwrap();
        let c = HierarchyClassifier::new().classify(&t, 2).unwrap();
        assert_eq!(c.level, HierarchyLevel::Above(2));
        let w = c.witness.unwrap();
        // T commutes with Z, so the witness must have an X component
        assert!(w.x_bit(0));

        let c = HierarchyClassifier::new().classify(&t, 5).unwrap();
        assert_eq!(c.level, HierarchyLevel::Level(3));
        assert!(c.witness.is_some());

        let x = GateUnitary::named("X").unwrap();
        assert_eq!(HierarchyClassifier::new().classify(&x, 3).unwrap().witness, None);
    }

    #[test]
    fn global_phase_is_irrelevant() {
        for name in ["X", "H", "T", "TOFFOLI"] {
            let g = GateUnitary::named(name).unwrap();
            for theta in [0.3, 1.7, -2.9] {
                assert_eq!(
                    hierarchy_level(&g.with_global_phase(theta), 4).unwrap(),
                    hierarchy_level(&g, 4).unwrap(),
                    "{name}"
                );
            }
        }
    }

    #[test]
    fn zero_k_max_is_rejected() {
        let x = GateUnitary::named("X").unwrap();
        assert!(hierarchy_level(&x, 0).is_err());
    }
}
