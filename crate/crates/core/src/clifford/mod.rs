//! Clifford elements as conjugation maps, plus the dense-unitary bridge and the
//! Clifford hierarchy.
//!
//! A [`CliffordMap`] stores the images `C X_i C†` and `C Z_i C†` of the single-qubit
//! generators. Every other Pauli is conjugated symbolically by multiplying generator
//! images, so phases stay exact.

mod gate;
mod hierarchy;

pub use gate::{permutation, GateUnitary, LIBRARY, UNITARY_TOL};
pub use hierarchy::{hierarchy_level, Classification, HierarchyClassifier, HierarchyLevel};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CliffordMap {
    n: usize,
    image_x: Vec<PauliString>,
    image_z: Vec<PauliString>,
}

impl CliffordMap {
    pub fn identity(n: usize) -> Self {
        CliffordMap {
            n,
            image_x: (0..n).map(|q| PauliString::single(n, q, Pauli::X)).collect(),
            image_z: (0..n).map(|q| PauliString::single(n, q, Pauli::Z)).collect(),
        }
    }

    /// Builds a map from generator images, checking the symplectic conditions and
    /// that every image is Hermitian (phase ±1).
    pub fn new(image_x: Vec<PauliString>, image_z: Vec<PauliString>) -> Result<Self> {
        let n = image_x.len();
        if image_z.len() != n {
            return Err(Error::SizeMismatch { left: n, right: image_z.len() });
        }
        for img in image_x.iter().chain(&image_z) {
            if img.n() != n {
                return Err(Error::SizeMismatch { left: n, right: img.n() });
            }
            if img.phase_exp() % 2 == 1 {
                return Err(Error::Invalid(format!("generator image {img} is not Hermitian")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let xz = image_x[i].anticommutes(&image_z[j])?;
                if xz != (i == j) {
                    return Err(Error::Invalid(format!("images of X{i} and Z{j} violate the symplectic condition")));
                }
                if i < j && (image_x[i].anticommutes(&image_x[j])? || image_z[i].anticommutes(&image_z[j])?) {
                    return Err(Error::Invalid(format!("images of generators {i} and {j} do not commute")));
                }
            }
        }
        Ok(CliffordMap { n, image_x, image_z })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn image_x(&self, q: usize) -> &PauliString {
        &self.image_x[q]
    }

    pub fn image_z(&self, q: usize) -> &PauliString {
        &self.image_z[q]
    }

    /// `C P C†`, exact including phase.
    pub fn conjugate(&self, p: &PauliString) -> Result<PauliString> {
        if p.n() != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: p.n() });
        }
        // P = i^p ∏_q σ_q and σ_q = i^{x z} X^x Z^z
        let mut out = PauliString::identity(self.n);
        let mut extra = 0u8;
        for q in 0..self.n {
            let (xb, zb) = p.get(q).bits();
            if xb {
                out = out.multiply(&self.image_x[q])?;
            }
            if zb {
                out = out.multiply(&self.image_z[q])?;
            }
            if xb && zb {
                extra += 1;
            }
        }
        let phase = (out.phase_exp() + p.phase_exp() + extra) % 4;
        Ok(out.with_phase(phase))
    }

    /// Applies `self` first and then `next` (circuit order).
    pub fn compose(&self, next: &CliffordMap) -> Result<CliffordMap> {
        if next.n != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: next.n });
        }
        Ok(CliffordMap {
            n: self.n,
            image_x: self.image_x.iter().map(|p| next.conjugate(p)).collect::<Result<_>>()?,
            image_z: self.image_z.iter().map(|p| next.conjugate(p)).collect::<Result<_>>()?,
        })
    }

    /// Symbolic inverse: the preimage of each generator under `self`.
    pub fn inverse(&self) -> CliffordMap {
        let n = self.n;
        let preimage = |target: &PauliString| -> PauliString {
            // coefficients are read off with the symplectic form:
            // x_k = ω(T, C Z_k C†), z_k = ω(T, C X_k C†)
            let mut q = PauliString::identity(n);
            for k in 0..n {
                let xb = target.anticommutes(&self.image_z[k]).expect("sizes match");
                let zb = target.anticommutes(&self.image_x[k]).expect("sizes match");
                q.set(k, Pauli::from_bits(xb, zb));
            }
            let image = self.conjugate(&q).expect("sizes match");
            debug_assert!(image.eq_up_to_phase(target));
            let fix = (4 + target.phase_exp() - image.phase_exp()) % 4;
            q.with_phase(fix)
        };
        CliffordMap {
            n,
            image_x: (0..n).map(|q| preimage(&PauliString::single(n, q, Pauli::X))).collect(),
            image_z: (0..n).map(|q| preimage(&PauliString::single(n, q, Pauli::Z))).collect(),
        }
    }

    /// Recognises a dense unitary as Clifford; `Ok(None)` means "not Clifford".
    pub fn from_unitary(u: &GateUnitary) -> Result<Option<CliffordMap>> {
        let limit = linalg::dense_limit();
        if u.n() > limit {
            return Err(Error::DenseLimit { n: u.n(), limit });
        }
        Ok(Self::from_matrix_unchecked(u.matrix()))
    }

    /// As [`CliffordMap::from_unitary`] for a matrix already known to be unitary.
    pub(crate) fn from_matrix_unchecked(m: &Matrix) -> Option<CliffordMap> {
        let n = m.nrows().trailing_zeros() as usize;
        let adj = m.adjoint();
        let image = |p: PauliString| -> Option<PauliString> {
            let dense = p.to_matrix_with_limit(usize::MAX).ok()?;
            PauliString::from_matrix(&(m * dense * &adj))
        };
        let mut image_x = Vec::with_capacity(n);
        let mut image_z = Vec::with_capacity(n);
        for q in 0..n {
            image_x.push(image(PauliString::single(n, q, Pauli::X))?);
            image_z.push(image(PauliString::single(n, q, Pauli::Z))?);
        }
        Some(CliffordMap { n, image_x, image_z })
    }

    pub fn named(name: &str) -> Result<CliffordMap> {
        let g = GateUnitary::named(name)?;
        Self::from_unitary(&g)?.ok_or_else(|| Error::Invalid(format!("{name} is not a Clifford gate")))
    }

    /// Conjugates the part of `frame` living on `targets` (local qubit `i` ↦ `targets[i]`).
    pub fn conjugate_on(&self, frame: &PauliString, targets: &[usize]) -> Result<PauliString> {
        if targets.len() != self.n {
            return Err(Error::DimensionMismatch { dim: 1 << self.n, targets: targets.len() });
        }
        let local = frame.restrict(targets);
        let image = self.conjugate(&local)?;
        let mut out = frame.clone();
        out.splice(targets, &image);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn dense_conj(u: &GateUnitary, q: &PauliString) -> Matrix {
        u.conjugate_matrix(&q.to_matrix().unwrap())
    }

    #[test]
    fn cnot_pushes_x_on_control_to_both() {
        let cnot = CliffordMap::named("CNOT").unwrap();
        assert_eq!(cnot.conjugate(&p("XI")).unwrap(), p("XX"));
        assert_eq!(cnot.image_x(0), &p("XX"));
    }

    #[test]
    fn identity_map_fixes_everything() {
        let id = CliffordMap::identity(3);
        for q in PauliString::enumerate(3).take(20) {
            let q = q.with_phase(3);
            assert_eq!(id.conjugate(&q).unwrap(), q);
        }
    }

    #[test]
    fn hadamard_swaps_x_and_z() {
        let h = CliffordMap::named("H").unwrap();
        let hu = GateUnitary::named("H").unwrap();
        assert_eq!(h.conjugate(&p("X")).unwrap(), p("Z"));
        assert_eq!(h.conjugate(&p("Z")).unwrap(), p("X"));
        assert_eq!(h.conjugate(&p("Y")).unwrap(), p("-Y"));
        assert!(max_abs_diff(&dense_conj(&hu, &p("X")), &p("Z").to_matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn self_inverse_compositions() {
        let h = CliffordMap::named("H").unwrap();
        assert_eq!(h.compose(&h).unwrap(), CliffordMap::identity(1));
        let cx = CliffordMap::named("CNOT").unwrap();
        assert_eq!(cx.compose(&cx).unwrap(), CliffordMap::identity(2));
    }

    #[test]
    fn compose_matches_dense_product() {
        let h = CliffordMap::named("H").unwrap();
        let s = CliffordMap::named("P").unwrap();
        let ph = GateUnitary::new(
            GateUnitary::named("P").unwrap().matrix() * GateUnitary::named("H").unwrap().matrix(),
            None,
        )
        .unwrap();
        let got = h.compose(&s).unwrap().conjugate(&p("X")).unwrap();
        assert!(max_abs_diff(&got.to_matrix().unwrap(), &dense_conj(&ph, &p("X"))) < 1e-12);
    }

    #[test]
    fn inverse_composes_to_identity() {
        for name in ["H", "P", "CNOT", "CZ", "SWAP"] {
            let c = CliffordMap::named(name).unwrap();
            assert_eq!(c.compose(&c.inverse()).unwrap(), CliffordMap::identity(c.n()), "{name}");
            assert_eq!(c.inverse().compose(&c).unwrap(), CliffordMap::identity(c.n()), "{name}");
        }
    }

    #[test]
    fn from_unitary_examples() {
        let t = GateUnitary::named("T").unwrap();
        assert!(CliffordMap::from_unitary(&t).unwrap().is_none());
        let px = GateUnitary::new(
            GateUnitary::named("P").unwrap().matrix() * GateUnitary::named("X").unwrap().matrix(),
            None,
        )
        .unwrap();
        let m = CliffordMap::from_unitary(&px).unwrap().unwrap();
        // P X: X -> PXP† = Y, Z -> -Z
        assert_eq!(m.image_x(0), &p("Y"));
        assert_eq!(m.image_z(0), &p("-Z"));
    }

    #[test]
    fn new_rejects_non_symplectic_images() {
        assert!(CliffordMap::new(vec![p("X")], vec![p("X")]).is_err());
        assert!(CliffordMap::new(vec![p("Z")], vec![p("X")]).is_ok());
        assert!(CliffordMap::new(vec![p("iZ")], vec![p("X")]).is_err());
    }

    #[test]
    fn conjugate_on_subset_of_frame() {
        let cx = CliffordMap::named("CNOT").unwrap();
        let frame = p("IXII");
        // CNOT with control on qubit 1, target on qubit 3
        assert_eq!(cx.conjugate_on(&frame, &[1, 3]).unwrap(), p("IXIX"));
    }
}
