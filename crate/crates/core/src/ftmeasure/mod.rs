//! Measuring Hermitian involutions, directly and fault-tolerantly.
//!
//! A [`MeasurableOperator`] bundles `M` (with `M² = I`), an optional transversal
//! factorisation `M = ⊗_k m_k`, and a correction `P` that anticommutes with `M` so the
//! `-1` outcome can be mapped back to the `+1` eigenspace.
//!
//! The repeated cat-state protocol lives in [`ft_measure`], the coherent variant in
//! [`nested_measure`], and single-fault analysis in [`propagate_fault`] and
//! [`fault_sweep`].

mod engine;
mod fault;
mod nested;
mod protocol;

pub use engine::ScheduleEntry;
pub use fault::{eigen_input, fault_sweep, propagate_fault, FaultReport, FtProtocol, Propagation, SweepReport, SweepSummary};
pub use nested::{
    analytic_after_state, analytic_final_state, consistent_input, nested_measure, NestedBranch, NestedLayout,
    NestedResult, NestedSpec,
};
pub use protocol::{ft_measure, FtBranch, FtLayout, FtMeasureResult, MAX_CAT_ATTEMPTS};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pauli::{Pauli, PauliString};
use crate::statevector::{Mode, StateVector, PRUNE_PROB};

/// Tolerance for `M² = I` and `P M P† = -M`.
pub const OPERATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MeasurableOperator {
    name: String,
    n: usize,
    matrix: Matrix,
    factors: Option<Vec<Matrix>>,
    correction: Matrix,
    correction_factors: Option<Vec<Matrix>>,
}

impl MeasurableOperator {
    pub fn new(name: impl Into<String>, matrix: Matrix, correction: Matrix) -> Result<Self> {
        let op = MeasurableOperator {
            name: name.into(),
            n: qubits_of(&matrix)?,
            matrix,
            factors: None,
            correction,
            correction_factors: None,
        };
        op.validate()?;
        Ok(op)
    }

    /// `M = ⊗_k factors[k]` and `P = ⊗_k correction_factors[k]`, factor `k` on qubit `k`.
    pub fn transversal(
        name: impl Into<String>,
        factors: Vec<Matrix>,
        correction_factors: Vec<Matrix>,
    ) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Invalid("transversal operator needs at least one factor".into()));
        }
        if factors.len() != correction_factors.len() {
            return Err(Error::SizeMismatch { left: factors.len(), right: correction_factors.len() });
        }
        for f in factors.iter().chain(&correction_factors) {
            if f.shape() != (2, 2) {
                return Err(Error::DimensionMismatch { dim: f.nrows(), targets: 1 });
            }
        }
        let op = MeasurableOperator {
            name: name.into(),
            n: factors.len(),
            matrix: kron_all(&factors),
            correction: kron_all(&correction_factors),
            factors: Some(factors),
            correction_factors: Some(correction_factors),
        };
        op.validate()?;
        Ok(op)
    }

    /// A Hermitian Pauli string. The default correction is `Z` on the first
    /// non-identity qubit when that letter is `X` or `Y`, and `X` when it is `Z`.
    pub fn from_pauli(p: &PauliString) -> Result<Self> {
        if p.phase_exp() % 2 == 1 {
            return Err(Error::Invalid(format!("{p} is not Hermitian")));
        }
        let Some(&first) = p.support().first() else {
            return Err(Error::InvalidCorrection("the identity has no anticommuting correction".into()));
        };
        let sign = if p.phase_exp() == 2 { -1.0 } else { 1.0 };
        let factors: Vec<Matrix> = (0..p.n())
            .map(|q| {
                let m = p.get(q).matrix();
                if q == 0 { m * Complex64::from(sign) } else { m }
            })
            .collect();
        let fix = if p.get(first) == Pauli::Z { Pauli::X } else { Pauli::Z };
        let corrections = (0..p.n()).map(|q| if q == first { fix } else { Pauli::I }.matrix()).collect();
        let text = p.to_string();
        let name = text.strip_prefix('+').unwrap_or(&text);
        Self::transversal(name, factors, corrections)
    }

    /// Parses a Pauli string such as `"ZZZ"` or `"-XX"`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pauli(&text.parse()?)
    }

    /// Replaces the correction, re-checking that it anticommutes with `M`.
    pub fn with_correction(mut self, correction: Matrix) -> Result<Self> {
        self.correction = correction;
        self.correction_factors = None;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.matrix.nrows();
        let dev = linalg::unitarity_deviation(&self.matrix);
        if dev > OPERATOR_TOL {
            return Err(Error::NotUnitary { deviation: dev });
        }
        if linalg::max_abs_diff(&(&self.matrix * &self.matrix), &linalg::identity(dim)) > OPERATOR_TOL {
            return Err(Error::NotInvolution);
        }
        if self.correction.shape() != self.matrix.shape() {
            return Err(Error::InvalidCorrection(format!(
                "dimension {} does not match the operator's {dim}",
                self.correction.nrows()
            )));
        }
        if linalg::unitarity_deviation(&self.correction) > OPERATOR_TOL {
            return Err(Error::InvalidCorrection("correction is not unitary".into()));
        }
        let conj = &self.correction * &self.matrix * self.correction.adjoint();
        if linalg::max_abs_diff(&conj, &(-&self.matrix)) > OPERATOR_TOL {
            return Err(Error::InvalidCorrection("correction does not anticommute with the operator".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn correction(&self) -> &Matrix {
        &self.correction
    }

    pub fn factors(&self) -> Result<&[Matrix]> {
        self.factors.as_deref().ok_or(Error::NotTransversal)
    }

    pub fn correction_factors(&self) -> Option<&[Matrix]> {
        self.correction_factors.as_deref()
    }

    /// `(I + sign·M)/2` for `sign = ±1`.
    pub fn projector(&self, sign: f64) -> Matrix {
        (linalg::identity(self.matrix.nrows()) + &self.matrix * Complex64::from(sign)) * Complex64::from(0.5)
    }
}

fn qubits_of(m: &Matrix) -> Result<usize> {
    let dim = m.nrows();
    if dim != m.ncols() || dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Invalid(format!("operator shape {}x{} is not a square power of two", dim, m.ncols())));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// `factors[0]` on the lowest qubit.
fn kron_all(factors: &[Matrix]) -> Matrix {
    factors[1..].iter().fold(factors[0].clone(), |acc, f| linalg::tensor_lsb(&acc, f))
}

pub(crate) fn hadamard() -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    linalg::from_rows(&[&[linalg::c(s, 0.0), linalg::c(s, 0.0)], &[linalg::c(s, 0.0), linalg::c(-s, 0.0)]])
}

pub(crate) fn is_identity_2x2(m: &Matrix) -> bool {
    linalg::max_abs_diff(m, &linalg::identity(2)) < OPERATOR_TOL
}

/// Where an operator acts inside a larger data register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockSpec {
    pub qubits: Vec<usize>,
    pub code: Code,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Code {
    /// No error correction between trials.
    Unencoded,
    /// Consecutive triples of the block form bit-flip repetition codes that are
    /// syndrome-checked and corrected between trials.
    Repetition3,
}

impl BlockSpec {
    pub fn unencoded(qubits: Vec<usize>) -> Self {
        BlockSpec { qubits, code: Code::Unencoded }
    }

    pub fn repetition3(qubits: Vec<usize>) -> Self {
        BlockSpec { qubits, code: Code::Repetition3 }
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub(crate) fn check(&self, n_data: usize) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::Invalid("empty block".into()));
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= n_data {
                return Err(Error::QubitOutOfRange { index: q, n: n_data });
            }
            if self.qubits[..i].contains(&q) {
                return Err(Error::DuplicateTarget(q));
            }
        }
        if self.code == Code::Repetition3 && !self.qubits.len().is_multiple_of(3) {
            return Err(Error::Invalid(format!("repetition3 needs a multiple of 3 qubits, got {}", self.qubits.len())));
        }
        Ok(())
    }
}

/// A single Pauli fault applied right after nominal operation `op` completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FaultSpec {
    pub op: usize,
    pub qubit: usize,
    #[serde(serialize_with = "serialize_pauli")]
    pub pauli: Pauli,
}

fn serialize_pauli<S: serde::Serializer>(p: &Pauli, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.letter().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub decoded_bit: u8,
    /// Probability of the branch up to and including this trial.
    pub branch_probability: f64,
    /// Hash of the rounded post-trial amplitudes.
    pub fingerprint: String,
}

pub(crate) fn state_fingerprint(s: &StateVector) -> String {
    use std::hash::{DefaultHasher, Hash, Hasher};
    let mut h = DefaultHasher::new();
    for a in s.amplitudes() {
        ((a.re * 1e9).round() as i64).hash(&mut h);
        ((a.im * 1e9).round() as i64).hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

#[derive(Debug, Clone)]
pub struct MeasureBranch {
    pub outcome: u8,
    pub probability: f64,
    pub state: StateVector,
}

/// Outcome of [`measure_coherent`].
#[derive(Debug, Clone)]
pub struct CoherentMeasurement {
    /// Whether the control qubit ends in a product with the data (within `1e-10`).
    pub control_factorizes: bool,
    pub branches: Vec<MeasureBranch>,
}

/// Textbook measurement of `M` on `targets` with one control qubit:
/// `H`, controlled-`M`, `H`, then a Z measurement of the control.
/// Outcome 0 is the `+1` eigenvalue.
pub fn measure_nonft(
    state: &StateVector,
    op: &MeasurableOperator,
    targets: &[usize],
    mode: Mode,
) -> Result<Vec<MeasureBranch>> {
    let (ext, ctl) = controlled_measurement(state, op, targets, false)?;
    select(split_control(&ext, ctl)?, mode)
}

/// As [`measure_nonft`] but also applies `P` controlled by the control qubit
/// before it is read, which returns the data to the `+1` eigenspace.
pub fn measure_coherent(
    state: &StateVector,
    op: &MeasurableOperator,
    targets: &[usize],
    mode: Mode,
) -> Result<CoherentMeasurement> {
    let (ext, ctl) = controlled_measurement(state, op, targets, true)?;
    let data: Vec<usize> = (0..state.n()).collect();
    let control_factorizes = ext.extract(&data, 1e-10).is_ok();
    Ok(CoherentMeasurement { control_factorizes, branches: select(split_control(&ext, ctl)?, mode)? })
}

fn controlled_measurement(
    state: &StateVector,
    op: &MeasurableOperator,
    targets: &[usize],
    correct: bool,
) -> Result<(StateVector, usize)> {
    if targets.len() != op.n() {
        return Err(Error::DimensionMismatch { dim: op.matrix().nrows(), targets: targets.len() });
    }
    let ctl = state.n();
    let mut ext = state.tensor(&StateVector::zero(1));
    let h = hadamard();
    ext.apply_matrix(&h, &[ctl])?;
    ext.apply_controlled(op.matrix(), &[ctl], targets)?;
    ext.apply_matrix(&h, &[ctl])?;
    if correct {
        ext.apply_controlled(op.correction(), &[ctl], targets)?;
    }
    Ok((ext, ctl))
}

fn split_control(ext: &StateVector, ctl: usize) -> Result<Vec<MeasureBranch>> {
    ext.measure_branches(ctl)?
        .into_iter()
        .map(|(bit, p, s)| Ok(MeasureBranch { outcome: bit, probability: p, state: s.discard(ctl, bit)? }))
        .collect()
}

fn select(branches: Vec<MeasureBranch>, mode: Mode) -> Result<Vec<MeasureBranch>> {
    Ok(pick(branches, mode, |b| b.probability))
}

/// All items in enumeration mode, or one drawn by probability in sample mode.
fn pick<T>(items: Vec<T>, mode: Mode, prob: impl Fn(&T) -> f64) -> Vec<T> {
    let Mode::Sample(seed) = mode else { return items };
    let mut r = ChaCha8Rng::seed_from_u64(seed).random::<f64>();
    let last = items.len().saturating_sub(1);
    let idx = items
        .iter()
        .enumerate()
        .find(|(i, it)| {
            let p = prob(it);
            let hit = r < p || *i == last;
            r -= p;
            hit
        })
        .map_or(0, |(i, _)| i);
    items.into_iter().skip(idx).take(1).collect()
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n ≥ 1` qubits, built with `H` and a CNOT ladder.
pub fn prepare_cat(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::Invalid("a cat state needs at least one qubit".into()));
    }
    let mut s = StateVector::zero(n);
    s.apply_matrix(&hadamard(), &[0])?;
    let x = Pauli::X.matrix();
    for k in 0..n - 1 {
        s.apply_controlled(&x, &[k], &[k + 1])?;
    }
    Ok(s)
}

/// One branch of [`verify_cat`].
#[derive(Debug, Clone)]
pub struct CatCheck {
    /// Parity of each neighbouring pair `(k, k+1)`.
    pub comparisons: Vec<u8>,
    pub passed: bool,
    pub probability: f64,
    pub state: StateVector,
}

/// Compares neighbouring pairs of `cat` through a reusable ancilla. A clean cat
/// passes with certainty; any bit-flip pattern other than all-or-nothing is caught.
pub fn verify_cat(state: &StateVector, cat: &[usize], mode: Mode) -> Result<Vec<CatCheck>> {
    if cat.is_empty() {
        return Err(Error::Invalid("a cat state needs at least one qubit".into()));
    }
    let anc = state.n();
    let x = Pauli::X.matrix();
    let mut live = vec![(Vec::new(), 1.0, state.tensor(&StateVector::zero(1)))];
    for k in 0..cat.len().saturating_sub(1) {
        let mut next = Vec::new();
        for (cmp, p, mut s) in live {
            s.apply_controlled(&x, &[cat[k]], &[anc])?;
            s.apply_controlled(&x, &[cat[k + 1]], &[anc])?;
            for (bit, q, mut t) in s.measure_branches(anc)? {
                if bit == 1 {
                    t.flip(anc);
                }
                let mut cmp: Vec<u8> = cmp.clone();
                cmp.push(bit);
                if p * q > PRUNE_PROB {
                    next.push((cmp, p * q, t));
                }
            }
        }
        live = next;
    }
    let checks = live
        .into_iter()
        .map(|(comparisons, probability, s)| {
            Ok(CatCheck {
                passed: comparisons.iter().all(|&c| c == 0),
                comparisons,
                probability,
                state: s.discard(anc, 0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(checks, mode, |c| c.probability))
}

#[cfg(test)]
mod tests;
