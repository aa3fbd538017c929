//! Teleportation circuits and gate teleportation.
//!
//! Bell outcomes follow [`StateVector::bell_project`]: measuring `(q1, q2)` yields bits
//! `(x, z)` for the vector `(|0x⟩ + (-1)^z |1x̄⟩)/√2`. Teleporting `|ψ⟩` through an EPR
//! pair then leaves `X^x Z^z |ψ⟩` on the far qubit, which is undone by `X^x` followed
//! by `Z^z`. With several teleported qubits, qubit `i` writes `x_i` to bit `2i` and `z_i`
//! to bit `2i+1`.

mod resource;
#[cfg(test)]
mod tests;

pub use resource::{
    amplitude_entries, chi_from_ghz_circuit, epr, ghz, make_chi, prepare_psi_u, stabilizer_conditions,
    AmplitudeEntry, AncillaBranch, ChiSource, PrepMethod, ResourceKind, ResourceState, StabilizerCondition,
    StabilizerKind, CHI_KETS,
};

use serde::Serialize;

use crate::clifford::{CliffordMap, GateUnitary, HierarchyClassifier, HierarchyLevel};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pauli::PauliString;
use crate::statevector::{run_circuit, Branch, BranchSet, Circuit, Condition, Mode, Op, RunOutcome, StateVector};
use resource::{byproduct, identity_like};

/// Largest gate width accepted by [`correction_table`] and [`teleport_gate`].
pub const MAX_GATE_QUBITS: usize = 3;

/// Classification depth used for correction-table entries.
pub const TABLE_K_MAX: u32 = 6;

/// Byproduct `X^x Z^z` left by a Bell outcome, as a one-qubit Pauli.
pub fn teleport_byproduct(x: u8, z: u8) -> PauliString {
    byproduct(1, usize::from(x & 1) | (usize::from(z & 1) << 1))
}

/// One-qubit teleportation: qubit 0 is the input, `(1, 2)` the EPR pair. Bits 0 and 1
/// receive `x` and `z`; qubit 2 ends in the input state.
pub fn teleport_circuit() -> Result<Circuit> {
    let mut circ = Circuit::new(3, 2);
    circ.gate("H", &[1])?.gate("CNOT", &[1, 2])?.bell(0, 1, 0, 1)?;
    circ.cond_gate(Condition::bit(0), "X", &[2])?.cond_gate(Condition::bit(1), "Z", &[2])?;
    Ok(circ)
}

/// Runs `circuit` from `initial` and keeps only `outputs` of each branch.
fn run_outputs(circuit: &Circuit, initial: &StateVector, mode: Mode, outputs: &[usize]) -> Result<BranchSet> {
    let branches = match run_circuit(circuit, initial, mode)? {
        RunOutcome::Branches(b) => b.branches,
        RunOutcome::Trajectory(b) => vec![b],
    };
    let branches = branches
        .into_iter()
        .map(|b| Ok(Branch { state: b.state.extract(outputs, 1e-9)?, ..b }))
        .collect::<Result<_>>()?;
    Ok(BranchSet { branches })
}

fn check_qubits(state: &StateVector, n: usize) -> Result<()> {
    if state.n() != n {
        return Err(Error::SizeMismatch { left: n, right: state.n() });
    }
    Ok(())
}

pub fn teleport(input: &StateVector, mode: Mode) -> Result<BranchSet> {
    check_qubits(input, 1)?;
    run_outputs(&teleport_circuit()?, &input.tensor(&StateVector::zero(2)), mode, &[2])
}

/// Corrections for Paulis pushed through a Clifford `map`.
///
/// `inputs[i]` holds the `(x, z)` bits of the Bell measurement that teleported gate
/// qubit `i`, and `outputs[j]` is the physical qubit carrying gate qubit `j`. The
/// byproduct `X_i` becomes `map(X_i)` after the gate, so output `j` needs an `X` when an
/// odd number of the set bits have an image with an `X` part on `j`, and likewise for `Z`.
pub fn pushed_corrections(map: &CliffordMap, inputs: &[(usize, usize)], outputs: &[usize]) -> Result<Vec<Op>> {
    if inputs.len() != map.n() || outputs.len() != map.n() {
        return Err(Error::SizeMismatch { left: map.n(), right: inputs.len().min(outputs.len()) });
    }
    let gens: Vec<(usize, &PauliString)> =
        inputs.iter().enumerate().flat_map(|(i, &(cx, cz))| [(cx, map.image_x(i)), (cz, map.image_z(i))]).collect();
    let mut ops = Vec::new();
    for (j, &q) in outputs.iter().enumerate() {
        let xs: Vec<usize> = gens.iter().filter(|(_, g)| g.x_bit(j)).map(|&(b, _)| b).collect();
        let zs: Vec<usize> = gens.iter().filter(|(_, g)| g.z_bit(j)).map(|&(b, _)| b).collect();
        for (bits, name) in [(xs, "X"), (zs, "Z")] {
            if !bits.is_empty() {
                ops.push(Op::CondGate { cond: Condition::parity(&bits), gate: GateUnitary::named(name)?, targets: vec![q] });
            }
        }
    }
    Ok(ops)
}

/// CNOT by teleportation. Qubit 0 holds `|α⟩` (target), qubit 1 holds `|β⟩` (control),
/// and qubits 2..6 hold `|χ⟩` built from two EPR pairs. `|α⟩` is Bell-measured with χ
/// qubit 0 into bits 0 and 1, `|β⟩` with χ qubit 2 into bits 2 and 3. The outputs sit on
/// qubit 5 (control) and qubit 3 (target).
pub fn cnot_teleport_circuit() -> Result<Circuit> {
    let mut circ = Circuit::new(6, 4);
    circ.gate("H", &[2])?.gate("CNOT", &[2, 3])?.gate("H", &[4])?.gate("CNOT", &[4, 5])?.gate("CNOT", &[5, 3])?;
    circ.bell(0, 2, 0, 1)?.bell(1, 4, 2, 3)?;
    for op in pushed_corrections(&CliffordMap::named("CNOT")?, &[(2, 3), (0, 1)], &[5, 3])? {
        circ.push(op)?;
    }
    Ok(circ)
}

/// Teleports `|α⟩` and `|β⟩` through a CNOT. Each output is the 2-qubit state
/// `CNOT(|β⟩ ⊗ |α⟩)` with `|β⟩` on qubit 0 as the control.
pub fn teleport_cnot(alpha: &StateVector, beta: &StateVector, mode: Mode) -> Result<BranchSet> {
    check_qubits(alpha, 1)?;
    check_qubits(beta, 1)?;
    let initial = alpha.tensor(beta).tensor(&StateVector::zero(4));
    run_outputs(&cnot_teleport_circuit()?, &initial, mode, &[5, 3])
}

#[derive(Debug, Clone)]
pub enum CorrectionKind {
    Pauli(PauliString),
    Clifford(CliffordMap),
    General,
}

/// `R'_xz = U R_xz U†` for one Bell outcome.
#[derive(Debug, Clone)]
pub struct CorrectionEntry {
    /// Outcome bits, `x_i` at bit `2i` and `z_i` at bit `2i+1`.
    pub outcome: usize,
    pub byproduct: PauliString,
    pub correction: GateUnitary,
    pub kind: CorrectionKind,
    pub level: HierarchyLevel,
}

#[derive(Debug, Clone)]
pub struct CorrectionTable {
    pub gate: GateUnitary,
    pub n: usize,
    pub level: HierarchyLevel,
    pub entries: Vec<CorrectionEntry>,
}

impl CorrectionTable {
    pub fn entry(&self, x: &[u8], z: &[u8]) -> Option<&CorrectionEntry> {
        if x.len() != self.n || z.len() != self.n {
            return None;
        }
        let outcome = (0..self.n).fold(0, |acc, i| acc | (usize::from(x[i] & 1) << (2 * i)) | (usize::from(z[i] & 1) << (2 * i + 1)));
        self.entries.get(outcome)
    }
}

fn check_gate_width(u: &GateUnitary) -> Result<()> {
    if u.n() > MAX_GATE_QUBITS {
        return Err(Error::Invalid(format!("gate teleportation is limited to {MAX_GATE_QUBITS} qubits, got {}", u.n())));
    }
    Ok(())
}

/// `U R_xz U†` for every outcome, in outcome order.
fn conjugated_byproducts(u: &GateUnitary) -> Result<Vec<(PauliString, Matrix)>> {
    let n = u.n();
    (0..1usize << (2 * n))
        .map(|o| {
            let r = byproduct(n, o);
            let m = u.conjugate_matrix(&r.to_matrix()?);
            Ok((r, m))
        })
        .collect()
}

/// Classified corrections for teleporting `U`.
pub fn correction_table(u: &GateUnitary) -> Result<CorrectionTable> {
    check_gate_width(u)?;
    let mut classifier = HierarchyClassifier::new();
    let level = classifier.classify(u, TABLE_K_MAX)?.level;
    let entries = conjugated_byproducts(u)?
        .into_iter()
        .enumerate()
        .map(|(outcome, (byproduct, m))| {
            let correction = GateUnitary::new(m, None)?;
            let kind = match PauliString::from_matrix(correction.matrix()) {
                Some(p) => CorrectionKind::Pauli(p),
                None => match CliffordMap::from_unitary(&correction)? {
                    Some(c) => CorrectionKind::Clifford(c),
                    None => CorrectionKind::General,
                },
            };
            let level = classifier.classify(&correction, TABLE_K_MAX)?.level;
            Ok(CorrectionEntry { outcome, byproduct, correction, kind, level })
        })
        .collect::<Result<_>>()?;
    Ok(CorrectionTable { gate: u.clone(), n: u.n(), level, entries })
}

/// Condition that holds exactly when bits `0..width` spell `outcome`.
fn outcome_condition(outcome: usize, width: usize) -> Condition {
    (0..width)
        .map(|b| if (outcome >> b) & 1 == 1 { Condition::bit(b) } else { Condition::not(Condition::bit(b)) })
        .reduce(Condition::and)
        .expect("width is positive")
}

/// Teleportation of `U` on `n` qubits: input on `0..n`, `|Ψⁿ_U⟩` prepared on
/// `n..2n` (upper) and `2n..3n` (lower). Input `i` is Bell-measured with upper qubit
/// `n + i`, then `(U R_xz U†)†` is applied densely to the lower qubits.
pub fn gate_teleport_circuit(u: &GateUnitary) -> Result<Circuit> {
    check_gate_width(u)?;
    let n = u.n();
    let mut circ = Circuit::new(3 * n, 2 * n);
    for i in 0..n {
        circ.gate("H", &[n + i])?.gate("CNOT", &[n + i, 2 * n + i])?;
    }
    let lower: Vec<usize> = (2 * n..3 * n).collect();
    circ.unitary(u.clone(), &lower)?;
    for i in 0..n {
        circ.bell(i, n + i, 2 * i, 2 * i + 1)?;
    }
    for (outcome, (_, m)) in conjugated_byproducts(u)?.into_iter().enumerate() {
        if identity_like(&m) {
            continue;
        }
        let gate = GateUnitary::new(m.adjoint(), Some(format!("R'{outcome}^dag")))?;
        circ.push(Op::CondGate { cond: outcome_condition(outcome, 2 * n), gate, targets: lower.clone() })?;
    }
    Ok(circ)
}

/// Applies `U` to `input` by teleporting it through `|Ψⁿ_U⟩`.
pub fn teleport_gate(u: &GateUnitary, input: &StateVector, mode: Mode) -> Result<BranchSet> {
    check_qubits(input, u.n())?;
    let n = u.n();
    let limit = linalg::dense_limit();
    if 3 * n > limit {
        return Err(Error::DenseLimit { n: 3 * n, limit });
    }
    let initial = input.tensor(&StateVector::zero(2 * n));
    run_outputs(&gate_teleport_circuit(u)?, &initial, mode, &(2 * n..3 * n).collect::<Vec<_>>())
}

/// Per-branch comparison of a teleported state with the directly applied gate.
#[derive(Debug, Clone, Serialize)]
pub struct BranchFidelity {
    pub cbits: String,
    pub probability: f64,
    pub fidelity: f64,
}

pub fn branch_fidelities(branches: &BranchSet, expected: &StateVector) -> Result<Vec<BranchFidelity>> {
    branches
        .iter()
        .map(|b| {
            Ok(BranchFidelity {
                cbits: b.cbits.iter().map(|&c| if c { '1' } else { '0' }).collect(),
                probability: b.probability,
                fidelity: b.state.fidelity(expected)?,
            })
        })
        .collect()
}
