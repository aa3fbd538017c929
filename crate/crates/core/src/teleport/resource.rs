//! Resource states: EPR and GHZ states, `|χ⟩`, and the gate ancillas `|Ψⁿ_U⟩`.

use serde::Serialize;

use crate::clifford::GateUnitary;
use crate::error::{Error, Result};
use crate::ftmeasure::{measure_nonft, MeasurableOperator};
use crate::linalg::{self, c, Matrix};
use crate::pauli::{Pauli, PauliString};
use crate::statevector::{run_enumerate, Circuit, Condition, Mode, StateVector, DEFAULT_BRANCH_CAP};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResourceKind {
    Epr,
    Ghz,
    Chi,
    PsiU { gate: String, n: usize },
}

#[derive(Debug, Clone)]
pub struct ResourceState {
    pub kind: ResourceKind,
    pub state: StateVector,
    /// Role of each qubit, indexed by qubit.
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeEntry {
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

/// Amplitudes rounded to `decimals` digits, zeros dropped.
pub fn amplitude_entries(state: &StateVector, decimals: i32) -> Vec<AmplitudeEntry> {
    let scale = 10f64.powi(decimals);
    // adding 0.0 turns -0.0 into 0.0
    let round = |v: f64| (v * scale).round() / scale + 0.0;
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(index, a)| AmplitudeEntry { index, re: round(a.re), im: round(a.im) })
        .filter(|e| e.re != 0.0 || e.im != 0.0)
        .collect()
}

impl ResourceState {
    pub fn amplitude_entries(&self, decimals: i32) -> Vec<AmplitudeEntry> {
        amplitude_entries(&self.state, decimals)
    }
}

fn half_roles(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("upper{i}")).chain((0..n).map(|i| format!("lower{i}"))).collect()
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn epr() -> ResourceState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 4];
    amps[0] = c(h, 0.0);
    amps[3] = c(h, 0.0);
    ResourceState {
        kind: ResourceKind::Epr,
        state: StateVector::from_unnormalized(amps).expect("nonzero"),
        roles: vec!["upper".into(), "lower".into()],
    }
}

/// `(|000⟩ + |111⟩)/√2`.
pub fn ghz() -> ResourceState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0] = c(h, 0.0);
    amps[7] = c(h, 0.0);
    ResourceState {
        kind: ResourceKind::Ghz,
        state: StateVector::from_unnormalized(amps).expect("nonzero"),
        roles: (0..3).map(|i| format!("ghz{i}")).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiSource {
    Direct,
    FromEpr,
    FromGhz,
}

/// Kets (qubit 0 first) carrying amplitude `1/2` in `|χ⟩`.
pub const CHI_KETS: [&str; 4] = ["0000", "1100", "0111", "1011"];

/// The four-qubit CNOT resource `((|00⟩+|11⟩)|00⟩ + (|01⟩+|10⟩)|11⟩)/2`, with qubits
/// 0 and 1 the upper pair and qubits 2 and 3 the lower pair.
pub fn make_chi(source: ChiSource) -> Result<ResourceState> {
    let state = match source {
        ChiSource::Direct => {
            let mut amps = vec![c(0.0, 0.0); 16];
            for ket in CHI_KETS {
                let idx = ket.chars().enumerate().fold(0, |acc, (q, ch)| acc | (usize::from(ch == '1') << q));
                amps[idx] = c(0.5, 0.0);
            }
            StateVector::from_amplitudes(amps)?
        }
        ChiSource::FromEpr => {
            let mut s = StateVector::zero(4);
            let (h, x) = (GateUnitary::named("H")?, Pauli::X.matrix());
            for (a, b) in [(0, 1), (2, 3)] {
                s.apply_gate(&h, &[a])?;
                s.apply_controlled(&x, &[a], &[b])?;
            }
            s.apply_controlled(&x, &[3], &[1])?;
            s
        }
        ChiSource::FromGhz => {
            let branches = run_enumerate(&chi_from_ghz_circuit()?, &StateVector::zero(6), DEFAULT_BRANCH_CAP)?;
            let first = branches.branches.first().expect("a Bell measurement has outcomes");
            first.state.extract(&[0, 1, 2, 3], 1e-9)?
        }
    };
    Ok(ResourceState { kind: ResourceKind::Chi, state, roles: half_roles(2) })
}

/// Two GHZ states on `(0, 1, 4)` and `(2, 3, 5)`, a Hadamard on 5, a Bell measurement of
/// `(4, 5)` into bits `0` (x) and `1` (z), Hadamards on 0 and 1, and a Pauli fix-up:
/// `z` flips the sign of `Z₀Z₁Z₃` (undone by `X₀`), `x` flips `X₁X₂X₃` (undone by `Z₂`).
/// Qubits 0..4 then hold `|χ⟩` in every branch.
pub fn chi_from_ghz_circuit() -> Result<Circuit> {
    let mut circ = Circuit::new(6, 2);
    for [a, b, t] in [[0, 1, 4], [2, 3, 5]] {
        circ.gate("H", &[a])?.gate("CNOT", &[a, b])?.gate("CNOT", &[b, t])?;
    }
    circ.gate("H", &[5])?.bell(4, 5, 0, 1)?.gate("H", &[0])?.gate("H", &[1])?;
    circ.cond_gate(Condition::bit(1), "X", &[0])?.cond_gate(Condition::bit(0), "Z", &[2])?;
    Ok(circ)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilizerKind {
    M,
    N,
}

/// `M_i = X_i ⊗ U X_i U†` or `N_i = Z_i ⊗ U Z_i U†` on the `2n` qubits of `|Ψⁿ_U⟩`.
#[derive(Debug, Clone)]
pub struct StabilizerCondition {
    pub kind: StabilizerKind,
    pub index: usize,
    pub operator: GateUnitary,
    /// The operator as a Pauli string when it is one.
    pub pauli: Option<PauliString>,
    /// `Z_i` (for `M_i`) or `X_i` (for `N_i`) on the upper qubit; anticommutes with the
    /// operator and commutes with every other condition.
    pub fixup: PauliString,
}

impl StabilizerCondition {
    pub fn label(&self) -> String {
        format!("{:?}{}", self.kind, self.index)
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        let targets: Vec<usize> = (0..self.operator.n()).collect();
        Ok(state.expectation(self.operator.matrix(), &targets)?.re)
    }
}

fn check_ancilla_size(u: &GateUnitary) -> Result<()> {
    let limit = linalg::dense_limit();
    if 2 * u.n() + 1 > limit {
        return Err(Error::DenseLimit { n: 2 * u.n() + 1, limit });
    }
    Ok(())
}

pub fn stabilizer_conditions(u: &GateUnitary) -> Result<Vec<StabilizerCondition>> {
    check_ancilla_size(u)?;
    let n = u.n();
    let mut out = Vec::with_capacity(2 * n);
    for (kind, letter, fix) in [(StabilizerKind::M, Pauli::X, Pauli::Z), (StabilizerKind::N, Pauli::Z, Pauli::X)] {
        for i in 0..n {
            let upper = PauliString::single(n, i, letter).to_matrix()?;
            let lower = u.conjugate_matrix(&upper);
            let operator = GateUnitary::new(linalg::tensor_lsb(&upper, &lower), None)?;
            let pauli = PauliString::from_matrix(operator.matrix());
            let fixup = PauliString::single(2 * n, i, fix);
            let op = StabilizerCondition { kind, index: i, operator, pauli, fixup };
            let name = op.label();
            out.push(StabilizerCondition { operator: op.operator.with_name(name), ..op });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepMethod {
    Direct,
    Measurement,
}

/// One way the preparation can go. `outcomes` lists the readings of
/// `M_0..M_{n-1}, N_0..N_{n-1}` (empty for the direct method).
#[derive(Debug, Clone)]
pub struct AncillaBranch {
    pub outcomes: Vec<u8>,
    pub probability: f64,
    pub resource: ResourceState,
}

/// `|Ψⁿ_U⟩ = (I ⊗ U)|Ψⁿ⟩`, upper halves on qubits `0..n`, lower halves on `n..2n`.
///
/// The measurement method starts from `n` EPR pairs, measures every `M_i` and `N_i`
/// with a single control qubit, and applies the upper-qubit fix-up after each `-1`.
/// Every branch ends in the same state.
pub fn prepare_psi_u(u: &GateUnitary, method: PrepMethod, mode: Mode) -> Result<Vec<AncillaBranch>> {
    check_ancilla_size(u)?;
    let n = u.n();
    let kind = ResourceKind::PsiU { gate: u.to_string(), n };
    let wrap = |outcomes, probability, state| AncillaBranch {
        outcomes,
        probability,
        resource: ResourceState { kind: kind.clone(), state, roles: half_roles(n) },
    };
    let pairs = epr_pairs(n)?;
    match method {
        PrepMethod::Direct => {
            let mut s = pairs;
            s.apply_gate(u, &(n..2 * n).collect::<Vec<_>>())?;
            Ok(vec![wrap(Vec::new(), 1.0, s)])
        }
        PrepMethod::Measurement => {
            let targets: Vec<usize> = (0..2 * n).collect();
            let mut live = vec![(Vec::new(), 1.0, pairs)];
            for (k, cond) in stabilizer_conditions(u)?.into_iter().enumerate() {
                let fix = cond.fixup.to_matrix()?;
                let op = MeasurableOperator::new(cond.label(), cond.operator.matrix().clone(), fix)?;
                let mut next = Vec::new();
                let sub = match mode {
                    Mode::Enumerate => Mode::Enumerate,
                    Mode::Sample(seed) => Mode::Sample(seed.wrapping_add(k as u64)),
                };
                for (bits, p, s) in live {
                    for b in measure_nonft(&s, &op, &targets, sub)? {
                        let mut state = b.state;
                        if b.outcome == 1 {
                            state.apply_pauli(&cond.fixup)?;
                        }
                        let mut bits: Vec<u8> = bits.clone();
                        bits.push(b.outcome);
                        next.push((bits, p * b.probability, state));
                    }
                }
                live = next;
            }
            Ok(live.into_iter().map(|(bits, p, s)| wrap(bits, p, s)).collect())
        }
    }
}

/// `n` EPR pairs on `(i, n + i)`.
fn epr_pairs(n: usize) -> Result<StateVector> {
    let mut s = StateVector::zero(2 * n);
    let (h, x) = (GateUnitary::named("H")?, Pauli::X.matrix());
    for i in 0..n {
        s.apply_gate(&h, &[i])?;
        s.apply_controlled(&x, &[i], &[n + i])?;
    }
    Ok(s)
}

/// Dense `⊗_i X^{x_i} Z^{z_i}` for outcome bits laid out as `x_i = bit 2i`, `z_i = bit 2i+1`.
pub(crate) fn byproduct(n: usize, outcome: usize) -> PauliString {
    let (mut x, mut z, mut phase) = (0u64, 0u64, 0u8);
    for i in 0..n {
        let (xi, zi) = ((outcome >> (2 * i)) & 1, (outcome >> (2 * i + 1)) & 1);
        x |= (xi as u64) << i;
        z |= (zi as u64) << i;
        // XZ = -iY
        if xi == 1 && zi == 1 {
            phase += 3;
        }
    }
    PauliString::from_masks(n, phase, x, z)
}

pub(crate) fn identity_like(m: &Matrix) -> bool {
    linalg::max_abs_diff(m, &linalg::identity(m.nrows())) < 1e-12
}
