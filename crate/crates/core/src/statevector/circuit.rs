//! Circuits with classical registers, and their execution by exhaustive branch
//! enumeration or by seeded sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{StateVector, PRUNE_PROB};
use crate::clifford::GateUnitary;
use crate::error::{Error, Result};

/// Default cap on the number of live branches in enumeration mode.
pub const DEFAULT_BRANCH_CAP: usize = 1 << 16;

/// Boolean expression over classical bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Const(bool),
    Bit(usize),
    Not(Box<Condition>),
    Eq(Box<Condition>, Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn bit(b: usize) -> Self {
        Condition::Bit(b)
    }

    pub fn not(c: Condition) -> Self {
        Condition::Not(Box::new(c))
    }

    pub fn eq(a: Condition, b: Condition) -> Self {
        Condition::Eq(Box::new(a), Box::new(b))
    }

    pub fn and(a: Condition, b: Condition) -> Self {
        Condition::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Condition, b: Condition) -> Self {
        Condition::Or(Box::new(a), Box::new(b))
    }

    /// Parity of the given bits, written with `==` and `!` only.
    pub fn parity(bits: &[usize]) -> Self {
        let mut it = bits.iter();
        let Some(&first) = it.next() else {
            return Condition::Const(false);
        };
        it.fold(Condition::Bit(first), |acc, &b| Condition::not(Condition::eq(acc, Condition::Bit(b))))
    }

    pub fn eval(&self, bits: &[bool]) -> bool {
        match self {
            Condition::Const(v) => *v,
            Condition::Bit(b) => bits[*b],
            Condition::Not(c) => !c.eval(bits),
            Condition::Eq(a, b) => a.eval(bits) == b.eval(bits),
            Condition::And(a, b) => a.eval(bits) && b.eval(bits),
            Condition::Or(a, b) => a.eval(bits) || b.eval(bits),
        }
    }

    pub fn max_bit(&self) -> Option<usize> {
        match self {
            Condition::Const(_) => None,
            Condition::Bit(b) => Some(*b),
            Condition::Not(c) => c.max_bit(),
            Condition::Eq(a, b) | Condition::And(a, b) | Condition::Or(a, b) => a.max_bit().max(b.max_bit()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Gate { gate: GateUnitary, targets: Vec<usize> },
    Measure { qubit: usize, cbit: usize },
    /// Bell measurement; `x` lands in `cx` and `z` in `cz`.
    Bell { q1: usize, q2: usize, cx: usize, cz: usize },
    CondGate { cond: Condition, gate: GateUnitary, targets: Vec<usize> },
    Reset { qubit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_cbits: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_cbits: usize) -> Self {
        Circuit { n_qubits, n_cbits, ops: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_cbits(&self) -> usize {
        self.n_cbits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Appends `op` after range-checking every index.
    pub fn push(&mut self, op: Op) -> Result<&mut Self> {
        self.validate(&op)?;
        self.ops.push(op);
        Ok(self)
    }

    pub fn gate(&mut self, name: &str, targets: &[usize]) -> Result<&mut Self> {
        let gate = GateUnitary::named(name)?;
        self.push(Op::Gate { gate, targets: targets.to_vec() })
    }

    pub fn unitary(&mut self, gate: GateUnitary, targets: &[usize]) -> Result<&mut Self> {
        self.push(Op::Gate { gate, targets: targets.to_vec() })
    }

    pub fn measure(&mut self, qubit: usize, cbit: usize) -> Result<&mut Self> {
        self.push(Op::Measure { qubit, cbit })
    }

    pub fn bell(&mut self, q1: usize, q2: usize, cx: usize, cz: usize) -> Result<&mut Self> {
        self.push(Op::Bell { q1, q2, cx, cz })
    }

    pub fn cond_gate(&mut self, cond: Condition, name: &str, targets: &[usize]) -> Result<&mut Self> {
        let gate = GateUnitary::named(name)?;
        self.push(Op::CondGate { cond, gate, targets: targets.to_vec() })
    }

    pub fn reset(&mut self, qubit: usize) -> Result<&mut Self> {
        self.push(Op::Reset { qubit })
    }

    fn qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n: self.n_qubits });
        }
        Ok(())
    }

    fn cbit(&self, c: usize) -> Result<()> {
        if c >= self.n_cbits {
            return Err(Error::BitOutOfRange { index: c, n: self.n_cbits });
        }
        Ok(())
    }

    fn targets(&self, gate: &GateUnitary, targets: &[usize]) -> Result<()> {
        if targets.len() != gate.n() {
            return Err(Error::DimensionMismatch { dim: gate.dim(), targets: targets.len() });
        }
        for (i, &q) in targets.iter().enumerate() {
            self.qubit(q)?;
            if targets[..i].contains(&q) {
                return Err(Error::DuplicateTarget(q));
            }
        }
        Ok(())
    }

    fn validate(&self, op: &Op) -> Result<()> {
        match op {
            Op::Gate { gate, targets } => self.targets(gate, targets),
            Op::Measure { qubit, cbit } => {
                self.qubit(*qubit)?;
                self.cbit(*cbit)
            }
            Op::Bell { q1, q2, cx, cz } => {
                self.qubit(*q1)?;
                self.qubit(*q2)?;
                if q1 == q2 {
                    return Err(Error::DuplicateTarget(*q1));
                }
                self.cbit(*cx)?;
                self.cbit(*cz)
            }
            Op::CondGate { cond, gate, targets } => {
                if let Some(b) = cond.max_bit() {
                    self.cbit(b)?;
                }
                self.targets(gate, targets)
            }
            Op::Reset { qubit } => self.qubit(*qubit),
        }
    }

    /// Warnings for unitary gates that touch a qubit after it was measured and before
    /// it was reset.
    pub fn lint(&self) -> Vec<String> {
        let mut measured = vec![false; self.n_qubits];
        let mut warnings = Vec::new();
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                Op::Gate { targets, .. } | Op::CondGate { targets, .. } => {
                    for &q in targets {
                        if measured[q] {
                            warnings.push(format!("op {i}: gate acts on qubit {q} after it was measured"));
                        }
                    }
                }
                Op::Measure { qubit, .. } => measured[*qubit] = true,
                Op::Bell { q1, q2, .. } => {
                    measured[*q1] = true;
                    measured[*q2] = true;
                }
                Op::Reset { qubit } => measured[*qubit] = false,
            }
        }
        warnings
    }
}

/// One leaf of the measurement tree.
#[derive(Debug, Clone)]
pub struct Branch {
    pub cbits: Vec<bool>,
    pub probability: f64,
    pub state: StateVector,
}

#[derive(Debug, Clone, Default)]
pub struct BranchSet {
    pub branches: Vec<Branch>,
}

impl BranchSet {
    pub fn single(state: StateVector, n_cbits: usize) -> Self {
        BranchSet { branches: vec![Branch { cbits: vec![false; n_cbits], probability: 1.0, state }] }
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Enumerate,
    Sample(u64),
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Branches(BranchSet),
    Trajectory(Branch),
}

pub fn run_circuit(circuit: &Circuit, initial: &StateVector, mode: Mode) -> Result<RunOutcome> {
    match mode {
        Mode::Enumerate => run_enumerate(circuit, initial, DEFAULT_BRANCH_CAP).map(RunOutcome::Branches),
        Mode::Sample(seed) => run_sample(circuit, initial, seed).map(RunOutcome::Trajectory),
    }
}

fn check_initial(circuit: &Circuit, initial: &StateVector) -> Result<()> {
    if initial.n() != circuit.n_qubits {
        return Err(Error::SizeMismatch { left: circuit.n_qubits, right: initial.n() });
    }
    Ok(())
}

/// Expands every measurement outcome. Fails once more than `cap` branches are live.
pub fn run_enumerate(circuit: &Circuit, initial: &StateVector, cap: usize) -> Result<BranchSet> {
    check_initial(circuit, initial)?;
    let mut branches = BranchSet::single(initial.clone(), circuit.n_cbits).branches;
    for op in &circuit.ops {
        let mut next = Vec::with_capacity(branches.len());
        for mut br in branches {
            match op {
                Op::Gate { gate, targets } => {
                    br.state.apply_gate(gate, targets)?;
                    next.push(br);
                }
                Op::CondGate { cond, gate, targets } => {
                    if cond.eval(&br.cbits) {
                        br.state.apply_gate(gate, targets)?;
                    }
                    next.push(br);
                }
                Op::Measure { qubit, cbit } => {
                    for (bit, p, state) in br.state.measure_branches(*qubit)? {
                        let mut cbits = br.cbits.clone();
                        cbits[*cbit] = bit == 1;
                        next.push(Branch { cbits, probability: br.probability * p, state });
                    }
                }
                Op::Bell { q1, q2, cx, cz } => {
                    for o in br.state.bell_branches(*q1, *q2)? {
                        let Some(state) = o.state else { continue };
                        let mut cbits = br.cbits.clone();
                        cbits[*cx] = o.x == 1;
                        cbits[*cz] = o.z == 1;
                        next.push(Branch { cbits, probability: br.probability * o.probability, state });
                    }
                }
                Op::Reset { qubit } => {
                    for (p, state) in br.state.reset_branches(*qubit)? {
                        next.push(Branch { cbits: br.cbits.clone(), probability: br.probability * p, state });
                    }
                }
            }
            if next.len() > cap {
                return Err(Error::BranchCap { count: next.len(), cap });
            }
        }
        next.retain(|b| b.probability > PRUNE_PROB);
        branches = next;
    }
    Ok(BranchSet { branches })
}

/// Runs one trajectory with a ChaCha8 stream seeded by `seed`. The returned
/// probability is that of the sampled path.
pub fn run_sample(circuit: &Circuit, initial: &StateVector, seed: u64) -> Result<Branch> {
    check_initial(circuit, initial)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut br = Branch { cbits: vec![false; circuit.n_cbits], probability: 1.0, state: initial.clone() };
    for op in &circuit.ops {
        match op {
            Op::Gate { gate, targets } => br.state.apply_gate(gate, targets)?,
            Op::CondGate { cond, gate, targets } => {
                if cond.eval(&br.cbits) {
                    br.state.apply_gate(gate, targets)?;
                }
            }
            Op::Measure { qubit, cbit } => {
                let p1 = br.state.probability(*qubit, 1)?;
                let bit = br.state.measure_sample(*qubit, &mut rng)?;
                br.probability *= if bit == 1 { p1 } else { 1.0 - p1 };
                br.cbits[*cbit] = bit == 1;
            }
            Op::Bell { q1, q2, cx, cz } => {
                let before = br.state.clone();
                let (x, z) = br.state.bell_sample(*q1, *q2, &mut rng)?;
                let mut probe = before;
                br.probability *= probe.bell_project(*q1, *q2, x, z)?;
                br.cbits[*cx] = x == 1;
                br.cbits[*cz] = z == 1;
            }
            Op::Reset { qubit } => {
                let p1 = br.state.probability(*qubit, 1)?;
                let was_one = br.state.measure_sample(*qubit, &mut rng)? == 1;
                br.probability *= if was_one { p1 } else { 1.0 - p1 };
                if was_one {
                    br.state.flip(*qubit);
                }
            }
        }
    }
    Ok(br)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn plus() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(vec![c(s, 0.), c(s, 0.)]).unwrap()
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = plus();
        let out = run_enumerate(&Circuit::new(1, 0), &s, DEFAULT_BRANCH_CAP).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.branches[0].probability, 1.0);
        assert_eq!(out.branches[0].state, s);
    }

    #[test]
    fn conditioned_x_restores_zero() {
        let mut circ = Circuit::new(1, 1);
        circ.measure(0, 0).unwrap();
        circ.cond_gate(Condition::bit(0), "X", &[0]).unwrap();
        let out = run_enumerate(&circ, &plus(), DEFAULT_BRANCH_CAP).unwrap();
        assert_eq!(out.len(), 2);
        for b in out.iter() {
            assert!((b.probability - 0.5).abs() < 1e-15);
            assert_eq!(b.state, StateVector::zero(1));
        }
    }

    #[test]
    fn branch_cap_is_enforced() {
        let mut circ = Circuit::new(3, 3);
        for q in 0..3 {
            circ.gate("H", &[q]).unwrap();
            circ.measure(q, q).unwrap();
        }
        let err = run_enumerate(&circ, &StateVector::zero(3), 4).unwrap_err();
        assert!(matches!(err, Error::BranchCap { cap: 4, .. }));
        assert_eq!(run_enumerate(&circ, &StateVector::zero(3), 8).unwrap().len(), 8);
    }

    #[test]
    fn validation_rejects_bad_indices() {
        let mut circ = Circuit::new(2, 1);
        assert!(circ.gate("H", &[5]).is_err());
        assert!(circ.measure(0, 1).is_err());
        assert!(circ.bell(1, 1, 0, 0).is_err());
        assert!(circ.cond_gate(Condition::bit(3), "X", &[0]).is_err());
    }

    #[test]
    fn lint_flags_reuse_after_measurement() {
        let mut circ = Circuit::new(1, 1);
        circ.measure(0, 0).unwrap().gate("X", &[0]).unwrap();
        assert_eq!(circ.lint().len(), 1);
        let mut circ = Circuit::new(1, 1);
        circ.measure(0, 0).unwrap().reset(0).unwrap().gate("X", &[0]).unwrap();
        assert!(circ.lint().is_empty());
    }

    #[test]
    fn parity_condition() {
        let c = Condition::parity(&[0, 1, 2]);
        for m in 0..8usize {
            let bits: Vec<bool> = (0..3).map(|b| (m >> b) & 1 == 1).collect();
            assert_eq!(c.eval(&bits), m.count_ones() % 2 == 1);
        }
    }

    #[test]
    fn reset_branches_keep_cbits() {
        let mut circ = Circuit::new(1, 0);
        circ.reset(0).unwrap();
        let out = run_enumerate(&circ, &plus(), DEFAULT_BRANCH_CAP).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|b| b.state == StateVector::zero(1)));
        assert!((out.total_probability() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut circ = Circuit::new(2, 2);
        circ.gate("H", &[0]).unwrap().gate("H", &[1]).unwrap();
        circ.measure(0, 0).unwrap().measure(1, 1).unwrap();
        let a = run_sample(&circ, &StateVector::zero(2), 42).unwrap();
        let b = run_sample(&circ, &StateVector::zero(2), 42).unwrap();
        assert_eq!(a.cbits, b.cbits);
        assert!((a.probability - 0.25).abs() < 1e-15);
    }
}
