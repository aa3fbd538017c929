//! Execution of protocol code against interchangeable backends.
//!
//! Protocols are ordinary Rust functions that drive a [`Ctx`]. Every gate, measurement
//! and reset they issue outside of a replay block is a *nominal* operation with a
//! stable index; faults are injected right after the nominal operation they name.
//!
//! * [`StateBackend`] runs one trajectory on a state vector. Enumeration re-executes
//!   the protocol once per measurement path, so protocol code never has to handle
//!   branching itself.
//! * [`FrameBackend`] tracks only the Pauli difference between a faulty run and a
//!   fault-free reference run whose outcomes are replayed by nominal index.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::FaultSpec;
use crate::clifford::CliffordMap;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pauli::{Pauli, PauliString};
use crate::statevector::{Mode, StateVector, DEFAULT_BRANCH_CAP, PRUNE_PROB};

/// A measurement result in the faulty run next to the fault-free reference.
/// Both agree on the state-vector backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Outcome {
    pub actual: u8,
    pub reference: u8,
}

pub(crate) trait Backend {
    fn apply(&mut self, m: &Matrix, controls: &[usize], targets: &[usize]) -> Result<()>;
    /// Applies the gate in whichever of the two runs asked for it.
    fn apply_if(&mut self, actual: bool, reference: bool, m: &Matrix, controls: &[usize], targets: &[usize])
        -> Result<()>;
    fn measure(&mut self, q: usize, nominal: Option<usize>) -> Result<Outcome>;
    fn reset(&mut self, q: usize) -> Result<()>;
    fn inject(&mut self, q: usize, p: Pauli) -> Result<()>;
    fn probability(&self) -> f64 {
        1.0
    }
    fn snapshot(&self) -> Option<StateVector> {
        None
    }
}

/// One nominal operation of a protocol run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    pub index: usize,
    pub label: &'static str,
    pub qubits: Vec<usize>,
}

pub(crate) struct Ctx<'f, B> {
    pub backend: B,
    faults: &'f [FaultSpec],
    nominal: usize,
    replay: usize,
    pub schedule: Vec<ScheduleEntry>,
}

impl<'f, B: Backend> Ctx<'f, B> {
    pub fn new(backend: B, faults: &'f [FaultSpec]) -> Self {
        Ctx { backend, faults, nominal: 0, replay: 0, schedule: Vec::new() }
    }

    pub fn gate(&mut self, label: &'static str, m: &Matrix, controls: &[usize], targets: &[usize]) -> Result<()> {
        self.backend.apply(m, controls, targets)?;
        self.done(label, controls.iter().chain(targets).copied().collect())
    }

    /// A classically controlled gate. `actual`/`reference` are the decisions of the
    /// two runs; the operation counts as nominal whether or not it fires.
    pub fn cond_gate(
        &mut self,
        label: &'static str,
        actual: bool,
        reference: bool,
        m: &Matrix,
        controls: &[usize],
        targets: &[usize],
    ) -> Result<()> {
        self.backend.apply_if(actual, reference, m, controls, targets)?;
        self.done(label, controls.iter().chain(targets).copied().collect())
    }

    pub fn measure(&mut self, label: &'static str, q: usize) -> Result<Outcome> {
        let idx = (self.replay == 0).then_some(self.nominal);
        let o = self.backend.measure(q, idx)?;
        self.done(label, vec![q])?;
        Ok(o)
    }

    pub fn reset(&mut self, label: &'static str, q: usize) -> Result<()> {
        self.backend.reset(q)?;
        self.done(label, vec![q])
    }

    /// Runs `f` without counting operations or injecting faults.
    pub fn replay<R>(&mut self, f: impl FnOnce(&mut Self) -> Result<R>) -> Result<R> {
        self.replay += 1;
        let r = f(self);
        self.replay -= 1;
        r
    }

    fn done(&mut self, label: &'static str, qubits: Vec<usize>) -> Result<()> {
        if self.replay > 0 {
            return Ok(());
        }
        let index = self.nominal;
        for f in self.faults.iter().filter(|f| f.op == index) {
            self.backend.inject(f.qubit, f.pauli)?;
        }
        self.schedule.push(ScheduleEntry { index, label, qubits });
        self.nominal += 1;
        Ok(())
    }

    /// Fails if a fault names an operation the run never reached.
    pub fn check_faults(&self) -> Result<()> {
        match self.faults.iter().find(|f| f.op >= self.nominal) {
            Some(f) => Err(Error::Invalid(format!("fault at op {} but the protocol has {} ops", f.op, self.nominal))),
            None => Ok(()),
        }
    }
}

/// A finished trajectory, its schedule and the untried alternatives.
type Run<T> = (Leaf<T>, Vec<ScheduleEntry>, Option<Vec<Vec<u8>>>);

enum Choice {
    Forced { path: Vec<u8>, pos: usize, alternatives: Vec<Vec<u8>> },
    Sampled(ChaCha8Rng),
}

pub(crate) struct StateBackend {
    pub state: StateVector,
    probability: f64,
    choice: Choice,
    /// Outcomes of nominal measurements, keyed by op index.
    pub outcomes: HashMap<usize, u8>,
}

impl StateBackend {
    fn forced(state: StateVector, path: Vec<u8>) -> Self {
        StateBackend {
            state,
            probability: 1.0,
            choice: Choice::Forced { path, pos: 0, alternatives: Vec::new() },
            outcomes: HashMap::new(),
        }
    }

    fn sampled(state: StateVector, seed: u64) -> Self {
        StateBackend {
            state,
            probability: 1.0,
            choice: Choice::Sampled(ChaCha8Rng::seed_from_u64(seed)),
            outcomes: HashMap::new(),
        }
    }

    fn collapse(&mut self, q: usize) -> Result<u8> {
        let p = [self.state.probability(q, 0)?, self.state.probability(q, 1)?];
        let p1 = p[1] / (p[0] + p[1]);
        let bit = match &mut self.choice {
            Choice::Sampled(rng) => u8::from(rng.random::<f64>() < p1),
            Choice::Forced { path, pos, alternatives } => {
                let bit = if *pos < path.len() {
                    path[*pos]
                } else {
                    let open: Vec<u8> = (0..2).filter(|&b| p[b as usize] > PRUNE_PROB).collect();
                    let bit = open.first().copied().unwrap_or(0);
                    if open.len() == 2 {
                        let mut alt = path.clone();
                        alt.push(1);
                        alternatives.push(alt);
                    }
                    path.push(bit);
                    bit
                };
                *pos += 1;
                bit
            }
        };
        self.probability *= p[bit as usize];
        self.state.project(q, bit)?;
        Ok(bit)
    }
}

impl Backend for StateBackend {
    fn apply(&mut self, m: &Matrix, controls: &[usize], targets: &[usize]) -> Result<()> {
        if controls.is_empty() {
            self.state.apply_matrix(m, targets)
        } else {
            self.state.apply_controlled(m, controls, targets)
        }
    }

    fn apply_if(&mut self, actual: bool, _: bool, m: &Matrix, controls: &[usize], targets: &[usize]) -> Result<()> {
        if actual {
            self.apply(m, controls, targets)?;
        }
        Ok(())
    }

    fn measure(&mut self, q: usize, nominal: Option<usize>) -> Result<Outcome> {
        let bit = self.collapse(q)?;
        if let Some(i) = nominal {
            self.outcomes.insert(i, bit);
        }
        Ok(Outcome { actual: bit, reference: bit })
    }

    fn reset(&mut self, q: usize) -> Result<()> {
        if self.collapse(q)? == 1 {
            self.state.flip(q);
        }
        Ok(())
    }

    fn inject(&mut self, q: usize, p: Pauli) -> Result<()> {
        self.state.apply_pauli(&PauliString::single(self.state.n(), q, p))
    }

    fn probability(&self) -> f64 {
        self.probability
    }

    fn snapshot(&self) -> Option<StateVector> {
        Some(self.state.clone())
    }
}

/// One leaf of an execution.
pub(crate) struct Leaf<T> {
    pub probability: f64,
    pub value: T,
    pub state: StateVector,
    pub outcomes: HashMap<usize, u8>,
}

pub(crate) struct Execution<T> {
    pub leaves: Vec<Leaf<T>>,
    pub schedule: Vec<ScheduleEntry>,
}

/// Runs `protocol` on `initial` in the given mode. Enumeration re-executes the
/// protocol once per measurement path; leaves come out in lexicographic path order.
pub(crate) fn execute<T>(
    initial: &StateVector,
    mode: Mode,
    faults: &[FaultSpec],
    mut protocol: impl FnMut(&mut Ctx<StateBackend>) -> Result<T>,
) -> Result<Execution<T>> {
    for f in faults {
        if f.qubit >= initial.n() {
            return Err(Error::QubitOutOfRange { index: f.qubit, n: initial.n() });
        }
    }
    let mut run = |backend: StateBackend| -> Result<Run<T>> {
        let mut ctx = Ctx::new(backend, faults);
        let value = protocol(&mut ctx)?;
        ctx.check_faults()?;
        let b = ctx.backend;
        let alts = match b.choice {
            Choice::Forced { alternatives, .. } => Some(alternatives),
            Choice::Sampled(_) => None,
        };
        Ok((Leaf { probability: b.probability, value, state: b.state, outcomes: b.outcomes }, ctx.schedule, alts))
    };
    match mode {
        Mode::Sample(seed) => {
            let (leaf, schedule, _) = run(StateBackend::sampled(initial.clone(), seed))?;
            Ok(Execution { leaves: vec![leaf], schedule })
        }
        Mode::Enumerate => {
            let mut stack = vec![Vec::new()];
            let mut leaves = Vec::new();
            let mut schedule = Vec::new();
            while let Some(path) = stack.pop() {
                let (leaf, sched, alts) = run(StateBackend::forced(initial.clone(), path))?;
                // explore the 0-branch first by pushing alternatives deepest-last
                stack.extend(alts.unwrap_or_default());
                if leaf.probability > PRUNE_PROB {
                    leaves.push(leaf);
                }
                schedule = sched;
                if leaves.len() + stack.len() > DEFAULT_BRANCH_CAP {
                    return Err(Error::BranchCap { count: leaves.len() + stack.len(), cap: DEFAULT_BRANCH_CAP });
                }
            }
            Ok(Execution { leaves, schedule })
        }
    }
}

/// Pauli difference between a faulty run and a fault-free reference.
pub(crate) struct FrameBackend {
    pub frame: PauliString,
    reference: HashMap<usize, u8>,
    cache: HashMap<(Vec<i64>, usize), Option<CliffordMap>>,
}

impl FrameBackend {
    pub fn new(n: usize, reference: HashMap<usize, u8>) -> Self {
        FrameBackend { frame: PauliString::identity(n), reference, cache: HashMap::new() }
    }

    fn full_matrix(m: &Matrix, n_controls: usize) -> Matrix {
        let dim = m.nrows() << n_controls;
        let on = (1usize << n_controls) - 1;
        let mut full = linalg::identity(dim);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                full[((r << n_controls) | on, (c << n_controls) | on)] = m[(r, c)];
            }
        }
        full
    }

    fn clifford(&mut self, m: &Matrix, n_controls: usize) -> Option<CliffordMap> {
        let key = (linalg::fingerprint(m, 1e-9), n_controls);
        self.cache
            .entry(key)
            .or_insert_with(|| CliffordMap::from_matrix_unchecked(&Self::full_matrix(m, n_controls)))
            .clone()
    }
}

impl Backend for FrameBackend {
    fn apply(&mut self, m: &Matrix, controls: &[usize], targets: &[usize]) -> Result<()> {
        let qubits: Vec<usize> = controls.iter().chain(targets).copied().collect();
        let local = self.frame.restrict(&qubits);
        if local.is_identity_up_to_phase() {
            return Ok(());
        }
        let map = self
            .clifford(m, controls.len())
            .ok_or_else(|| Error::Invalid("non-Clifford gate in Pauli-frame propagation".into()))?;
        self.frame = map.conjugate_on(&self.frame, &qubits)?;
        Ok(())
    }

    fn apply_if(&mut self, actual: bool, reference: bool, m: &Matrix, controls: &[usize], targets: &[usize])
        -> Result<()> {
        match (actual, reference) {
            (true, true) => self.apply(m, controls, targets),
            (false, false) => Ok(()),
            _ => {
                // only one run applied the gate, so it becomes part of the difference
                let qubits: Vec<usize> = controls.iter().chain(targets).copied().collect();
                let local = PauliString::from_matrix(&Self::full_matrix(m, controls.len()))
                    .ok_or_else(|| Error::Invalid("non-Pauli conditional gate in Pauli-frame propagation".into()))?;
                let mut lifted = PauliString::identity(self.frame.n());
                lifted.splice(&qubits, &local);
                self.frame = lifted.multiply(&self.frame)?;
                Ok(())
            }
        }
    }

    fn measure(&mut self, q: usize, nominal: Option<usize>) -> Result<Outcome> {
        let flip = self.frame.x_bit(q);
        // replayed measurements only occur in fresh cat verification, which reads 0
        let reference = nominal.and_then(|i| self.reference.get(&i).copied()).unwrap_or(0);
        self.frame.set(q, if flip { Pauli::X } else { Pauli::I });
        Ok(Outcome { actual: reference ^ u8::from(flip), reference })
    }

    fn reset(&mut self, q: usize) -> Result<()> {
        self.frame.set(q, Pauli::I);
        Ok(())
    }

    fn inject(&mut self, q: usize, p: Pauli) -> Result<()> {
        self.frame = PauliString::single(self.frame.n(), q, p).multiply(&self.frame)?;
        Ok(())
    }
}

/// Runs `protocol` on the frame backend against reference outcomes.
pub(crate) fn execute_frame<T>(
    n: usize,
    reference: HashMap<usize, u8>,
    faults: &[FaultSpec],
    protocol: impl FnOnce(&mut Ctx<FrameBackend>) -> Result<T>,
) -> Result<(T, PauliString)> {
    let mut ctx = Ctx::new(FrameBackend::new(n, reference), faults);
    let value = protocol(&mut ctx)?;
    ctx.check_faults()?;
    Ok((value, ctx.backend.frame))
}

/// `|⟨a|b⟩| ≥ 1 - tol`.
pub(crate) fn same_ray(a: &StateVector, b: &StateVector, tol: f64) -> bool {
    a.inner(b).is_ok_and(|z| z.norm() >= 1.0 - tol)
}
