//! Single-fault analysis of [`ft_measure`](super::ft_measure).
//!
//! A fault is first pushed through the protocol as a Pauli frame against a seeded
//! fault-free reference run. The frame is exact for the classical record but may
//! overstate the data error, because part of it can act trivially on the state (for
//! example `M` itself on a `+1` eigenstate). Whenever the frame reports a block weight
//! above one, or cannot be propagated, the fault is re-run on state vectors and the
//! smallest Pauli relating the faulty and fault-free data is found by search.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::engine::{self, same_ray};
use super::protocol::{FtLayout, FtPlan, FtTrace};
use super::{BlockSpec, Code, FaultSpec, MeasurableOperator};
use crate::error::Result;
use crate::pauli::{Pauli, PauliString};
use crate::statevector::{Mode, StateVector};

const MATCH_TOL: f64 = 1e-9;

/// A protocol instance to analyse: `r` trials of `op` on `block` of `data`.
#[derive(Debug, Clone)]
pub struct FtProtocol {
    pub op: MeasurableOperator,
    pub block: BlockSpec,
    pub r: usize,
    pub data: StateVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    PauliFrame,
    StateVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaultReport {
    pub fault: FaultSpec,
    pub label: &'static str,
    pub role: &'static str,
    pub data_weight_per_block: Vec<usize>,
    /// Residual Pauli on the data register; `None` if the faulty data is not a Pauli
    /// image of the fault-free data.
    pub residual: Option<String>,
    pub decoded_bit_flipped: bool,
    pub majority_changed: bool,
    pub method: Propagation,
}

impl FaultReport {
    pub fn max_weight(&self) -> usize {
        self.data_weight_per_block.iter().copied().max().unwrap_or(0)
    }

    /// More than one error in some block, a non-Pauli residual, or a flipped majority.
    pub fn is_violation(&self) -> bool {
        self.residual.is_none() || self.max_weight() > 1 || self.majority_changed
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepSummary {
    pub locations: usize,
    pub ancilla_locations: usize,
    pub ancilla_violations: usize,
    pub max_ancilla_weight: usize,
    pub data_locations: usize,
    pub data_violations: usize,
    pub resolved_by_frame: usize,
    pub resolved_by_state_vector: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub operator: String,
    pub code: Code,
    pub trials: usize,
    pub n_ops: usize,
    pub layout: FtLayout,
    pub summary: SweepSummary,
    pub reports: Vec<FaultReport>,
}

struct CleanLeaf {
    trace: FtTrace,
    data: StateVector,
}

struct Analyzer<'a> {
    proto: &'a FtProtocol,
    plan: FtPlan,
    initial: StateVector,
    reference: HashMap<usize, u8>,
    schedule: Vec<engine::ScheduleEntry>,
    clean: Vec<CleanLeaf>,
    partition: Vec<Vec<usize>>,
}

impl<'a> Analyzer<'a> {
    fn new(proto: &'a FtProtocol, partition: &[Vec<usize>]) -> Result<Self> {
        let plan = FtPlan::new(proto.data.n(), &proto.op, &proto.block, proto.r)?;
        let initial = proto.data.tensor(&StateVector::zero(plan.layout.n_qubits - proto.data.n()));
        let reference = engine::execute(&initial, Mode::Sample(0), &[], |ctx| plan.run(ctx))?;
        let schedule = reference.schedule;
        let reference = reference.leaves.into_iter().next().expect("one trajectory").outcomes;
        let clean = engine::execute(&initial, Mode::Enumerate, &[], |ctx| plan.run(ctx))?
            .leaves
            .into_iter()
            .map(|l| Ok(CleanLeaf { data: l.state.extract(&plan.layout.data, MATCH_TOL)?, trace: l.value }))
            .collect::<Result<_>>()?;
        let partition = if partition.is_empty() { vec![proto.block.qubits.clone()] } else { partition.to_vec() };
        PauliString::identity(proto.data.n()).block_weight(&partition)?;
        Ok(Analyzer { proto, plan, initial, reference, schedule, clean, partition })
    }

    fn analyze(&self, fault: FaultSpec) -> Result<FaultReport> {
        let entry = self.schedule.get(fault.op);
        let label = entry.map_or("unknown", |e| e.label);
        let role = self.plan.layout.role(fault.qubit);
        let faults = [fault];
        let framed = engine::execute_frame(self.plan.layout.n_qubits, self.reference.clone(), &faults, |ctx| {
            self.plan.run(ctx)
        });
        if let Ok((trace, frame)) = framed {
            let residual = frame.restrict(&self.plan.layout.data);
            let weights = residual.block_weight(&self.partition)?;
            if weights.iter().all(|&w| w <= 1) {
                return Ok(FaultReport {
                    fault,
                    label,
                    role,
                    data_weight_per_block: weights,
                    residual: Some(residual.with_phase(0).to_string()),
                    decoded_bit_flipped: trace.bits != trace.ref_bits,
                    majority_changed: trace.majority() != trace.ref_majority(),
                    method: Propagation::PauliFrame,
                });
            }
        }
        self.exact(fault, label, role)
    }

    fn exact(&self, fault: FaultSpec, label: &'static str, role: &'static str) -> Result<FaultReport> {
        let faulty = engine::execute(&self.initial, Mode::Enumerate, &[fault], |ctx| self.plan.run(ctx))?;
        let mut report = FaultReport {
            fault,
            label,
            role,
            data_weight_per_block: vec![0; self.partition.len()],
            residual: Some(PauliString::identity(self.proto.data.n()).to_string()),
            decoded_bit_flipped: false,
            majority_changed: false,
            method: Propagation::StateVector,
        };
        for leaf in faulty.leaves {
            let data = leaf.state.extract(&self.plan.layout.data, MATCH_TOL)?;
            // the clean branch this one is closest to, ties broken towards the same majority
            let best = self
                .clean
                .iter()
                .filter_map(|c| {
                    let e = min_residual(&c.data, &data)?;
                    let w = e.block_weight(&self.partition).ok()?;
                    let same = c.trace.majority() == leaf.value.majority();
                    Some((w.iter().copied().max().unwrap_or(0), !same, w, e, c))
                })
                .min_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let Some((_, _, weights, e, c)) = best else {
                report.residual = None;
                report.data_weight_per_block = self.partition.iter().map(Vec::len).collect();
                report.majority_changed |= self.clean.iter().all(|c| c.trace.majority() != leaf.value.majority());
                continue;
            };
            report.decoded_bit_flipped |= c.trace.bits != leaf.value.bits;
            report.majority_changed |= c.trace.majority() != leaf.value.majority();
            if report.residual.is_some() && weights.iter().max() > report.data_weight_per_block.iter().max() {
                report.residual = Some(e.to_string());
            }
            for (acc, w) in report.data_weight_per_block.iter_mut().zip(weights) {
                *acc = (*acc).max(w);
            }
        }
        Ok(report)
    }
}

/// Smallest-weight phase-free Pauli `E` with `E|clean⟩ ∝ |faulty⟩`.
fn min_residual(clean: &StateVector, faulty: &StateVector) -> Option<PauliString> {
    PauliString::enumerate(clean.n())
        .filter(|e| {
            let mut s = clean.clone();
            s.apply_pauli(e).is_ok() && same_ray(&s, faulty, MATCH_TOL)
        })
        .min_by_key(PauliString::weight)
}

/// A seeded random `+1` eigenstate of `op` on `block`, also projected onto the code
/// space when the block is repetition-encoded. Fault-free runs on it are deterministic.
pub fn eigen_input(op: &MeasurableOperator, block: &BlockSpec, n_data: usize, seed: u64) -> Result<StateVector> {
    block.check(n_data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = StateVector::random(n_data, &mut rng);
    s.apply_matrix(&op.projector(1.0), &block.qubits)?;
    if block.code == Code::Repetition3 {
        let mut amps = s.amplitudes().to_vec();
        for (i, a) in amps.iter_mut().enumerate() {
            let bad = block.qubits.chunks_exact(3).any(|g| {
                let bits: Vec<usize> = g.iter().map(|q| (i >> q) & 1).collect();
                bits[0] != bits[1] || bits[1] != bits[2]
            });
            if bad {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        s = StateVector::from_unnormalized(amps)?;
    }
    StateVector::from_unnormalized(s.amplitudes().to_vec())
}

/// Propagates one fault through the protocol. An empty `partition` means the block
/// as a single partition element.
pub fn propagate_fault(proto: &FtProtocol, fault: FaultSpec, partition: &[Vec<usize>]) -> Result<FaultReport> {
    Analyzer::new(proto, partition)?.analyze(fault)
}

#[cfg(test)]
pub(crate) fn propagate_exact(proto: &FtProtocol, fault: FaultSpec) -> Result<FaultReport> {
    let an = Analyzer::new(proto, &[])?;
    let label = an.schedule.get(fault.op).map_or("unknown", |e| e.label);
    an.exact(fault, label, an.plan.layout.role(fault.qubit))
}

/// Every single `X`, `Y` or `Z` fault after every nominal operation, on each qubit
/// that operation touches. Faults on data qubits are included when `include_data`.
pub fn fault_sweep(proto: &FtProtocol, include_data: bool) -> Result<SweepReport> {
    let an = Analyzer::new(proto, &[])?;
    let mut summary = SweepSummary::default();
    let mut reports = Vec::new();
    for entry in &an.schedule {
        for &qubit in &entry.qubits {
            let is_data = an.plan.layout.data.contains(&qubit);
            if is_data && !include_data {
                continue;
            }
            for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
                let rep = an.analyze(FaultSpec { op: entry.index, qubit, pauli })?;
                summary.locations += 1;
                match rep.method {
                    Propagation::PauliFrame => summary.resolved_by_frame += 1,
                    Propagation::StateVector => summary.resolved_by_state_vector += 1,
                }
                if is_data {
                    summary.data_locations += 1;
                    summary.data_violations += usize::from(rep.is_violation());
                } else {
                    summary.ancilla_locations += 1;
                    summary.ancilla_violations += usize::from(rep.is_violation());
                    summary.max_ancilla_weight = summary.max_ancilla_weight.max(rep.max_weight());
                }
                reports.push(rep);
            }
        }
    }
    Ok(SweepReport {
        operator: proto.op.name().to_string(),
        code: proto.block.code,
        trials: proto.r,
        n_ops: an.schedule.len(),
        layout: an.plan.layout.clone(),
        summary,
        reports,
    })
}
