//! Coherent measurement of an operator, controlled by an outer cat state.
//!
//! The outer cat qubit `k` and the inner cat qubit `k` jointly control `n_k` on data
//! qubit `k`. After `r` trials the inner result qubits hold the measured eigenvalue in
//! the outer `|1…1⟩` sector only; a majority, a controlled `P` and a rotation by the
//! known amplitudes `(α, β)` then return every inner qubit to `|0⟩`, leaving
//! `(|0…0⟩|φ⟩ + |1…1⟩|φ₀⟩)/√2` with `φ₀ = Π₊φ/α`.

use num_complex::Complex64;
use serde::Serialize;

use super::engine::{self, Backend, Ctx, ScheduleEntry};
use super::protocol::{compare_pairs, correct_repetition, prepare_verified_cat};
use super::{hadamard, is_identity_2x2, BlockSpec, Code, FaultSpec, MeasurableOperator};
use crate::clifford::permutation;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pauli::Pauli;
use crate::statevector::{Mode, StateVector};

const PRECHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct NestedSpec {
    pub op: MeasurableOperator,
    pub block: BlockSpec,
    /// Size of the outer cat; at least the block size.
    pub n_outer: usize,
    pub r: usize,
    pub alpha: Complex64,
    pub beta: Complex64,
}

/// Qubit assignment of a [`nested_measure`] register, data first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NestedLayout {
    pub n_qubits: usize,
    pub data: Vec<usize>,
    pub block: Vec<usize>,
    pub outer: Vec<usize>,
    /// Inner cat qubits other than the per-trial result qubit, shared by all trials.
    pub scratch: Vec<usize>,
    pub results: Vec<usize>,
    pub majority: Vec<usize>,
    pub verify: usize,
    pub syndrome: Vec<usize>,
}

impl NestedLayout {
    fn new(n_data: usize, spec: &NestedSpec) -> Self {
        let nb = spec.block.len();
        let mut next = n_data;
        let mut take = |k: usize| {
            let v: Vec<usize> = (next..next + k).collect();
            next += k;
            v
        };
        let outer = take(spec.n_outer);
        let scratch = take(nb - 1);
        let results = take(spec.r);
        let majority = take(nb);
        let verify = take(1)[0];
        let syndrome = take(if spec.block.code == Code::Repetition3 { 2 } else { 0 });
        NestedLayout {
            n_qubits: next,
            data: (0..n_data).collect(),
            block: spec.block.qubits.clone(),
            outer,
            scratch,
            results,
            majority,
            verify,
            syndrome,
        }
    }

    /// Qubits that must end in `|0⟩`.
    pub fn inner(&self) -> Vec<usize> {
        let mut v = self.scratch.clone();
        v.extend(&self.results);
        v.extend(&self.majority);
        v.push(self.verify);
        v.extend(&self.syndrome);
        v
    }
}

#[derive(Debug, Clone)]
pub struct NestedBranch {
    pub probability: f64,
    /// Full register after the last trial, before the majority.
    pub intermediate: StateVector,
    pub final_state: StateVector,
    /// Probability that every inner qubit reads 0 at the end.
    pub inner_zero_fidelity: f64,
    /// `2|ρ|` between the outer all-zero and all-one sectors.
    pub outer_coherence: f64,
    pub cat_retries: usize,
}

#[derive(Debug, Clone)]
pub struct NestedResult {
    pub layout: NestedLayout,
    pub branches: Vec<NestedBranch>,
    /// Outer coherence of the fault-free target state.
    pub ideal_coherence: f64,
    pub schedule: Vec<ScheduleEntry>,
}

impl NestedResult {
    /// Whether a branch lost the outer superposition relative to the ideal.
    pub fn outer_collapsed(&self, branch: &NestedBranch) -> bool {
        branch.inner_zero_fidelity < 1.0 - 1e-9 || (self.ideal_coherence - branch.outer_coherence).abs() > 1e-6
    }
}

/// `α φ₀ + β P† φ₀` for a `+1` eigenvector `φ₀` of the block operator; the result
/// satisfies the amplitude conditions [`nested_measure`] checks.
pub fn consistent_input(
    op: &MeasurableOperator,
    block: &BlockSpec,
    phi0: &StateVector,
    alpha: Complex64,
    beta: Complex64,
) -> Result<StateVector> {
    block.check(phi0.n())?;
    let mut check = phi0.clone();
    check.apply_matrix(op.matrix(), &block.qubits)?;
    if !engine::same_ray(&check, phi0, PRECHECK_TOL) || check.inner(phi0)?.re < 0.0 {
        return Err(Error::InconsistentAmplitudes("phi0 is not a +1 eigenvector".into()));
    }
    let mut phi1 = phi0.clone();
    phi1.apply_matrix(&op.correction().adjoint(), &block.qubits)?;
    let amps = phi0.amplitudes().iter().zip(phi1.amplitudes()).map(|(a, b)| alpha * a + beta * b).collect();
    StateVector::from_amplitudes(amps)
}

/// `(Π₊φ, Π₋φ)` on the block.
fn split(data: &StateVector, op: &MeasurableOperator, block: &[usize]) -> Result<(StateVector, StateVector)> {
    let mut plus = data.clone();
    plus.apply_matrix(&op.projector(1.0), block)?;
    let mut minus = data.clone();
    minus.apply_matrix(&op.projector(-1.0), block)?;
    Ok((plus, minus))
}

fn scaled(s: &StateVector, k: Complex64) -> Vec<Complex64> {
    s.amplitudes().iter().map(|a| a * k).collect()
}

/// `φ₀` from the known amplitudes, after checking them against the data.
fn target_state(data: &StateVector, spec: &NestedSpec) -> Result<Vec<Complex64>> {
    let (plus, minus) = split(data, &spec.op, &spec.block.qubits)?;
    let (np, nm) = (plus.norm(), minus.norm());
    if (np - spec.alpha.norm()).abs() > PRECHECK_TOL || (nm - spec.beta.norm()).abs() > PRECHECK_TOL {
        return Err(Error::InconsistentAmplitudes(format!(
            "|Π+φ| = {np:.12}, |Π-φ| = {nm:.12} but |α| = {:.12}, |β| = {:.12}",
            spec.alpha.norm(),
            spec.beta.norm()
        )));
    }
    let mut p_minus = minus.clone();
    p_minus.apply_matrix(spec.op.correction(), &spec.block.qubits)?;
    let phi0 = if spec.alpha.norm() > PRECHECK_TOL {
        scaled(&plus, 1.0 / spec.alpha)
    } else {
        scaled(&p_minus, 1.0 / spec.beta)
    };
    let expect: Vec<Complex64> = phi0.iter().map(|a| a * spec.beta).collect();
    let dev = p_minus.amplitudes().iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if dev > PRECHECK_TOL {
        return Err(Error::InconsistentAmplitudes(format!("P Π-φ differs from β φ0 by {dev:e}")));
    }
    Ok(phi0)
}

/// Places per-data amplitudes on the register with the given extra qubits set.
fn embed(n: usize, data_amps: &[Complex64], set: usize, out: &mut [Complex64], weight: Complex64) {
    debug_assert_eq!(out.len(), 1 << n);
    for (d, a) in data_amps.iter().enumerate() {
        out[d | set] += a * weight;
    }
}

fn mask(qubits: &[usize]) -> usize {
    qubits.iter().fold(0, |m, q| m | (1 << q))
}

/// The register just before the majority step, assembled directly:
/// `(|0…0⟩_outer |φ⟩ + |1…1⟩_outer (α|0…0⟩_res |φ₀⟩ + β|1…1⟩_res |φ₁⟩))/√2`.
pub fn analytic_after_state(data: &StateVector, spec: &NestedSpec) -> Result<StateVector> {
    let lay = NestedLayout::new(data.n(), spec);
    let (plus, minus) = split(data, &spec.op, &spec.block.qubits)?;
    let w = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    let mut out = vec![Complex64::new(0.0, 0.0); 1 << lay.n_qubits];
    let outer = mask(&lay.outer);
    embed(lay.n_qubits, data.amplitudes(), 0, &mut out, w);
    embed(lay.n_qubits, plus.amplitudes(), outer, &mut out, w);
    embed(lay.n_qubits, minus.amplitudes(), outer | mask(&lay.results), &mut out, w);
    StateVector::from_amplitudes(out)
}

/// The ideal output `(|0…0⟩_outer |φ⟩ + |1…1⟩_outer |φ₀⟩)/√2`, inner qubits zero.
pub fn analytic_final_state(data: &StateVector, spec: &NestedSpec) -> Result<StateVector> {
    let lay = NestedLayout::new(data.n(), spec);
    let phi0 = target_state(data, spec)?;
    let w = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    let mut out = vec![Complex64::new(0.0, 0.0); 1 << lay.n_qubits];
    embed(lay.n_qubits, data.amplitudes(), 0, &mut out, w);
    embed(lay.n_qubits, &phi0, mask(&lay.outer), &mut out, w);
    StateVector::from_amplitudes(out)
}

pub fn nested_measure(data: &StateVector, spec: &NestedSpec, faults: &[FaultSpec], mode: Mode) -> Result<NestedResult> {
    if spec.r == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    spec.block.check(data.n())?;
    let nb = spec.block.len();
    if spec.n_outer < nb {
        return Err(Error::Invalid(format!("outer cat of {} qubits cannot control a block of {nb}", spec.n_outer)));
    }
    let factors = spec.op.factors()?;
    if factors.len() != nb {
        return Err(Error::SizeMismatch { left: factors.len(), right: nb });
    }
    let corrections = spec.op.correction_factors().ok_or(Error::NotTransversal)?;
    target_state(data, spec)?;

    let lay = NestedLayout::new(data.n(), spec);
    let initial = data.tensor(&StateVector::zero(lay.n_qubits - data.n()));
    let v = linalg::from_rows(&[&[spec.alpha, -spec.beta.conj()], &[spec.beta, spec.alpha.conj()]]);
    let run = |ctx: &mut Ctx<engine::StateBackend>| run_nested(ctx, &lay, spec.block.code, factors, corrections, &v);
    let exec = engine::execute(&initial, mode, faults, run)?;

    let ideal = analytic_final_state(data, spec)?;
    let ideal_coherence = outer_coherence(&ideal, &lay.outer);
    let inner = mask(&lay.inner());
    let branches = exec
        .leaves
        .into_iter()
        .map(|leaf| {
            let inner_zero_fidelity = leaf
                .state
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(i, _)| i & inner == 0)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            NestedBranch {
                probability: leaf.probability,
                intermediate: leaf.value.1.expect("state backend snapshots"),
                outer_coherence: outer_coherence(&leaf.state, &lay.outer),
                final_state: leaf.state,
                inner_zero_fidelity,
                cat_retries: leaf.value.0,
            }
        })
        .collect();
    Ok(NestedResult { layout: lay, branches, ideal_coherence, schedule: exec.schedule })
}

/// `2|⟨rest₁|rest₀⟩|` for the outer all-zero and all-one sectors.
fn outer_coherence(s: &StateVector, outer: &[usize]) -> f64 {
    let m = mask(outer);
    let amps = s.amplitudes();
    let overlap: Complex64 = (0..amps.len()).filter(|i| i & m == 0).map(|i| amps[i | m].conj() * amps[i]).sum();
    2.0 * overlap.norm()
}

/// Returns the number of cat re-preparations and the pre-majority snapshot.
fn run_nested<B: Backend>(
    ctx: &mut Ctx<B>,
    lay: &NestedLayout,
    code: Code,
    factors: &[Matrix],
    corrections: &[Matrix],
    v: &Matrix,
) -> Result<(usize, Option<StateVector>)> {
    let x = Pauli::X.matrix();
    let r = lay.results.len();
    let mut retries = prepare_verified_cat(ctx, &lay.outer, lay.verify, false)?;
    for t in 0..r {
        let mut inner = vec![lay.results[t]];
        inner.extend(&lay.scratch);
        retries += prepare_verified_cat(ctx, &inner, lay.verify, true)?;
        for (k, m) in factors.iter().enumerate() {
            if !is_identity_2x2(m) {
                ctx.gate("controlled-n", m, &[lay.outer[k], inner[k]], &[lay.block[k]])?;
            }
        }
        for k in (0..inner.len() - 1).rev() {
            ctx.gate("decode-cnot", &x, &[inner[k]], &[inner[k + 1]])?;
        }
        ctx.gate("decode-h", &hadamard(), &[], &[inner[0]])?;
        if t + 1 < r {
            if code == Code::Repetition3 {
                correct_repetition(ctx, &lay.block, &lay.syndrome)?;
            }
            reverify_outer(ctx, &lay.outer, lay.verify)?;
        }
    }
    let snapshot = ctx.backend.snapshot();

    let maj = majority_gate(r);
    for &m in &lay.majority {
        let mut qs = lay.results.clone();
        qs.push(m);
        ctx.gate("majority", &maj, &[], &qs)?;
    }
    for (k, p) in corrections.iter().enumerate() {
        if !is_identity_2x2(p) {
            ctx.gate("controlled-p", p, &[lay.majority[k]], &[lay.block[k]])?;
        }
    }
    for &q in lay.results[1..].iter().chain(&lay.majority) {
        ctx.gate("disentangle-cnot", &x, &[lay.results[0]], &[q])?;
    }
    ctx.gate("disentangle-v", &v.adjoint(), &[lay.outer[0]], &[lay.results[0]])?;
    Ok((retries, snapshot))
}

/// Flips the last of `r + 1` qubits when most of the first `r` are 1.
fn majority_gate(r: usize) -> Matrix {
    let low = (1usize << r) - 1;
    permutation(r + 1, |i| if 2 * (i & low).count_ones() as usize > r { i ^ (1 << r) } else { i })
}

/// Re-checks the outer cat between trials and flips the minority pattern back.
fn reverify_outer<B: Backend>(ctx: &mut Ctx<B>, outer: &[usize], anc: usize) -> Result<()> {
    let cmp = compare_pairs(ctx, outer, anc)?;
    let minority = |bits: Vec<u8>| -> Vec<bool> {
        // relative values with outer[0] as reference
        let mut rel = vec![false];
        for b in bits {
            let last = *rel.last().expect("non-empty");
            rel.push(last ^ (b == 1));
        }
        let ones = rel.iter().filter(|&&v| v).count();
        if 2 * ones <= rel.len() { rel } else { rel.into_iter().map(|v| !v).collect() }
    };
    let actual = minority(cmp.iter().map(|o| o.actual).collect());
    let reference = minority(cmp.iter().map(|o| o.reference).collect());
    let x = Pauli::X.matrix();
    for (k, &q) in outer.iter().enumerate() {
        ctx.cond_gate("outer-correct", actual[k], reference[k], &x, &[], &[q])?;
    }
    Ok(())
}
