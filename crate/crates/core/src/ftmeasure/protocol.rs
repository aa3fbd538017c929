//! Repeated measurement of a transversal operator with verified cat states.

use serde::Serialize;

use super::engine::{self, Backend, Ctx, Outcome};
use super::{hadamard, is_identity_2x2, state_fingerprint, BlockSpec, Code, FaultSpec, MeasurableOperator, TrialRecord};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pauli::Pauli;
use crate::statevector::{Mode, StateVector};

pub use super::engine::ScheduleEntry;

/// Cat preparation attempts before giving up on a branch.
pub const MAX_CAT_ATTEMPTS: usize = 10;

/// Qubit assignment of an [`ft_measure`] register. Data qubits come first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FtLayout {
    pub n_qubits: usize,
    pub data: Vec<usize>,
    pub block: Vec<usize>,
    pub cat: Vec<usize>,
    pub verify: usize,
    pub syndrome: Vec<usize>,
}

impl FtLayout {
    pub(crate) fn new(n_data: usize, block: &BlockSpec) -> Self {
        let nb = block.len();
        let cat: Vec<usize> = (n_data..n_data + nb).collect();
        let verify = n_data + nb;
        let syndrome = match block.code {
            Code::Unencoded => Vec::new(),
            Code::Repetition3 => vec![verify + 1, verify + 2],
        };
        FtLayout {
            n_qubits: verify + 1 + syndrome.len(),
            data: (0..n_data).collect(),
            block: block.qubits.clone(),
            cat,
            verify,
            syndrome,
        }
    }

    /// Everything that is not data.
    pub fn ancillas(&self) -> Vec<usize> {
        let mut a = self.cat.clone();
        a.push(self.verify);
        a.extend(&self.syndrome);
        a
    }

    pub fn role(&self, q: usize) -> &'static str {
        if self.data.contains(&q) {
            "data"
        } else if self.cat.contains(&q) {
            "cat"
        } else if q == self.verify {
            "verify"
        } else {
            "syndrome"
        }
    }
}

#[derive(Debug, Clone)]
pub struct FtBranch {
    pub probability: f64,
    pub trial_bits: Vec<u8>,
    pub majority: u8,
    pub records: Vec<TrialRecord>,
    /// Cat re-preparations triggered by failed verification.
    pub cat_retries: usize,
    /// The data register after the protocol, ancillas traced out.
    pub data: StateVector,
}

#[derive(Debug, Clone)]
pub struct FtMeasureResult {
    pub layout: FtLayout,
    pub branches: Vec<FtBranch>,
    pub schedule: Vec<ScheduleEntry>,
}

/// Classical record of one protocol run, for both the faulty and the reference run.
#[derive(Debug, Clone, Default)]
pub(crate) struct FtTrace {
    pub bits: Vec<u8>,
    pub ref_bits: Vec<u8>,
    pub records: Vec<TrialRecord>,
    pub cat_retries: usize,
}

impl FtTrace {
    pub fn majority(&self) -> u8 {
        majority(&self.bits)
    }

    pub fn ref_majority(&self) -> u8 {
        majority(&self.ref_bits)
    }
}

/// Strict majority; ties read as 0.
pub(crate) fn majority(bits: &[u8]) -> u8 {
    u8::from(2 * bits.iter().filter(|&&b| b == 1).count() > bits.len())
}

/// Measures `op` on `block` of `data` with `r` cat-state trials and a majority vote,
/// then applies `P` if the majority reads `-1`.
///
/// Each trial prepares and verifies a fresh cat, applies `m_k` controlled by cat qubit
/// `k`, and decodes the cat parity into one bit. With [`Code::Repetition3`] the block is
/// syndrome-checked and corrected between trials.
pub fn ft_measure(
    data: &StateVector,
    op: &MeasurableOperator,
    block: &BlockSpec,
    r: usize,
    faults: &[FaultSpec],
    mode: Mode,
) -> Result<FtMeasureResult> {
    let plan = FtPlan::new(data.n(), op, block, r)?;
    let initial = data.tensor(&StateVector::zero(plan.layout.n_qubits - data.n()));
    let exec = engine::execute(&initial, mode, faults, |ctx| plan.run(ctx))?;
    let branches = exec
        .leaves
        .into_iter()
        .map(|leaf| {
            Ok(FtBranch {
                probability: leaf.probability,
                majority: leaf.value.majority(),
                trial_bits: leaf.value.bits,
                records: leaf.value.records,
                cat_retries: leaf.value.cat_retries,
                data: leaf.state.extract(&plan.layout.data, 1e-9)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FtMeasureResult { layout: plan.layout, branches, schedule: exec.schedule })
}

/// Everything the protocol needs, validated once.
pub(crate) struct FtPlan {
    pub layout: FtLayout,
    pub code: Code,
    pub r: usize,
    factors: Vec<Matrix>,
    /// Per-qubit correction factors, or the dense `P` on the whole block.
    correction: Correction,
}

enum Correction {
    Transversal(Vec<Matrix>),
    Dense(Matrix),
}

impl FtPlan {
    pub fn new(n_data: usize, op: &MeasurableOperator, block: &BlockSpec, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Invalid("at least one trial is required".into()));
        }
        block.check(n_data)?;
        let factors = op.factors()?.to_vec();
        if factors.len() != block.len() {
            return Err(Error::SizeMismatch { left: factors.len(), right: block.len() });
        }
        let correction = match op.correction_factors() {
            Some(f) => Correction::Transversal(f.to_vec()),
            None => Correction::Dense(op.correction().clone()),
        };
        Ok(FtPlan { layout: FtLayout::new(n_data, block), code: block.code, r, factors, correction })
    }

    pub fn run<B: Backend>(&self, ctx: &mut Ctx<B>) -> Result<FtTrace> {
        let lay = &self.layout;
        let mut trace = FtTrace::default();
        for t in 0..self.r {
            trace.cat_retries += prepare_verified_cat(ctx, &lay.cat, lay.verify, true)?;
            for (k, m) in self.factors.iter().enumerate() {
                if !is_identity_2x2(m) {
                    ctx.gate("controlled-m", m, &[lay.cat[k]], &[lay.block[k]])?;
                }
            }
            let o = decode_cat(ctx, &lay.cat)?;
            trace.bits.push(o.actual);
            trace.ref_bits.push(o.reference);
            trace.records.push(TrialRecord {
                trial: t,
                decoded_bit: o.actual,
                branch_probability: ctx.backend.probability(),
                fingerprint: ctx.backend.snapshot().map(|s| state_fingerprint(&s)).unwrap_or_default(),
            });
            if t + 1 < self.r && self.code == Code::Repetition3 {
                correct_repetition(ctx, &lay.block, &lay.syndrome)?;
            }
        }
        let (fire, fire_ref) = (trace.majority() == 1, trace.ref_majority() == 1);
        match &self.correction {
            Correction::Transversal(fs) => {
                for (k, f) in fs.iter().enumerate() {
                    if !is_identity_2x2(f) {
                        ctx.cond_gate("correction", fire, fire_ref, f, &[], &[lay.block[k]])?;
                    }
                }
            }
            Correction::Dense(p) => ctx.cond_gate("correction", fire, fire_ref, p, &[], &lay.block)?,
        }
        ctx.replay(|ctx| lay.ancillas().into_iter().try_for_each(|q| ctx.reset("cleanup", q)))?;
        Ok(trace)
    }
}

/// Prepares a cat on `cat` and verifies it through `anc`, re-preparing on failure.
/// Returns the number of re-preparations. With `reset_first` the cat qubits are reset
/// before the first attempt.
pub(crate) fn prepare_verified_cat<B: Backend>(
    ctx: &mut Ctx<B>,
    cat: &[usize],
    anc: usize,
    reset_first: bool,
) -> Result<usize> {
    let attempt = |ctx: &mut Ctx<B>, reset: bool| -> Result<bool> {
        if reset {
            for &q in cat {
                ctx.reset("cat-reset", q)?;
            }
        }
        ctx.gate("cat-h", &hadamard(), &[], &[cat[0]])?;
        for k in 0..cat.len() - 1 {
            ctx.gate("cat-cnot", &Pauli::X.matrix(), &[cat[k]], &[cat[k + 1]])?;
        }
        Ok(compare_pairs(ctx, cat, anc)?.iter().all(|o| o.actual == 0))
    };
    if attempt(ctx, reset_first)? {
        return Ok(0);
    }
    for retry in 1..MAX_CAT_ATTEMPTS {
        if ctx.replay(|ctx| attempt(ctx, true))? {
            return Ok(retry);
        }
    }
    Err(Error::CatVerification(MAX_CAT_ATTEMPTS))
}

/// Parity of each neighbouring pair of `cat`, read through `anc`.
pub(crate) fn compare_pairs<B: Backend>(ctx: &mut Ctx<B>, cat: &[usize], anc: usize) -> Result<Vec<Outcome>> {
    let x = Pauli::X.matrix();
    let mut out = Vec::with_capacity(cat.len() - 1);
    for k in 0..cat.len() - 1 {
        ctx.reset("verify-reset", anc)?;
        ctx.gate("verify-cnot", &x, &[cat[k]], &[anc])?;
        ctx.gate("verify-cnot", &x, &[cat[k + 1]], &[anc])?;
        out.push(ctx.measure("verify-measure", anc)?);
    }
    Ok(out)
}

/// Undoes the CNOT ladder, applies `H` to the first cat qubit and reads it.
pub(crate) fn decode_cat<B: Backend>(ctx: &mut Ctx<B>, cat: &[usize]) -> Result<Outcome> {
    let x = Pauli::X.matrix();
    for k in (0..cat.len() - 1).rev() {
        ctx.gate("decode-cnot", &x, &[cat[k]], &[cat[k + 1]])?;
    }
    ctx.gate("decode-h", &hadamard(), &[], &[cat[0]])?;
    ctx.measure("decode-measure", cat[0])
}

/// Bit-flip syndrome extraction and correction on each consecutive triple of `block`.
pub(crate) fn correct_repetition<B: Backend>(ctx: &mut Ctx<B>, block: &[usize], syn: &[usize]) -> Result<()> {
    let x = Pauli::X.matrix();
    for g in block.chunks_exact(3) {
        ctx.reset("syndrome-reset", syn[0])?;
        ctx.reset("syndrome-reset", syn[1])?;
        ctx.gate("syndrome-cnot", &x, &[g[0]], &[syn[0]])?;
        ctx.gate("syndrome-cnot", &x, &[g[1]], &[syn[0]])?;
        ctx.gate("syndrome-cnot", &x, &[g[1]], &[syn[1]])?;
        ctx.gate("syndrome-cnot", &x, &[g[2]], &[syn[1]])?;
        let s0 = ctx.measure("syndrome-measure", syn[0])?;
        let s1 = ctx.measure("syndrome-measure", syn[1])?;
        let actual = flip_target(s0.actual, s1.actual);
        let reference = flip_target(s0.reference, s1.reference);
        for (j, &q) in g.iter().enumerate() {
            ctx.cond_gate("syndrome-correct", actual == Some(j), reference == Some(j), &x, &[], &[q])?;
        }
    }
    Ok(())
}

fn flip_target(s0: u8, s1: u8) -> Option<usize> {
    match (s0, s1) {
        (1, 0) => Some(0),
        (1, 1) => Some(1),
        (0, 1) => Some(2),
        _ => None,
    }
}
