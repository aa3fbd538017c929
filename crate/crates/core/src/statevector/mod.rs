//! Dense state-vector simulation.
//!
//! Amplitude index bit `q` is qubit `q` (qubit 0 least significant). Gates are applied
//! in place over amplitude strides; nothing here builds a `2^n × 2^n` matrix.

mod circuit;

pub use circuit::{
    run_circuit, run_enumerate, run_sample, Branch, BranchSet, Circuit, Condition, Mode, Op, RunOutcome,
    DEFAULT_BRANCH_CAP,
};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::clifford::GateUnitary;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pauli::{i_pow, PauliString};

/// Norm tolerance for states handed in from outside.
pub const NORM_TOL: f64 = 1e-10;
/// Branches with probability below this are dropped during enumeration.
pub const PRUNE_PROB: f64 = 1e-20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

/// One of the four Bell-measurement results on a qubit pair.
#[derive(Debug, Clone)]
pub struct BellOutcome {
    pub x: u8,
    pub z: u8,
    pub probability: f64,
    /// Post-measurement state; `None` when the outcome has zero probability.
    pub state: Option<StateVector>,
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        assert!(n < usize::BITS as usize - 1, "too many qubits");
        assert!(index < 1 << n, "basis index out of range");
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        StateVector { n, amps }
    }

    /// Computational basis state from a bit string written qubit 0 first, e.g. `"0110"`.
    pub fn from_ket(bits: &str) -> Result<Self> {
        let n = bits.len();
        let mut index = 0usize;
        for (q, ch) in bits.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => index |= 1 << q,
                _ => return Err(Error::Parse(format!("bad ket character {ch:?}"))),
            }
        }
        Ok(Self::basis(n, index))
    }

    /// Requires a power-of-two length and unit norm within [`NORM_TOL`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Invalid(format!("state norm {norm} is not 1")));
        }
        Self::from_unnormalized(amps)
    }

    /// Power-of-two length; the vector is rescaled to unit norm.
    pub fn from_unnormalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Invalid(format!("amplitude count {len} is not a power of two")));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::Invalid("zero or non-finite amplitude vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(StateVector { n: len.trailing_zeros() as usize, amps })
    }

    /// Haar-random state from normally distributed amplitudes.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_unnormalized(amps).expect("nonzero with probability one")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn renormalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= norm);
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::SizeMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// True when `|⟨self|other⟩| ≥ 1 - tol`.
    pub fn equal_up_to_global_phase(&self, other: &Self, tol: f64) -> Result<bool> {
        Ok(self.inner(other)?.norm() >= 1.0 - tol)
    }

    /// `self ⊗ high`, with `self` on the low qubits.
    pub fn tensor(&self, high: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * high.dim());
        for h in &high.amps {
            amps.extend(self.amps.iter().map(|l| l * h));
        }
        StateVector { n: self.n + high.n, amps }
    }

    /// Reorders qubits: new qubit `i` is old qubit `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<StateVector> {
        check_targets(self.n, order)?;
        if order.len() != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: order.len() });
        }
        let mut amps = vec![ZERO; self.dim()];
        for (old, a) in self.amps.iter().enumerate() {
            let new = order.iter().enumerate().fold(0usize, |acc, (i, &q)| acc | (((old >> q) & 1) << i));
            amps[new] = *a;
        }
        Ok(StateVector { n: self.n, amps })
    }

    /// Applies a unitary to `targets`; gate qubit `i` acts on `targets[i]`.
    pub fn apply_gate(&mut self, gate: &GateUnitary, targets: &[usize]) -> Result<()> {
        self.apply_matrix(gate.matrix(), targets)
    }

    pub fn apply_matrix(&mut self, m: &Matrix, targets: &[usize]) -> Result<()> {
        self.apply_controlled(m, &[], targets)
    }

    /// Applies `m` to `targets` on the subspace where every qubit in `controls` is 1.
    pub fn apply_controlled(&mut self, m: &Matrix, controls: &[usize], targets: &[usize]) -> Result<()> {
        check_targets(self.n, targets)?;
        check_targets(self.n, controls)?;
        if let Some(&q) = controls.iter().find(|q| targets.contains(q)) {
            return Err(Error::DuplicateTarget(q));
        }
        let k = targets.len();
        if m.nrows() != 1 << k || m.ncols() != 1 << k {
            return Err(Error::DimensionMismatch { dim: m.nrows(), targets: k });
        }
        let cmask = controls.iter().fold(0usize, |acc, &q| acc | (1 << q));
        if k == 1 {
            self.kernel_1q(m, targets[0], cmask);
        } else {
            self.kernel_kq(m, targets, cmask);
        }
        Ok(())
    }

    fn kernel_1q(&mut self, m: &Matrix, t: usize, cmask: usize) {
        let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let stride = 1usize << t;
        for (b, block) in self.amps.chunks_exact_mut(stride << 1).enumerate() {
            let block_base = b * (stride << 1);
            let (lo, hi) = block.split_at_mut(stride);
            for (off, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if (block_base | off) & cmask != cmask {
                    continue;
                }
                let (x, y) = (*a, *b);
                *a = m00 * x + m01 * y;
                *b = m10 * x + m11 * y;
            }
        }
    }

    fn kernel_kq(&mut self, m: &Matrix, targets: &[usize], cmask: usize) {
        let k = targets.len();
        let sub = 1usize << k;
        let offsets: Vec<usize> = (0..sub)
            .map(|j| (0..k).fold(0usize, |acc, b| acc | (((j >> b) & 1) << targets[b])))
            .collect();
        let mut sorted: Vec<usize> = targets.to_vec();
        sorted.sort_unstable();
        let mut gathered = vec![ZERO; sub];
        for t in 0..self.dim() >> k {
            let base = deposit_zero_bits(t, &sorted);
            if base & cmask != cmask {
                continue;
            }
            for (g, off) in gathered.iter_mut().zip(&offsets) {
                *g = self.amps[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (col, g) in gathered.iter().enumerate() {
                    acc += m[(r, col)] * g;
                }
                self.amps[base | off] = acc;
            }
        }
    }

    /// Applies a Pauli string on the full register (bit flips and phases, no matrix).
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: p.n() });
        }
        let mut xm = 0usize;
        let mut zm = 0usize;
        let mut ys = 0u8;
        for q in 0..self.n {
            let (xb, zb) = p.get(q).bits();
            xm |= (xb as usize) << q;
            zm |= (zb as usize) << q;
            ys += (xb && zb) as u8;
        }
        // σ = i^{#Y} X^x Z^z
        let base = p.phase_factor() * i_pow(ys % 4);
        let old = std::mem::take(&mut self.amps);
        let mut amps = vec![ZERO; old.len()];
        for (j, a) in old.into_iter().enumerate() {
            let sign = if (zm & j).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            amps[j ^ xm] = a * base * sign;
        }
        self.amps = amps;
        Ok(())
    }

    /// `⟨ψ| M |ψ⟩` for `m` acting on `targets`.
    pub fn expectation(&self, m: &Matrix, targets: &[usize]) -> Result<Complex64> {
        let mut applied = self.clone();
        applied.apply_matrix(m, targets)?;
        self.inner(&applied)
    }

    /// Probability that qubit `q` reads `bit`.
    pub fn probability(&self, q: usize, bit: u8) -> Result<f64> {
        self.check_qubit(q)?;
        let want = (bit as usize & 1) << q;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & (1 << q) == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects qubit `q` onto `bit` and renormalises; returns the outcome probability.
    pub fn project(&mut self, q: usize, bit: u8) -> Result<f64> {
        let p = self.probability(q, bit)?;
        let want = (bit as usize & 1) << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & (1 << q) != want {
                *a = ZERO;
            }
        }
        if p > 0.0 {
            self.renormalize();
        }
        Ok(p)
    }

    /// All non-negligible outcomes of measuring `q`, with their collapsed states.
    pub fn measure_branches(&self, q: usize) -> Result<Vec<(u8, f64, StateVector)>> {
        self.check_qubit(q)?;
        let mut out = Vec::with_capacity(2);
        for bit in 0..2u8 {
            let mut s = self.clone();
            let p = s.project(q, bit)?;
            if p > PRUNE_PROB {
                out.push((bit, p, s));
            }
        }
        Ok(out)
    }

    /// Samples a measurement of `q` and collapses in place.
    pub fn measure_sample<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<u8> {
        let p1 = self.probability(q, 1)?;
        let bit = u8::from(rng.random::<f64>() < p1);
        self.project(q, bit)?;
        Ok(bit)
    }

    /// Forces qubit `q` to `|0⟩` by sampling a measurement and flipping a 1.
    pub fn reset_sample<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<()> {
        if self.measure_sample(q, rng)? == 1 {
            self.flip(q);
        }
        Ok(())
    }

    /// Reset in enumeration mode: one branch per possible pre-reset value.
    pub fn reset_branches(&self, q: usize) -> Result<Vec<(f64, StateVector)>> {
        Ok(self
            .measure_branches(q)?
            .into_iter()
            .map(|(bit, p, mut s)| {
                if bit == 1 {
                    s.flip(q);
                }
                (p, s)
            })
            .collect())
    }

    /// Bit flip on `q` by index permutation.
    pub fn flip(&mut self, q: usize) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            lo.swap_with_slice(hi);
        }
    }

    /// Removes qubit `q`, keeping the `bit` component (renormalised).
    pub fn discard(&self, q: usize, bit: u8) -> Result<StateVector> {
        self.check_qubit(q)?;
        let high = (bit as usize & 1) << q;
        let amps = (0..self.dim() >> 1).map(|t| self.amps[deposit_zero_bits(t, &[q]) | high]).collect();
        StateVector::from_unnormalized(amps)
    }

    fn check_pair(&self, q1: usize, q2: usize) -> Result<()> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(Error::DuplicateTarget(q1));
        }
        Ok(())
    }

    /// Projects `(q1, q2)` onto the Bell vector `(|0x⟩ + (-1)^z |1x̄⟩)/√2`, where the first
    /// letter of each ket is `q1`; returns the outcome probability and renormalises.
    pub fn bell_project(&mut self, q1: usize, q2: usize, x: u8, z: u8) -> Result<f64> {
        self.check_pair(q1, q2)?;
        let (b1, b2) = (1usize << q1, 1usize << q2);
        let sign = if z & 1 == 1 { -1.0 } else { 1.0 };
        let x = (x & 1) as usize;
        let (first, second) = (x * b2, b1 | ((1 - x) * b2));
        let mut prob = 0.0;
        for base in 0..self.dim() {
            if base & (b1 | b2) != 0 {
                continue;
            }
            let overlap = (self.amps[base | first] + sign * self.amps[base | second]) * std::f64::consts::FRAC_1_SQRT_2;
            prob += overlap.norm_sqr();
            for off in [0, b2, b1, b1 | b2] {
                self.amps[base | off] = ZERO;
            }
            self.amps[base | first] = overlap * std::f64::consts::FRAC_1_SQRT_2;
            self.amps[base | second] = overlap * sign * std::f64::consts::FRAC_1_SQRT_2;
        }
        if prob > 0.0 {
            self.renormalize();
        }
        Ok(prob)
    }

    /// The four Bell outcomes in `(x, z)` order `00, 01, 10, 11`.
    pub fn bell_branches(&self, q1: usize, q2: usize) -> Result<Vec<BellOutcome>> {
        self.check_pair(q1, q2)?;
        let mut out = Vec::with_capacity(4);
        for x in 0..2u8 {
            for z in 0..2u8 {
                let mut s = self.clone();
                let p = s.bell_project(q1, q2, x, z)?;
                out.push(BellOutcome { x, z, probability: p, state: (p > PRUNE_PROB).then_some(s) });
            }
        }
        Ok(out)
    }

    /// Samples a Bell measurement and collapses in place.
    pub fn bell_sample<R: Rng + ?Sized>(&mut self, q1: usize, q2: usize, rng: &mut R) -> Result<(u8, u8)> {
        let outcomes = self.bell_branches(q1, q2)?;
        let mut r = rng.random::<f64>();
        let mut chosen = None;
        for o in &outcomes {
            if o.state.is_some() {
                chosen = Some(o);
                if r < o.probability {
                    break;
                }
                r -= o.probability;
            }
        }
        let o = chosen.expect("some outcome has positive probability");
        *self = o.state.clone().expect("chosen outcome has a state");
        Ok((o.x, o.z))
    }

    /// The pure state of `qubits` (in that order), provided the register factorises as
    /// `|kept⟩ ⊗ |rest⟩` within `tol` (checked through the fidelity of the best factor).
    pub fn extract(&self, qubits: &[usize], tol: f64) -> Result<StateVector> {
        check_targets(self.n, qubits)?;
        let rest: Vec<usize> = (0..self.n).filter(|q| !qubits.contains(q)).collect();
        let k = qubits.len();
        let split = |i: usize| -> (usize, usize) {
            let kept = qubits.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
            let other = rest.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
            (kept, other)
        };
        // columns indexed by the rest, rows by the kept qubits
        let rows = 1usize << k;
        let cols = 1usize << rest.len();
        let mut mat = vec![ZERO; rows * cols];
        for (i, a) in self.amps.iter().enumerate() {
            let (r, col) = split(i);
            mat[col * rows + r] = *a;
        }
        let best = (0..cols)
            .max_by(|&a, &b| {
                let na: f64 = mat[a * rows..(a + 1) * rows].iter().map(|z| z.norm_sqr()).sum();
                let nb: f64 = mat[b * rows..(b + 1) * rows].iter().map(|z| z.norm_sqr()).sum();
                na.total_cmp(&nb)
            })
            .expect("at least one column");
        let candidate = StateVector::from_unnormalized(mat[best * rows..(best + 1) * rows].to_vec())?;
        // weight of the register inside span{candidate} ⊗ everything
        let captured: f64 = (0..cols)
            .map(|col| {
                mat[col * rows..(col + 1) * rows]
                    .iter()
                    .zip(&candidate.amps)
                    .map(|(a, c)| c.conj() * a)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        let total = self.norm().powi(2);
        let fidelity = captured / total;
        if fidelity < 1.0 - tol {
            return Err(Error::NotProduct { fidelity });
        }
        Ok(candidate)
    }
}

/// Inserts zero bits at the (ascending) `positions` of `t`.
fn deposit_zero_bits(mut t: usize, positions: &[usize]) -> usize {
    for &p in positions {
        let low = t & ((1 << p) - 1);
        t = ((t >> p) << (p + 1)) | low;
    }
    t
}

fn check_targets(n: usize, targets: &[usize]) -> Result<()> {
    for (i, &q) in targets.iter().enumerate() {
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, n });
        }
        if targets[..i].contains(&q) {
            return Err(Error::DuplicateTarget(q));
        }
    }
    Ok(())
}
