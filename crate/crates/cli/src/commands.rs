//! Subcommands. Each returns one JSON document.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use teleportal::clifford::HierarchyClassifier;
use teleportal::ftmeasure::{
    analytic_after_state, analytic_final_state, consistent_input, eigen_input, fault_sweep, ft_measure,
    nested_measure, BlockSpec, FaultSpec, FtProtocol, MeasurableOperator, NestedSpec,
};
use teleportal::statevector::{run_circuit, Branch, Mode, RunOutcome};
use teleportal::teleport::{
    amplitude_entries, branch_fidelities, prepare_psi_u, stabilizer_conditions, teleport, teleport_gate,
    AmplitudeEntry, PrepMethod,
};
use teleportal::{GateUnitary, Pauli, PauliString, StateVector};

use crate::grammar::{self, ParseError};

pub const SCHEMA_VERSION: u32 = 1;

/// Digits kept for every float in the output.
const DECIMALS: i32 = 12;

/// Fidelity threshold reported as a pass.
const FIDELITY_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Core(#[from] teleportal::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "parse",
            CliError::Core(_) => "simulation",
            CliError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Parse(p) = self {
            err["line"] = json!(p.line);
            err["column"] = json!(p.column);
        }
        json!({ "schema_version": SCHEMA_VERSION, "error": err })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "teleportal", version, about = "Teleportation-based gate constructions, simulated exactly")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a circuit file and report every branch (or one sampled trajectory).
    Simulate(SimulateArgs),
    /// Place a gate in the Clifford hierarchy.
    Classify(ClassifyArgs),
    /// Teleport a state through a gate and compare with applying the gate directly.
    Teleport(TeleportArgs),
    /// Prepare the gate ancilla |Ψ_U⟩ and report its stabilizer eigenvalues.
    PrepareAncilla(PrepareArgs),
    /// Run the cat-state measurement protocol, optionally nested.
    FtDemo(FtDemoArgs),
    /// Inject every single fault into the measurement protocol.
    FaultSweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Enumerate,
    Sample,
}

#[derive(Debug, Clone, Args)]
pub struct ModeArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Enumerate)]
    pub mode: ModeArg,
    /// Seed for sampling and for random inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModeArgs {
    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Enumerate => Mode::Enumerate,
            ModeArg::Sample => Mode::Sample(self.seed),
        }
    }

    fn name(&self) -> &'static str {
        match self.mode {
            ModeArg::Enumerate => "enumerate",
            ModeArg::Sample => "sample",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Initial state; defaults to all zeros. Same forms as `teleport --input`.
    #[arg(long)]
    pub input: Option<String>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub gate: String,
    #[arg(long, default_value_t = 5)]
    pub kmax: u32,
}

#[derive(Debug, Args)]
pub struct TeleportArgs {
    #[arg(long, default_value = "I")]
    pub gate: String,
    /// `random`, `zero`, a ket such as `01`, or comma-separated amplitudes.
    #[arg(long, default_value = "random")]
    pub input: String,
    /// Number of qubits; a multiple of the gate width applies the gate on each group.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub mode: ModeArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Measurement,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub gate: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
    pub method: MethodArg,
    #[command(flatten)]
    pub mode: ModeArgs,
}

#[derive(Debug, Args)]
pub struct FtDemoArgs {
    /// Pauli string measured on the block, e.g. `ZZZ`. With `--nested` it is the outer
    /// operator and its width sets the outer cat size.
    #[arg(long)]
    pub operator: String,
    /// `0,1,2` (unencoded) or `rep3:0,1,2`; defaults to the first qubits.
    #[arg(long)]
    pub block: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// `eigen`, `random`, a ket, or amplitudes. Ignored with `--nested`.
    #[arg(long, default_value = "eigen")]
    pub input: String,
    /// Fault `OP:QUBIT:PAULI`, repeatable.
    #[arg(long = "fault")]
    pub faults: Vec<String>,
    #[arg(long)]
    pub nested: bool,
    /// Operator for the inner measurement.
    #[arg(long)]
    pub inner: Option<String>,
    /// Known amplitude of the +1 component.
    #[arg(long, default_value = "0.7071067811865476")]
    pub alpha: String,
    /// Known amplitude of the -1 component.
    #[arg(long, default_value = "0.7071067811865476")]
    pub beta: String,
    #[command(flatten)]
    pub mode: ModeArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `OP/BLOCK/R`, e.g. `ZZZ/0,1,2/3` or `ZZZ/rep3:0,1,2/3`.
    #[arg(long)]
    pub protocol: String,
    /// Also inject faults on data qubits.
    #[arg(long)]
    pub include_data: bool,
    /// Seed of the random +1 eigenstate used as data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Omit the per-fault reports.
    #[arg(long)]
    pub summary_only: bool,
}

pub fn run(cli: &Cli) -> CliResult<Value> {
    let (command, body) = match &cli.command {
        Command::Simulate(a) => ("simulate", simulate(a)?),
        Command::Classify(a) => ("classify", classify(a)?),
        Command::Teleport(a) => ("teleport", teleport_cmd(a)?),
        Command::PrepareAncilla(a) => ("prepare-ancilla", prepare(a)?),
        Command::FtDemo(a) => ("ft-demo", ft_demo(a)?),
        Command::FaultSweep(a) => ("fault-sweep", sweep(a)?),
    };
    let mut doc = json!({ "schema_version": SCHEMA_VERSION, "command": command });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    Ok(round_floats(doc))
}

fn round(v: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    (v * scale).round() / scale + 0.0
}

/// Rounds every float in `v` to [`DECIMALS`] digits.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json!(round(n.as_f64().expect("f64"))),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn amplitudes(s: &StateVector) -> Vec<AmplitudeEntry> {
    amplitude_entries(s, DECIMALS)
}

fn bits(cbits: &[bool]) -> String {
    cbits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn gate_named(name: &str) -> CliResult<GateUnitary> {
    Ok(GateUnitary::named(name)?)
}

/// `gate` repeated on consecutive groups until it covers `n` qubits.
fn widen(gate: GateUnitary, n: Option<usize>) -> CliResult<GateUnitary> {
    let Some(n) = n else { return Ok(gate) };
    if n == 0 || n % gate.n() != 0 {
        return Err(usage(format!("--n {n} is not a multiple of the {}-qubit gate {gate}", gate.n())));
    }
    let name = if n == gate.n() { gate.to_string() } else { format!("{gate}^{}", n / gate.n()) };
    let mut acc = gate.clone();
    for _ in 1..n / gate.n() {
        acc = acc.tensor(&gate);
    }
    Ok(acc.with_name(name))
}

/// `random`, `zero`, `plus`, a ket of `n` bits, or `2^n` comma-separated amplitudes.
pub fn parse_state(spec: &str, n: usize, seed: u64) -> CliResult<StateVector> {
    let spec = spec.trim();
    match spec {
        "random" => return Ok(StateVector::random(n, &mut ChaCha8Rng::seed_from_u64(seed))),
        "zero" => return Ok(StateVector::zero(n)),
        "plus" => {
            let amp = Complex64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
            return Ok(StateVector::from_amplitudes(vec![amp; 1 << n])?);
        }
        _ => {}
    }
    let ket = spec.trim_start_matches('|').trim_end_matches(['>', '⟩']);
    if !ket.is_empty() && ket.chars().all(|c| c == '0' || c == '1') && !spec.contains(',') {
        if ket.len() != n {
            return Err(usage(format!("ket {spec:?} has {} qubits, expected {n}", ket.len())));
        }
        return Ok(StateVector::from_ket(ket)?);
    }
    let amps = spec.split(',').map(grammar::parse_complex).collect::<std::result::Result<Vec<_>, _>>()?;
    if amps.len() != 1 << n {
        return Err(usage(format!("{} amplitudes given, expected {}", amps.len(), 1usize << n)));
    }
    Ok(StateVector::from_unnormalized(amps)?)
}

fn simulate(a: &SimulateArgs) -> CliResult<Value> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| CliError::Io(format!("{}: {e}", a.file.display())))?;
    let circuit = grammar::parse_circuit(&text)?;
    let initial = match &a.input {
        Some(spec) => parse_state(spec, circuit.n_qubits(), a.mode.seed)?,
        None => StateVector::zero(circuit.n_qubits()),
    };
    let branches: Vec<Branch> = match run_circuit(&circuit, &initial, a.mode.mode())? {
        RunOutcome::Branches(b) => b.branches,
        RunOutcome::Trajectory(b) => vec![b],
    };
    let branches: Vec<Value> = branches
        .iter()
        .map(|b| json!({ "cbits": bits(&b.cbits), "probability": b.probability, "amplitudes": amplitudes(&b.state) }))
        .collect();
    Ok(json!({
        "n_qubits": circuit.n_qubits(),
        "n_cbits": circuit.n_cbits(),
        "mode": a.mode.name(),
        "warnings": circuit.lint(),
        "branches": branches,
    }))
}

fn classify(a: &ClassifyArgs) -> CliResult<Value> {
    let gate = gate_named(&a.gate)?;
    let c = HierarchyClassifier::new().classify(&gate, a.kmax)?;
    Ok(json!({
        "gate": gate.to_string(),
        "n": gate.n(),
        "kmax": a.kmax,
        "level": c.level,
        "witness": c.witness.map(|w| w.to_string()),
    }))
}

fn teleport_cmd(a: &TeleportArgs) -> CliResult<Value> {
    let gate = widen(gate_named(&a.gate)?, a.n)?;
    let input = parse_state(&a.input, gate.n(), a.mode.seed)?;
    let mut expected = input.clone();
    expected.apply_gate(&gate, &(0..gate.n()).collect::<Vec<_>>())?;
    let plain = gate.n() == 1 && gate.name() == Some("I");
    let branches =
        if plain { teleport(&input, a.mode.mode())? } else { teleport_gate(&gate, &input, a.mode.mode())? };
    let report = branch_fidelities(&branches, &expected)?;
    let min = report.iter().map(|f| f.fidelity).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "gate": gate.to_string(),
        "n": gate.n(),
        "circuit": if plain { "teleport" } else { "gate-teleport" },
        "mode": a.mode.name(),
        "input": amplitudes(&input),
        "branches": report,
        "branch_count": report.len(),
        "min_fidelity": min,
        "all_match": min >= 1.0 - FIDELITY_TOL,
    }))
}

#[derive(Serialize)]
struct StabilizerReport {
    label: String,
    pauli: Option<String>,
    expectation: f64,
}

fn prepare(a: &PrepareArgs) -> CliResult<Value> {
    let gate = widen(gate_named(&a.gate)?, a.n)?;
    let method = match a.method {
        MethodArg::Direct => PrepMethod::Direct,
        MethodArg::Measurement => PrepMethod::Measurement,
    };
    let conds = stabilizer_conditions(&gate)?;
    let reference = prepare_psi_u(&gate, PrepMethod::Direct, Mode::Enumerate)?.remove(0).resource.state;
    let branches = prepare_psi_u(&gate, method, a.mode.mode())?
        .into_iter()
        .map(|b| {
            let stabilizers = conds
                .iter()
                .map(|c| {
                    Ok(StabilizerReport {
                        label: c.label(),
                        pauli: c.pauli.as_ref().map(|p| p.to_string()),
                        expectation: c.expectation(&b.resource.state)?,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let stabilized = stabilizers.iter().all(|s| (s.expectation - 1.0).abs() < FIDELITY_TOL);
            Ok(json!({
                "outcomes": b.outcomes,
                "probability": b.probability,
                "amplitudes": b.resource.amplitude_entries(DECIMALS),
                "stabilizers": stabilizers,
                "stabilized": stabilized,
                "matches_direct": b.resource.state.equal_up_to_global_phase(&reference, FIDELITY_TOL)?,
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({
        "gate": gate.to_string(),
        "n": gate.n(),
        "method": match a.method { MethodArg::Direct => "direct", MethodArg::Measurement => "measurement" },
        "mode": a.mode.name(),
        "roles": (0..gate.n()).map(|i| format!("upper{i}")).chain((0..gate.n()).map(|i| format!("lower{i}"))).collect::<Vec<_>>(),
        "branches": branches,
    }))
}

/// `0,1,2`, `unencoded:0,1,2` or `rep3:0,1,2`.
pub fn parse_block(spec: &str) -> CliResult<BlockSpec> {
    let (code, list) = match spec.split_once(':') {
        Some((code, list)) => (code.trim(), list),
        None => ("unencoded", spec),
    };
    let qubits = list
        .split(',')
        .map(|q| q.trim().parse::<usize>().map_err(|_| usage(format!("bad qubit {q:?} in block {spec:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    match code {
        "unencoded" => Ok(BlockSpec::unencoded(qubits)),
        "rep3" | "repetition3" => Ok(BlockSpec::repetition3(qubits)),
        other => Err(usage(format!("unknown block code {other:?}"))),
    }
}

/// `OP:QUBIT:PAULI`, e.g. `12:3:X`.
pub fn parse_fault(spec: &str) -> CliResult<FaultSpec> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let bad = || usage(format!("fault {spec:?} is not OP:QUBIT:PAULI"));
    let [op, qubit, pauli] = parts[..] else { return Err(bad()) };
    let pauli = match pauli {
        "X" => Pauli::X,
        "Y" => Pauli::Y,
        "Z" => Pauli::Z,
        _ => return Err(bad()),
    };
    Ok(FaultSpec { op: op.parse().map_err(|_| bad())?, qubit: qubit.parse().map_err(|_| bad())?, pauli })
}

fn operator(text: &str) -> CliResult<MeasurableOperator> {
    let p: PauliString = text.parse()?;
    Ok(MeasurableOperator::from_pauli(&p)?)
}

fn block_or_default(spec: Option<&str>, width: usize) -> CliResult<BlockSpec> {
    match spec {
        Some(s) => parse_block(s),
        None => Ok(BlockSpec::unencoded((0..width).collect())),
    }
}

fn data_width(block: &BlockSpec) -> usize {
    block.qubits.iter().max().map_or(0, |&m| m + 1)
}

fn ft_demo(a: &FtDemoArgs) -> CliResult<Value> {
    let faults = a.faults.iter().map(|f| parse_fault(f)).collect::<CliResult<Vec<_>>>()?;
    if a.nested {
        return nested_demo(a, &faults);
    }
    let op = operator(&a.operator)?;
    let block = block_or_default(a.block.as_deref(), op.n())?;
    let n = data_width(&block);
    let data = match a.input.as_str() {
        "eigen" => eigen_input(&op, &block, n, a.mode.seed)?,
        other => parse_state(other, n, a.mode.seed)?,
    };
    let res = ft_measure(&data, &op, &block, a.r, &faults, a.mode.mode())?;
    let branches = res
        .branches
        .iter()
        .map(|b| {
            Ok(json!({
                "probability": b.probability,
                "trial_bits": b.trial_bits,
                "majority": b.majority,
                "cat_retries": b.cat_retries,
                "records": b.records,
                "data": amplitudes(&b.data),
                "expectation": b.data.expectation(op.matrix(), &block.qubits)?.re,
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({
        "operator": op.name(),
        "block": block.qubits,
        "code": block.code,
        "r": a.r,
        "mode": a.mode.name(),
        "faults": faults,
        "layout": res.layout,
        "n_ops": res.schedule.len(),
        "input": amplitudes(&data),
        "branches": branches,
    }))
}

fn nested_demo(a: &FtDemoArgs, faults: &[FaultSpec]) -> CliResult<Value> {
    let outer = operator(&a.operator)?;
    let inner = operator(a.inner.as_deref().ok_or_else(|| usage("--nested needs --inner OP"))?)?;
    let block = block_or_default(a.block.as_deref(), inner.n())?;
    let n = data_width(&block);
    let (alpha, beta) = (grammar::parse_complex(&a.alpha)?, grammar::parse_complex(&a.beta)?);
    let phi0 = eigen_input(&inner, &block, n, a.mode.seed)?;
    let data = consistent_input(&inner, &block, &phi0, alpha, beta)?;
    let spec = NestedSpec { op: inner.clone(), block: block.clone(), n_outer: outer.n(), r: a.r, alpha, beta };
    let res = nested_measure(&data, &spec, faults, a.mode.mode())?;
    let after = analytic_after_state(&data, &spec)?;
    let fin = analytic_final_state(&data, &spec)?;
    let branches = res
        .branches
        .iter()
        .map(|b| {
            Ok(json!({
                "probability": b.probability,
                "after_overlap": b.intermediate.fidelity(&after)?,
                "final_overlap": b.final_state.fidelity(&fin)?,
                "inner_zero_fidelity": b.inner_zero_fidelity,
                "outer_coherence": b.outer_coherence,
                "outer_collapsed": res.outer_collapsed(b),
                "cat_retries": b.cat_retries,
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({
        "outer_operator": outer.name(),
        "outer_cat_size": outer.n(),
        "inner_operator": inner.name(),
        "block": block.qubits,
        "code": block.code,
        "r": a.r,
        "alpha": [alpha.re, alpha.im],
        "beta": [beta.re, beta.im],
        "mode": a.mode.name(),
        "faults": faults,
        "layout": res.layout,
        "n_ops": res.schedule.len(),
        "ideal_coherence": res.ideal_coherence,
        "phi": amplitudes(&data),
        "phi0": amplitudes(&phi0),
        "branches": branches,
    }))
}

/// `OP/BLOCK/R`.
pub fn parse_protocol(spec: &str, seed: u64) -> CliResult<FtProtocol> {
    let parts: Vec<&str> = spec.split('/').map(str::trim).collect();
    let (op, block, r) = match parts[..] {
        [op] => (op, None, 3),
        [op, block] => (op, Some(block), 3),
        [op, block, r] => (op, Some(block), r.parse().map_err(|_| usage(format!("bad trial count {r:?}")))?),
        _ => return Err(usage(format!("protocol {spec:?} is not OP/BLOCK/R"))),
    };
    let op = operator(op)?;
    let block = block_or_default(block, op.n())?;
    let data = eigen_input(&op, &block, data_width(&block), seed)?;
    Ok(FtProtocol { op, block, r, data })
}

fn sweep(a: &SweepArgs) -> CliResult<Value> {
    let proto = parse_protocol(&a.protocol, a.seed)?;
    let mut report = fault_sweep(&proto, a.include_data)?;
    let s = &report.summary;
    let checks = json!({
        "ancilla_weight_at_most_one": s.max_ancilla_weight <= 1,
        "ancilla_majority_preserved": report.reports.iter().filter(|r| r.role != "data").all(|r| !r.majority_changed),
        "ancilla_violations": s.ancilla_violations,
    });
    if a.summary_only {
        report.reports.clear();
    }
    let mut v = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    v["checks"] = checks;
    Ok(v)
}

