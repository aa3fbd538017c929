use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use teleportal::clifford::hierarchy_level;
use teleportal::ftmeasure::{eigen_input, fault_sweep, BlockSpec, FtProtocol, MeasurableOperator};
use teleportal::statevector::Mode;
use teleportal::teleport::{teleport, teleport_gate};
use teleportal::{GateUnitary, StateVector};

/// A fixed product state with distinct amplitudes on every qubit.
fn product_state(n: usize) -> StateVector {
    (0..n).fold(StateVector::zero(0), |acc, k| {
        let t = 0.3 + 0.2 * k as f64;
        let q = StateVector::from_amplitudes(vec![Complex64::new(t.cos(), 0.0), Complex64::from_polar(t.sin(), t)])
            .expect("normalized");
        acc.tensor(&q)
    })
}

fn gate_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_gate");
    for name in ["H", "CNOT", "TOFFOLI"] {
        let gate = GateUnitary::named(name).unwrap();
        let targets: Vec<usize> = (0..gate.n()).map(|k| 3 * k + 1).collect();
        let state = product_state(12);
        group.bench_function(BenchmarkId::new("n12", name), |b| {
            b.iter_batched_ref(
                || state.clone(),
                |s| s.apply_gate(black_box(&gate), &targets).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn teleportation(c: &mut Criterion) {
    let input = product_state(1);
    c.bench_function("teleport/enumerate", |b| b.iter(|| teleport(black_box(&input), Mode::Enumerate).unwrap()));
    let mut group = c.benchmark_group("teleport_gate");
    group.sample_size(20);
    for name in ["T", "CNOT", "TOFFOLI"] {
        let gate = GateUnitary::named(name).unwrap();
        let input = product_state(gate.n());
        group.bench_function(name, |b| b.iter(|| teleport_gate(&gate, black_box(&input), Mode::Enumerate).unwrap()));
    }
    group.finish();
}

fn classification(c: &mut Criterion) {
    let mut group = c.benchmark_group("hierarchy_level");
    for name in ["T", "CNOT", "TOFFOLI"] {
        let gate = GateUnitary::named(name).unwrap();
        group.bench_function(name, |b| b.iter(|| hierarchy_level(black_box(&gate), 4).unwrap()));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let op = MeasurableOperator::parse("ZZZ").unwrap();
    let block = BlockSpec::unencoded(vec![0, 1, 2]);
    let data = eigen_input(&op, &block, 3, 1).unwrap();
    let proto = FtProtocol { op, block, r: 3, data };
    let mut group = c.benchmark_group("fault_sweep");
    group.sample_size(10);
    group.bench_function("ZZZ_r3", |b| b.iter(|| fault_sweep(black_box(&proto), false).unwrap()));
    group.finish();
}

criterion_group!(benches, gate_apply, teleportation, classification, sweep);
criterion_main!(benches);
