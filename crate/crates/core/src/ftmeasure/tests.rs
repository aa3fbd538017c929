use super::*;
use crate::linalg::c;
use rand::SeedableRng;

fn op(s: &str) -> MeasurableOperator {
    MeasurableOperator::parse(s).unwrap()
}

fn random_state(n: usize, seed: u64) -> StateVector {
    StateVector::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn proto(name: &str, block: BlockSpec, seed: u64) -> FtProtocol {
    let op = op(name);
    let data = eigen_input(&op, &block, block.len(), seed).unwrap();
    FtProtocol { op, block, r: 3, data }
}

#[test]
fn pauli_operators_get_anticommuting_corrections() {
    let zzz = op("ZZZ");
    assert_eq!(zzz.n(), 3);
    assert_eq!(zzz.factors().unwrap().len(), 3);
    let x0 = PauliString::single(3, 0, Pauli::X).to_matrix().unwrap();
    assert!(linalg::max_abs_diff(zzz.correction(), &x0) < 1e-12);
    let xx = op("XX");
    let z0 = PauliString::single(2, 0, Pauli::Z).to_matrix().unwrap();
    assert!(linalg::max_abs_diff(xx.correction(), &z0) < 1e-12);
    assert_eq!(op("-ZZ").name(), "-ZZ");
}

#[test]
fn operator_validation() {
    let t = crate::GateUnitary::named("T").unwrap();
    let x = Pauli::X.matrix();
    let z = Pauli::Z.matrix();
    assert_eq!(MeasurableOperator::new("T", t.matrix().clone(), x.clone()).unwrap_err(), Error::NotInvolution);
    assert!(matches!(MeasurableOperator::new("Z", z.clone(), z.clone()), Err(Error::InvalidCorrection(_))));
    let skew = linalg::from_rows(&[&[c(1.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(-1.0, 0.0)]]);
    assert!(matches!(MeasurableOperator::new("skew", skew, x.clone()), Err(Error::NotUnitary { .. })));
    let dense = MeasurableOperator::new("Z", z, x).unwrap();
    assert_eq!(dense.factors().unwrap_err(), Error::NotTransversal);
    assert!(MeasurableOperator::parse("iZ").is_err());
    assert!(MeasurableOperator::parse("II").is_err());
}

#[test]
fn nonft_measurement_splits_on_eigenspaces() {
    // 0.6|00⟩ + 0.8i|01⟩, written qubit 0 first: ZZ = +1 on the first term, -1 on the second
    let mut amps = vec![c(0.0, 0.0); 4];
    amps[0] = c(0.6, 0.0);
    amps[2] = c(0.0, 0.8);
    let s = StateVector::from_amplitudes(amps).unwrap();
    let branches = measure_nonft(&s, &op("ZZ"), &[0, 1], Mode::Enumerate).unwrap();
    assert_eq!(branches.len(), 2);
    assert_eq!(branches[0].outcome, 0);
    assert!((branches[0].probability - 0.36).abs() < 1e-12);
    assert!((branches[1].probability - 0.64).abs() < 1e-12);
    assert!(branches[0].state.equal_up_to_global_phase(&StateVector::basis(2, 0), 1e-12).unwrap());
    assert!(branches[1].state.equal_up_to_global_phase(&StateVector::basis(2, 2), 1e-12).unwrap());

    assert_eq!(measure_nonft(&s, &op("ZZ"), &[0, 1], Mode::Sample(3)).unwrap().len(), 1);
    assert!(matches!(
        measure_nonft(&s, &op("ZZZ"), &[0, 1], Mode::Enumerate),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn coherent_measurement_factorizes_only_on_consistent_inputs() {
    let xx = op("XX");
    let block = BlockSpec::unencoded(vec![0, 1]);
    let phi0 = eigen_input(&xx, &block, 2, 4).unwrap();
    let good = consistent_input(&xx, &block, &phi0, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let res = measure_coherent(&good, &xx, &[0, 1], Mode::Enumerate).unwrap();
    assert!(res.control_factorizes);
    for b in &res.branches {
        assert!(b.state.equal_up_to_global_phase(&phi0, 1e-10).unwrap());
    }
    let generic = random_state(2, 11);
    assert!(!measure_coherent(&generic, &xx, &[0, 1], Mode::Enumerate).unwrap().control_factorizes);
}

#[test]
fn cat_preparation_and_verification() {
    let cat = prepare_cat(3).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((cat.amplitude(0).re - s).abs() < 1e-12);
    assert!((cat.amplitude(7).re - s).abs() < 1e-12);
    assert!(prepare_cat(0).is_err());
    assert_eq!(prepare_cat(1).unwrap().amplitude(1).re, s);

    let clean = verify_cat(&cat, &[0, 1, 2], Mode::Enumerate).unwrap();
    assert_eq!(clean.len(), 1);
    assert!(clean[0].passed);
    assert!((clean[0].probability - 1.0).abs() < 1e-12);

    let mut faulty = cat.clone();
    faulty.apply_pauli(&PauliString::single(3, 1, Pauli::X)).unwrap();
    let checks = verify_cat(&faulty, &[0, 1, 2], Mode::Enumerate).unwrap();
    assert!(checks.iter().all(|c| !c.passed && c.comparisons == vec![1, 1]));

    // flipping every qubit maps the cat to itself
    let mut flipped = cat;
    for q in 0..3 {
        flipped.apply_pauli(&PauliString::single(3, q, Pauli::X)).unwrap();
    }
    assert!(verify_cat(&flipped, &[0, 1, 2], Mode::Enumerate).unwrap()[0].passed);
}

#[test]
fn fault_free_runs_are_deterministic_on_eigenstates() {
    let zzz = op("ZZZ");
    let block = BlockSpec::unencoded(vec![0, 1, 2]);
    let plus = eigen_input(&zzz, &block, 3, 1).unwrap();
    let res = ft_measure(&plus, &zzz, &block, 3, &[], Mode::Enumerate).unwrap();
    assert_eq!(res.branches.len(), 1);
    let b = &res.branches[0];
    assert_eq!((b.trial_bits.clone(), b.majority), (vec![0, 0, 0], 0));
    assert!(b.data.equal_up_to_global_phase(&plus, 1e-10).unwrap());
    assert_eq!(b.records.len(), 3);

    let mut minus = plus.clone();
    minus.apply_matrix(zzz.correction(), &[0, 1, 2]).unwrap();
    let res = ft_measure(&minus, &zzz, &block, 3, &[], Mode::Enumerate).unwrap();
    assert_eq!(res.branches.len(), 1);
    assert_eq!((res.branches[0].trial_bits.clone(), res.branches[0].majority), (vec![1, 1, 1], 1));
    assert!(res.branches[0].data.equal_up_to_global_phase(&plus, 1e-10).unwrap());
}

#[test]
fn general_inputs_branch_with_born_probabilities() {
    let xxx = op("XXX");
    let block = BlockSpec::unencoded(vec![0, 1, 2]);
    let psi = random_state(3, 5);
    let p_plus = psi.expectation(&xxx.projector(1.0), &[0, 1, 2]).unwrap().re;
    let res = ft_measure(&psi, &xxx, &block, 3, &[], Mode::Enumerate).unwrap();
    assert_eq!(res.branches.len(), 2);
    let total: f64 = res.branches.iter().map(|b| b.probability).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let zero = res.branches.iter().find(|b| b.majority == 0).unwrap();
    assert!((zero.probability - p_plus).abs() < 1e-10);
    for b in &res.branches {
        assert!(b.trial_bits.iter().all(|&t| t == b.majority));
        let back = b.data.expectation(xxx.matrix(), &[0, 1, 2]).unwrap().re;
        assert!((back - 1.0).abs() < 1e-10);
    }
    assert_eq!(ft_measure(&psi, &xxx, &block, 3, &[], Mode::Sample(9)).unwrap().branches.len(), 1);
}

#[test]
fn invalid_protocol_arguments() {
    let zz = op("ZZ");
    let s = StateVector::zero(2);
    let block = BlockSpec::unencoded(vec![0, 1]);
    assert!(ft_measure(&s, &zz, &block, 0, &[], Mode::Enumerate).is_err());
    assert!(ft_measure(&s, &zz, &BlockSpec::unencoded(vec![0, 2]), 3, &[], Mode::Enumerate).is_err());
    assert!(ft_measure(&s, &zz, &BlockSpec::repetition3(vec![0, 1]), 3, &[], Mode::Enumerate).is_err());
    assert!(ft_measure(&s, &op("ZZZ"), &block, 3, &[], Mode::Enumerate).is_err());
    let late = FaultSpec { op: 10_000, qubit: 0, pauli: Pauli::X };
    assert!(ft_measure(&s, &zz, &block, 3, &[late], Mode::Enumerate).is_err());
}

#[test]
fn bad_cat_is_reprepared() {
    let zzz = op("ZZZ");
    let block = BlockSpec::unencoded(vec![0, 1, 2]);
    let plus = eigen_input(&zzz, &block, 3, 2).unwrap();
    let clean = ft_measure(&plus, &zzz, &block, 3, &[], Mode::Enumerate).unwrap();
    let first_cnot = clean.schedule.iter().find(|e| e.label == "cat-cnot").unwrap().index;
    // X on the middle cat qubit half-way through the ladder
    let fault = FaultSpec { op: first_cnot, qubit: clean.layout.cat[1], pauli: Pauli::X };
    let res = ft_measure(&plus, &zzz, &block, 3, &[fault], Mode::Enumerate).unwrap();
    assert!(res.branches.iter().all(|b| b.cat_retries == 1 && b.majority == 0));
    assert!(res.branches.iter().all(|b| b.data.equal_up_to_global_phase(&plus, 1e-10).unwrap()));
}

#[test]
fn single_ancilla_faults_stay_confined() {
    for name in ["ZZZ", "XXX", "ZZ"] {
        let n = name.len();
        let p = proto(name, BlockSpec::unencoded((0..n).collect()), 7);
        let rep = fault_sweep(&p, false).unwrap();
        assert!(rep.summary.ancilla_locations > 0);
        assert_eq!(rep.summary.ancilla_violations, 0, "{name}");
        assert!(rep.summary.max_ancilla_weight <= 1, "{name}");
        assert_eq!(rep.summary.data_locations, 0);
    }
}

#[test]
fn unencoded_data_faults_in_early_trials_flip_the_majority() {
    let p = proto("ZZZ", BlockSpec::unencoded(vec![0, 1, 2]), 7);
    let rep = fault_sweep(&p, true).unwrap();
    let bad: Vec<_> = rep.reports.iter().filter(|r| r.is_violation()).collect();
    assert!(!bad.is_empty());
    assert!(bad.iter().all(|r| r.role == "data" && r.fault.pauli != Pauli::Z && r.majority_changed));
}

#[test]
fn repetition_code_absorbs_data_faults_between_trials() {
    let p = proto("ZZZ", BlockSpec::repetition3(vec![0, 1, 2]), 7);
    let rep = fault_sweep(&p, true).unwrap();
    assert_eq!(rep.summary.ancilla_violations, 0);
    let on_measurement: Vec<_> = rep.reports.iter().filter(|r| r.role == "data" && r.label == "controlled-m").collect();
    assert!(!on_measurement.is_empty());
    assert!(on_measurement.iter().all(|r| !r.is_violation()), "{on_measurement:?}");
}

#[test]
fn frame_reports_agree_with_state_vectors() {
    let p = proto("XXX", BlockSpec::unencoded(vec![0, 1, 2]), 3);
    let rep = fault_sweep(&p, true).unwrap();
    for r in rep.reports.iter().filter(|r| r.method == Propagation::PauliFrame).step_by(3) {
        let exact = fault::propagate_exact(&p, r.fault).unwrap();
        assert_eq!(exact.majority_changed, r.majority_changed, "{r:?}");
        assert_eq!(exact.decoded_bit_flipped, r.decoded_bit_flipped, "{r:?}");
        assert!(exact.max_weight() <= r.max_weight(), "{r:?} vs {exact:?}");
    }
}

#[test]
fn propagate_fault_with_custom_partition() {
    let p = proto("ZZZ", BlockSpec::unencoded(vec![0, 1, 2]), 7);
    let f = FaultSpec { op: 0, qubit: 3, pauli: Pauli::X };
    let r = propagate_fault(&p, f, &[vec![0], vec![1, 2]]).unwrap();
    assert_eq!(r.data_weight_per_block.len(), 2);
    assert!(propagate_fault(&p, f, &[vec![0, 1], vec![1, 2]]).is_err());
}

fn nested_spec(alpha: Complex64, beta: Complex64) -> (StateVector, NestedSpec) {
    nested_spec_for("XX", 3, alpha, beta)
}

fn nested_spec_for(name: &str, n_outer: usize, alpha: Complex64, beta: Complex64) -> (StateVector, NestedSpec) {
    let m = op(name);
    let block = BlockSpec::unencoded((0..m.n()).collect());
    let phi0 = eigen_input(&m, &block, m.n(), 21).unwrap();
    let data = consistent_input(&m, &block, &phi0, alpha, beta).unwrap();
    (data, NestedSpec { op: m, block, n_outer, r: 3, alpha, beta })
}

#[test]
fn nested_measurement_matches_the_analytic_states() {
    for (name, n_outer) in [("XX", 2), ("XX", 3), ("Z", 2), ("Z", 3)] {
        let (data, spec) = nested_spec_for(name, n_outer, c(0.8, 0.0), Complex64::from_polar(0.6, 0.7));
        let res = nested_measure(&data, &spec, &[], Mode::Enumerate).unwrap();
        assert_eq!(res.branches.len(), 1);
        let b = &res.branches[0];
        let after = analytic_after_state(&data, &spec).unwrap();
        assert!(b.intermediate.fidelity(&after).unwrap() >= 1.0 - 1e-10, "{name} {n_outer}");
        let fin = analytic_final_state(&data, &spec).unwrap();
        assert!(b.final_state.fidelity(&fin).unwrap() >= 1.0 - 1e-10, "{name} {n_outer}");
        assert!(b.inner_zero_fidelity >= 1.0 - 1e-10);
        assert!(!res.outer_collapsed(b));
    }
}

#[test]
fn single_qubit_operators_use_a_one_qubit_cat() {
    for name in ["Z", "X"] {
        let m = op(name);
        let block = BlockSpec::unencoded(vec![0]);
        let psi = random_state(1, 8);
        let res = ft_measure(&psi, &m, &block, 3, &[], Mode::Enumerate).unwrap();
        assert_eq!(res.branches.len(), 2);
        for b in &res.branches {
            assert!((b.data.expectation(m.matrix(), &[0]).unwrap().re - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn nested_precheck_rejects_wrong_amplitudes() {
    let (data, mut spec) = nested_spec(c(0.8, 0.0), c(0.6, 0.0));
    spec.alpha = c(0.6, 0.0);
    spec.beta = c(0.8, 0.0);
    assert!(matches!(nested_measure(&data, &spec, &[], Mode::Enumerate), Err(Error::InconsistentAmplitudes(_))));
    let (data, mut spec) = nested_spec(c(0.8, 0.0), c(0.6, 0.0));
    spec.beta = c(-0.6, 0.0);
    assert!(matches!(nested_measure(&data, &spec, &[], Mode::Enumerate), Err(Error::InconsistentAmplitudes(_))));
}

#[test]
fn nested_inner_fault_is_reported_as_collapse() {
    let (data, spec) = nested_spec(c(0.8, 0.0), c(0.6, 0.0));
    let clean = nested_measure(&data, &spec, &[], Mode::Enumerate).unwrap();
    let fin = analytic_final_state(&data, &spec).unwrap();
    let lay = &clean.layout;
    let last = clean.schedule.len() - 1;
    let fault = FaultSpec { op: last, qubit: lay.results[0], pauli: Pauli::X };
    let res = nested_measure(&data, &spec, &[fault], Mode::Enumerate).unwrap();
    for b in &res.branches {
        assert!(res.outer_collapsed(b));
        let mut fixed = b.final_state.clone();
        fixed.apply_pauli(&PauliString::single(lay.n_qubits, lay.results[0], Pauli::X)).unwrap();
        assert!(fixed.fidelity(&fin).unwrap() >= 1.0 - 1e-10);
    }
}
