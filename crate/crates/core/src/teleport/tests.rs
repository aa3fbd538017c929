use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::clifford::hierarchy_level;
use crate::linalg::c;
use crate::pauli::Pauli;
use crate::statevector::run_enumerate;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gate(name: &str) -> GateUnitary {
    GateUnitary::named(name).unwrap()
}

fn applied(u: &GateUnitary, s: &StateVector) -> StateVector {
    let mut out = s.clone();
    out.apply_gate(u, &(0..u.n()).collect::<Vec<_>>()).unwrap();
    out
}

/// Every phase-free Pauli `P` with `P|from⟩ ∝ |to⟩`.
fn pauli_relations(from: &StateVector, to: &StateVector) -> Vec<PauliString> {
    PauliString::enumerate(from.n())
        .filter(|p| {
            let mut s = from.clone();
            s.apply_pauli(p).unwrap();
            s.fidelity(to).unwrap() > 1.0 - 1e-10
        })
        .collect()
}

#[test]
fn byproducts_match_dense_products() {
    let (x, z) = (Pauli::X.matrix(), Pauli::Z.matrix());
    let id = linalg::identity(2);
    for xb in 0..2u8 {
        for zb in 0..2u8 {
            let dense = (if xb == 1 { &x } else { &id }) * (if zb == 1 { &z } else { &id });
            let p = teleport_byproduct(xb, zb).to_matrix().unwrap();
            assert!(linalg::max_abs_diff(&dense, &p) < 1e-15);
        }
    }
    // two qubits: X on qubit 0, Z on qubit 1
    assert_eq!(byproduct(2, 0b1001).to_string(), "+XZ");
}

#[test]
fn frozen_byproduct_table_matches_brute_force() {
    let input = StateVector::random(1, &mut rng(3));
    let mut circ = Circuit::new(3, 2);
    circ.gate("H", &[1]).unwrap().gate("CNOT", &[1, 2]).unwrap().bell(0, 1, 0, 1).unwrap();
    let raw = run_enumerate(&circ, &input.tensor(&StateVector::zero(2)), 16).unwrap();
    assert_eq!(raw.len(), 4);
    for b in raw.iter() {
        let out = b.state.extract(&[2], 1e-9).unwrap();
        let found = pauli_relations(&input, &out);
        assert_eq!(found.len(), 1);
        let frozen = teleport_byproduct(u8::from(b.cbits[0]), u8::from(b.cbits[1]));
        assert!(found[0].eq_up_to_phase(&frozen), "{:?}: {} vs {}", b.cbits, found[0], frozen);
    }
}

#[test]
fn teleport_returns_the_input() {
    let inputs = [
        StateVector::zero(1),
        StateVector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap(),
        StateVector::random(1, &mut rng(11)),
    ];
    for input in inputs {
        let out = teleport(&input, Mode::Enumerate).unwrap();
        assert_eq!(out.len(), 4);
        for b in out.iter() {
            assert!((b.probability - 0.25).abs() < 1e-12);
            assert!(b.state.fidelity(&input).unwrap() > 1.0 - 1e-12);
        }
    }
    let one = teleport(&StateVector::random(1, &mut rng(1)), Mode::Sample(5)).unwrap();
    assert_eq!(one.len(), 1);
    assert!(teleport(&StateVector::zero(2), Mode::Enumerate).is_err());
}

#[test]
fn chi_builders_agree() {
    let direct = make_chi(ChiSource::Direct).unwrap();
    for (i, a) in direct.state.amplitudes().iter().enumerate() {
        let ket: String = (0..4).map(|q| if (i >> q) & 1 == 1 { '1' } else { '0' }).collect();
        let expected = if CHI_KETS.contains(&ket.as_str()) { 0.5 } else { 0.0 };
        assert_eq!(*a, c(expected, 0.0), "{ket}");
    }
    for src in [ChiSource::FromEpr, ChiSource::FromGhz] {
        let s = make_chi(src).unwrap();
        assert!(s.state.equal_up_to_global_phase(&direct.state, 1e-12).unwrap(), "{src:?}");
    }
}

#[test]
fn every_ghz_branch_yields_chi() {
    let chi = make_chi(ChiSource::Direct).unwrap().state;
    let branches = run_enumerate(&chi_from_ghz_circuit().unwrap(), &StateVector::zero(6), 16).unwrap();
    assert_eq!(branches.len(), 4);
    for b in branches.iter() {
        let s = b.state.extract(&[0, 1, 2, 3], 1e-9).unwrap();
        assert!(s.equal_up_to_global_phase(&chi, 1e-12).unwrap(), "{:?}", b.cbits);
    }
}

#[test]
fn ghz_fixups_match_brute_force() {
    // the construction without its classically controlled Paulis
    let full = chi_from_ghz_circuit().unwrap();
    let mut bare = Circuit::new(6, 2);
    for op in full.ops().iter().filter(|op| !matches!(op, Op::CondGate { .. })) {
        bare.push(op.clone()).unwrap();
    }
    let chi = make_chi(ChiSource::Direct).unwrap().state;
    let frozen = |x: bool, z: bool| {
        let mut p = PauliString::identity(4);
        if z {
            p.set(0, Pauli::X);
        }
        if x {
            p.set(2, Pauli::Z);
        }
        p
    };
    for b in run_enumerate(&bare, &StateVector::zero(6), 16).unwrap().iter() {
        let s = b.state.extract(&[0, 1, 2, 3], 1e-9).unwrap();
        let found = pauli_relations(&s, &chi);
        let mine = frozen(b.cbits[0], b.cbits[1]);
        assert!(found.iter().any(|p| p.eq_up_to_phase(&mine)), "{:?}", b.cbits);
        assert_eq!(found.iter().map(PauliString::weight).min(), Some(mine.weight()));
    }
}

#[test]
fn pushed_cnot_corrections_match_the_conjugation_rules() {
    // CNOT (X ⊗ I) = (X ⊗ X) CNOT with the control on gate qubit 0
    let map = CliffordMap::named("CNOT").unwrap();
    assert_eq!(map.image_x(0).to_string(), "+XX");
    assert_eq!(map.image_z(1).to_string(), "+ZZ");
    let ops = pushed_corrections(&map, &[(2, 3), (0, 1)], &[5, 3]).unwrap();
    let summary: Vec<(String, usize, Condition)> = ops
        .into_iter()
        .map(|op| match op {
            Op::CondGate { cond, gate, targets } => (gate.to_string(), targets[0], cond),
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(
        summary,
        vec![
            ("X".into(), 5, Condition::parity(&[2])),
            ("Z".into(), 5, Condition::parity(&[3, 1])),
            ("X".into(), 3, Condition::parity(&[2, 0])),
            ("Z".into(), 3, Condition::parity(&[1])),
        ]
    );
}

#[test]
fn cnot_teleportation() {
    let cnot = gate("CNOT");
    let zero = StateVector::zero(1);
    let one = StateVector::basis(1, 1);
    let out = teleport_cnot(&zero, &zero, Mode::Enumerate).unwrap();
    assert_eq!(out.len(), 16);
    assert!(out.iter().all(|b| b.state.fidelity(&StateVector::zero(2)).unwrap() > 1.0 - 1e-12));
    // target |0⟩, control |1⟩ flips the target
    let out = teleport_cnot(&zero, &one, Mode::Enumerate).unwrap();
    assert!(out.iter().all(|b| b.state.fidelity(&StateVector::basis(2, 3)).unwrap() > 1.0 - 1e-12));
    let mut r = rng(4);
    for _ in 0..5 {
        let (a, b) = (StateVector::random(1, &mut r), StateVector::random(1, &mut r));
        let expected = applied(&cnot, &b.tensor(&a));
        let out = teleport_cnot(&a, &b, Mode::Enumerate).unwrap();
        assert_eq!(out.len(), 16);
        for br in out.iter() {
            assert!((br.probability - 1.0 / 16.0).abs() < 1e-12);
            assert!(br.state.fidelity(&expected).unwrap() > 1.0 - 1e-12);
        }
    }
}

#[test]
fn psi_cnot_is_chi_up_to_relabelling() {
    let psi = &prepare_psi_u(&gate("CNOT"), PrepMethod::Direct, Mode::Enumerate).unwrap()[0];
    let chi = make_chi(ChiSource::Direct).unwrap();
    let relabelled = psi.resource.state.permute(&[1, 3, 0, 2]).unwrap();
    assert!(relabelled.equal_up_to_global_phase(&chi.state, 1e-12).unwrap());
}

#[test]
fn psi_identity_is_an_epr_pair() {
    let psi = &prepare_psi_u(&gate("I"), PrepMethod::Direct, Mode::Enumerate).unwrap()[0];
    assert!(psi.resource.state.equal_up_to_global_phase(&epr().state, 1e-12).unwrap());
    assert_eq!(psi.resource.roles, ["upper0", "lower0"]);
}

#[test]
fn preparation_methods_agree_and_stabilize() {
    for name in ["I", "H", "CNOT", "T", "TOFFOLI"] {
        let u = gate(name);
        let conds = stabilizer_conditions(&u).unwrap();
        assert_eq!(conds.len(), 2 * u.n());
        let direct = prepare_psi_u(&u, PrepMethod::Direct, Mode::Enumerate).unwrap().remove(0);
        let measured = prepare_psi_u(&u, PrepMethod::Measurement, Mode::Enumerate).unwrap();
        let total: f64 = measured.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-10, "{name}");
        for b in measured.iter().chain(std::iter::once(&direct)) {
            assert!(b.resource.state.equal_up_to_global_phase(&direct.resource.state, 1e-10).unwrap(), "{name}");
            for cond in &conds {
                assert!((cond.expectation(&b.resource.state).unwrap() - 1.0).abs() < 1e-10, "{name} {}", cond.label());
            }
        }
    }
}

#[test]
fn stabilizers_of_clifford_gates_are_paulis() {
    let conds = stabilizer_conditions(&gate("H")).unwrap();
    let strings: Vec<String> = conds.iter().map(|c| c.pauli.as_ref().unwrap().to_string()).collect();
    assert_eq!(strings, ["+XZ", "+ZX"]);
    assert!(stabilizer_conditions(&gate("T")).unwrap()[0].pauli.is_none());
}

#[test]
fn sampled_preparation_picks_one_branch() {
    let a = prepare_psi_u(&gate("T"), PrepMethod::Measurement, Mode::Sample(9)).unwrap();
    let b = prepare_psi_u(&gate("T"), PrepMethod::Measurement, Mode::Sample(9)).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a[0].outcomes, b[0].outcomes);
}

#[test]
fn identity_table_is_the_teleportation_table() {
    let table = correction_table(&gate("I")).unwrap();
    assert_eq!(table.entries.len(), 4);
    for e in &table.entries {
        let CorrectionKind::Pauli(p) = &e.kind else { panic!("identity corrections are Paulis") };
        assert_eq!(p, &e.byproduct);
    }
    assert_eq!(table.entry(&[0], &[0]).unwrap().level, HierarchyLevel::Level(1));
}

#[test]
fn t_gate_x_correction_is_px() {
    let table = correction_table(&gate("T")).unwrap();
    let e = table.entry(&[1], &[0]).unwrap();
    assert!(matches!(e.kind, CorrectionKind::Clifford(_)));
    let px = gate("P").matrix() * Pauli::X.matrix();
    let phase = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
    assert!(linalg::max_abs_diff(e.correction.matrix(), &px.map(|v| v * phase)) < 1e-12);
    assert!(matches!(table.entry(&[0], &[1]).unwrap().kind, CorrectionKind::Pauli(_)));
}

#[test]
fn correction_levels_drop_by_one() {
    for name in ["H", "CNOT", "CZ", "T", "TOFFOLI", "CPHASE_I"] {
        let u = gate(name);
        let table = correction_table(&u).unwrap();
        let k = table.level.level().unwrap();
        assert_eq!(table.entries.len(), 1 << (2 * u.n()));
        assert!(table.entries[0].byproduct.is_identity());
        for e in &table.entries {
            let lvl = e.level.level().unwrap();
            assert!(lvl <= (k - 1).max(1), "{name} outcome {}", e.outcome);
            if k <= 2 {
                assert!(matches!(e.kind, CorrectionKind::Pauli(_)), "{name}");
            }
        }
    }
    for k in 3..=5 {
        let table = correction_table(&GateUnitary::rz_pow2(k - 1)).unwrap();
        assert_eq!(table.level, HierarchyLevel::Level(k));
        assert!(table.entries.iter().all(|e| e.level.level().unwrap() < k));
    }
}

#[test]
fn table_entries_cross_check_with_the_classifier() {
    let table = correction_table(&gate("TOFFOLI")).unwrap();
    for e in table.entries.iter().take(8) {
        assert_eq!(hierarchy_level(&e.correction, 3).unwrap(), e.level);
    }
}

#[test]
fn gate_teleportation_applies_the_gate() {
    let mut r = rng(17);
    for name in ["I", "H", "T", "CNOT", "TOFFOLI"] {
        let u = gate(name);
        let input = StateVector::random(u.n(), &mut r);
        let expected = applied(&u, &input);
        let out = teleport_gate(&u, &input, Mode::Enumerate).unwrap();
        assert_eq!(out.len(), 1 << (2 * u.n()), "{name}");
        for b in out.iter() {
            assert!((b.probability - 0.25f64.powi(u.n() as i32)).abs() < 1e-12);
            assert!(b.state.fidelity(&expected).unwrap() > 1.0 - 1e-12, "{name} {:?}", b.cbits);
        }
        let report = branch_fidelities(&out, &expected).unwrap();
        assert!(report.iter().all(|f| f.fidelity > 1.0 - 1e-12));
    }
}

#[test]
fn gate_teleportation_matches_cnot_teleportation() {
    let mut r = rng(23);
    let (a, b) = (StateVector::random(1, &mut r), StateVector::random(1, &mut r));
    let generic = teleport_gate(&gate("CNOT"), &b.tensor(&a), Mode::Enumerate).unwrap();
    let special = teleport_cnot(&a, &b, Mode::Enumerate).unwrap();
    assert_eq!(generic.len(), special.len());
    for g in generic.iter() {
        // generic bits: β on 0,1 and α on 2,3; special bits: α on 0,1 and β on 2,3
        let mapped = [g.cbits[2], g.cbits[3], g.cbits[0], g.cbits[1]];
        let s = special.iter().find(|s| s.cbits == mapped).unwrap();
        assert!((s.probability - g.probability).abs() < 1e-12);
        assert!(s.state.equal_up_to_global_phase(&g.state, 1e-10).unwrap());
    }
}

#[test]
fn gate_teleportation_rejects_bad_arguments() {
    assert!(teleport_gate(&gate("CNOT"), &StateVector::zero(1), Mode::Enumerate).is_err());
    let wide = gate("TOFFOLI").tensor(&gate("X"));
    assert!(correction_table(&wide).is_err());
    assert!(gate_teleport_circuit(&wide).is_err());
}

#[test]
fn amplitude_export_rounds_and_drops_zeros() {
    let entries = epr().amplitude_entries(12);
    assert_eq!(entries.len(), 2);
    assert_eq!((entries[0].index, entries[1].index), (0, 3));
    assert_eq!(entries[0].re, (std::f64::consts::FRAC_1_SQRT_2 * 1e12).round() / 1e12);
    let s = StateVector::from_amplitudes(vec![c(-1e-14, 0.0), c(-1.0, -1e-14)]).unwrap();
    let e = amplitude_entries(&s, 12);
    assert_eq!(e.len(), 1);
    assert!(e[0].im.is_sign_positive());
    assert_eq!(ghz().roles.len(), 3);
}
