use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use ioncascade::compiler::{compile_circuit, Compiler, CompilerConfig};
use ioncascade::decompose::haar_unitary;
use ioncascade::gates;
use ioncascade::ir::Circuit;
use ioncascade::linalg::{aligned_max_diff, kron, tensor_all, to_dyn, CMat, Mat2, Unitary};
use ioncascade::ms::weighted_xx;
use ioncascade::program::Op;
use ioncascade::sim::{ideal_state, logical_state, logical_unitary, physical_unitary};
use ioncascade::state::QuantumState;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Beam whose low-index side is dark, with every lit neighbour tracked.
fn sharp(n: usize) -> CompilerConfig {
    let mut cfg = CompilerConfig::with_ions(n);
    cfg.beam.coma = 0.7;
    cfg.crosstalk_depth = 3;
    cfg
}

fn operator(cfg: CompilerConfig) -> CompilerConfig {
    CompilerConfig { assume_ground_state: false, ..cfg }
}

fn product(us: &[Mat2]) -> Unitary {
    let us: Vec<Unitary> = us.iter().map(Unitary::from_mat2).collect();
    tensor_all(&us)
}

fn xx(theta: f64) -> CMat {
    weighted_xx(&[1.0, 1.0], theta / 2.0, &[0.0, 0.0])
}

#[test]
fn four_ion_cascade_is_exact_despite_crosstalk() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let targets: Vec<Mat2> = (0..4).map(|_| haar_unitary(&mut rng)).collect();
        let mut c = Compiler::new(operator(sharp(4))).unwrap();
        c.compile_cascade(&targets).unwrap();
        for l in c.ledger() {
            let off = l.stored;
            assert!(off[(0, 1)].norm() < 1e-8 && off[(1, 0)].norm() < 1e-8, "ledger not closed");
        }
        let p = c.finish(false).unwrap();
        // the neighbours really were rotated
        let Op::Pulse(first) = p.ops.iter().find(|o| matches!(o, Op::Pulse(_))).unwrap() else { unreachable!() };
        assert!(first.rabi.iter().filter(|r| **r > 0.05).count() >= 2);
        let d = logical_unitary(&p).unwrap().aligned_max_diff(&product(&targets));
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn default_beam_leaves_small_untracked_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let targets: Vec<Mat2> = (0..4).map(|_| haar_unitary(&mut rng)).collect();
    let mut c = Compiler::new(operator(CompilerConfig::with_ions(4))).unwrap();
    c.compile_cascade(&targets).unwrap();
    let p = c.finish(false).unwrap();
    let d = logical_unitary(&p).unwrap().aligned_max_diff(&product(&targets));
    assert!(d > 1e-6 && d < 0.2, "{d}");
}

#[test]
fn all_81_preparations() {
    let set = [("I", gates::identity()), ("H", gates::h()), ("X", gates::x())];
    for code in 0..81usize {
        let mut text = String::new();
        let mut us = Vec::new();
        let mut k = code;
        for ion in 0..4 {
            let (name, u) = &set[k % 3];
            k /= 3;
            text.push_str(&format!("{name} {ion}\n"));
            us.push(*u);
        }
        text.push_str("MEASURE\n");
        let p = compile_circuit(&Circuit::parse(&text).unwrap(), &sharp(4)).unwrap();
        let got = ideal_state(&p, None).unwrap().probabilities();
        let ideal = QuantumState::zeros(4).apply(&product(&us), &[0, 1, 2, 3]).unwrap().probabilities();
        for (a, b) in got.iter().zip(&ideal) {
            assert!((a - b).abs() < 1e-6, "code {code}: {a} vs {b}");
        }
    }
}

#[test]
fn ledger_soundness_after_each_cascade() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 3;
    let mut c = Compiler::new(operator(sharp(n))).unwrap();
    let mut requested = vec![Mat2::identity(); n];
    for round in 0..3 {
        let targets: Vec<Mat2> = (0..n).map(|_| haar_unitary(&mut rng)).collect();
        c.compile_cascade(&targets).unwrap();
        for i in 0..n {
            requested[i] = targets[i] * requested[i];
        }
        if round == 1 {
            c.defer_rz(1, 0.7).unwrap();
            requested[1] = gates::rz(0.7) * requested[1];
        }
        let expect: Vec<Mat2> = (0..n).map(|i| c.ledger()[i].offset() * requested[i]).collect();
        let phys = physical_unitary(c.program()).unwrap();
        let d = phys.aligned_max_diff(&product(&expect));
        assert!(d < 1e-8, "round {round}: {d}");
    }
}

#[test]
fn leading_deferred_rz_does_not_change_preparation() {
    let a = compile_circuit(&Circuit::parse("H 0\nX 1\n").unwrap(), &CompilerConfig::with_ions(2)).unwrap();
    let b = compile_circuit(&Circuit::parse("RZ 0 0.9\nRZ 1 pi\nH 0\nX 1\n").unwrap(), &CompilerConfig::with_ions(2))
        .unwrap();
    let sa = logical_state(&a).unwrap();
    let sb = logical_state(&b).unwrap();
    let overlap = (sa.amplitudes().unwrap().adjoint() * sb.amplitudes().unwrap())[(0, 0)].norm();
    assert!((overlap - 1.0).abs() < 1e-10, "{overlap}");
}

#[test]
fn trailing_deferred_rz_keeps_probabilities() {
    let cfg = CompilerConfig::with_ions(2);
    let a = compile_circuit(&Circuit::parse("H 0\nRY 1 0.4\n").unwrap(), &cfg).unwrap();
    let b = compile_circuit(&Circuit::parse("H 0\nRY 1 0.4\nRZ 0 1.1\nRZ 1 -2\n").unwrap(), &cfg).unwrap();
    let pa = ideal_state(&a, None).unwrap().probabilities();
    let pb = ideal_state(&b, None).unwrap().probabilities();
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() < 1e-12);
    }
    assert_eq!(a.counts().pulses, b.counts().pulses);
}

#[test]
fn ms_gate_realises_xx_and_bell_state() {
    let mut c = Compiler::new(operator(sharp(2))).unwrap();
    c.compile_ms(0, 1, FRAC_PI_4, None).unwrap();
    let p = c.finish(false).unwrap();
    assert_eq!(p.counts().pulses, 0);
    let d = aligned_max_diff(logical_unitary(&p).unwrap().matrix(), &xx(FRAC_PI_4));
    assert!(d < 1e-9, "{d}");

    let p = compile_circuit(&Circuit::parse("MS 0 1 pi/4\n").unwrap(), &CompilerConfig::with_ions(2)).unwrap();
    let st = logical_state(&p).unwrap();
    let v = st.amplitudes().unwrap();
    let s = 0.5f64.sqrt();
    let bell = [ioncascade::C64::new(s, 0.0), 0.0.into(), 0.0.into(), ioncascade::C64::new(0.0, -s)];
    let overlap: ioncascade::C64 = (0..4).map(|k| bell[k].conj() * v[k]).sum();
    assert!((overlap.norm() - 1.0).abs() < 1e-10);
}

#[test]
fn echoed_ms_in_three_ion_chain() {
    for (a, b, spectator) in [(0, 1, 2), (1, 2, 0)] {
        let mut c = Compiler::new(operator(sharp(3))).unwrap();
        c.compile_ms(a, b, FRAC_PI_4, Some(true)).unwrap();
        let p = c.finish(false).unwrap();
        assert_eq!(p.counts().ms_segments, 2);
        assert_eq!(p.counts().echo_flips, 2);
        let u = logical_unitary(&p).unwrap();
        let pair = xx(FRAC_PI_4);
        let i2 = CMat::identity(2, 2);
        let expect = if spectator == 2 { kron(&pair, &i2) } else { kron(&i2, &pair) };
        let d = aligned_max_diff(u.matrix(), &expect);
        assert!(d < 1e-6, "pair ({a},{b}): {d}");
    }
}

#[test]
fn unechoed_spectator_picks_up_entanglement() {
    let mut c = Compiler::new(operator(sharp(3))).unwrap();
    c.compile_ms(0, 1, FRAC_PI_4, Some(false)).unwrap();
    let p = c.finish(false).unwrap();
    assert_eq!(p.counts().ms_segments, 1);
    let expect = kron(&xx(FRAC_PI_4), &CMat::identity(2, 2));
    assert!(aligned_max_diff(logical_unitary(&p).unwrap().matrix(), &expect) > 1e-3);
}

fn cnot_program(text: &str, cfg: &CompilerConfig) -> ioncascade::program::PulseProgram {
    compile_circuit(&Circuit::parse(text).unwrap(), cfg).unwrap()
}

fn pre_post(p: &ioncascade::program::PulseProgram) -> (usize, usize) {
    let ms = p.ops.iter().position(|o| matches!(o, Op::MsSegment(_))).unwrap();
    let count = |ops: &[Op]| ops.iter().filter(|o| matches!(o, Op::Pulse(_))).count();
    (count(&p.ops[..ms]), count(&p.ops[ms..]))
}

#[test]
fn compiled_cnot_matches_canonical_matrix() {
    for (text, c, t) in [("CNOT 0 1", 0, 1), ("CNOT 1 0", 1, 0)] {
        let p = cnot_program(text, &operator(sharp(2)));
        let d = logical_unitary(&p).unwrap().aligned_max_diff(&gates::cnot(c, t));
        assert!(d < 1e-6, "{text}: {d}");
        let (pre, post) = pre_post(&p);
        assert!(pre <= 2 && post <= 3, "{text}: {pre} pre, {post} post");
        assert_eq!(p.counts().transports, 4, "{text}");
        assert_eq!(p.counts().well_changes, 2);
    }
}

#[test]
fn cnot_truth_table_from_ground_state_preparations() {
    let cfg = CompilerConfig::with_ions(2);
    for (prep, expect) in [("", 0b00), ("X 0\n", 0b11), ("X 1\n", 0b01), ("X 0\nX 1\n", 0b10)] {
        let p = cnot_program(&format!("{prep}CNOT 0 1\nMEASURE\n"), &cfg);
        let probs = ideal_state(&p, None).unwrap().probabilities();
        assert!(probs[expect] > 1.0 - 1e-4, "{prep:?}: {probs:?}");
    }
    // control on the higher ion: |01⟩ -> |11⟩
    let p = cnot_program("X 1\nCNOT 1 0\nMEASURE\n", &cfg);
    assert!(ideal_state(&p, None).unwrap().probabilities()[0b11] > 1.0 - 1e-4);
}

#[test]
fn optimization_angles_do_not_change_the_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let prep: Vec<Mat2> = (0..2).map(|_| haar_unitary(&mut rng)).collect();
    let mut reference: Option<QuantumState> = None;
    for (phi1, phi2) in [(0.0, 0.0), (0.4, 2.1), (PI, -1.0), (5.5, FRAC_PI_2)] {
        let mut c = Compiler::new(sharp(2)).unwrap();
        c.queue(0, &prep[0]).unwrap();
        c.queue(1, &prep[1]).unwrap();
        c.compile_cnot_with(0, 1, phi1, phi2).unwrap();
        let p = c.finish(false).unwrap();
        let st = logical_state(&p).unwrap();
        if let Some(r) = &reference {
            let overlap = (r.amplitudes().unwrap().adjoint() * st.amplitudes().unwrap())[(0, 0)].norm();
            assert!((overlap - 1.0).abs() < 1e-10, "({phi1}, {phi2}): {overlap}");
            let pr = r.probabilities();
            for (a, b) in pr.iter().zip(st.probabilities()) {
                assert!((a - b).abs() < 1e-10);
            }
        } else {
            reference = Some(st);
        }
    }
}

#[test]
fn cnot_circuit_in_four_ion_chain() {
    let p = cnot_program("H 1\nCNOT 1 2\nCNOT 2 3\nMEASURE\n", &sharp(4));
    let probs = ideal_state(&p, None).unwrap().probabilities();
    assert!((probs[0b0000] - 0.5).abs() < 1e-6 && (probs[0b0111] - 0.5).abs() < 1e-6, "{probs:?}");
    assert!(p.counts().echo_flips > 0);
}

#[test]
fn empty_circuit_is_empty_program() {
    let p = cnot_program("", &CompilerConfig::with_ions(3));
    assert!(p.ops.is_empty());
    assert_eq!(p.total_time(), 0.0);
}

#[test]
fn compile_errors_carry_gate_index() {
    let err = compile_circuit(&Circuit::parse("H 0\nCNOT 0 2\n").unwrap(), &CompilerConfig::with_ions(3)).unwrap_err();
    assert!(matches!(err, ioncascade::Error::InvalidGate { index: 1, .. }));
}

fn arb_circuit() -> impl Strategy<Value = String> {
    let gate = prop_oneof![
        (0usize..3, 0usize..7).prop_map(|(i, g)| format!("{} {i}", ["X", "Y", "Z", "H", "S", "T", "I"][g])),
        (0usize..3, -3.0f64..3.0).prop_map(|(i, a)| format!("RY {i} {a}")),
        (0usize..3, -3.0f64..3.0).prop_map(|(i, a)| format!("RZ {i} {a}")),
        (0usize..2, any::<bool>()).prop_map(|(i, f)| if f {
            format!("CNOT {i} {}", i + 1)
        } else {
            format!("CNOT {} {i}", i + 1)
        }),
        (0usize..2).prop_map(|i| format!("MS {i} {} pi/4", i + 1)),
    ];
    proptest::collection::vec(gate, 0..6).prop_map(|g| g.join("\n"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn programs_are_legal_and_match_ideal_circuit(text in arb_circuit()) {
        let cfg = CompilerConfig { optimize_cnot: false, ..sharp(3) };
        let circuit = Circuit::parse(&text).unwrap();
        let p = compile_circuit(&circuit, &cfg).unwrap();
        prop_assert!(p.validate().is_ok());
        // ideal circuit oracle on |000⟩
        let mut ideal = QuantumState::zeros(3);
        for g in &circuit.gates {
            match *g {
                ioncascade::ir::Gate::Single { ion, gate } => {
                    ideal.apply_mut(&to_dyn(&gate.matrix()), &[ion]).unwrap();
                }
                ioncascade::ir::Gate::Cnot { control, target } => {
                    ideal.apply_mut(gates::cnot(0, 1).matrix(), &[control, target]).unwrap();
                }
                ioncascade::ir::Gate::Ms { a, b, theta, .. } => {
                    ideal.apply_mut(&xx(theta), &[a, b]).unwrap();
                }
                _ => {}
            }
        }
        let got = ideal_state(&p, None).unwrap().probabilities();
        for (a, b) in got.iter().zip(ideal.probabilities()) {
            prop_assert!((a - b).abs() < 1e-6, "{text}: {a} vs {b}");
        }
    }
}
