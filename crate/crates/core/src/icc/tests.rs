use super::*;
use crate::oracle::{FnOracle, VmOracle};

fn b(s: &str) -> BitString {
    s.parse().unwrap()
}

fn vm_run(k_max: u32, stages: u64) -> IccRun {
    let mut o = VmOracle::new(1 << 12);
    icc_run(k_max, stages, &mut o).unwrap()
}

#[test]
fn initial_points() {
    let mut o = VmOracle::new(64);
    let st = IccState::new(3, 100, &mut o);
    assert_eq!(st.d[0].current(), b("0"));
    assert_eq!(st.d[1].current(), b("000"));
    assert_eq!(st.sigma[&3], BitString::zeros(6));
}

#[test]
fn w_probe_examples() {
    // canonical index 10 is "011" (HALT), 14 is "111" (LOOP)
    assert_eq!(w_program(10).to_string(), "011");
    assert_eq!(w_program(14).to_string(), "111");
    assert!(w_probe(10, &b("01"), 3));
    assert!(!w_probe(10, &b("011"), 3));
    assert!(!w_probe(14, &b(""), 1000));
}

#[test]
fn e_streams_under_vm() {
    let mut o = VmOracle::new(1 << 12);
    assert!((0..30).all(|t| e_stream_step(1, t, &mut o).is_none()));
    let mut st = EStream::new(2);
    let e2: Vec<_> = (0..30).filter_map(|t| st.step(t, &mut o)).collect();
    assert_eq!(e2, [BitString::empty()]);
    let mut st = EStream::new(3);
    let e3: Vec<_> = (0..40).filter_map(|t| st.step(t, &mut o).map(|x| (t, x.literal()))).collect();
    let want = [(1, ""), (2, "0"), (3, "1"), (4, "00"), (5, "01"), (6, "10"), (7, "11")];
    let want: Vec<_> = want.iter().map(|&(t, x)| (t, x.to_string())).collect();
    assert_eq!(e3, want);
}

#[test]
fn first_diagonalizations() {
    let run = vm_run(3, 20);
    let diag: Vec<_> = run
        .events
        .iter()
        .filter_map(|e| match e {
            IccEvent::Diagonalize { stage, e, d, .. } => Some((*stage, *e, d.len())),
            _ => None,
        })
        .collect();
    assert_eq!(&diag[..2], &[(3, 1, 1), (5, 2, 3)]);
}

#[test]
fn k2_assigns_at_stage_16() {
    let run = vm_run(2, 20);
    let ev = run
        .events
        .iter()
        .find(|e| matches!(e, IccEvent::Emit { k: 2, .. }))
        .unwrap();
    let IccEvent::Emit { stage, t, x, action, .. } = ev else { unreachable!() };
    assert_eq!((*stage, *t, x.literal().as_str()), (16, 1, ""));
    let EmitAction::Assign { sigma, i, lo, hi, snapshot, resets, .. } = action else {
        panic!("expected case b, got {action:?}");
    };
    assert_eq!((sigma.literal().as_str(), *i, *lo, *hi, *snapshot), ("10", 1, 0, 1, 15));
    assert!(resets.contains(&(5, 247)));
    assert_eq!(run.final_state.len[&2], 2);
}

#[test]
fn k3_stream_cases() {
    let run = vm_run(3, 200);
    let actions: Vec<_> = run
        .events
        .iter()
        .filter_map(|e| match e {
            IccEvent::Emit { k: 3, t, action, .. } => Some((*t, action.clone())),
            _ => None,
        })
        .collect();
    assert_eq!(actions.len(), 7);
    assert!(matches!(actions[0], (1, EmitAction::Assign { i: 1, lo: 0, hi: 1, .. })));
    assert_eq!(actions[1], (2, EmitAction::InR));
    assert_eq!(actions[2], (3, EmitAction::Short { len: 2 }));
    match &actions[3] {
        (4, EmitAction::Assign { sigma, i: 2, lo: 0, hi: 4, .. }) => assert_eq!(sigma.literal(), "010000"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(actions[4..].iter().all(|(_, a)| matches!(a, EmitAction::Short { len: 5 })));
}

#[test]
fn stage_parity_routing() {
    let run = vm_run(2, 40);
    for ev in &run.events {
        let s = ev.stage() - 1;
        match ev {
            IccEvent::Diagonalize { .. } => assert_eq!(s % 2, 0),
            IccEvent::Bottom { k, t, .. } | IccEvent::Emit { k, t, .. } => {
                assert_eq!(s, 2 * pair(*k as u64, *t) + 1)
            }
        }
    }
}

#[test]
fn tau_tables_follow_ranges() {
    let active = DRecord {
        e: 1,
        history: vec![(0, 1), (16, 3)],
        passive_at: None,
    };
    let t = tau_table(&active);
    assert_eq!(t.tau1_zero, [b("0"), b("000")]);
    assert_eq!(t.eval1(&b("000")), Psi::Zero);
    assert_eq!(t.eval1(&b("00")), Psi::Bottom);
    assert_eq!(t.eval2(&b("0")), None);

    let passive = DRecord {
        e: 2,
        history: vec![(0, 3)],
        passive_at: Some(5),
    };
    let t = tau_table(&passive);
    let t2 = t.tau2_table.as_ref().unwrap();
    assert_eq!(t2.one, b("000"));
    assert!(t2.zero.is_empty());
    let differ: Vec<_> = t.tau1_zero.iter().filter(|z| Some(t.eval1(z)) != t.eval2(z)).collect();
    assert_eq!(differ, [&b("000")]);
}

#[test]
fn k_max_out_of_range() {
    let mut o = VmOracle::new(8);
    assert!(matches!(icc_run(5, 10, &mut o), Err(IccError::Range(5))));
    assert!(matches!(icc_run(0, 10, &mut o), Err(IccError::Range(0))));
}

#[test]
fn full_vm_run_passes_all_claims() {
    let run = vm_run(3, 10_000);
    assert!(run.error().is_none());
    let trace = run.to_trace();
    let report = check_claims(&trace).unwrap();
    let failures: Vec<_> = report.failures().collect();
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(report.results.iter().any(|r| r.name == "e-stream" && r.passed));
    assert!(report.results.iter().any(|r| r.name == "claim-4" && r.passed));
}

#[test]
fn widened_band_fails_consistency_at_its_stage() {
    let run = vm_run(2, 400);
    let mut trace = run.to_trace();
    assert!(check_claims(&trace).unwrap().ok());
    // d_5 = 0^247 enters A at stage 249, after the stage-16 snapshot
    assert_eq!(run.final_state.a.get(&BitString::zeros(247)), Some(&249));
    let idx = run
        .events
        .iter()
        .position(|e| matches!(e, IccEvent::Emit { stage: 16, .. }))
        .unwrap();
    trace.events[idx]["hi"] = serde_json::json!(300);
    let report = check_claims(&trace).unwrap();
    let f = report.first_failure("claim-3a").expect("claim-3a failure");
    assert_eq!(f.stage, Some(16));
    assert!(f.detail.contains("0^247"), "{}", f.detail);
}

#[test]
fn forged_diagonalization_is_caught() {
    let run = vm_run(2, 40);
    let mut trace = run.to_trace();
    let idx = run
        .events
        .iter()
        .position(|e| matches!(e, IccEvent::Diagonalize { .. }))
        .unwrap();
    trace.events[idx]["probe_steps"] = serde_json::json!(99);
    let report = check_claims(&trace).unwrap();
    assert!(report.first_failure("diagonalization").is_some());
}

#[test]
fn busy_scripted_oracle() {
    // C(x) = l(x): E_k is every string shorter than 2^k - 2
    let mut o = FnOracle::new(13, |x: &BitString, _| Some(x.len() as u32));
    let run = icc_run(4, 3000, &mut o).unwrap();
    assert!(run.error().is_none(), "{:?}", run.error());
    let report = check_claims(&run.to_trace()).unwrap();
    let failures: Vec<_> = report.failures().collect();
    assert!(failures.is_empty(), "{failures:#?}");
    let assigns = run
        .events
        .iter()
        .filter(|e| matches!(e, IccEvent::Emit { action: EmitAction::Assign { .. }, .. }))
        .count();
    assert!(assigns >= 3);
}

#[test]
fn deterministic_bytes() {
    let a = vm_run(3, 500).to_trace().to_json();
    let b = vm_run(3, 500).to_trace().to_json();
    assert_eq!(a, b);
}
