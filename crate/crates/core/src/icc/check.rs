//! Replay of an icc trace with per-stage claim checks.
//!
//! The checker rebuilds `σ`, `len`, `d_e`, `A` and `ψ` from the event log
//! alone, re-runs every logged `W_e` probe on the machine, and compares the
//! result with the recorded final state. Failures carry the stage at which the
//! offending datum was written.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::*;
use crate::oracle::VmOracle;
use crate::trace::{CheckReport, TraceError};

const CLAIMS: [&str; 14] = [
    "stage-order",
    "claim-1a",
    "claim-1b",
    "claim-1c",
    "claim-1d",
    "diagonalization",
    "case-two",
    "psi-immutable",
    "coverage",
    "claim-2",
    "claim-3a",
    "claim-3b",
    "claim-3c",
    "final-state",
];

struct Replay {
    stages: u64,
    k_max: u32,
    d: Vec<DRecord>,
    a: AHistory,
    sigma: BTreeMap<u32, BitString>,
    len: BTreeMap<u32, u64>,
    psi: PsiTable,
    assigns: BTreeMap<u32, u64>,
    emissions: Vec<(u32, u64, BitString, u32)>,
    probes: HashMap<(u64, u64), Outcome>,
}

impl Replay {
    fn r_set(&self, k: u32) -> BTreeSet<BitString> {
        self.d
            .iter()
            .take(k.saturating_sub(1) as usize)
            .flat_map(DRecord::range)
            .collect()
    }

    fn probe(&mut self, e: u64, d_len: u64, s: u64) -> Outcome {
        let horizon = self.stages;
        self.probes
            .entry((e, d_len))
            .or_insert_with(|| run(&w_program(e), &BitString::zeros(d_len), horizon))
            .at_budget(s)
    }
}

/// `vm(budget=N)` ↦ `N`.
fn vm_budget(name: &str) -> Option<u64> {
    name.strip_prefix("vm(budget=")?.strip_suffix(')')?.parse().ok()
}

pub fn check_claims(trace: &StageTrace) -> Result<CheckReport, TraceError> {
    let params: IccParams = trace.params_as()?;
    let events: Vec<IccEvent> = trace.events_as()?;
    let fin: IccFinal = trace.final_as()?;
    let mut report = CheckReport::new();
    let stages = fin.stages_run;
    let k_max = params.k_max;
    if !(1..=4).contains(&k_max) {
        report.fail("stage-order", None, format!("k_max={k_max} out of range"));
        return Ok(report);
    }
    let u = universe(k_max, params.stages);
    if fin.universe != u {
        report.fail("final-state", None, format!("universe {} != {u}", fin.universe));
    }
    let mut rp = Replay {
        stages,
        k_max,
        d: (1..=u)
            .map(|e| DRecord {
                e,
                history: vec![(0, pair(e, 0))],
                passive_at: None,
            })
            .collect(),
        a: AHistory::new(),
        sigma: (1..=k_max).map(|k| (k, BitString::zeros(m_size(k) as u64))).collect(),
        len: (1..=k_max).map(|k| (k, 0)).collect(),
        psi: PsiTable::new(),
        assigns: BTreeMap::new(),
        emissions: Vec::new(),
        probes: HashMap::new(),
    };
    let mut streams = vm_budget(&params.oracle).map(|b| {
        (
            VmOracle::new(b),
            (1..=k_max).map(|k| (k, EStream::new(k))).collect::<BTreeMap<_, _>>(),
        )
    });

    let mut by_stage: BTreeMap<u64, Vec<&IccEvent>> = BTreeMap::new();
    let mut last = 0;
    for ev in &events {
        if ev.stage() < last || ev.stage() == 0 || ev.stage() > stages {
            report.fail("stage-order", Some(ev.stage()), "event out of stage order");
        }
        last = last.max(ev.stage());
        by_stage.entry(ev.stage()).or_default().push(ev);
    }

    for stage in 1..=stages {
        let s = stage - 1;
        let evs = by_stage.remove(&stage).unwrap_or_default();
        if s % 2 == 0 {
            case_one(&mut rp, &mut report, stage, &evs);
            continue;
        }
        let (k, t) = unpair((s - 1) / 2);
        let served = (1..=k_max as u64).contains(&k);
        if !served {
            if !evs.is_empty() {
                report.fail("stage-order", Some(stage), "events at a stage that serves no k");
            }
            continue;
        }
        let k = k as u32;
        let expect = streams.as_mut().map(|(o, st)| {
            st.get_mut(&k)
                .expect("stream per k")
                .step(t, o as &mut dyn ComplexityOracle)
        });
        case_two(&mut rp, &mut report, stage, k, t, &evs, expect);
        check_domains(&rp, &mut report, stage, k, t);
    }
    for stage in by_stage.keys() {
        report.fail("stage-order", Some(*stage), "event beyond the last stage");
    }

    check_ranges(&rp, &mut report);
    let inconsistent = check_bands(&rp, &mut report, stages);
    let tau: Vec<TauTables> = rp.d.iter().map(tau_table).collect();
    check_tau(&rp, &tau, &mut report);
    check_ic(&rp, &fin, &tau, &inconsistent, &mut report);

    let recorded: Vec<_> = fin
        .emissions
        .iter()
        .map(|em| (em.k, em.t, em.x.clone(), em.c))
        .collect();
    let mut diffs = Vec::new();
    if fin.a != rp.a {
        diffs.push("A");
    }
    if fin.sigma != rp.sigma {
        diffs.push("sigma");
    }
    if fin.len != rp.len {
        diffs.push("len");
    }
    if fin.d != rp.d {
        diffs.push("d");
    }
    if fin.psi != rp.psi.dump() {
        diffs.push("psi");
    }
    if fin.tau != tau {
        diffs.push("tau");
    }
    if recorded != rp.emissions {
        diffs.push("emissions");
    }
    if !diffs.is_empty() {
        report.fail(
            "final-state",
            Some(stages),
            format!("replay disagrees on {}", diffs.join(", ")),
        );
    }
    if let Some(err) = &fin.aborted {
        report.fail("oracle", Some(stages), err.to_string());
    } else {
        report.pass("oracle", params.oracle.clone());
    }
    for name in CLAIMS {
        report.pass_unless_failed(name, "");
    }
    if streams.is_some() {
        report.pass_unless_failed("e-stream", format!("re-derived with {}", params.oracle));
    }
    Ok(report)
}

/// Re-verify each logged diagonalization against the machine.
fn case_one(rp: &mut Replay, report: &mut CheckReport, stage: u64, evs: &[&IccEvent]) {
    let s = stage - 1;
    let mut last_e = 0;
    for ev in evs {
        let IccEvent::Diagonalize {
            e, d, probe_steps, ..
        } = ev
        else {
            report.fail("stage-order", Some(stage), "Case II event at an even s");
            continue;
        };
        let e = *e;
        if e <= last_e {
            report.fail("stage-order", Some(stage), format!("e={e} out of sweep order"));
        }
        last_e = e;
        let Some(idx) = (e as usize).checked_sub(1).filter(|&i| i < rp.d.len()) else {
            report.fail("diagonalization", Some(stage), format!("e={e} outside the tracked range"));
            continue;
        };
        if e > s || rp.d[idx].passive_at.is_some() {
            report.fail("diagonalization", Some(stage), format!("e={e} acted while ineligible"));
            continue;
        }
        let current = rp.d[idx].current();
        if *d != current {
            report.fail("diagonalization", Some(stage), format!("e={e}: enumerated {d}, d_e = {current}"));
            continue;
        }
        let o = if d.len() < s && !rp.a.contains_key(d) {
            rp.probe(e, d.len(), s)
        } else {
            Outcome {
                kind: crate::vm::OutcomeKind::OutOfBudget,
                steps: s,
            }
        };
        if !o.is_terminal() || o.steps != *probe_steps {
            report.fail(
                "diagonalization",
                Some(stage),
                format!("e={e}: {d} logged in W_{{e,{s}}} after {probe_steps} steps, machine gives {:?}", o.kind),
            );
            continue;
        }
        rp.a.insert(d.clone(), stage);
        rp.d[idx].passive_at = Some(stage);
    }
}

fn case_two(
    rp: &mut Replay,
    report: &mut CheckReport,
    stage: u64,
    k: u32,
    t: u64,
    evs: &[&IccEvent],
    expected: Option<Option<BitString>>,
) {
    let s = stage - 1;
    let sigma = rp.sigma[&k].clone();
    let set: Vec<u32> = set_positions(&sigma).into_iter().map(|i| i as u32).collect();
    let mut bottom = None;
    let mut emit = None;
    for ev in evs {
        match ev {
            IccEvent::Bottom {
                k: ek, t: et, programs, ..
            } if *ek == k && *et == t && bottom.is_none() && emit.is_none() => bottom = Some(programs),
            IccEvent::Emit { k: ek, t: et, .. } if *ek == k && *et == t && emit.is_none() => {
                emit = Some(*ev)
            }
            _ => report.fail("stage-order", Some(stage), format!("unexpected event for (k,t)=({k},{t})")),
        }
    }
    let programs = bottom.cloned().unwrap_or_default();
    if programs != set {
        report.fail(
            "case-two",
            Some(stage),
            format!("⊥ extension for {programs:?}, σ_{k} = {sigma} sets {set:?}"),
        );
    }
    for &i in &programs {
        let band = Band {
            lo: t,
            hi: t,
            kind: BandKind::AllBot,
            installed: stage,
        };
        if let Err(e) = rp.psi.install(Slot { k, i }, band) {
            report.fail("psi-immutable", Some(stage), e);
        }
    }

    let emitted = emit.map(|ev| match ev {
        IccEvent::Emit { x, .. } => x.clone(),
        _ => unreachable!(),
    });
    if let Some(exp) = expected {
        if exp != emitted {
            report.fail(
                "e-stream",
                Some(stage),
                format!("E_{k} step {t}: recorded {emitted:?}, oracle gives {exp:?}"),
            );
        }
    }
    let Some(IccEvent::Emit { x, c, action, .. }) = emit else {
        return;
    };
    rp.emissions.push((k, t, x.clone(), *c));
    if x.len() >= t {
        report.fail("case-two", Some(stage), format!("{x} emitted at step {t} is not shorter than {t}"));
    }
    if *c >= e_threshold(k) {
        report.fail("case-two", Some(stage), format!("{x} with C = {c} is not in E_{k}"));
    }
    let r = rp.r_set(k);
    let len_k = rp.len[&k];
    let routed = if r.contains(x) {
        "in_r"
    } else if x.len() < len_k {
        "short"
    } else {
        "assign"
    };
    let recorded = match action {
        EmitAction::InR => "in_r",
        EmitAction::Short { .. } => "short",
        EmitAction::Assign { .. } => "assign",
    };
    if routed != recorded {
        report.fail(
            "case-two",
            Some(stage),
            format!("{x}: recorded case {recorded}, state calls for {routed}"),
        );
    }
    if let EmitAction::Short { len } = action {
        if *len != len_k {
            report.fail("case-two", Some(stage), format!("len({k}) is {len_k}, recorded {len}"));
        }
    }
    let EmitAction::Assign {
        sigma: next,
        i,
        lo,
        hi,
        snapshot,
        r: band_r,
        resets,
    } = action
    else {
        return;
    };
    let count = rp.assigns.entry(k).or_default();
    *count += 1;
    let cap = (1u64 << m_size(k)) - 1;
    if *count > cap {
        report.fail("coverage", Some(stage), format!("{count} assignments for k={k}, at most {cap}"));
    }
    match succ(&sigma) {
        Ok(want) if &want == next => {}
        Ok(want) => report.fail("case-two", Some(stage), format!("σ_{k}: {next} recorded, succ gives {want}")),
        Err(e) => report.fail("coverage", Some(stage), e.to_string()),
    }
    let slot = Slot { k, i: *i };
    let first_set = set_positions(next).first().copied().unwrap_or(0);
    let mut shape = Vec::new();
    if first_set != *i as u64 {
        shape.push(format!("i={i}, least set bit {first_set}"));
    }
    if *lo != rp.psi.next_len(slot) {
        shape.push(format!("n={lo}, first undefined length {}", rp.psi.next_len(slot)));
    }
    if *hi != t {
        shape.push(format!("band ends at {hi}, not t={t}"));
    }
    if *snapshot != s {
        shape.push(format!("snapshot {snapshot}, not s={s}"));
    }
    if band_r != &r {
        shape.push("R differs from R(k,s)".to_string());
    }
    if !shape.is_empty() {
        report.fail("case-two", Some(stage), shape.join("; "));
    }
    let band = Band {
        lo: *lo,
        hi: *hi,
        kind: BandKind::ChiSnapshot {
            stage: *snapshot,
            r: band_r.clone(),
        },
        installed: stage,
    };
    if let Err(e) = rp.psi.install(slot, band) {
        report.fail("psi-immutable", Some(stage), e);
    }
    rp.sigma.insert(k, next.clone());
    rp.len.insert(k, t + 1);

    let want: Vec<(u64, u64)> = rp
        .d
        .iter()
        .skip(k as usize - 1)
        .filter(|rec| rec.passive_at.is_none())
        .map(|rec| (rec.e, pair(rec.e, stage)))
        .collect();
    if resets != &want {
        report.fail("claim-1a", Some(stage), "resets differ from the active e ≥ k".to_string());
    }
    for &(e, l) in resets {
        let Some(rec) = rp.d.get_mut((e as usize).wrapping_sub(1)) else {
            report.fail("claim-1a", Some(stage), format!("reset of unknown e={e}"));
            continue;
        };
        let prev = rec.history.last().expect("initial value").1;
        if l <= prev {
            report.fail("claim-1a", Some(stage), format!("l(d_{e}) falls from {prev} to {l}"));
        }
        if l <= s {
            report.fail("claim-1a", Some(stage), format!("l(d_{e}) = {l} is not beyond s = {s}"));
        }
        if l <= t {
            report.fail("claim-1d", Some(stage), format!("new d_{e} of length {l} inside the assigned lengths ≤ {t}"));
        }
        rec.history.push((stage, l));
    }
}

/// Domain shape and coverage for `k` at the end of stage `s+1 = 2⟨k,t⟩+2`.
fn check_domains(rp: &Replay, report: &mut CheckReport, stage: u64, k: u32, t: u64) {
    let set: Vec<u32> = set_positions(&rp.sigma[&k]).into_iter().map(|i| i as u32).collect();
    for &i in &set {
        let next = rp.psi.next_len(Slot { k, i });
        if next != t + 1 {
            report.fail(
                "claim-3b",
                Some(stage),
                format!("p_{{{k},{i}}} defined on lengths < {next}, expected ≤ {t}"),
            );
        }
    }
    let len = rp.len[&k];
    if len == 0 {
        return;
    }
    let r = rp.r_set(k);
    for l in 0..len {
        let chi = set.iter().any(|&i| {
            matches!(
                rp.psi.band_at(Slot { k, i }, l).map(|b| &b.kind),
                Some(BandKind::ChiSnapshot { .. })
            )
        });
        if !chi {
            report.fail(
                "claim-3c",
                Some(stage),
                format!("no assigned program of M_{k} answers χ_A on length {l}"),
            );
        }
    }
    for (z, &entered) in &rp.a {
        if entered > stage || z.len() >= len || r.contains(z) {
            continue;
        }
        let hit = set
            .iter()
            .any(|&i| rp.psi.eval(Slot { k, i }, z, &rp.a) == Some(Psi::One));
        if !hit {
            report.fail(
                "claim-3c",
                Some(stage),
                format!("{z} ∈ A_{stage} but no assigned program of M_{k} says 1"),
            );
        }
    }
}

fn check_ranges(rp: &Replay, report: &mut CheckReport) {
    let mut owner: BTreeMap<u64, u64> = BTreeMap::new();
    for rec in &rp.d {
        for &(stage, l) in &rec.history {
            if let Some(other) = owner.insert(l, rec.e) {
                if other != rec.e {
                    report.fail(
                        "claim-1b",
                        Some(stage),
                        format!("0^{l} lies in range(d_{other}) and range(d_{})", rec.e),
                    );
                }
            }
        }
    }
    for (z, &entered) in &rp.a {
        let Some(&e) = (z.is_zero_run()).then(|| owner.get(&z.len())).flatten() else {
            report.fail("diagonalization", Some(entered), format!("{z} ∈ A is no d-value"));
            continue;
        };
        let rec = &rp.d[e as usize - 1];
        if rec.current() != *z || rec.passive_at != Some(entered) {
            report.fail(
                "claim-1c",
                Some(entered),
                format!("{z} ∈ A but lim d_{e} = {}", rec.current()),
            );
        }
    }
}

/// Symbolic consistency of every snapshot band against the final `A`.
/// Returns the programs that fail it.
fn check_bands(rp: &Replay, report: &mut CheckReport, now: u64) -> BTreeSet<Slot> {
    let mut bad = BTreeSet::new();
    for slot in rp.psi.slots() {
        for band in rp.psi.bands(slot) {
            for z in band.inconsistencies(&rp.a, now) {
                bad.insert(slot);
                report.fail(
                    "claim-3a",
                    Some(band.installed),
                    format!(
                        "p_{{{},{}}} says 0 on {z}, which enters A at stage {}",
                        slot.k, slot.i, rp.a[z]
                    ),
                );
            }
        }
    }
    bad
}

/// `τ` programs witness `χ_A` on `range(d_e)` and stay consistent.
fn check_tau(rp: &Replay, tau: &[TauTables], report: &mut CheckReport) {
    for (rec, tt) in rp.d.iter().zip(tau) {
        for z in rec.range() {
            let truth = Psi::from_bit(rp.a.contains_key(&z));
            let got = if rec.passive_at.is_some() {
                tt.eval2(&z)
            } else {
                Some(tt.eval1(&z))
            };
            if got != Some(truth) {
                report.fail(
                    "claim-2",
                    rec.passive_at,
                    format!("τ for e={} answers {got:?} on {z}, χ_A = {truth:?}", rec.e),
                );
            }
        }
    }
}

fn tau_consistent(tt: &TauTables, a: &AHistory) -> (bool, bool) {
    let one = tt.tau1_zero.iter().all(|z| !a.contains_key(z));
    let two = tt.tau2_table.as_ref().is_some_and(|t2| {
        a.contains_key(&t2.one) && t2.zero.iter().all(|z| !a.contains_key(z))
    });
    (one, two)
}

fn check_ic(
    rp: &Replay,
    fin: &IccFinal,
    tau: &[TauTables],
    inconsistent: &BTreeSet<Slot>,
    report: &mut CheckReport,
) {
    let r_final: BTreeMap<u32, BTreeSet<BitString>> =
        (1..=rp.k_max).map(|k| (k, rp.r_set(k))).collect();
    let (mut checked, mut via_tau, mut small) = (0, 0, 0);
    for em in &fin.emissions {
        let minimal = (1..=rp.k_max).find(|&k| em.c_final < e_threshold(k));
        if minimal != Some(em.k) {
            continue;
        }
        checked += 1;
        let k = em.k;
        let x = &em.x;
        let truth = Psi::from_bit(rp.a.contains_key(x));
        let witness_len = if r_final[&k].contains(x) {
            via_tau += 1;
            let found = rp.d.iter().zip(tau).take(k as usize - 1).find_map(|(rec, tt)| {
                if !rec.range().contains(x) {
                    return None;
                }
                let (c1, c2) = tau_consistent(tt, &rp.a);
                let ok = (c1 && tt.eval1(x) == truth) || (c2 && tt.eval2(x) == Some(truth));
                ok.then_some(rec.e)
            });
            found
        } else {
            set_positions(&rp.sigma[&k])
                .into_iter()
                .map(|i| Slot { k, i: i as u32 })
                .find(|slot| !inconsistent.contains(slot) && rp.psi.eval(*slot, x, &rp.a) == Some(truth))
                .map(|_| k as u64)
        };
        let Some(w) = witness_len else {
            report.fail(
                "claim-4",
                Some(2 * pair(k as u64, em.t) + 2),
                format!("E_{k} element {x}: no consistent program of length ≤ {k} decides it"),
            );
            continue;
        };
        if em.c_final < 2 {
            small += 1;
            continue;
        }
        // k ≤ log C + 2  ⇔  2^{k−2} ≤ C
        if w >= 2 && 1u64 << (w - 2) > em.c_final as u64 {
            report.fail(
                "claim-4",
                Some(2 * pair(k as u64, em.t) + 2),
                format!("{x}: witness length {w} exceeds log {} + 2", em.c_final),
            );
        }
    }
    report.pass_unless_failed(
        "claim-4",
        format!(
            "{checked} minimal-k elements decided ({via_tau} by τ); {small} with C^s < 2 have no log bound; \
             log read as real log₂, so ⌈log₂ C⌉ + 2 holds a fortiori"
        ),
    );
}
