//! Stage-by-stage enumeration of a complex r.e. set.
//!
//! Naturals are split into intervals `I_k = (t_k, t_{k+1}]` with `t_0 = 0`,
//! `t_{k+1} = 2^{t_k}`. At step `s+1`, for each `k ≤ s`, if every prefix
//! `χ_{A_s}↾n` with `n ∈ I_k` has `C^s ≤ g(k)`, the least unenumerated
//! element of `I_k` goes into `A`. A genuine `C^s` can never license the
//! whole interval, so any attempt is reported as an oracle violation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::bitstr::BitString;
use crate::oracle::{ComplexityOracle, GuardedOracle, OracleError};
use crate::trace::{CheckReport, StageTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalParams {
    pub k: u32,
    pub t_k: u64,
    pub t_k1: u64,
    pub f_k: u64,
    pub g_k: u32,
}

impl IntervalParams {
    pub fn contains(&self, n: u64) -> bool {
        self.t_k < n && n <= self.t_k1
    }

    pub fn members(&self) -> std::ops::RangeInclusive<u64> {
        self.t_k + 1..=self.t_k1
    }

    /// Most strings a genuine machine can give complexity `≤ g_k`.
    pub fn pigeonhole_limit(&self) -> u64 {
        (1u64 << (self.g_k + 1)) - 1
    }
}

fn tower(k: u32) -> Option<u64> {
    let mut t = 0u64;
    for _ in 0..k {
        t = 1u64.checked_shl(u32::try_from(t).ok()?)?;
        if t == 0 {
            return None;
        }
    }
    Some(t)
}

pub fn interval_params(k: u32) -> Result<IntervalParams, SimError> {
    let t_k = tower(k).ok_or_else(|| SimError::Range(format!("t_{k} overflows")))?;
    let t_k1 = tower(k + 1).ok_or_else(|| SimError::Range(format!("t_{} overflows", k + 1)))?;
    // Σ_{i=t_k+1}^{t_{k+1}} (i − t_k + 1) = Σ_{j=2}^{m} j with m = t_{k+1} − t_k + 1
    let m = (t_k1 - t_k + 1) as u128;
    let f_k = u64::try_from(m * (m + 1) / 2 - 1)
        .map_err(|_| SimError::Range(format!("f({k}) overflows")))?;
    let mut g_k = 0u32;
    while (1u128 << (g_k + 2)) - 1 < f_k as u128 {
        g_k += 1;
    }
    Ok(IntervalParams {
        k,
        t_k,
        t_k1,
        f_k,
        g_k,
    })
}

/// `χ_A(0) … χ_A(n)`.
pub fn chi_prefix(a: &BTreeSet<u64>, n: u64) -> BitString {
    BitString::from_bits((0..=n).map(|i| a.contains(&i)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexSetParams {
    pub k_max: u32,
    pub stages: u64,
    pub oracle: String,
}

/// `C^s(χ_{A_s}↾n) = value` for one `n`, as reported by the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Licence {
    pub n: u64,
    pub prefix: BitString,
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ComplexSetEvent {
    Enumerate {
        stage: u64,
        k: u32,
        n: u64,
        licences: Vec<Licence>,
    },
    Abort {
        stage: u64,
        k: u32,
        error: OracleError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub params: IntervalParams,
    pub enumerated: Vec<u64>,
    /// Least `n ∈ I_k` whose final prefix is not certified `≤ g(k)`.
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub n: u64,
    pub prefix: BitString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexSetFinal {
    pub stages_run: u64,
    pub a: Vec<u64>,
    pub intervals: Vec<IntervalReport>,
    pub aborted: Option<OracleError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexSetRun {
    pub params: ComplexSetParams,
    pub events: Vec<ComplexSetEvent>,
    pub final_state: ComplexSetFinal,
}

impl ComplexSetRun {
    pub fn error(&self) -> Option<&OracleError> {
        self.final_state.aborted.as_ref()
    }

    pub fn enumerations(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, ComplexSetEvent::Enumerate { .. }))
            .count()
    }

    pub fn to_trace(&self) -> StageTrace {
        StageTrace::new("complex-set", &self.params, &self.events, &self.final_state)
    }
}

/// Ask for `C^s(χ_{A_s}↾n) ≤ g` for every `n ∈ I_k`, stopping at the first
/// failure. Returns the licences if all pass.
fn licensed(
    oracle: &mut GuardedOracle<'_>,
    a: &BTreeSet<u64>,
    ip: &IntervalParams,
    s: u64,
) -> Option<Vec<Licence>> {
    let mut out = Vec::new();
    for n in ip.members() {
        let prefix = chi_prefix(a, n);
        let value = oracle.value(&prefix, s, ip.g_k)?;
        if oracle.violation().is_some() {
            return None;
        }
        out.push(Licence { n, prefix, value });
    }
    Some(out)
}

pub fn complex_set_run(
    k_max: u32,
    stages: u64,
    oracle: &mut dyn ComplexityOracle,
) -> Result<ComplexSetRun, SimError> {
    let intervals: Vec<IntervalParams> = (0..=k_max)
        .map(interval_params)
        .collect::<Result<_, _>>()?;
    let params = ComplexSetParams {
        k_max,
        stages,
        oracle: oracle.name(),
    };
    let mut guard = GuardedOracle::new(oracle);
    let mut a: BTreeSet<u64> = BTreeSet::new();
    let mut events = Vec::new();
    let mut aborted = None;
    let mut stages_run = 0;

    'stages: for s in 0..stages {
        let stage = s + 1;
        let a_s = a.clone();
        for ip in intervals.iter().take(s.min(k_max as u64) as usize + 1) {
            let licences = licensed(&mut guard, &a_s, ip, s);
            if let Some(err) = guard.violation() {
                events.push(ComplexSetEvent::Abort {
                    stage,
                    k: ip.k,
                    error: err.clone(),
                });
                aborted = Some(err.clone());
                stages_run = stage;
                break 'stages;
            }
            let Some(licences) = licences else { continue };
            match ip.members().find(|n| !a_s.contains(n)) {
                Some(n) => {
                    a.insert(n);
                    events.push(ComplexSetEvent::Enumerate {
                        stage,
                        k: ip.k,
                        n,
                        licences,
                    });
                }
                None => {
                    let err = OracleError::Pigeonhole {
                        g: ip.g_k,
                        count: ip.f_k,
                        limit: ip.pigeonhole_limit(),
                    };
                    events.push(ComplexSetEvent::Abort {
                        stage,
                        k: ip.k,
                        error: err.clone(),
                    });
                    aborted = Some(err);
                    stages_run = stage;
                    break 'stages;
                }
            }
        }
        stages_run = stage;
    }

    let reports = intervals
        .iter()
        .map(|ip| {
            let witness = if aborted.is_some() {
                None
            } else {
                ip.members().find_map(|n| {
                    let prefix = chi_prefix(&a, n);
                    guard
                        .value(&prefix, stages_run, ip.g_k)
                        .is_none()
                        .then_some(Witness { n, prefix })
                })
            };
            IntervalReport {
                params: *ip,
                enumerated: a.iter().copied().filter(|&n| ip.contains(n)).collect(),
                witness,
            }
        })
        .collect();
    Ok(ComplexSetRun {
        params,
        events,
        final_state: ComplexSetFinal {
            stages_run,
            a: a.into_iter().collect(),
            intervals: reports,
            aborted,
        },
    })
}

/// Replay a complex-set trace and check every stage.
pub fn check_complex_set(trace: &StageTrace) -> Result<CheckReport, SimError> {
    let params: ComplexSetParams = trace.params_as()?;
    let events: Vec<ComplexSetEvent> = trace.events_as()?;
    let fin: ComplexSetFinal = trace.final_as()?;
    let intervals: Vec<IntervalParams> = (0..=params.k_max)
        .map(interval_params)
        .collect::<Result<_, _>>()?;
    let mut report = CheckReport::new();

    let mut a: BTreeSet<u64> = BTreeSet::new();
    let mut certified: BTreeSet<(BitString, u32)> = BTreeSet::new();
    let mut stage_of_last = 0;
    let mut seen_this_stage: BTreeSet<u32> = BTreeSet::new();
    let mut a_stage_start = a.clone();

    for ev in &events {
        let stage = match ev {
            ComplexSetEvent::Enumerate { stage, .. } | ComplexSetEvent::Abort { stage, .. } => {
                *stage
            }
        };
        if stage < stage_of_last {
            report.fail("stage-order", Some(stage), "events out of stage order");
        }
        if stage != stage_of_last {
            stage_of_last = stage;
            seen_this_stage.clear();
            a_stage_start = a.clone();
        }
        let ComplexSetEvent::Enumerate {
            k, n, licences, ..
        } = ev
        else {
            continue;
        };
        let Some(ip) = intervals.get(*k as usize) else {
            report.fail("licence", Some(stage), format!("k={k} beyond k_max"));
            continue;
        };
        if *k as u64 > stage - 1 {
            report.fail("licence", Some(stage), format!("k={k} acts before step {}", k + 1));
        }
        if !seen_this_stage.insert(*k) {
            report.fail(
                "one-per-interval",
                Some(stage),
                format!("two enumerations for k={k}"),
            );
        }
        let expected = ip.members().find(|m| !a_stage_start.contains(m));
        if expected != Some(*n) {
            report.fail(
                "downward-closed",
                Some(stage),
                format!("enumerated {n}, least free element of I_{k} is {expected:?}"),
            );
        }
        let covered: Vec<u64> = licences.iter().map(|l| l.n).collect();
        if covered != ip.members().collect::<Vec<_>>() {
            report.fail("licence", Some(stage), format!("k={k}: licences do not cover I_{k}"));
        }
        for l in licences {
            if l.prefix != chi_prefix(&a_stage_start, l.n) || l.value > ip.g_k {
                report.fail(
                    "licence",
                    Some(stage),
                    format!("k={k}: bad licence for n={} ({}, {})", l.n, l.prefix, l.value),
                );
            }
            certified.insert((l.prefix.clone(), l.value));
        }
        a.insert(*n);
        for ip in &intervals {
            let inside = ip.members().filter(|m| a.contains(m)).count() as u64;
            let closed = ip.members().take(inside as usize).all(|m| a.contains(&m));
            if !closed {
                report.fail("downward-closed", Some(stage), format!("A ∩ I_{} has a gap", ip.k));
            }
            // for k ≤ 1 the interval holds fewer strings than its pigeonhole
            // bound, so filling it is legitimate
            if ip.f_k - 1 > ip.pigeonhole_limit() && inside == ip.t_k1 - ip.t_k {
                report.fail(
                    "non-exhaustion",
                    Some(stage),
                    format!("A ∩ I_{} = I_{}", ip.k, ip.k),
                );
            }
        }
    }
    report.pass_unless_failed("downward-closed", "");
    report.pass_unless_failed("one-per-interval", "");
    report.pass_unless_failed("licence", "");
    report.pass_unless_failed("non-exhaustion", "");
    report.pass_unless_failed("stage-order", "");

    // pigeonhole over everything the trace says was certified
    let mut best: BTreeMap<&BitString, u32> = BTreeMap::new();
    for (x, v) in &certified {
        let e = best.entry(x).or_insert(*v);
        *e = (*e).min(*v);
    }
    for g in 0..=intervals.iter().map(|ip| ip.g_k).max().unwrap_or(0) {
        let count = best.values().filter(|&&v| v <= g).count() as u64;
        let limit = (1u64 << (g + 1)) - 1;
        if count > limit {
            report.fail(
                "pigeonhole",
                None,
                format!("{count} strings licensed at complexity <= {g}, limit {limit}"),
            );
        }
    }
    report.pass_unless_failed("pigeonhole", "");

    if a.iter().copied().collect::<Vec<_>>() != fin.a {
        report.fail("final-state", None, "replayed A differs from the recorded final A");
    }
    match &fin.aborted {
        Some(err) => report.fail("oracle", Some(fin.stages_run), err.to_string()),
        None => {
            report.pass("oracle", "");
            for r in &fin.intervals {
                match &r.witness {
                    Some(w)
                        if r.params.contains(w.n) && w.prefix == chi_prefix(&a, w.n) => {}
                    Some(w) => report.fail(
                        "complex-witness",
                        None,
                        format!("k={}: witness n={} does not match the final set", r.params.k, w.n),
                    ),
                    None => report.fail(
                        "complex-witness",
                        None,
                        format!("k={}: every prefix over I_k certified <= g(k)", r.params.k),
                    ),
                }
            }
            report.pass_unless_failed("complex-witness", "");
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{FnOracle, ScriptTriple, ScriptedOracle, VmOracle};

    /// Summation straight from the displayed formula.
    fn f_by_sum(t_k: u64, t_k1: u64) -> u64 {
        (t_k + 1..=t_k1).map(|i| i - t_k + 1).sum()
    }

    #[test]
    fn interval_examples() {
        let p0 = interval_params(0).unwrap();
        assert_eq!((p0.t_k, p0.t_k1, p0.f_k, p0.g_k), (0, 1, 2, 0));
        let p1 = interval_params(1).unwrap();
        assert_eq!((p1.t_k, p1.t_k1, p1.f_k, p1.g_k), (1, 2, 2, 0));
        let p2 = interval_params(2).unwrap();
        assert_eq!((p2.t_k, p2.t_k1, p2.f_k, p2.g_k), (2, 4, 5, 1));
        let p3 = interval_params(3).unwrap();
        assert_eq!((p3.t_k, p3.t_k1, p3.f_k, p3.g_k), (4, 16, 90, 5));
        let p4 = interval_params(4).unwrap();
        assert_eq!(p4.t_k1, 65536);
        assert!(interval_params(5).is_err());
    }

    #[test]
    fn interval_formulas_against_summation() {
        for k in 0..=4 {
            let p = interval_params(k).unwrap();
            assert_eq!(p.f_k, f_by_sum(p.t_k, p.t_k1));
            // g is the largest l with 2^{l+1} − 1 < f
            assert!((1u64 << (p.g_k + 1)) - 1 < p.f_k);
            assert!((1u64 << (p.g_k + 2)) - 1 >= p.f_k);
        }
    }

    #[test]
    fn prefix_has_length_n_plus_one() {
        let a: BTreeSet<u64> = [1, 3].into();
        assert_eq!(chi_prefix(&a, 4), "01010".parse().unwrap());
        assert_eq!(chi_prefix(&BTreeSet::new(), 0).len(), 1);
    }

    #[test]
    fn honest_machine_never_enumerates() {
        let mut vm = VmOracle::new(1 << 12);
        let run = complex_set_run(3, 200, &mut vm).unwrap();
        assert_eq!(run.enumerations(), 0);
        assert!(run.error().is_none());
        for r in &run.final_state.intervals {
            assert!(r.witness.is_some(), "k={}", r.params.k);
        }
        let report = check_complex_set(&run.to_trace()).unwrap();
        assert!(report.ok(), "{report:?}");
    }

    #[test]
    fn scripted_zero_complexity_enumerates_first_interval() {
        // one string at level 0 is all a machine allows
        let triples = [ScriptTriple("00".parse().unwrap(), 0, 0)];
        let mut oracle = ScriptedOracle::from_triples(&triples).unwrap();
        let run = complex_set_run(0, 3, &mut oracle).unwrap();
        match &run.events[0] {
            ComplexSetEvent::Enumerate { stage, k, n, .. } => {
                assert_eq!((*stage, *k, *n), (1, 0, 1));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(run.final_state.a, vec![1]);
        // the honest table never certifies "01", so the run goes quiet
        assert!(run.error().is_none());
        assert!(check_complex_set(&run.to_trace()).unwrap().ok());
    }

    #[test]
    fn every_string_free_is_caught_in_first_interval() {
        let mut oracle = FnOracle::new(4, |x: &BitString, _| (x.len() <= 2).then_some(0));
        let run = complex_set_run(0, 5, &mut oracle).unwrap();
        assert_eq!(run.final_state.a, vec![1]);
        assert!(matches!(run.error(), Some(OracleError::Pigeonhole { g: 0, .. })));
        match run.events.last().unwrap() {
            ComplexSetEvent::Abort { stage, .. } => assert_eq!(*stage, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cheap_prefixes_over_second_interval_abort_before_exhaustion() {
        // C ≤ 1 for all prefixes over I_2 = {3, 4}, forever
        let mut oracle = FnOracle::new(6, |x: &BitString, _| {
            (x.len() == 4 || x.len() == 5).then_some(1)
        });
        let run = complex_set_run(2, 10, &mut oracle).unwrap();
        assert!(matches!(
            run.error(),
            Some(OracleError::Pigeonhole { g: 1, count: 4, limit: 3 })
        ));
        // one enumeration, then the fourth distinct certified string trips
        // the counter before I_2 can fill
        assert_eq!(run.enumerations(), 1);
        assert_eq!(run.final_state.a, vec![3]);
        let report = check_complex_set(&run.to_trace()).unwrap();
        assert!(report.first_failure("oracle").is_some());
        assert!(report.first_failure("non-exhaustion").is_none());
    }

    #[test]
    fn load_time_validation_rejects_the_same_table() {
        let triples: Vec<ScriptTriple> = ["0000", "00000", "0001", "00010", "00011"]
            .iter()
            .map(|x| ScriptTriple(x.parse().unwrap(), 0, 1))
            .collect();
        assert!(matches!(
            ScriptedOracle::from_triples(&triples),
            Err(OracleError::Pigeonhole { .. })
        ));
    }

    #[test]
    fn checker_spots_a_skipped_element() {
        let mut oracle = FnOracle::new(4, |x: &BitString, _| (x == &"00".parse().unwrap()).then_some(0));
        let run = complex_set_run(0, 2, &mut oracle).unwrap();
        let mut trace = run.to_trace();
        trace.events[0]["n"] = serde_json::json!(2);
        let report = check_complex_set(&trace).unwrap();
        assert_eq!(report.first_failure("downward-closed").unwrap().stage, Some(1));
    }

    #[test]
    fn deterministic_trace_bytes() {
        let a = complex_set_run(2, 30, &mut VmOracle::new(64)).unwrap().to_trace().to_json();
        let b = complex_set_run(2, 30, &mut VmOracle::new(64)).unwrap().to_trace().to_json();
        assert_eq!(a, b);
    }
}
