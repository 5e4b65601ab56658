//! Enumeration of the finite sets `B_k`.
//!
//! `P_k` is every program of length at most `k`, and `S_k` starts as the full
//! power set of `P_k`. Each step searches by dovetailing for a subset
//! `I ∈ S_k`, an input `x` and a step count `s` with `U_s(p, x) = ⊥` for all
//! `p ∈ I`; the hit puts `x` into `B_k` and removes `I` from `S_k`.
//!
//! Dovetail order: `s = 1, 2, …`; within `s`, subsets by ascending bitmask
//! (bit `j` selects the `j`-th program of `P_k` in canonical order); within a
//! subset, inputs `x` with canonical index below `s`. Candidates before a
//! hit have failed for good, so continuing the scan after the hit is the same
//! as restarting it. The budget counts candidate checks.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::bitstr::{index_to_string, strings_up_to, BitString, CanonicalIndex};
use crate::trace::{CheckReport, StageTrace};
use crate::vm::{run, OutcomeKind, Program};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapParams {
    pub k: u32,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapRemoval {
    pub mask: u64,
    pub subset: Vec<Program>,
    pub x: BitString,
    pub s: u64,
    /// Candidate checks spent when this hit was found.
    pub probe: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapState {
    pub k: u32,
    pub p_k: Vec<Program>,
    /// Bitmasks still in `S_k`.
    pub s_k_size: u64,
    pub b_k: BTreeSet<BitString>,
    pub removals: Vec<GapRemoval>,
    pub probes: u64,
    /// `S_k` ran dry before the budget did.
    pub exhausted: bool,
    /// Largest `s` reached by the dovetail.
    pub reached_s: u64,
}

impl GapState {
    pub fn bound(&self) -> u64 {
        1u64 << self.p_k.len()
    }

    pub fn to_trace(&self, budget: u64) -> StageTrace {
        StageTrace::new(
            "gap",
            &GapParams { k: self.k, budget },
            &self.removals,
            self,
        )
    }
}

/// Programs in `I` selected by `mask`.
fn subset(p_k: &[Program], mask: u64) -> Vec<Program> {
    p_k.iter()
        .enumerate()
        .filter(|(j, _)| mask >> j & 1 == 1)
        .map(|(_, p)| p.clone())
        .collect()
}

pub fn gap_bk_run(k: u32, budget: u64) -> Result<GapState, SimError> {
    if k > 3 {
        return Err(SimError::Range(format!("k={k}: at most 3 at desk scale")));
    }
    let p_k: Vec<Program> = strings_up_to(k).map(Program::new).collect();
    let n_masks = 1u64 << p_k.len();
    let mut alive = vec![true; n_masks as usize];
    let mut alive_count = n_masks;
    let mut b_k = BTreeSet::new();
    let mut removals = Vec::new();
    let mut probes = 0u64;
    // outcome of the longest run so far per (program, input); `at_budget`
    // recovers shorter budgets
    let mut memo: HashMap<(usize, u64), (u64, OutcomeKind, u64)> = HashMap::new();
    let mut bottom_within = |j: usize, xi: u64, x: &BitString, s: u64| -> bool {
        let entry = memo.entry((j, xi)).or_insert_with(|| {
            let o = run(&p_k[j], x, s);
            (s, o.kind, o.steps)
        });
        if entry.1 == OutcomeKind::OutOfBudget && entry.0 < s {
            let o = run(&p_k[j], x, s.max(entry.0 * 2));
            *entry = (s.max(entry.0 * 2), o.kind, o.steps);
        }
        entry.1 == OutcomeKind::HaltBottom && entry.2 <= s
    };

    let mut s = 0u64;
    'search: while alive_count > 0 && probes < budget {
        s += 1;
        let inputs: Vec<BitString> = (0..s).map(|i| index_to_string(CanonicalIndex(i))).collect();
        for mask in 0..n_masks {
            if !alive[mask as usize] {
                continue;
            }
            for (xi, x) in inputs.iter().enumerate() {
                if probes >= budget {
                    break 'search;
                }
                probes += 1;
                let hit = (0..p_k.len())
                    .filter(|j| mask >> j & 1 == 1)
                    .all(|j| bottom_within(j, xi as u64, x, s));
                if hit {
                    alive[mask as usize] = false;
                    alive_count -= 1;
                    b_k.insert(x.clone());
                    removals.push(GapRemoval {
                        mask,
                        subset: subset(&p_k, mask),
                        x: x.clone(),
                        s,
                        probe: probes,
                    });
                    break;
                }
            }
        }
    }
    Ok(GapState {
        k,
        p_k,
        s_k_size: alive_count,
        b_k,
        removals,
        probes,
        exhausted: alive_count == 0,
        reached_s: s,
    })
}

/// Re-verify every removal against the machine and the size bounds.
pub fn check_gap(trace: &StageTrace) -> Result<CheckReport, SimError> {
    let params: GapParams = trace.params_as()?;
    let removals: Vec<GapRemoval> = trace.events_as()?;
    let state: GapState = trace.final_as()?;
    let mut report = CheckReport::new();
    let p_k: Vec<Program> = strings_up_to(params.k).map(Program::new).collect();
    if state.p_k != p_k {
        report.fail("p_k", None, "recorded P_k is not {0,1}^{<=k}");
    }
    let mut removed = BTreeSet::new();
    let mut last = (0u64, 0u64);
    for r in &removals {
        if !removed.insert(r.mask) {
            report.fail("removal", Some(r.probe), format!("subset {} removed twice", r.mask));
        }
        if subset(&p_k, r.mask) != r.subset {
            report.fail("removal", Some(r.probe), format!("mask {} names other programs", r.mask));
        }
        if (r.s, r.mask) <= last && last != (0, 0) {
            report.fail("dovetail-order", Some(r.probe), "removals out of dovetail order");
        }
        last = (r.s, r.mask);
        if string_index(&r.x) >= r.s {
            report.fail("dovetail-order", Some(r.probe), format!("x={} beyond s={}", r.x, r.s));
        }
        for p in &r.subset {
            let o = run(p, &r.x, r.s);
            if o.kind != OutcomeKind::HaltBottom {
                report.fail(
                    "removal",
                    Some(r.probe),
                    format!("U_{}({p}, {}) = {:?}, not ⊥", r.s, r.x, o.kind),
                );
            }
        }
    }
    report.pass_unless_failed("removal", format!("{} removals re-verified", removals.len()));
    report.pass_unless_failed("dovetail-order", "");
    let b: BTreeSet<BitString> = removals.iter().map(|r| r.x.clone()).collect();
    if b != state.b_k {
        report.fail("b_k", None, "B_k differs from the removal log");
    } else if b.is_empty() && state.probes > 0 {
        report.fail("b_k", None, "B_k empty although the empty subset qualifies at once");
    } else if b.len() as u64 > 1u64 << p_k.len() {
        report.fail("b_k", None, format!("|B_k| = {} exceeds 2^|P_k|", b.len()));
    } else {
        report.pass("b_k", format!("|B_k| = {}", b.len()));
    }
    if state.s_k_size + removals.len() as u64 != 1u64 << p_k.len() {
        report.fail("s_k", None, "S_k did not shrink by exactly one per removal");
    } else {
        report.pass("s_k", "");
    }
    Ok(report)
}

fn string_index(x: &BitString) -> u64 {
    crate::bitstr::string_to_index(x).map_or(u64::MAX, |c| c.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_removal_is_empty_subset_on_empty_input() {
        let g = gap_bk_run(1, 10_000).unwrap();
        let first = &g.removals[0];
        assert_eq!((first.mask, first.s), (0, 1));
        assert!(first.subset.is_empty());
        assert_eq!(first.x, BitString::empty());
        assert_eq!(first.probe, 1);
    }

    #[test]
    fn b1_nonempty_and_bounded() {
        let g = gap_bk_run(1, 10_000).unwrap();
        assert!(!g.b_k.is_empty());
        assert!(g.b_k.len() as u64 <= 8);
        assert_eq!(g.p_k.len(), 3);
        assert_eq!(g.probes, 10_000);
        assert!(check_gap(&g.to_trace(10_000)).unwrap().ok());
    }

    /// Every program of length ≤ 2 halts with λ, so only `I = ∅` can go.
    #[test]
    fn short_programs_never_diverge_to_bottom() {
        for k in [1, 2] {
            let g = gap_bk_run(k, 20_000).unwrap();
            assert_eq!(g.removals.len(), 1);
            assert_eq!(g.s_k_size, (1u64 << ((1u64 << (k + 1)) - 1)) - 1);
        }
    }

    #[test]
    fn three_bit_programs_reach_bottom() {
        let g = gap_bk_run(3, 100_000).unwrap();
        // "100" is BOT, "101" reads past the end of λ
        let masks: Vec<Vec<String>> = g
            .removals
            .iter()
            .map(|r| r.subset.iter().map(|p| p.to_string()).collect())
            .collect();
        assert!(masks.contains(&vec!["100".to_string()]));
        assert!(masks.contains(&vec!["101".to_string()]));
        assert!(masks.contains(&vec!["100".to_string(), "101".to_string()]));
        assert!(check_gap(&g.to_trace(100_000)).unwrap().ok());
    }

    #[test]
    fn checker_rejects_forged_removal() {
        let g = gap_bk_run(1, 500).unwrap();
        let mut t = g.to_trace(500);
        t.events[0]["mask"] = serde_json::json!(1);
        t.events[0]["subset"] = serde_json::json!([""]);
        let r = check_gap(&t).unwrap();
        assert!(r.first_failure("removal").is_some());
    }

    #[test]
    fn k_above_three_is_refused() {
        assert!(gap_bk_run(4, 10).is_err());
    }
}
