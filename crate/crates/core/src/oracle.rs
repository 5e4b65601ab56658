//! Providers of step-bounded complexity values `C^s(x)`.
//!
//! The simulators never call the machine directly for complexity; they ask a
//! [`ComplexityOracle`]. The honest provider is [`VmOracle`]; tests and the
//! CLI can substitute a [`ScriptedOracle`] to drive a construction down paths
//! the honest machine never takes. [`GuardedOracle`] wraps any provider and
//! checks the two laws every genuine `C^s` obeys: values never increase with
//! `s`, and at most `2^{g+1} − 1` strings have complexity `≤ g`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstr::{strings_up_to, BitString};
use crate::vm::{run, OutcomeKind, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum OracleError {
    #[error("oracle not monotone at {x}: {earlier} at stage {earlier_stage}, then {later} at stage {later_stage}")]
    NonMonotone {
        x: BitString,
        earlier_stage: u64,
        earlier: String,
        later_stage: u64,
        later: String,
    },
    #[error("ORACLE_PIGEONHOLE_VIOLATION: {count} distinct strings certified at complexity <= {g}, at most {limit} programs are that short")]
    Pigeonhole { g: u32, count: u64, limit: u64 },
    #[error("scripted oracle: {0}")]
    Script(String),
}

pub trait ComplexityOracle {
    /// Short label recorded in traces.
    fn name(&self) -> String;

    /// `C^stage(x)` if it is at most `cap`, otherwise `None`.
    fn value(&mut self, x: &BitString, stage: u64, cap: u32) -> Option<u32>;

    /// Every `x` with `C^stage(x) < threshold`, in canonical order.
    fn below(&mut self, threshold: u32, stage: u64) -> Vec<BitString>;
}

/// `C^s` on BitVM, with the step count clipped at `budget`.
#[derive(Debug, Clone)]
pub struct VmOracle {
    budget: u64,
    max_len: u32,
    /// output ↦ (program length, steps to halt), in canonical program order
    halts: HashMap<BitString, Vec<(u32, u64)>>,
}

impl VmOracle {
    pub fn new(budget: u64) -> Self {
        VmOracle {
            budget,
            max_len: 0,
            halts: HashMap::new(),
        }
        .with_programs_up_to(0)
    }

    fn with_programs_up_to(mut self, max_len: u32) -> Self {
        self.extend(max_len);
        self
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    fn extend(&mut self, max_len: u32) {
        if max_len < self.max_len || (!self.halts.is_empty() && max_len == self.max_len) {
            return;
        }
        let from = if self.halts.is_empty() { 0 } else { self.max_len + 1 };
        for len in from..=max_len {
            for code in crate::bitstr::strings_of_length(len) {
                let o = run(&Program::new(code), &BitString::empty(), self.budget);
                if let OutcomeKind::Halt(out) = o.kind {
                    self.halts.entry(out).or_default().push((len, o.steps));
                }
            }
        }
        self.max_len = max_len;
    }

    fn steps_at(&self, stage: u64) -> u64 {
        stage.min(self.budget)
    }
}

impl ComplexityOracle for VmOracle {
    fn name(&self) -> String {
        format!("vm(budget={})", self.budget)
    }

    fn value(&mut self, x: &BitString, stage: u64, cap: u32) -> Option<u32> {
        self.extend(cap);
        let steps = self.steps_at(stage);
        self.halts.get(x).and_then(|runs| {
            runs.iter()
                .filter(|&&(len, s)| len <= cap && s <= steps)
                .map(|&(len, _)| len)
                .min()
        })
    }

    fn below(&mut self, threshold: u32, stage: u64) -> Vec<BitString> {
        if threshold == 0 {
            return Vec::new();
        }
        self.extend(threshold - 1);
        let steps = self.steps_at(stage);
        let mut found: Vec<BitString> = self
            .halts
            .iter()
            .filter(|(_, runs)| runs.iter().any(|&(len, s)| len < threshold && s <= steps))
            .map(|(x, _)| x.clone())
            .collect();
        found.sort();
        found
    }
}

/// One scripted claim: from stage `s` on, `C^s(x) = value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptTriple(pub BitString, pub u64, pub u32);

/// A finite table of claims, consulted as a step function in the stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedOracle {
    claims: BTreeMap<BitString, Vec<(u64, u32)>>,
}

impl ScriptedOracle {
    /// Build from triples, rejecting tables that no machine could produce:
    /// values rising with the stage, conflicting claims, or more strings of
    /// complexity `≤ g` than there are programs of that length.
    pub fn from_triples(triples: &[ScriptTriple]) -> Result<Self, OracleError> {
        let oracle = Self::from_triples_unchecked(triples)?;
        oracle.check_pigeonhole()?;
        Ok(oracle)
    }

    /// Like [`ScriptedOracle::from_triples`] but only the per-string
    /// monotonicity law is enforced. Used to exercise the online guard.
    pub fn from_triples_unchecked(triples: &[ScriptTriple]) -> Result<Self, OracleError> {
        let mut claims: BTreeMap<BitString, Vec<(u64, u32)>> = BTreeMap::new();
        for ScriptTriple(x, s, v) in triples {
            claims.entry(x.clone()).or_default().push((*s, *v));
        }
        for (x, list) in claims.iter_mut() {
            list.sort();
            list.dedup();
            for w in list.windows(2) {
                let ((s0, v0), (s1, v1)) = (w[0], w[1]);
                if s0 == s1 {
                    return Err(OracleError::Script(format!(
                        "conflicting claims for {x} at stage {s0}: {v0} and {v1}"
                    )));
                }
                if v1 > v0 {
                    return Err(OracleError::NonMonotone {
                        x: x.clone(),
                        earlier_stage: s0,
                        earlier: v0.to_string(),
                        later_stage: s1,
                        later: v1.to_string(),
                    });
                }
            }
        }
        Ok(ScriptedOracle { claims })
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let triples: Vec<ScriptTriple> =
            serde_json::from_str(text).map_err(|e| OracleError::Script(e.to_string()))?;
        Self::from_triples(&triples)
    }

    fn check_pigeonhole(&self) -> Result<(), OracleError> {
        let mut counts = PigeonholeCounter::default();
        for (x, list) in &self.claims {
            let best = list.iter().map(|&(_, v)| v).min().expect("nonempty");
            counts.observe(x, best)?;
        }
        Ok(())
    }

    fn current(&self, x: &BitString, stage: u64) -> Option<u32> {
        self.claims
            .get(x)?
            .iter()
            .take_while(|&&(s, _)| s <= stage)
            .last()
            .map(|&(_, v)| v)
    }
}

impl ComplexityOracle for ScriptedOracle {
    fn name(&self) -> String {
        format!("scripted({} strings)", self.claims.len())
    }

    fn value(&mut self, x: &BitString, stage: u64, cap: u32) -> Option<u32> {
        self.current(x, stage).filter(|&v| v <= cap)
    }

    fn below(&mut self, threshold: u32, stage: u64) -> Vec<BitString> {
        self.claims
            .keys()
            .filter(|x| self.current(x, stage).is_some_and(|v| v < threshold))
            .cloned()
            .collect()
    }
}

/// Oracle defined by a closure `(x, stage) ↦ C^stage(x)`, for tests that
/// need claims about unboundedly many strings. `below` only looks at strings
/// up to `horizon` bits.
pub struct FnOracle<F> {
    f: F,
    horizon: u32,
}

impl<F: FnMut(&BitString, u64) -> Option<u32>> FnOracle<F> {
    pub fn new(horizon: u32, f: F) -> Self {
        FnOracle { f, horizon }
    }
}

impl<F: FnMut(&BitString, u64) -> Option<u32>> ComplexityOracle for FnOracle<F> {
    fn name(&self) -> String {
        "fn".into()
    }

    fn value(&mut self, x: &BitString, stage: u64, cap: u32) -> Option<u32> {
        (self.f)(x, stage).filter(|&v| v <= cap)
    }

    fn below(&mut self, threshold: u32, stage: u64) -> Vec<BitString> {
        strings_up_to(self.horizon)
            .filter(|x| (self.f)(x, stage).is_some_and(|v| v < threshold))
            .collect()
    }
}

/// Counts distinct strings certified at each complexity level.
#[derive(Debug, Clone, Default)]
struct PigeonholeCounter {
    best: HashMap<BitString, u32>,
    /// `at_most[g]` = strings with certified value `≤ g`
    at_most: Vec<u64>,
}

impl PigeonholeCounter {
    fn observe(&mut self, x: &BitString, v: u32) -> Result<(), OracleError> {
        let old = self.best.get(x).copied();
        if old.is_some_and(|o| o <= v) {
            return Ok(());
        }
        self.best.insert(x.clone(), v);
        let upper = old.map_or(63, |o| o.min(63));
        for g in v..upper {
            let g = g as usize;
            if self.at_most.len() <= g {
                self.at_most.resize(g + 1, 0);
            }
            self.at_most[g] += 1;
            let limit = (1u64 << (g + 1)) - 1;
            if self.at_most[g] > limit {
                return Err(OracleError::Pigeonhole {
                    g: g as u32,
                    count: self.at_most[g],
                    limit,
                });
            }
        }
        Ok(())
    }
}

/// Online checks over any oracle. The first violation is latched and
/// returned by [`GuardedOracle::violation`]; simulators poll it after every
/// query batch.
pub struct GuardedOracle<'a> {
    inner: &'a mut dyn ComplexityOracle,
    last: HashMap<BitString, (u64, u32)>,
    counter: PigeonholeCounter,
    violation: Option<OracleError>,
}

impl<'a> GuardedOracle<'a> {
    pub fn new(inner: &'a mut dyn ComplexityOracle) -> Self {
        GuardedOracle {
            inner,
            last: HashMap::new(),
            counter: PigeonholeCounter::default(),
            violation: None,
        }
    }

    pub fn violation(&self) -> Option<&OracleError> {
        self.violation.as_ref()
    }

    /// Strings certified so far, with their best values.
    pub fn certified(&self) -> BTreeSet<(BitString, u32)> {
        self.counter
            .best
            .iter()
            .map(|(x, v)| (x.clone(), *v))
            .collect()
    }

    fn record(&mut self, x: &BitString, stage: u64, cap: u32, got: Option<u32>) {
        if self.violation.is_some() {
            return;
        }
        if let Some(&(s0, v0)) = self.last.get(x) {
            let rose = match got {
                Some(v) => v > v0,
                None => cap >= v0,
            };
            if stage >= s0 && rose {
                self.violation = Some(OracleError::NonMonotone {
                    x: x.clone(),
                    earlier_stage: s0,
                    earlier: v0.to_string(),
                    later_stage: stage,
                    later: got.map_or(format!("> {cap}"), |v| v.to_string()),
                });
                return;
            }
        }
        if let Some(v) = got {
            let keep = self.last.get(x).is_none_or(|&(s0, _)| stage >= s0);
            if keep {
                self.last.insert(x.clone(), (stage, v));
            }
            if let Err(e) = self.counter.observe(x, v) {
                self.violation = Some(e);
            }
        }
    }
}

impl ComplexityOracle for GuardedOracle<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn value(&mut self, x: &BitString, stage: u64, cap: u32) -> Option<u32> {
        let got = self.inner.value(x, stage, cap);
        self.record(x, stage, cap, got);
        got
    }

    fn below(&mut self, threshold: u32, stage: u64) -> Vec<BitString> {
        let found = self.inner.below(threshold, stage);
        for x in &found {
            // membership alone certifies C < threshold
            if let Some(v) = self.inner.value(x, stage, threshold.saturating_sub(1)) {
                self.record(x, stage, threshold - 1, Some(v));
            }
        }
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn vm_oracle_matches_c_approx() {
        let mut o = VmOracle::new(64);
        for x in strings_up_to(3) {
            for stage in [0, 1, 2, 5] {
                let expect = crate::complexity::c_approx(&x, stage, 7).value.finite();
                assert_eq!(o.value(&x, stage, 7), expect, "x={x} stage={stage}");
            }
        }
        assert_eq!(o.value(&b("11"), 4, 4), None);
        assert_eq!(o.value(&b("11"), 4, 5), Some(5));
    }

    #[test]
    fn vm_oracle_below() {
        let mut o = VmOracle::new(1 << 12);
        assert!(o.below(1, 0).is_empty());
        assert_eq!(o.below(2, 1), vec![BitString::empty()]);
        let e3: Vec<String> = o.below(6, 2).iter().map(|x| x.literal()).collect();
        assert_eq!(e3, ["", "0", "1", "00", "01", "10", "11"]);
    }

    #[test]
    fn budget_clips_stage() {
        let mut o = VmOracle::new(1);
        // "000" needs two steps to print "0"; "0100" needs one
        assert_eq!(o.value(&b("0"), 100, 8), Some(4));
    }

    #[test]
    fn scripted_step_function() {
        let mut o = ScriptedOracle::from_triples(&[
            ScriptTriple(b("01"), 3, 5),
            ScriptTriple(b("01"), 7, 2),
        ])
        .unwrap();
        assert_eq!(o.value(&b("01"), 2, 10), None);
        assert_eq!(o.value(&b("01"), 3, 10), Some(5));
        assert_eq!(o.value(&b("01"), 6, 4), None);
        assert_eq!(o.value(&b("01"), 7, 4), Some(2));
        assert_eq!(o.below(3, 8), vec![b("01")]);
    }

    #[test]
    fn scripted_rejects_rising_values() {
        let err = ScriptedOracle::from_triples(&[
            ScriptTriple(b("1"), 1, 2),
            ScriptTriple(b("1"), 5, 3),
        ])
        .unwrap_err();
        assert!(matches!(err, OracleError::NonMonotone { .. }));
    }

    #[test]
    fn scripted_rejects_impossible_tables() {
        // two strings at complexity 0: only one program of length 0 exists
        let err = ScriptedOracle::from_triples(&[
            ScriptTriple(b("00"), 1, 0),
            ScriptTriple(b("01"), 4, 0),
        ])
        .unwrap_err();
        assert_eq!(
            err,
            OracleError::Pigeonhole {
                g: 0,
                count: 2,
                limit: 1
            }
        );
        assert!(ScriptedOracle::from_triples_unchecked(&[
            ScriptTriple(b("00"), 1, 0),
            ScriptTriple(b("01"), 4, 0),
        ])
        .is_ok());
    }

    #[test]
    fn scripted_json() {
        let o = ScriptedOracle::from_json(r#"[["0101", 3, 2], ["", 0, 0]]"#).unwrap();
        assert_eq!(o.clone().value(&b("0101"), 3, 2), Some(2));
        assert!(ScriptedOracle::from_json(r#"[["01x", 3, 2]]"#).is_err());
    }

    #[test]
    fn guard_latches_rising_values() {
        let mut inner = FnOracle::new(2, |_x: &BitString, s: u64| Some(s as u32));
        let mut g = GuardedOracle::new(&mut inner);
        g.value(&b("1"), 1, 10);
        assert!(g.violation().is_none());
        g.value(&b("1"), 2, 10);
        assert!(matches!(g.violation(), Some(OracleError::NonMonotone { .. })));
    }

    #[test]
    fn guard_counts_distinct_certifications() {
        let mut inner = FnOracle::new(2, |_x: &BitString, _s: u64| Some(1));
        let mut g = GuardedOracle::new(&mut inner);
        for x in ["100", "101", "110"] {
            g.value(&b(x), 0, 1);
        }
        assert!(g.violation().is_none());
        g.value(&b("1111"), 0, 1);
        assert_eq!(
            g.violation(),
            Some(&OracleError::Pigeonhole {
                g: 1,
                count: 4,
                limit: 3
            })
        );
    }

    #[test]
    fn guard_passes_the_honest_machine() {
        let mut vm = VmOracle::new(32);
        let mut g = GuardedOracle::new(&mut vm);
        for stage in 0..12 {
            for x in strings_up_to(4) {
                g.value(&x, stage, 9);
            }
        }
        assert!(g.violation().is_none());
    }
}
