//! Budgeted Kolmogorov complexity, window-restricted instance complexity and
//! the description codecs for initial segments of r.e. sets.
//!
//! Every search here walks the program space in canonical order and returns
//! the least qualifying program, so a value and its witness are both
//! deterministic. The program space below `max_len` may be cut into arbitrary
//! index ranges and searched in parallel; [`search_least_partitioned`] shows
//! the minimum over ranges is the sequential answer.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitstr::{index_to_string, BitString, CanonicalIndex};
use crate::cache::RunCache;
use crate::vm::{run, Outcome, OutcomeKind, Program};

pub mod codec;
mod instance;
mod profile;

pub use instance::{ic_bar_window, ic_window, ConsistencyWindow, ICValue, IcVariant, WindowError};
pub use profile::{hardness_profile, write_profile_csv, ProfileRow};

/// A complexity value: a length, or ∞ when nothing in the searched space
/// qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Finite(u32),
    Infinity,
}

impl Bound {
    pub fn finite(self) -> Option<u32> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Infinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Bound {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            Ok(Bound::Infinity)
        } else {
            s.parse().map(Bound::Finite)
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => serializer.serialize_u32(*v),
            Bound::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Bound::Finite(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `C^s(x)` (or `C^s(x | cond)`) restricted to programs of length at most
/// `max_len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityValue {
    pub value: Bound,
    pub budget: u64,
    pub max_len: u32,
}

/// Canonical indices of all programs of length at most `max_len`.
pub fn program_space(max_len: u32) -> Range<u64> {
    0..(1u64 << (max_len + 1)) - 1
}

/// Least program (in canonical order) of length at most `max_len` satisfying
/// `pred`.
pub fn search_least<F>(max_len: u32, pred: F) -> Option<Program>
where
    F: Fn(&Program) -> bool + Sync,
{
    search_range(program_space(max_len), &pred)
}

fn search_range<F>(range: Range<u64>, pred: &F) -> Option<Program>
where
    F: Fn(&Program) -> bool + Sync,
{
    // small ranges are not worth the thread hop
    if range.end - range.start < 512 {
        return range
            .map(|i| Program::new(index_to_string(CanonicalIndex(i))))
            .find(|p| pred(p));
    }
    range
        .into_par_iter()
        .map(|i| Program::new(index_to_string(CanonicalIndex(i))))
        .find_first(|p| pred(p))
}

/// Search each range independently and keep the overall least hit. Any
/// partition of [`program_space`] gives the same answer as [`search_least`].
pub fn search_least_partitioned<F>(partitions: &[Range<u64>], pred: F) -> Option<Program>
where
    F: Fn(&Program) -> bool + Sync,
{
    partitions
        .par_iter()
        .filter_map(|r| search_range(r.clone(), &pred))
        .min()
}

pub fn c_approx(x: &BitString, budget: u64, max_len: u32) -> ComplexityValue {
    cond_c_approx(x, &BitString::empty(), budget, max_len)
}

pub fn cond_c_approx(x: &BitString, cond: &BitString, budget: u64, max_len: u32) -> ComplexityValue {
    cond_c_with(x, budget, max_len, |p| run(p, cond, budget))
}

/// [`cond_c_approx`] with machine runs served from, and recorded in, `cache`.
pub fn cond_c_approx_cached(
    x: &BitString,
    cond: &BitString,
    budget: u64,
    max_len: u32,
    cache: &RunCache,
) -> ComplexityValue {
    cond_c_with(x, budget, max_len, |p| cache.run(p, cond, budget))
}

fn cond_c_with<R>(x: &BitString, budget: u64, max_len: u32, runner: R) -> ComplexityValue
where
    R: Fn(&Program) -> Outcome + Sync,
{
    let value = search_least(max_len, |p| {
        matches!(&runner(p).kind, OutcomeKind::Halt(out) if out == x)
    })
    .map_or(Bound::Infinity, |p| Bound::Finite(p.len() as u32));
    ComplexityValue {
        value,
        budget,
        max_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstr::strings_up_to;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    /// Brute force without the parallel search path.
    fn brute_c(x: &BitString, cond: &BitString, budget: u64, max_len: u32) -> Bound {
        for p in strings_up_to(max_len).map(Program::new) {
            if run(&p, cond, budget).kind == OutcomeKind::Halt(x.clone()) {
                return Bound::Finite(p.len() as u32);
            }
        }
        Bound::Infinity
    }

    #[test]
    fn c_approx_examples() {
        assert_eq!(brute_c(&BitString::empty(), &BitString::empty(), 1, 8), Bound::Finite(0));
        assert_eq!(brute_c(&b("11"), &BitString::empty(), 4, 8), Bound::Finite(5));
        assert_eq!(brute_c(&b("0"), &BitString::empty(), 2, 8), Bound::Finite(3));
        assert_eq!(c_approx(&BitString::empty(), 1, 8).value, Bound::Finite(0));
        assert_eq!(c_approx(&b("11"), 4, 8).value, Bound::Finite(5));
        assert_eq!(c_approx(&b("0"), 2, 8).value, Bound::Finite(3));
        // "000" needs the second step to halt at program end
        assert_eq!(c_approx(&b("0"), 1, 8).value, Bound::Finite(4));
    }

    #[test]
    fn cond_examples() {
        for cond in ["", "0", "1101"] {
            assert_eq!(
                cond_c_approx(&BitString::empty(), &b(cond), 1, 8).value,
                Bound::Finite(0)
            );
        }
        assert_eq!(brute_c(&b("1"), &BitString::empty(), 2, 8), Bound::Finite(3));
        assert_eq!(cond_c_approx(&b("1"), &BitString::empty(), 2, 8).value, Bound::Finite(3));
        for x in strings_up_to(4) {
            assert!(cond_c_approx(&x, &x, 8, 8).value <= c_approx(&x, 8, 8).value);
        }
    }

    #[test]
    fn matches_brute_force_small() {
        for x in strings_up_to(3) {
            for budget in [1, 2, 5] {
                assert_eq!(
                    c_approx(&x, budget, 7).value,
                    brute_c(&x, &BitString::empty(), budget, 7),
                    "x={x} budget={budget}"
                );
            }
        }
    }

    #[test]
    fn out_of_reach_is_infinite() {
        assert_eq!(c_approx(&b("1111"), 10, 6).value, Bound::Infinity);
        assert_eq!(c_approx(&b("1"), 0, 6).value, Bound::Infinity);
    }

    #[test]
    fn bound_order_and_text() {
        assert!(Bound::Finite(100) < Bound::Infinity);
        assert!(Bound::Finite(2) < Bound::Finite(3));
        assert_eq!(Bound::Infinity.to_string(), "inf");
        assert_eq!("inf".parse::<Bound>().unwrap(), Bound::Infinity);
        assert_eq!(serde_json::to_string(&Bound::Finite(3)).unwrap(), "3");
        assert_eq!(
            serde_json::from_str::<Bound>("\"inf\"").unwrap(),
            Bound::Infinity
        );
    }

    #[test]
    fn partitioned_search_matches_sequential() {
        let x = b("01");
        let pred = |p: &Program| run(p, &BitString::empty(), 3).kind == OutcomeKind::Halt(x.clone());
        let whole = search_least(9, pred);
        let space = program_space(9);
        for cuts in [vec![5, 700], vec![1, 2, 3, 900], vec![64], vec![]] {
            let mut bounds = vec![space.start];
            bounds.extend(cuts);
            bounds.push(space.end);
            let parts: Vec<Range<u64>> = bounds.windows(2).map(|w| w[0]..w[1]).rev().collect();
            assert_eq!(search_least_partitioned(&parts, pred), whole);
        }
        assert_eq!(whole.unwrap().code(), &b("01001"));
    }
}
