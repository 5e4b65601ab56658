//! Memoized machine runs with merge semantics and an NDJSON file format.
//!
//! An entry is either a terminal outcome (valid for every budget at least its
//! step count) or the largest budget known to leave the run pending.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstr::BitString;
use crate::vm::{run, Outcome, OutcomeKind, Program};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: record contradicts an earlier entry for p={p} z={z}: {message}")]
    Contradiction {
        line: usize,
        p: String,
        z: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Terminal(Outcome),
    /// Still running after this many steps.
    Pending(u64),
}

impl Entry {
    fn lookup(&self, budget: u64) -> Option<Outcome> {
        match self {
            Entry::Terminal(o) => Some(o.at_budget(budget)),
            Entry::Pending(b) if budget <= *b => Some(Outcome {
                kind: OutcomeKind::OutOfBudget,
                steps: budget,
            }),
            Entry::Pending(_) => None,
        }
    }

    /// Merge two observations of the same run. Terminal beats pending, larger
    /// pending budgets beat smaller ones; anything else is a contradiction.
    fn merge(&self, other: &Entry) -> Result<Entry, String> {
        match (self, other) {
            (Entry::Terminal(a), Entry::Terminal(b)) if a == b => Ok(self.clone()),
            (Entry::Terminal(a), Entry::Terminal(b)) => {
                Err(format!("terminal outcomes differ: {a:?} vs {b:?}"))
            }
            (Entry::Terminal(t), Entry::Pending(b)) | (Entry::Pending(b), Entry::Terminal(t)) => {
                if *b >= t.steps {
                    Err(format!(
                        "pending at budget {b} but halts after {} steps",
                        t.steps
                    ))
                } else {
                    Ok(Entry::Terminal(t.clone()))
                }
            }
            (Entry::Pending(a), Entry::Pending(b)) => Ok(Entry::Pending(*a.max(b))),
        }
    }
}

type Key = (Program, BitString);

/// Thread-safe memo of `run`.
#[derive(Debug, Default)]
pub struct RunCache {
    entries: RwLock<HashMap<Key, Entry>>,
}

/// One NDJSON line.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    p: String,
    z: BitString,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<BitString>,
    steps: u64,
    budget: u64,
}

fn parse_program(s: &str) -> Result<Program, String> {
    if let Some(hex) = s.strip_prefix("0x") {
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars() {
            let d = c.to_digit(16).ok_or_else(|| format!("bad hex digit {c:?}"))?;
            bits.extend((0..4).rev().map(|i| (d >> i) & 1 == 1));
        }
        Ok(Program::new(BitString::from_bits(bits)))
    } else {
        s.parse::<BitString>()
            .map(Program::new)
            .map_err(|e| e.to_string())
    }
}

impl RunCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, p: &Program, z: &BitString, budget: u64) -> Option<Outcome> {
        self.entries
            .read()
            .unwrap()
            .get(&(p.clone(), z.clone()))
            .and_then(|e| e.lookup(budget))
    }

    /// Record an observed run. Returns an error if it contradicts the cache,
    /// which can only happen if the cache was populated from a bad file.
    pub fn insert(&self, p: &Program, z: &BitString, outcome: &Outcome) -> Result<(), String> {
        let entry = if outcome.is_terminal() {
            Entry::Terminal(outcome.clone())
        } else {
            Entry::Pending(outcome.steps)
        };
        let mut map = self.entries.write().unwrap();
        let key = (p.clone(), z.clone());
        let merged = match map.get(&key) {
            Some(old) => old.merge(&entry)?,
            None => entry,
        };
        map.insert(key, merged);
        Ok(())
    }

    /// `run` through the cache.
    pub fn run(&self, p: &Program, z: &BitString, budget: u64) -> Outcome {
        if let Some(o) = self.get(p, z, budget) {
            return o;
        }
        let o = run(p, z, budget);
        self.insert(p, z, &o)
            .expect("fresh run contradicts cache contents");
        o
    }

    /// Fold another cache into this one.
    pub fn merge_from(&self, other: &RunCache) -> Result<(), String> {
        let theirs = other.entries.read().unwrap();
        let mut ours = self.entries.write().unwrap();
        for (k, e) in theirs.iter() {
            let merged = match ours.get(k) {
                Some(old) => old.merge(e)?,
                None => e.clone(),
            };
            ours.insert(k.clone(), merged);
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, CacheError> {
        let cache = RunCache::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| CacheError::Parse {
                line: line_no,
                message,
            };
            let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let p = parse_program(&rec.p).map_err(parse_err)?;
            if rec.steps > rec.budget {
                return Err(parse_err(format!(
                    "steps {} exceed budget {}",
                    rec.steps, rec.budget
                )));
            }
            let kind = match (rec.kind.as_str(), rec.out) {
                ("halt", Some(out)) => OutcomeKind::Halt(out),
                ("halt", None) => return Err(parse_err("halt record without out".into())),
                ("bot", _) => OutcomeKind::HaltBottom,
                ("oob", _) => {
                    if rec.steps != rec.budget {
                        return Err(parse_err("oob record must have steps == budget".into()));
                    }
                    OutcomeKind::OutOfBudget
                }
                (other, _) => return Err(parse_err(format!("unknown kind {other:?}"))),
            };
            let outcome = Outcome {
                kind,
                steps: rec.steps,
            };
            cache
                .insert(&p, &rec.z, &outcome)
                .map_err(|message| CacheError::Contradiction {
                    line: line_no,
                    p: rec.p.clone(),
                    z: rec.z.literal(),
                    message,
                })?;
        }
        Ok(cache)
    }

    /// Write all entries, sorted, one JSON object per line.
    pub fn save<W: Write>(&self, mut writer: W) -> Result<(), CacheError> {
        let map = self.entries.read().unwrap();
        let mut keys: Vec<&Key> = map.keys().collect();
        keys.sort();
        for key in keys {
            let (p, z) = key;
            let rec = match &map[key] {
                Entry::Terminal(o) => {
                    let (kind, out) = match &o.kind {
                        OutcomeKind::Halt(out) => ("halt", Some(out.clone())),
                        OutcomeKind::HaltBottom => ("bot", None),
                        OutcomeKind::OutOfBudget => unreachable!(),
                    };
                    Record {
                        p: p.code().literal(),
                        z: z.clone(),
                        kind: kind.into(),
                        out,
                        steps: o.steps,
                        budget: o.steps,
                    }
                }
                Entry::Pending(b) => Record {
                    p: p.code().literal(),
                    z: z.clone(),
                    kind: "oob".into(),
                    out: None,
                    steps: *b,
                    budget: *b,
                },
            };
            serde_json::to_writer(&mut writer, &rec).map_err(std::io::Error::other)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}
