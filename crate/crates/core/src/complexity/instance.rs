use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{search_least, Bound};
use crate::bitstr::BitString;
use crate::vm::{run, value_of, Program, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("{0} is not in the consistency window")]
    NotInWindow(BitString),
    #[error("{0} appears twice in the window")]
    Duplicate(BitString),
}

/// A finite partial characteristic function `z ↦ χ(z)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConsistencyWindow {
    chi: BTreeMap<BitString, Bit>,
}

/// JSON windows store membership as `0`/`1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
struct Bit(bool);

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b.0 as u8
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Bit(false)),
            1 => Ok(Bit(true)),
            other => Err(format!("window values must be 0 or 1, got {other}")),
        }
    }
}

impl ConsistencyWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, WindowError>
    where
        I: IntoIterator<Item = (BitString, bool)>,
    {
        let mut w = Self::new();
        for (x, v) in pairs {
            if w.chi.insert(x.clone(), Bit(v)).is_some() {
                return Err(WindowError::Duplicate(x));
            }
        }
        Ok(w)
    }

    /// Window over `domain` with every point mapped to `value`.
    pub fn constant<I: IntoIterator<Item = BitString>>(domain: I, value: bool) -> Self {
        ConsistencyWindow {
            chi: domain.into_iter().map(|x| (x, Bit(value))).collect(),
        }
    }

    /// Set (or overwrite) one point.
    pub fn set(&mut self, x: BitString, value: bool) {
        self.chi.insert(x, Bit(value));
    }

    pub fn get(&self, x: &BitString) -> Option<bool> {
        self.chi.get(x).map(|b| b.0)
    }

    pub fn contains(&self, x: &BitString) -> bool {
        self.chi.contains_key(x)
    }

    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    /// Points in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&BitString, bool)> {
        self.chi.iter().map(|(x, b)| (x, b.0))
    }

    pub fn domain(&self) -> Vec<BitString> {
        self.chi.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcVariant {
    /// `ic`: the program must be three-valued on the whole window.
    Strict,
    /// `ic̄`: pending is tolerated away from the queried point.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ICValue {
    pub value: Bound,
    pub witness: Option<Program>,
    pub variant: IcVariant,
    pub budget: u64,
    pub max_len: u32,
}

/// Does `p` witness the instance complexity of `x` in this window?
pub fn eligible(
    p: &Program,
    x: &BitString,
    w: &ConsistencyWindow,
    budget: u64,
    variant: IcVariant,
) -> bool {
    let chi_x = match w.get(x) {
        Some(v) => v,
        None => return false,
    };
    if value_of(&run(p, x, budget)) != Value::from_bit(chi_x) {
        return false;
    }
    w.iter().filter(|(z, _)| *z != x).all(|(z, chi)| {
        match value_of(&run(p, z, budget)) {
            Value::Bottom => true,
            v @ (Value::Zero | Value::One) => v == Value::from_bit(chi),
            Value::Pending => variant == IcVariant::Weak,
            Value::ValueError => false,
        }
    })
}

fn ic_search(
    x: &BitString,
    w: &ConsistencyWindow,
    budget: u64,
    max_len: u32,
    variant: IcVariant,
) -> Result<ICValue, WindowError> {
    if !w.contains(x) {
        return Err(WindowError::NotInWindow(x.clone()));
    }
    let witness = search_least(max_len, |p| eligible(p, x, w, budget, variant));
    Ok(ICValue {
        value: witness
            .as_ref()
            .map_or(Bound::Infinity, |p| Bound::Finite(p.len() as u32)),
        witness,
        variant,
        budget,
        max_len,
    })
}

/// Window-restricted, budgeted `ic(x : A)`.
pub fn ic_window(
    x: &BitString,
    w: &ConsistencyWindow,
    budget: u64,
    max_len: u32,
) -> Result<ICValue, WindowError> {
    ic_search(x, w, budget, max_len, IcVariant::Strict)
}

/// Window-restricted, budgeted `ic̄(x : A)`.
pub fn ic_bar_window(
    x: &BitString,
    w: &ConsistencyWindow,
    budget: u64,
    max_len: u32,
) -> Result<ICValue, WindowError> {
    ic_search(x, w, budget, max_len, IcVariant::Weak)
}
