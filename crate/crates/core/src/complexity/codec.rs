//! Short descriptions of `χ_A↾n = χ_A(0)…χ_A(n)` for an r.e. set `A` given by
//! an enumeration.
//!
//! Both count codecs rest on the same observation: knowing `m = |A ∩ [0,n]|`,
//! a decoder can replay the enumeration until `m` elements `≤ n` have shown
//! up, at which point the segment is settled. `bin(m)` is padded to the width
//! of `bin(n)` so that the two halves of the unconditional code split evenly.
//!
//! `m` ranges over `0..=n+1`, one value more than `w = l(bin(n))` bits hold
//! when `n + 1 = 2^w`. In that single case (every number up to `n` is in `A`)
//! the count is written with `w + 1` bits.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstr::BitString;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("enumeration ran out after {seen} of {wanted} elements <= {n}")]
    Pending { n: u64, wanted: u64, seen: u64 },
    #[error("malformed code: {0}")]
    Malformed(String),
    #[error("approximation row {x} changes its mind {changes} times, more than {x}")]
    MindchangeBound { x: u64, changes: u64 },
    #[error("range error: {0}")]
    Range(String),
}

fn width(n: u64) -> u32 {
    64 - n.leading_zeros()
}

/// `m` in `w` bits, or `w + 1` bits in the overflow case `m = 2^w`.
fn count_bits(m: u64, w: u32) -> BitString {
    if width(m) <= w {
        BitString::binary_padded(m, w)
    } else {
        debug_assert_eq!(m, 1 << w);
        BitString::binary(m)
    }
}

fn members_up_to(enumeration: &[u64], n: u64) -> u64 {
    enumeration
        .iter()
        .filter(|&&a| a <= n)
        .collect::<BTreeSet<_>>()
        .len() as u64
}

/// Replay until `m` distinct elements `≤ n` have appeared.
fn replay(enumeration: &[u64], n: u64, m: u64) -> Result<BitString, CodecError> {
    let mut seen = BTreeSet::new();
    if m > 0 {
        for &a in enumeration {
            if a <= n {
                seen.insert(a);
                if seen.len() as u64 == m {
                    break;
                }
            }
        }
    }
    if (seen.len() as u64) < m {
        return Err(CodecError::Pending {
            n,
            wanted: m,
            seen: seen.len() as u64,
        });
    }
    Ok(BitString::from_bits((0..=n).map(|i| seen.contains(&i))))
}

/// The segment itself, read off the enumeration directly.
pub fn characteristic_prefix(enumeration: &[u64], n: u64) -> BitString {
    let members: BTreeSet<u64> = enumeration.iter().copied().filter(|&a| a <= n).collect();
    BitString::from_bits((0..=n).map(|i| members.contains(&i)))
}

/// `bin(n)` followed by `bin(m)` padded to the same width.
pub fn two_log_encode(enumeration: &[u64], n: u64) -> BitString {
    let w = width(n);
    BitString::binary(n).concat(&count_bits(members_up_to(enumeration, n), w))
}

pub fn two_log_decode(code: &BitString, enumeration: &[u64]) -> Result<BitString, CodecError> {
    let len = code.len();
    let w = len / 2;
    let n = code
        .prefix(w)
        .to_u64()
        .ok_or_else(|| CodecError::Malformed("length field too wide".into()))?;
    if w > 0 && !code.bit(0) {
        return Err(CodecError::Malformed("bin(n) must start with 1".into()));
    }
    let m = code.suffix(w).to_u64().expect("at most 65 bits, checked below");
    if len % 2 == 1 && m != 1 << w {
        return Err(CodecError::Malformed("odd length without count overflow".into()));
    }
    replay(enumeration, n, m)
}

/// `bin(m)` padded to `l(bin(n))`; the decoder is told `n`.
pub fn log_cond_encode(enumeration: &[u64], n: u64) -> BitString {
    count_bits(members_up_to(enumeration, n), width(n))
}

pub fn log_cond_decode(code: &BitString, n: u64, enumeration: &[u64]) -> Result<BitString, CodecError> {
    let w = width(n) as u64;
    if code.len() != w && code.len() != w + 1 {
        return Err(CodecError::Malformed(format!(
            "expected {w} or {} bits for n={n}, got {}",
            w + 1,
            code.len()
        )));
    }
    let m = code.to_u64().expect("at most 65 bits");
    if m > n + 1 {
        return Err(CodecError::Malformed(format!("count {m} exceeds n+1")));
    }
    replay(enumeration, n, m)
}

/// A finite presentation of a limit approximation `ḡ(x, s)` together with the
/// nondecreasing unbounded function `f` it was built against.
///
/// `rows[x][s]` is `ḡ(x, s)`; the last entry of a row repeats forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MindchangeTable {
    pub f: Vec<u64>,
    pub rows: Vec<Vec<BitString>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MindchangeCode {
    /// Mind changes of `ḡ(n', ·)`.
    pub x_count: u64,
    pub n_prime: u64,
}

fn mind_changes(row: &[BitString]) -> u64 {
    row.windows(2).filter(|w| w[0] != w[1]).count() as u64
}

impl MindchangeTable {
    /// Each row `x` may change value at most `x` times; `f` must be
    /// nondecreasing.
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.f.windows(2).any(|w| w[0] > w[1]) {
            return Err(CodecError::Range("f is not nondecreasing".into()));
        }
        for (x, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                return Err(CodecError::Range(format!("row {x} is empty")));
            }
            let changes = mind_changes(row);
            if changes > x as u64 {
                return Err(CodecError::MindchangeBound {
                    x: x as u64,
                    changes,
                });
            }
        }
        Ok(())
    }

    /// `m(x) = 1 + max{n : f(n) ≤ x}`, or 0 when no such `n` exists.
    pub fn m(&self, x: u64) -> Result<u64, CodecError> {
        match self.f.last() {
            Some(&last) if last > x => {}
            _ => {
                return Err(CodecError::Range(format!(
                    "f never exceeds {x} in the supplied table"
                )))
            }
        }
        Ok(self
            .f
            .iter()
            .rposition(|&v| v <= x)
            .map_or(0, |n| n as u64 + 1))
    }

    /// `n' = min{x : m(x) > n}`.
    pub fn n_prime(&self, n: u64) -> Result<u64, CodecError> {
        let mut x = 0;
        loop {
            if self.m(x)? > n {
                return Ok(x);
            }
            x += 1;
        }
    }

    fn row(&self, x: u64) -> Result<&[BitString], CodecError> {
        self.rows
            .get(x as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| CodecError::Range(format!("no approximation row {x}")))
    }
}

pub fn mindchange_encode(table: &MindchangeTable, n: u64) -> Result<MindchangeCode, CodecError> {
    table.validate()?;
    let n_prime = table.n_prime(n)?;
    let x_count = mind_changes(table.row(n_prime)?);
    Ok(MindchangeCode { x_count, n_prime })
}

/// Replay `ḡ(n', ·)` through `x_count` changes and cut the settled value to
/// `n + 1` bits.
pub fn mindchange_decode(
    code: &MindchangeCode,
    n: u64,
    table: &MindchangeTable,
) -> Result<BitString, CodecError> {
    let row = table.row(code.n_prime)?;
    let mut changes = 0;
    let mut settled = &row[0];
    for w in row.windows(2) {
        if changes == code.x_count {
            break;
        }
        if w[0] != w[1] {
            changes += 1;
            settled = &w[1];
        }
    }
    if changes < code.x_count {
        return Err(CodecError::Pending {
            n,
            wanted: code.x_count,
            seen: changes,
        });
    }
    if settled.len() < n + 1 {
        return Err(CodecError::Range(format!(
            "settled value has {} bits, need {}",
            settled.len(),
            n + 1
        )));
    }
    Ok(settled.prefix(n + 1))
}

impl MindchangeCode {
    /// Self-delimiting serialization of the pair: the bits of `bin(x_count)`
    /// doubled, the terminator `01`, then `bin(n)`. Its length is
    /// `2·l(bin(x)) + 2 + l(bin(n))`.
    pub fn to_bits(&self, n: u64) -> BitString {
        let x = BitString::binary(self.x_count);
        let doubled = BitString::from_bits((0..x.len()).flat_map(|i| [x.bit(i), x.bit(i)]));
        doubled
            .concat(&"01".parse().unwrap())
            .concat(&BitString::binary(n))
    }

    /// Inverse of [`MindchangeCode::to_bits`], recomputing `n'` from `n`.
    pub fn from_bits(bits: &BitString, table: &MindchangeTable) -> Result<(Self, u64), CodecError> {
        let mut x_count = 0u64;
        let mut i = 0;
        loop {
            if i + 1 >= bits.len() {
                return Err(CodecError::Malformed("missing terminator".into()));
            }
            match (bits.bit(i), bits.bit(i + 1)) {
                (a, b) if a == b => x_count = x_count << 1 | a as u64,
                (false, true) => break,
                _ => return Err(CodecError::Malformed("bad pair in count field".into())),
            }
            i += 2;
        }
        let n = bits
            .suffix(i + 2)
            .to_u64()
            .ok_or_else(|| CodecError::Malformed("n too wide".into()))?;
        let n_prime = table.n_prime(n)?;
        Ok((MindchangeCode { x_count, n_prime }, n))
    }
}
