//! Binary words, the canonical `ℕ ↔ {0,1}*` correspondence, Cantor pairing and
//! the little-endian successor scheme used to hand out program slots.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitStrError {
    #[error("invalid character {0:?} in bit string")]
    BadChar(char),
    #[error("malformed zero-run literal {0:?}")]
    BadZeroRun(String),
    #[error("string of length {0} has no 64-bit canonical index")]
    IndexOverflow(u64),
    #[error("succ is undefined on the all-ones word of length {0}")]
    AllOnes(u64),
    #[error("requested {m} strings of length {k}, only 2^{k} exist")]
    TooManyStrings { k: u32, m: u64 },
}

/// Zero runs longer than this are printed as `0^N` rather than spelled out.
const ZERO_RUN_LITERAL_MAX: u64 = 64;

/// A finite binary word.
///
/// Words consisting only of zeros (including the empty word λ) are always held
/// in the symbolic `ZeroRun` form, so derived equality and hashing agree with
/// the denotation: `0^m` spelled out equals `ZeroRun(m)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    ZeroRun(u64),
    /// Always contains at least one `true`.
    Bits(Vec<bool>),
}

impl BitString {
    pub fn empty() -> Self {
        BitString(Repr::ZeroRun(0))
    }

    pub fn zeros(len: u64) -> Self {
        BitString(Repr::ZeroRun(len))
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        if bits.iter().any(|&b| b) {
            BitString(Repr::Bits(bits))
        } else {
            BitString(Repr::ZeroRun(bits.len() as u64))
        }
    }

    /// `bin(n)` without leading zeros; `bin(0)` is λ.
    pub fn binary(n: u64) -> Self {
        let width = 64 - n.leading_zeros();
        Self::binary_padded(n, width)
    }

    /// `n` in big-endian binary, left-padded with zeros to `width` bits.
    /// Panics if `n` needs more than `width` bits.
    pub fn binary_padded(n: u64, width: u32) -> Self {
        assert!(
            width >= 64 || n >> width == 0,
            "{n} does not fit in {width} bits"
        );
        Self::from_bits((0..width).rev().map(|i| i < 64 && (n >> i) & 1 == 1))
    }

    pub fn len(&self) -> u64 {
        match &self.0 {
            Repr::ZeroRun(n) => *n,
            Repr::Bits(b) => b.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_zero_run(&self) -> bool {
        matches!(self.0, Repr::ZeroRun(_))
    }

    /// Bit at 0-based position `i`. Panics when out of range.
    pub fn bit(&self, i: u64) -> bool {
        assert!(i < self.len(), "bit index {i} out of range");
        match &self.0 {
            Repr::ZeroRun(_) => false,
            Repr::Bits(b) => b[i as usize],
        }
    }

    /// Spelled-out bits. Panics for zero runs too long to materialize.
    pub fn to_bits(&self) -> Vec<bool> {
        match &self.0 {
            Repr::ZeroRun(n) => {
                assert!(*n <= 1 << 24, "refusing to materialize 0^{n}");
                vec![false; *n as usize]
            }
            Repr::Bits(b) => b.clone(),
        }
    }

    pub fn count_ones(&self) -> u64 {
        match &self.0 {
            Repr::ZeroRun(_) => 0,
            Repr::Bits(b) => b.iter().filter(|&&x| x).count() as u64,
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        match (&self.0, &other.0) {
            (Repr::ZeroRun(a), Repr::ZeroRun(b)) => BitString::zeros(a + b),
            _ => {
                let mut bits = self.to_bits();
                bits.extend(other.to_bits());
                BitString::from_bits(bits)
            }
        }
    }

    /// Prefix of length `min(len, self.len())`.
    pub fn prefix(&self, len: u64) -> BitString {
        let len = len.min(self.len());
        match &self.0 {
            Repr::ZeroRun(_) => BitString::zeros(len),
            Repr::Bits(b) => BitString::from_bits(b[..len as usize].iter().copied()),
        }
    }

    /// Suffix starting at 0-based position `from`.
    pub fn suffix(&self, from: u64) -> BitString {
        let from = from.min(self.len());
        match &self.0 {
            Repr::ZeroRun(n) => BitString::zeros(n - from),
            Repr::Bits(b) => BitString::from_bits(b[from as usize..].iter().copied()),
        }
    }

    /// Big-endian value of the word, if it fits in 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        match &self.0 {
            Repr::ZeroRun(_) => Some(0),
            Repr::Bits(b) => {
                let first_one = b.iter().position(|&x| x)?;
                if b.len() - first_one > 64 {
                    return None;
                }
                Some(b[first_one..].iter().fold(0u64, |acc, &x| acc << 1 | x as u64))
            }
        }
    }
}

impl Default for BitString {
    fn default() -> Self {
        Self::empty()
    }
}

/// Length first, then lexicographic: the order of the canonical correspondence.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| match (&self.0, &other.0) {
            (Repr::ZeroRun(_), Repr::ZeroRun(_)) => Ordering::Equal,
            (Repr::ZeroRun(_), Repr::Bits(_)) => Ordering::Less,
            (Repr::Bits(_), Repr::ZeroRun(_)) => Ordering::Greater,
            (Repr::Bits(a), Repr::Bits(b)) => a.cmp(b),
        })
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    /// Same text as the serialized form, except that λ prints as `λ`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("λ");
        }
        f.write_str(&self.literal())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({:?})", self.literal())
    }
}

impl BitString {
    /// Textual form: spelled-out bits, or `0^N` for long zero runs. λ is `""`.
    pub fn literal(&self) -> String {
        match &self.0 {
            Repr::ZeroRun(n) if *n > ZERO_RUN_LITERAL_MAX => format!("0^{n}"),
            Repr::ZeroRun(n) => "0".repeat(*n as usize),
            Repr::Bits(b) => b.iter().map(|&x| if x { '1' } else { '0' }).collect(),
        }
    }
}

impl FromStr for BitString {
    type Err = BitStrError;

    /// Accepts `""`/`λ` for the empty word, plain `0`/`1` strings and `0^N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "λ" {
            return Ok(BitString::empty());
        }
        if let Some(n) = s.strip_prefix("0^") {
            return n
                .parse::<u64>()
                .map(BitString::zeros)
                .map_err(|_| BitStrError::BadZeroRun(s.to_string()));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitStrError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitString::from_bits(bits))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.literal())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Position of a word in the length-lexicographic enumeration λ, 0, 1, 00, …
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalIndex(pub u64);

/// The `n`-th word: `bin(n + 1)` with its leading one removed.
pub fn index_to_string(n: CanonicalIndex) -> BitString {
    let v = n.0 as u128 + 1;
    let width = 128 - v.leading_zeros() - 1;
    BitString::from_bits((0..width).rev().map(|i| (v >> i) & 1 == 1))
}

pub fn string_to_index(x: &BitString) -> Result<CanonicalIndex, BitStrError> {
    let len = x.len();
    if len >= 64 {
        return Err(BitStrError::IndexOverflow(len));
    }
    let body = x.to_u64().expect("fits: len < 64");
    Ok(CanonicalIndex((1u64 << len) - 1 + body))
}

/// Cantor pairing `(e + s)(e + s + 1)/2 + s`: injective and strictly
/// increasing in `s`.
pub fn pair(e: u64, s: u64) -> u64 {
    let w = e + s;
    w * (w + 1) / 2 + s
}

pub fn unpair(z: u64) -> (u64, u64) {
    let w = ((8 * z as u128 + 1).isqrt() as u64 - 1) / 2;
    let s = z - w * (w + 1) / 2;
    (w - s, s)
}

/// Lexicographical successor `succ(b_1…b_n) = 0^{i-1} 1 b_{i+1}…b_n` where
/// `i` is the first (1-based) position holding a zero. Reading `b_1` as the
/// least significant bit this is a binary increment.
pub fn succ(sigma: &BitString) -> Result<BitString, BitStrError> {
    let n = sigma.len();
    let i = (0..n)
        .find(|&j| !sigma.bit(j))
        .ok_or(BitStrError::AllOnes(n))?;
    Ok(BitString::from_bits(
        (0..n).map(|j| if j < i { false } else if j == i { true } else { sigma.bit(j) }),
    ))
}

/// 1-based positions `j` with `b_j = 1`.
pub fn set_positions(sigma: &BitString) -> Vec<u64> {
    (0..sigma.len())
        .filter(|&j| sigma.bit(j))
        .map(|j| j + 1)
        .collect()
}

/// All `2^k` words of length `k` in lexicographic order, lazily.
pub fn strings_of_length(k: u32) -> impl Iterator<Item = BitString> {
    (0..1u64 << k).map(move |v| BitString::binary_padded(v, k))
}

/// Every word of length at most `max_len`, in canonical order.
pub fn strings_up_to(max_len: u32) -> impl Iterator<Item = BitString> {
    (0..=max_len).flat_map(strings_of_length)
}

/// The first `m` words of length `k` in lexicographic order.
pub fn first_strings_of_length(k: u32, m: u64) -> Result<Vec<BitString>, BitStrError> {
    if k < 64 && m > 1u64 << k {
        return Err(BitStrError::TooManyStrings { k, m });
    }
    Ok((0..m).map(|v| BitString::binary_padded(v, k)).collect())
}
