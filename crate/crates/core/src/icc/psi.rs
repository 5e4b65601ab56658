//! Band-structured partial functions `ψ_p`.
//!
//! Each program's domain is an initial segment of lengths, cut into bands.
//! A band answers ⊥ on every string of its lengths, or replays `χ_{A_{s'}}`
//! for a snapshot stage `s'` except on a small exceptional set `R` where it
//! answers ⊥. Bands are only ever appended, so a defined value never changes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bitstr::BitString;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandKind {
    AllBot,
    ChiSnapshot { stage: u64, r: BTreeSet<BitString> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub lo: u64,
    pub hi: u64,
    #[serde(flatten)]
    pub kind: BandKind,
    /// Stage at which the band was written.
    pub installed: u64,
}

/// Three-valued answer of a defined `ψ_p(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    Zero,
    One,
    Bottom,
}

impl Psi {
    pub fn from_bit(b: bool) -> Psi {
        if b {
            Psi::One
        } else {
            Psi::Zero
        }
    }
}

/// Stage at which each element entered `A`.
pub type AHistory = BTreeMap<BitString, u64>;

pub fn chi_at(a: &AHistory, z: &BitString, stage: u64) -> bool {
    a.get(z).is_some_and(|&entered| entered <= stage)
}

impl Band {
    pub fn covers(&self, len: u64) -> bool {
        self.lo <= len && len <= self.hi
    }

    pub fn eval(&self, z: &BitString, a: &AHistory) -> Psi {
        match &self.kind {
            BandKind::AllBot => Psi::Bottom,
            BandKind::ChiSnapshot { r, .. } if r.contains(z) => Psi::Bottom,
            BandKind::ChiSnapshot { stage, .. } => Psi::from_bit(chi_at(a, z, *stage)),
        }
    }

    /// Elements of `a` this band answers wrongly, judged against membership
    /// at `now`.
    pub fn inconsistencies<'a>(&self, a: &'a AHistory, now: u64) -> Vec<&'a BitString> {
        let BandKind::ChiSnapshot { stage, r } = &self.kind else {
            return Vec::new();
        };
        a.iter()
            .filter(|(z, &entered)| {
                entered <= now && entered > *stage && self.covers(z.len()) && !r.contains(*z)
            })
            .map(|(z, _)| z)
            .collect()
    }
}

/// `p_{k,i}`: the `i`-th (1-based) length-`k` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub k: u32,
    pub i: u32,
}

impl Slot {
    pub fn program(&self) -> BitString {
        BitString::binary_padded(self.i as u64 - 1, self.k)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PsiTable {
    bands: BTreeMap<Slot, Vec<Band>>,
}

/// One program's bands, as written by `--dump-psi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramBands {
    pub k: u32,
    pub i: u32,
    pub p: BitString,
    pub bands: Vec<Band>,
}

impl PsiTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bands(&self, slot: Slot) -> &[Band] {
        self.bands.get(&slot).map_or(&[], Vec::as_slice)
    }

    /// Least length not yet in the domain of `ψ_p`.
    pub fn next_len(&self, slot: Slot) -> u64 {
        self.bands(slot).last().map_or(0, |b| b.hi + 1)
    }

    /// Append a band. Rejects anything that would leave a gap or redefine a
    /// length.
    pub fn install(&mut self, slot: Slot, band: Band) -> Result<(), String> {
        let next = self.next_len(slot);
        if band.lo != next || band.hi < band.lo {
            return Err(format!(
                "p_{{{},{}}}: band {}..{} does not start at the first undefined length {next}",
                slot.k, slot.i, band.lo, band.hi
            ));
        }
        self.bands.entry(slot).or_default().push(band);
        Ok(())
    }

    /// `ψ_p(z)`, or `None` where undefined.
    pub fn eval(&self, slot: Slot, z: &BitString, a: &AHistory) -> Option<Psi> {
        self.band_at(slot, z.len()).map(|b| b.eval(z, a))
    }

    pub fn band_at(&self, slot: Slot, len: u64) -> Option<&Band> {
        let bands = self.bands(slot);
        let idx = bands.partition_point(|b| b.hi < len);
        bands.get(idx).filter(|b| b.covers(len))
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.bands.keys().copied()
    }

    pub fn dump(&self) -> Vec<ProgramBands> {
        self.bands
            .iter()
            .map(|(slot, bands)| ProgramBands {
                k: slot.k,
                i: slot.i,
                p: slot.program(),
                bands: bands.clone(),
            })
            .collect()
    }

    pub fn from_dump(dump: &[ProgramBands]) -> Result<Self, String> {
        let mut t = PsiTable::new();
        for pb in dump {
            for b in &pb.bands {
                t.install(Slot { k: pb.k, i: pb.i }, b.clone())?;
            }
        }
        Ok(t)
    }
}

/// The two spare programs of length `e`: the lexicographically last pair.
pub fn tau_programs(e: u32) -> (BitString, BitString) {
    let ones = |n: u32| BitString::from_bits(std::iter::repeat_n(true, n as usize));
    (ones(e - 1).concat(&BitString::zeros(1)), ones(e))
}

/// `ψ_{τ_{e,1}}` and `ψ_{τ_{e,2}}` as point tables; everything not listed is
/// ⊥ (for `τ_{e,2}`, undefined everywhere while `e` is active).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauTables {
    pub e: u32,
    pub tau1: BitString,
    pub tau2: BitString,
    /// `τ_{e,1}` answers 0 on all of `range(d_e)`.
    pub tau1_zero: Vec<BitString>,
    /// `None` while `e` is active.
    pub tau2_table: Option<Tau2>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tau2 {
    pub passive_at: u64,
    pub zero: Vec<BitString>,
    pub one: BitString,
}

impl TauTables {
    pub fn eval1(&self, z: &BitString) -> Psi {
        if self.tau1_zero.contains(z) {
            Psi::Zero
        } else {
            Psi::Bottom
        }
    }

    pub fn eval2(&self, z: &BitString) -> Option<Psi> {
        let t = self.tau2_table.as_ref()?;
        Some(if &t.one == z {
            Psi::One
        } else if t.zero.contains(z) {
            Psi::Zero
        } else {
            Psi::Bottom
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn chi(stage: u64, r: &[&str]) -> BandKind {
        BandKind::ChiSnapshot {
            stage,
            r: r.iter().map(|s| b(s)).collect(),
        }
    }

    #[test]
    fn bands_append_contiguously() {
        let mut t = PsiTable::new();
        let slot = Slot { k: 2, i: 1 };
        assert_eq!(slot.program(), b("00"));
        t.install(slot, Band { lo: 0, hi: 1, kind: chi(15, &["0"]), installed: 16 }).unwrap();
        t.install(slot, Band { lo: 2, hi: 2, kind: BandKind::AllBot, installed: 20 }).unwrap();
        assert_eq!(t.next_len(slot), 3);
        // redefinition and gaps are refused
        assert!(t.install(slot, Band { lo: 2, hi: 3, kind: BandKind::AllBot, installed: 30 }).is_err());
        assert!(t.install(slot, Band { lo: 4, hi: 4, kind: BandKind::AllBot, installed: 30 }).is_err());
        let a: AHistory = [(b("0"), 3), (b("1"), 40)].into();
        assert_eq!(t.eval(slot, &b("0"), &a), Some(Psi::Bottom));
        assert_eq!(t.eval(slot, &b("1"), &a), Some(Psi::Zero));
        assert_eq!(t.eval(slot, &b(""), &a), Some(Psi::Zero));
        assert_eq!(t.eval(slot, &b("01"), &a), Some(Psi::Bottom));
        assert_eq!(t.eval(slot, &b("010"), &a), None);
        let band = t.band_at(slot, 1).unwrap();
        assert_eq!(band.inconsistencies(&a, 100), vec![&b("1")]);
        assert!(band.inconsistencies(&a, 39).is_empty());
    }

    #[test]
    fn symbolic_lengths() {
        let mut t = PsiTable::new();
        let slot = Slot { k: 3, i: 2 };
        t.install(slot, Band { lo: 0, hi: 5000, kind: chi(10, &[]), installed: 11 }).unwrap();
        let a: AHistory = [(BitString::zeros(4000), 9)].into();
        assert_eq!(t.eval(slot, &BitString::zeros(4000), &a), Some(Psi::One));
        assert_eq!(t.eval(slot, &BitString::zeros(4001), &a), Some(Psi::Zero));
    }

    #[test]
    fn tau_programs_are_last_two() {
        assert_eq!(tau_programs(1), (b("0"), b("1")));
        assert_eq!(tau_programs(3), (b("110"), b("111")));
        let first = crate::bitstr::first_strings_of_length(3, 6).unwrap();
        let (t1, t2) = tau_programs(3);
        assert!(!first.contains(&t1) && !first.contains(&t2));
    }

    #[test]
    fn dump_roundtrip() {
        let mut t = PsiTable::new();
        t.install(Slot { k: 2, i: 2 }, Band { lo: 0, hi: 3, kind: chi(7, &["000"]), installed: 8 }).unwrap();
        let d = t.dump();
        let json = serde_json::to_string(&d).unwrap();
        let back: Vec<ProgramBands> = serde_json::from_str(&json).unwrap();
        assert_eq!(PsiTable::from_dump(&back).unwrap(), t);
    }
}
