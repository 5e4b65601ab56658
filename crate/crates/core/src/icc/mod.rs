//! Finite-injury construction of a nonrecursive r.e. set whose instance
//! complexity stays within `log C(x) + 2` relative to a family `ψ`.
//!
//! Stage `s+1` with `s` even diagonalizes: every active `e` whose point
//! `d_e` has been accepted by `W_e` puts `d_e` into `A` and turns passive.
//! Stage `s+1` with `s = 2⟨k,t⟩ + 1` serves `E_k = {x : C(x) < 2^k − 2}`:
//! assigned programs of `M_k` are extended by ⊥ on length `t`, and if the
//! stream for `E_k` emits a new `x` at step `t` that is not already looked
//! after, the counter `σ_k` advances, one more program of `M_k` is set to
//! `χ_{A_s}` on lengths up to `t`, and every active `d_e` with `e ≥ k` moves
//! beyond stage `s`.
//!
//! Diagonalization points are zero runs `0^{⟨e,s⟩}`, and `ψ` is stored as
//! length bands, so stage counts in the tens of thousands stay cheap.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstr::{index_to_string, pair, set_positions, succ, unpair, BitString, CanonicalIndex};
use crate::oracle::{ComplexityOracle, GuardedOracle, OracleError};
use crate::trace::StageTrace;
use crate::vm::{run, Outcome, Program};

mod check;
pub mod psi;

pub use check::check_claims;
pub use psi::{tau_programs, AHistory, Band, BandKind, ProgramBands, Psi, PsiTable, Slot, TauTables};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum IccError {
    #[error("k_max={0}: between 1 and 4 at desk scale")]
    Range(u32),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invariant violated at stage {stage}: {message}")]
    Invariant { stage: u64, message: String },
}

/// `|M_k| = 2^k − 2`.
pub fn m_size(k: u32) -> u32 {
    (1u32 << k) - 2
}

/// `E_k` threshold `2^k − 2`.
pub fn e_threshold(k: u32) -> u32 {
    (1u32 << k) - 2
}

/// Program number `e` of the fixed listing `W_e`.
pub fn w_program(e: u64) -> Program {
    Program::new(index_to_string(CanonicalIndex(e)))
}

/// `z ∈ W_{e,s}`: `l(z) < s` and program `e` halts on `z` within `s` steps.
pub fn w_probe(e: u64, z: &BitString, s: u64) -> bool {
    z.len() < s && run(&w_program(e), z, s).is_terminal()
}

/// The stream enumerating `E_k` one element per step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EStream {
    pub k: u32,
    pub emitted: BTreeSet<BitString>,
    pub queue: BTreeSet<BitString>,
}

impl EStream {
    pub fn new(k: u32) -> Self {
        EStream {
            k,
            ..Default::default()
        }
    }

    /// Step `t`: take in everything with `C^t < 2^k − 2`, emit the least
    /// waiting string shorter than `t`.
    pub fn step(&mut self, t: u64, oracle: &mut dyn ComplexityOracle) -> Option<BitString> {
        for x in oracle.below(e_threshold(self.k), t) {
            if !self.emitted.contains(&x) {
                self.queue.insert(x);
            }
        }
        let x = self.queue.iter().find(|x| x.len() < t)?.clone();
        self.queue.remove(&x);
        self.emitted.insert(x.clone());
        Some(x)
    }
}

/// Convenience wrapper over a fresh stream: the emission at step `t` after
/// replaying steps `0 … t−1`.
pub fn e_stream_step(k: u32, t: u64, oracle: &mut dyn ComplexityOracle) -> Option<BitString> {
    let mut stream = EStream::new(k);
    for step in 0..t {
        stream.step(step, oracle);
    }
    stream.step(t, oracle)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IccParams {
    pub k_max: u32,
    pub stages: u64,
    pub oracle: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EmitAction {
    /// `x` is some `d_e` with `e < k`; handled by `τ`.
    InR,
    /// `x` is shorter than `len(k)`; already covered.
    Short { len: u64 },
    /// Case b: a new program of `M_k` takes over lengths `lo..=hi`.
    Assign {
        sigma: BitString,
        i: u32,
        lo: u64,
        hi: u64,
        snapshot: u64,
        r: BTreeSet<BitString>,
        /// Active `e ≥ k` moved to `0^{⟨e, stage⟩}`, as `(e, length)`.
        resets: Vec<(u64, u64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum IccEvent {
    /// Case I: `d_e` accepted by `W_e` within `probe_steps` steps.
    Diagonalize {
        stage: u64,
        e: u64,
        d: BitString,
        probe_steps: u64,
    },
    /// Case II prelude: ⊥ on length `t` for the assigned programs.
    Bottom {
        stage: u64,
        k: u32,
        t: u64,
        programs: Vec<u32>,
    },
    /// Case II: the stream for `E_k` emitted `x` at step `t`.
    Emit {
        stage: u64,
        k: u32,
        t: u64,
        x: BitString,
        c: u32,
        #[serde(flatten)]
        action: EmitAction,
    },
}

impl IccEvent {
    pub fn stage(&self) -> u64 {
        match self {
            IccEvent::Diagonalize { stage, .. }
            | IccEvent::Bottom { stage, .. }
            | IccEvent::Emit { stage, .. } => *stage,
        }
    }
}

/// History of one diagonalization point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DRecord {
    pub e: u64,
    /// `(stage, l(d_e))` for the initial value and every reset.
    pub history: Vec<(u64, u64)>,
    pub passive_at: Option<u64>,
}

impl DRecord {
    pub fn current(&self) -> BitString {
        BitString::zeros(self.history.last().expect("initial value").1)
    }

    /// `d_e(s)`.
    pub fn at(&self, s: u64) -> BitString {
        let len = self
            .history
            .iter()
            .take_while(|(stage, _)| *stage <= s)
            .last()
            .expect("initial value")
            .1;
        BitString::zeros(len)
    }

    pub fn range(&self) -> Vec<BitString> {
        self.history.iter().map(|&(_, len)| BitString::zeros(len)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    pub k: u32,
    pub t: u64,
    pub x: BitString,
    /// `C^t(x)` when emitted.
    pub c: u32,
    /// `C^s(x)` at the final stage.
    pub c_final: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IccFinal {
    pub stages_run: u64,
    /// Diagonalization points tracked: `e = 1 ..= universe`.
    pub universe: u64,
    pub a: AHistory,
    pub sigma: BTreeMap<u32, BitString>,
    pub len: BTreeMap<u32, u64>,
    pub d: Vec<DRecord>,
    pub emissions: Vec<Emission>,
    pub psi: Vec<ProgramBands>,
    pub tau: Vec<TauTables>,
    pub aborted: Option<IccError>,
}

#[derive(Debug, Clone)]
pub struct IccRun {
    pub params: IccParams,
    pub events: Vec<IccEvent>,
    pub final_state: IccFinal,
}

impl IccRun {
    pub fn to_trace(&self) -> StageTrace {
        StageTrace::new("icc", &self.params, &self.events, &self.final_state)
    }

    pub fn error(&self) -> Option<&IccError> {
        self.final_state.aborted.as_ref()
    }
}

/// Largest `e` whose point can ever be probed within `stages` stages.
pub fn universe(k_max: u32, stages: u64) -> u64 {
    let mut e = k_max as u64;
    while pair(e + 1, 0) < stages {
        e += 1;
    }
    e
}

/// The whole simulation state at the end of a stage.
pub struct IccState<'o> {
    pub s: u64,
    pub k_max: u32,
    pub a: AHistory,
    pub sigma: BTreeMap<u32, BitString>,
    pub len: BTreeMap<u32, u64>,
    pub d: Vec<DRecord>,
    pub streams: BTreeMap<u32, EStream>,
    pub psi: PsiTable,
    pub emissions: Vec<Emission>,
    oracle: GuardedOracle<'o>,
    /// `(e, l(d_e))` ↦ outcome of program `e` on `d_e` at the horizon.
    probes: HashMap<(u64, u64), Outcome>,
    horizon: u64,
}

impl<'o> IccState<'o> {
    /// Stage 0.
    pub fn new(k_max: u32, stages: u64, oracle: &'o mut dyn ComplexityOracle) -> Self {
        let u = universe(k_max, stages);
        IccState {
            s: 0,
            k_max,
            a: AHistory::new(),
            sigma: (1..=k_max).map(|k| (k, BitString::zeros(m_size(k) as u64))).collect(),
            len: (1..=k_max).map(|k| (k, 0)).collect(),
            d: (1..=u)
                .map(|e| DRecord {
                    e,
                    history: vec![(0, pair(e, 0))],
                    passive_at: None,
                })
                .collect(),
            streams: (1..=k_max).map(|k| (k, EStream::new(k))).collect(),
            psi: PsiTable::new(),
            emissions: Vec::new(),
            oracle: GuardedOracle::new(oracle),
            probes: HashMap::new(),
            horizon: stages,
        }
    }

    /// `R(k, s)`: every value any `d_e`, `e < k`, has held.
    pub fn r_set(&self, k: u32) -> BTreeSet<BitString> {
        self.d
            .iter()
            .take(k.saturating_sub(1) as usize)
            .flat_map(DRecord::range)
            .collect()
    }

    fn probe(&mut self, e: u64, d_len: u64, s: u64) -> Option<u64> {
        if d_len >= s {
            return None;
        }
        let horizon = self.horizon;
        let o = self
            .probes
            .entry((e, d_len))
            .or_insert_with(|| run(&w_program(e), &BitString::zeros(d_len), horizon))
            .at_budget(s);
        o.is_terminal().then_some(o.steps)
    }

    /// Run stage `s+1` and return its events.
    pub fn step(&mut self) -> Result<Vec<IccEvent>, IccError> {
        let s = self.s;
        let stage = s + 1;
        let mut events = Vec::new();
        if s % 2 == 0 {
            for idx in 0..self.d.len() {
                let e = idx as u64 + 1;
                if e > s || self.d[idx].passive_at.is_some() {
                    continue;
                }
                let d = self.d[idx].current();
                if self.a.contains_key(&d) {
                    continue;
                }
                if let Some(steps) = self.probe(e, d.len(), s) {
                    self.a.insert(d.clone(), stage);
                    self.d[idx].passive_at = Some(stage);
                    events.push(IccEvent::Diagonalize {
                        stage,
                        e,
                        d,
                        probe_steps: steps,
                    });
                }
            }
        } else {
            let (k, t) = unpair((s - 1) / 2);
            if (1..=self.k_max as u64).contains(&k) {
                self.case_two(k as u32, t, stage, &mut events)?;
            }
        }
        self.s = stage;
        Ok(events)
    }

    fn case_two(
        &mut self,
        k: u32,
        t: u64,
        stage: u64,
        events: &mut Vec<IccEvent>,
    ) -> Result<(), IccError> {
        let s = stage - 1;
        let invariant = |message: String| IccError::Invariant { stage, message };
        let sigma = self.sigma[&k].clone();
        let assigned: Vec<u32> = set_positions(&sigma).into_iter().map(|i| i as u32).collect();
        for &i in &assigned {
            self.psi
                .install(
                    Slot { k, i },
                    Band {
                        lo: t,
                        hi: t,
                        kind: BandKind::AllBot,
                        installed: stage,
                    },
                )
                .map_err(invariant)?;
        }
        if !assigned.is_empty() {
            events.push(IccEvent::Bottom {
                stage,
                k,
                t,
                programs: assigned,
            });
        }

        let stream = self.streams.get_mut(&k).expect("stream per k");
        let emitted = stream.step(t, &mut self.oracle);
        if let Some(err) = self.oracle.violation() {
            return Err(err.clone().into());
        }
        let Some(x) = emitted else { return Ok(()) };
        let c = self
            .oracle
            .value(&x, t, e_threshold(k).saturating_sub(1))
            .ok_or_else(|| invariant(format!("stream emitted {x} without a certificate")))?;
        self.emissions.push(Emission {
            k,
            t,
            x: x.clone(),
            c,
            c_final: c,
        });
        let r = self.r_set(k);
        let len_k = self.len[&k];
        let action = if r.contains(&x) {
            EmitAction::InR
        } else if x.len() < len_k {
            EmitAction::Short { len: len_k }
        } else {
            let next = succ(&sigma).map_err(|e| invariant(e.to_string()))?;
            let i = set_positions(&next)[0] as u32;
            let slot = Slot { k, i };
            let lo = self.psi.next_len(slot);
            self.psi
                .install(
                    slot,
                    Band {
                        lo,
                        hi: t,
                        kind: BandKind::ChiSnapshot {
                            stage: s,
                            r: r.clone(),
                        },
                        installed: stage,
                    },
                )
                .map_err(invariant)?;
            self.sigma.insert(k, next.clone());
            self.len.insert(k, t + 1);
            let mut resets = Vec::new();
            for rec in self.d.iter_mut().skip(k as usize - 1) {
                if rec.passive_at.is_none() {
                    let l = pair(rec.e, stage);
                    rec.history.push((stage, l));
                    resets.push((rec.e, l));
                }
            }
            EmitAction::Assign {
                sigma: next,
                i,
                lo,
                hi: t,
                snapshot: s,
                r,
                resets,
            }
        };
        events.push(IccEvent::Emit {
            stage,
            k,
            t,
            x,
            c,
            action,
        });
        Ok(())
    }

    pub fn tau_tables(&self) -> Vec<TauTables> {
        self.d
            .iter()
            .map(|rec| tau_table(rec))
            .collect()
    }
}

/// `τ_{e,1}` and `τ_{e,2}` from the history of `d_e`.
pub fn tau_table(rec: &DRecord) -> TauTables {
    let (tau1, tau2) = tau_programs(rec.e as u32);
    let range = rec.range();
    let tau2_table = rec.passive_at.map(|s_e| {
        let last = rec.at(s_e);
        psi::Tau2 {
            passive_at: s_e,
            zero: range.iter().filter(|x| **x != last).cloned().collect(),
            one: last,
        }
    });
    TauTables {
        e: rec.e as u32,
        tau1,
        tau2,
        tau1_zero: range,
        tau2_table,
    }
}

pub fn icc_run(
    k_max: u32,
    stages: u64,
    oracle: &mut dyn ComplexityOracle,
) -> Result<IccRun, IccError> {
    if !(1..=4).contains(&k_max) {
        return Err(IccError::Range(k_max));
    }
    let params = IccParams {
        k_max,
        stages,
        oracle: oracle.name(),
    };
    let mut state = IccState::new(k_max, stages, oracle);
    let mut events = Vec::new();
    let mut aborted = None;
    while state.s < stages {
        match state.step() {
            Ok(mut ev) => events.append(&mut ev),
            Err(e) => {
                aborted = Some(e);
                break;
            }
        }
    }
    let final_stage = state.s;
    let mut emissions = std::mem::take(&mut state.emissions);
    for em in &mut emissions {
        if let Some(c) = state.oracle.value(&em.x, final_stage, em.c) {
            em.c_final = c;
        }
    }
    if aborted.is_none() {
        if let Some(err) = state.oracle.violation() {
            aborted = Some(err.clone().into());
        }
    }
    let final_state = IccFinal {
        stages_run: final_stage,
        universe: state.d.len() as u64,
        tau: state.tau_tables(),
        a: state.a,
        sigma: state.sigma,
        len: state.len,
        d: state.d,
        emissions,
        psi: state.psi.dump(),
        aborted,
    };
    Ok(IccRun {
        params,
        events,
        final_state,
    })
}

#[cfg(test)]
mod tests;
