//! The hard-instances game on strings of one length `n`.
//!
//! Columns `x_1 … x_{2^n}` are the length-`n` strings in lexicographic
//! order. Step 0 puts `x_1` into `A`, sets `i = 1`, `I = {0,1}^{≤n−1}` and
//! `J = {2, …, 2^n}`. Step `s+1` takes the least `p ∈ I` that either (a)
//! answers 0/1 on some open column `x_j` within `s` steps, or (b) answers ⊥
//! on every open column. In case (a) the least such `j` is closed against
//! `p`: `x_j` enters `A` iff `p` said 0. In case (b) `i` becomes `min J`,
//! `x_i` enters `A` and `i` leaves `J`. Either way `p` leaves `I`.
//!
//! At the end `x_i` has instance complexity at least `n` relative to the
//! columns, which [`verify_certificate`] checks program by program.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::bitstr::{strings_of_length, strings_up_to, BitString};
use crate::trace::{CheckReport, StageTrace};
use crate::vm::{run, value_of, Outcome, Program, Value};

/// Where the game gets machine outcomes from.
pub trait MachineProbe {
    fn name(&self) -> String;

    /// `U_steps(p, z)`.
    fn outcome(&mut self, p: &Program, z: &BitString, steps: u64) -> Outcome;
}

/// BitVM, memoized per `(p, z)` at a fixed horizon.
#[derive(Debug, Clone)]
pub struct VmProbe {
    horizon: u64,
    memo: HashMap<(Program, BitString), Outcome>,
}

impl VmProbe {
    pub fn new(horizon: u64) -> Self {
        VmProbe {
            horizon,
            memo: HashMap::new(),
        }
    }
}

impl MachineProbe for VmProbe {
    fn name(&self) -> String {
        "vm".into()
    }

    fn outcome(&mut self, p: &Program, z: &BitString, steps: u64) -> Outcome {
        if steps > self.horizon {
            return run(p, z, steps);
        }
        let horizon = self.horizon;
        self.memo
            .entry((p.clone(), z.clone()))
            .or_insert_with(|| run(p, z, horizon))
            .at_budget(steps)
    }
}

/// Probe backed by a closure, for scripting adversarial machines.
pub struct FnProbe<F> {
    f: F,
}

impl<F: FnMut(&Program, &BitString, u64) -> Outcome> FnProbe<F> {
    pub fn new(f: F) -> Self {
        FnProbe { f }
    }
}

impl<F: FnMut(&Program, &BitString, u64) -> Outcome> MachineProbe for FnProbe<F> {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn outcome(&mut self, p: &Program, z: &BitString, steps: u64) -> Outcome {
        (self.f)(p, z, steps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameParams {
    pub n: u32,
    pub budget: u64,
    pub probe: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum GameCase {
    /// `p` answered `value` on open column `j`.
    A { j: usize, value: bool, enumerated: bool },
    /// `p` answered ⊥ on every open column; `i` moved to `min J`.
    B { i: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameStep {
    pub stage: u64,
    pub p: Program,
    #[serde(flatten)]
    pub case: GameCase,
    pub i_size: usize,
    pub j_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub j: usize,
    pub x: BitString,
    pub chi: bool,
    /// Step at which the column left `J` (0 for `x_1`).
    pub closed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HIGameState {
    pub n: u32,
    pub budget: u64,
    pub columns: Vec<Column>,
    pub i: usize,
    pub open_programs: Vec<Program>,
    pub open_columns: Vec<usize>,
    pub steps: Vec<GameStep>,
    /// No rule could fire at the final budget.
    pub quiescent: bool,
}

impl HIGameState {
    pub fn x(&self, j: usize) -> &BitString {
        &self.columns[j - 1].x
    }

    pub fn in_a(&self) -> Vec<BitString> {
        self.columns
            .iter()
            .filter(|c| c.chi)
            .map(|c| c.x.clone())
            .collect()
    }

    pub fn to_trace(&self, probe: &str) -> StageTrace {
        StageTrace::new(
            "hard-instances",
            &GameParams {
                n: self.n,
                budget: self.budget,
                probe: probe.to_string(),
            },
            &self.steps,
            self,
        )
    }
}

/// Which rule, if any, `p` triggers at `steps`.
fn rule_for(
    probe: &mut dyn MachineProbe,
    p: &Program,
    open: &BTreeSet<usize>,
    columns: &[Column],
    steps: u64,
) -> Option<GameCase> {
    let mut all_bottom = true;
    for &j in open {
        match value_of(&probe.outcome(p, &columns[j - 1].x, steps)) {
            Value::Zero => {
                return Some(GameCase::A {
                    j,
                    value: false,
                    enumerated: true,
                })
            }
            Value::One => {
                return Some(GameCase::A {
                    j,
                    value: true,
                    enumerated: false,
                })
            }
            Value::Bottom => {}
            Value::Pending | Value::ValueError => all_bottom = false,
        }
    }
    (all_bottom && !open.is_empty()).then(|| GameCase::B {
        i: *open.iter().next().expect("open columns"),
    })
}

/// Play steps `1 … budget+1`, the last using `U_budget`.
pub fn hard_instances_run(
    n: u32,
    budget: u64,
    probe: &mut dyn MachineProbe,
) -> Result<HIGameState, SimError> {
    if !(1..=5).contains(&n) {
        return Err(SimError::Range(format!("n={n}: need 1 ≤ n ≤ 5")));
    }
    let mut columns: Vec<Column> = strings_of_length(n)
        .enumerate()
        .map(|(j, x)| Column {
            j: j + 1,
            x,
            chi: false,
            closed_at: None,
        })
        .collect();
    columns[0].chi = true;
    columns[0].closed_at = Some(0);
    let mut i = 1;
    let mut open_programs: BTreeSet<Program> = strings_up_to(n - 1).map(Program::new).collect();
    let mut open: BTreeSet<usize> = (2..=columns.len()).collect();
    let mut steps = Vec::new();
    let mut quiescent = false;

    for s in 0..=budget {
        let stage = s + 1;
        let mut fired = None;
        for p in &open_programs {
            if let Some(case) = rule_for(probe, p, &open, &columns, s) {
                fired = Some((p.clone(), case));
                break;
            }
        }
        let Some((p, case)) = fired else {
            if s == budget {
                quiescent = true;
            }
            continue;
        };
        open_programs.remove(&p);
        match case {
            GameCase::A { j, value, .. } => {
                columns[j - 1].chi = !value;
                columns[j - 1].closed_at = Some(stage);
                open.remove(&j);
            }
            GameCase::B { i: next } => {
                i = next;
                columns[next - 1].chi = true;
                columns[next - 1].closed_at = Some(stage);
                open.remove(&next);
            }
        }
        if open_programs.len() != open.len() {
            return Err(SimError::Invariant(format!(
                "step {stage}: |I| = {} but |J| = {}",
                open_programs.len(),
                open.len()
            )));
        }
        steps.push(GameStep {
            stage,
            p,
            case,
            i_size: open_programs.len(),
            j_size: open.len(),
        });
    }
    Ok(HIGameState {
        n,
        budget,
        columns,
        i,
        open_programs: open_programs.into_iter().collect(),
        open_columns: open.into_iter().collect(),
        steps,
        quiescent,
    })
}

/// Why a short program cannot witness `ic(x_i) < n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ProgramClass {
    /// Removed in case (a): wrong answer on a closed column.
    Inconsistent { j: usize, said: bool },
    /// Removed in case (b): ⊥ on the hard instance.
    BottomOnInstance,
    /// Still open: no answer within the budget on an open column.
    NotTotal { j: usize },
    /// Output outside {0, 1} on some column; never three-valued.
    ValueError { j: usize },
    /// None of the above: the certificate fails here.
    Unexplained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: u32,
    pub budget: u64,
    pub instance: BitString,
    pub in_a: bool,
    pub classes: BTreeMap<String, ProgramClass>,
    /// Least program below length `n` that decides the instance
    /// consistently on every column, if any.
    pub witness: Option<Program>,
    pub holds: bool,
}

fn classify(
    g: &HIGameState,
    p: &Program,
    removed: Option<&GameStep>,
    probe: &mut dyn MachineProbe,
) -> ProgramClass {
    let value_on = |probe: &mut dyn MachineProbe, j: usize| {
        value_of(&probe.outcome(p, g.x(j), g.budget))
    };
    if let Some(j) = (1..=g.columns.len()).find(|&j| value_on(probe, j) == Value::ValueError) {
        return ProgramClass::ValueError { j };
    }
    match removed.map(|st| &st.case) {
        Some(GameCase::A { j, value, .. }) => {
            let v = value_on(probe, *j);
            if v == Value::from_bit(*value) && *value != g.columns[j - 1].chi {
                ProgramClass::Inconsistent { j: *j, said: *value }
            } else {
                ProgramClass::Unexplained
            }
        }
        Some(GameCase::B { .. }) => {
            if value_on(probe, g.i) == Value::Bottom {
                ProgramClass::BottomOnInstance
            } else {
                ProgramClass::Unexplained
            }
        }
        None => g
            .open_columns
            .iter()
            .copied()
            .find(|&j| value_on(probe, j) == Value::Pending)
            .map_or(ProgramClass::Unexplained, |j| ProgramClass::NotTotal { j }),
    }
}

/// Certify `ic(x_i) ≥ n` relative to the window of all columns at the game's
/// budget.
pub fn verify_certificate(
    g: &HIGameState,
    probe: &mut dyn MachineProbe,
) -> Result<Certificate, SimError> {
    if g.open_programs.len() != g.open_columns.len() {
        return Err(SimError::Invariant(format!(
            "|I| = {} but |J| = {}",
            g.open_programs.len(),
            g.open_columns.len()
        )));
    }
    if !g.quiescent {
        return Err(SimError::Precondition(format!(
            "game not quiescent at budget {}",
            g.budget
        )));
    }
    let removed: HashMap<&Program, &GameStep> = g.steps.iter().map(|st| (&st.p, st)).collect();
    let mut classes = BTreeMap::new();
    for p in strings_up_to(g.n - 1).map(Program::new) {
        let class = classify(g, &p, removed.get(&p).copied(), probe);
        classes.insert(p.code().literal(), class);
    }
    // independent of the bookkeeping: brute force over the short programs
    let witness = strings_up_to(g.n - 1).map(Program::new).find(|p| {
        let correct = value_of(&probe.outcome(p, g.x(g.i), g.budget))
            == Value::from_bit(g.columns[g.i - 1].chi);
        correct
            && g.columns.iter().all(|c| match value_of(&probe.outcome(p, &c.x, g.budget)) {
                Value::Bottom => true,
                Value::Zero => !c.chi,
                Value::One => c.chi,
                Value::Pending | Value::ValueError => false,
            })
    });
    let explained = classes.values().all(|c| *c != ProgramClass::Unexplained);
    Ok(Certificate {
        n: g.n,
        budget: g.budget,
        instance: g.x(g.i).clone(),
        in_a: g.columns[g.i - 1].chi,
        classes,
        holds: explained && witness.is_none(),
        witness,
    })
}

/// Replay a game trace: `|I| = |J|` after every step, closed columns never
/// change, and the final state matches the log.
pub fn check_hard_instances(trace: &StageTrace) -> Result<CheckReport, SimError> {
    let params: GameParams = trace.params_as()?;
    let steps: Vec<GameStep> = trace.events_as()?;
    let state: HIGameState = trace.final_as()?;
    let mut report = CheckReport::new();
    let width = 1usize << params.n;
    let mut open_programs: BTreeSet<Program> =
        strings_up_to(params.n.saturating_sub(1)).map(Program::new).collect();
    let mut open: BTreeSet<usize> = (2..=width).collect();
    let mut chi: BTreeMap<usize, bool> = BTreeMap::from([(1, true)]);
    let mut i = 1;
    let mut last_stage = 0;
    for st in &steps {
        if st.stage <= last_stage {
            report.fail("step-order", Some(st.stage), "steps out of order");
        }
        last_stage = st.stage;
        if !open_programs.remove(&st.p) {
            report.fail("i-equals-j", Some(st.stage), format!("{} was not open", st.p));
        }
        let j = match st.case {
            GameCase::A { j, value, enumerated } => {
                if enumerated == value {
                    report.fail(
                        "diagonal",
                        Some(st.stage),
                        format!("column {j}: answered {value}, enumerated {enumerated}"),
                    );
                }
                chi.insert(j, enumerated);
                j
            }
            GameCase::B { i: next } => {
                if open.iter().next() != Some(&next) {
                    report.fail("case-b", Some(st.stage), format!("i={next} is not min J"));
                }
                i = next;
                chi.insert(next, true);
                next
            }
        };
        if !open.remove(&j) {
            report.fail("closed-immutable", Some(st.stage), format!("column {j} closed twice"));
        }
        if open_programs.len() != open.len() || st.i_size != open_programs.len() || st.j_size != open.len() {
            report.fail(
                "i-equals-j",
                Some(st.stage),
                format!("|I| = {}, |J| = {}", open_programs.len(), open.len()),
            );
        }
    }
    report.pass_unless_failed("i-equals-j", format!("{} steps", steps.len()));
    report.pass_unless_failed("closed-immutable", "");
    report.pass_unless_failed("diagonal", "");
    report.pass_unless_failed("case-b", "");
    report.pass_unless_failed("step-order", "");

    let recorded: BTreeMap<usize, bool> = state
        .columns
        .iter()
        .filter(|c| c.closed_at.is_some())
        .map(|c| (c.j, c.chi))
        .collect();
    let open_chi_clear = state
        .columns
        .iter()
        .all(|c| c.closed_at.is_some() || !c.chi);
    if recorded != chi
        || !open_chi_clear
        || state.i != i
        || state.open_columns != open.iter().copied().collect::<Vec<_>>()
        || state.open_programs != open_programs.iter().cloned().collect::<Vec<_>>()
    {
        report.fail("final-state", None, "final state differs from the replayed log");
    } else {
        report.pass("final-state", "");
    }

    if params.probe == "vm" && state.quiescent {
        let cert = verify_certificate(&state, &mut VmProbe::new(params.budget))?;
        if cert.holds {
            report.pass(
                "certificate",
                format!("ic({}) >= {} at budget {}", cert.instance, params.n, params.budget),
            );
        } else {
            report.fail(
                "certificate",
                None,
                format!("witness {:?} for {}", cert.witness, cert.instance),
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::{ic_window, Bound, ConsistencyWindow};
    use crate::vm::OutcomeKind;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn window_of(g: &HIGameState) -> ConsistencyWindow {
        ConsistencyWindow::from_pairs(g.columns.iter().map(|c| (c.x.clone(), c.chi))).unwrap()
    }

    #[test]
    fn step_zero_for_n2() {
        let g = hard_instances_run(2, 0, &mut VmProbe::new(0)).unwrap();
        assert_eq!(g.in_a(), vec![b("00")]);
        assert_eq!(g.open_programs.len(), 3);
        assert_eq!(g.open_columns, vec![2, 3, 4]);
    }

    #[test]
    fn n1_is_quiescent_with_value_error() {
        let g = hard_instances_run(1, 64, &mut VmProbe::new(64)).unwrap();
        assert!(g.steps.is_empty());
        assert!(g.quiescent);
        assert_eq!(g.i, 1);
        assert_eq!(g.open_programs, vec![Program::default()]);
        assert_eq!(g.open_columns, vec![2]);
        let cert = verify_certificate(&g, &mut VmProbe::new(64)).unwrap();
        assert!(cert.holds);
        assert_eq!(cert.classes[""], ProgramClass::ValueError { j: 1 });
    }

    #[test]
    fn small_games_certify_against_ic_window() {
        for n in 1..=4 {
            let budget = 1 << 12;
            let g = hard_instances_run(n, budget, &mut VmProbe::new(budget)).unwrap();
            assert!(g.quiescent, "n={n}");
            let cert = verify_certificate(&g, &mut VmProbe::new(budget)).unwrap();
            assert!(cert.holds, "n={n}: {cert:?}");
            assert!(cert.in_a);
            let ic = ic_window(g.x(g.i), &window_of(&g), budget, n - 1).unwrap();
            assert_eq!(ic.value, Bound::Infinity, "n={n}");
            let report = check_hard_instances(&g.to_trace("vm")).unwrap();
            assert!(report.ok(), "{report:?}");
        }
    }

    /// With 3-bit programs available the machine plays back: BOT answers ⊥
    /// on every column, then the constant printers are diagonalized.
    #[test]
    fn n4_replays_bot_then_printers() {
        let g = hard_instances_run(4, 64, &mut VmProbe::new(64)).unwrap();
        let got: Vec<(u64, String, GameCase)> = g
            .steps
            .iter()
            .map(|st| (st.stage, st.p.to_string(), st.case.clone()))
            .collect();
        assert_eq!(
            got,
            vec![
                (2, "100".into(), GameCase::B { i: 2 }),
                (
                    3,
                    "000".into(),
                    GameCase::A {
                        j: 3,
                        value: false,
                        enumerated: true
                    }
                ),
                (
                    4,
                    "001".into(),
                    GameCase::A {
                        j: 4,
                        value: true,
                        enumerated: false
                    }
                ),
            ]
        );
        assert_eq!(g.i, 2);
        assert_eq!(g.in_a(), vec![b("0000"), b("0001"), b("0010")]);
    }

    #[test]
    fn scripted_machine_drives_case_b() {
        // λ answers ⊥ everywhere from step 1; "0" and "1" never halt
        let mut probe = FnProbe::new(|p: &Program, _z: &BitString, steps: u64| {
            if p.is_empty() && steps >= 1 {
                Outcome {
                    kind: OutcomeKind::HaltBottom,
                    steps: 1,
                }
            } else {
                Outcome {
                    kind: OutcomeKind::OutOfBudget,
                    steps,
                }
            }
        });
        let g = hard_instances_run(2, 10, &mut probe).unwrap();
        assert_eq!(g.steps.len(), 1);
        assert_eq!(g.steps[0].case, GameCase::B { i: 2 });
        assert_eq!(g.i, 2);
        assert_eq!(g.in_a(), vec![b("00"), b("01")]);
        let cert = verify_certificate(&g, &mut probe).unwrap();
        assert!(cert.holds);
        assert_eq!(cert.classes[""], ProgramClass::BottomOnInstance);
        assert_eq!(cert.classes["0"], ProgramClass::NotTotal { j: 3 });
    }

    #[test]
    fn unequal_sets_are_rejected_before_certification() {
        let mut g = hard_instances_run(2, 8, &mut VmProbe::new(8)).unwrap();
        g.open_columns.pop();
        assert!(matches!(
            verify_certificate(&g, &mut VmProbe::new(8)),
            Err(SimError::Invariant(_))
        ));
    }

    #[test]
    fn checker_catches_a_reopened_column() {
        let g = hard_instances_run(4, 64, &mut VmProbe::new(64)).unwrap();
        let mut t = g.to_trace("vm");
        t.events[2]["j"] = t.events[1]["j"].clone();
        let r = check_hard_instances(&t).unwrap();
        assert!(r.first_failure("closed-immutable").is_some());
    }
}
