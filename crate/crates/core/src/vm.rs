//! BitVM: the fixed interpreter `U(p, z)` with exact step accounting.
//!
//! Programs are read three bits at a time starting at bit offset 0. Every
//! instruction, including the implicit halt when fewer than three bits
//! remain, costs one step.
//!
//! | code  | mnemonic | effect                                              |
//! |-------|----------|-----------------------------------------------------|
//! | `000` | EMIT0    | append `0` to the output                            |
//! | `001` | EMIT1    | append `1` to the output                            |
//! | `010` | EMITREST | append the remaining program bits, then halt        |
//! | `011` | HALT     | halt with the current output                        |
//! | `100` | BOT      | halt with ⊥                                         |
//! | `101` | READ     | flag := next input bit; ⊥ if the input is exhausted |
//! | `110` | SKIPZ    | if flag = 0 skip the next instruction               |
//! | `111` | LOOP     | jump back to offset 0                               |
//!
//! Control depends only on `(pc, flag, input cursor)`, and the cursor never
//! moves backwards. Two consecutive LOOPs with no READ in between therefore
//! repeat forever; `run` detects that and reports `OutOfBudget` immediately,
//! which is exactly what stepping to the budget would produce.

use serde::{Deserialize, Serialize};

use crate::bitstr::BitString;

/// A program is any finite word; decoding is total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Program(BitString);

impl Program {
    pub fn new(code: BitString) -> Self {
        Program(code)
    }

    pub fn code(&self) -> &BitString {
        &self.0
    }

    pub fn len(&self) -> u64 {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<BitString> for Program {
    fn from(code: BitString) -> Self {
        Program(code)
    }
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "out", rename_all = "snake_case")]
pub enum OutcomeKind {
    Halt(BitString),
    #[serde(rename = "bot")]
    HaltBottom,
    #[serde(rename = "oob")]
    OutOfBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(flatten)]
    pub kind: OutcomeKind,
    pub steps: u64,
}

impl Outcome {
    pub fn is_terminal(&self) -> bool {
        !matches!(self.kind, OutcomeKind::OutOfBudget)
    }

    pub fn value(&self) -> Value {
        value_of(self)
    }

    /// The outcome a run with `budget` would have produced, given that this
    /// outcome came from a run with a budget at least as large (or is
    /// terminal). Relies on budget stability of halting runs.
    pub fn at_budget(&self, budget: u64) -> Outcome {
        if self.is_terminal() && self.steps <= budget {
            self.clone()
        } else {
            Outcome {
                kind: OutcomeKind::OutOfBudget,
                steps: budget,
            }
        }
    }
}

/// Three-valued reading of an outcome, plus the two ways a run can fail to
/// produce one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Zero,
    One,
    Bottom,
    ValueError,
    Pending,
}

impl Value {
    pub fn from_bit(bit: bool) -> Value {
        if bit {
            Value::One
        } else {
            Value::Zero
        }
    }

    /// `Some(bit)` for 0/1.
    pub fn as_bit(self) -> Option<bool> {
        match self {
            Value::Zero => Some(false),
            Value::One => Some(true),
            _ => None,
        }
    }

    /// 0, 1 or ⊥.
    pub fn is_three_valued(self) -> bool {
        matches!(self, Value::Zero | Value::One | Value::Bottom)
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Value::Zero => "0",
            Value::One => "1",
            Value::Bottom => "⊥",
            Value::ValueError => "value-error",
            Value::Pending => "pending",
        })
    }
}

pub fn value_of(o: &Outcome) -> Value {
    match &o.kind {
        OutcomeKind::Halt(out) if out.len() == 1 => Value::from_bit(out.bit(0)),
        OutcomeKind::Halt(_) => Value::ValueError,
        OutcomeKind::HaltBottom => Value::Bottom,
        OutcomeKind::OutOfBudget => Value::Pending,
    }
}

const EMIT0: u8 = 0b000;
const EMIT1: u8 = 0b001;
const EMITREST: u8 = 0b010;
const HALT: u8 = 0b011;
const BOT: u8 = 0b100;
const READ: u8 = 0b101;
const SKIPZ: u8 = 0b110;
const LOOP: u8 = 0b111;

/// Execute `p` on input `z` for at most `budget` steps.
pub fn run(p: &Program, z: &BitString, budget: u64) -> Outcome {
    let code = p.code();
    let len = code.len();
    let mut pc: u64 = 0;
    let mut cursor: u64 = 0;
    let mut flag = false;
    let mut out: Vec<bool> = Vec::new();
    let mut steps: u64 = 0;
    let mut last_loop_cursor: Option<u64> = None;

    let halt = |out: Vec<bool>, steps| Outcome {
        kind: OutcomeKind::Halt(BitString::from_bits(out)),
        steps,
    };
    let oob = Outcome {
        kind: OutcomeKind::OutOfBudget,
        steps: budget,
    };

    loop {
        if steps >= budget {
            return oob;
        }
        steps += 1;
        if pc + 3 > len {
            return halt(out, steps);
        }
        let op = (code.bit(pc) as u8) << 2 | (code.bit(pc + 1) as u8) << 1 | code.bit(pc + 2) as u8;
        pc += 3;
        match op {
            EMIT0 => out.push(false),
            EMIT1 => out.push(true),
            EMITREST => {
                out.extend((pc..len).map(|i| code.bit(i)));
                return halt(out, steps);
            }
            HALT => return halt(out, steps),
            BOT => {
                return Outcome {
                    kind: OutcomeKind::HaltBottom,
                    steps,
                }
            }
            READ => {
                if cursor >= z.len() {
                    return Outcome {
                        kind: OutcomeKind::HaltBottom,
                        steps,
                    };
                }
                flag = z.bit(cursor);
                cursor += 1;
            }
            SKIPZ => {
                if !flag {
                    pc += 3;
                }
            }
            LOOP => {
                // flag only changes on READ, which moves the cursor
                if last_loop_cursor == Some(cursor) {
                    return oob;
                }
                last_loop_cursor = Some(cursor);
                pc = 0;
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub z: BitString,
    pub value: Value,
}

/// Is `p` three-valued on every point of `window` at this budget? On failure
/// reports the first offending point and whether it was pending or a
/// value error.
pub fn total_on_window(
    p: &Program,
    window: &[BitString],
    budget: u64,
) -> Result<(), WindowFailure> {
    for z in window {
        let value = value_of(&run(p, z, budget));
        if !value.is_three_valued() {
            return Err(WindowFailure {
                z: z.clone(),
                value,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstr::strings_up_to;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn p(s: &str) -> Program {
        Program::new(b(s))
    }

    #[test]
    fn run_examples() {
        assert_eq!(
            run(&p("010101"), &BitString::empty(), 1),
            Outcome {
                kind: OutcomeKind::Halt(b("101")),
                steps: 1
            }
        );
        assert_eq!(run(&p("100"), &b("0110"), 1).kind, OutcomeKind::HaltBottom);
        let looped = run(&p("111"), &BitString::empty(), 1_000_000);
        assert_eq!(looped.kind, OutcomeKind::OutOfBudget);
        assert_eq!(looped.steps, 1_000_000);
        assert_eq!(
            run(&p("011"), &BitString::empty(), 1).kind,
            OutcomeKind::Halt(BitString::empty())
        );
    }

    #[test]
    fn zero_budget_is_always_pending() {
        assert_eq!(
            run(&Program::default(), &BitString::empty(), 0).kind,
            OutcomeKind::OutOfBudget
        );
    }

    #[test]
    fn incomplete_opcode_halts() {
        let o = run(&p("00000"), &BitString::empty(), 10);
        assert_eq!(o.kind, OutcomeKind::Halt(b("0")));
        assert_eq!(o.steps, 2);
    }

    #[test]
    fn read_and_skip() {
        // READ SKIPZ BOT EMIT0: 0 on inputs starting with 0, ⊥ otherwise.
        let prog = p("101110100000");
        assert_eq!(value_of(&run(&prog, &b("0"), 10)), Value::Zero);
        assert_eq!(value_of(&run(&prog, &b("1"), 10)), Value::Bottom);
        assert_eq!(value_of(&run(&prog, &BitString::empty(), 10)), Value::Bottom);
        // symbolic input
        assert_eq!(
            value_of(&run(&prog, &BitString::zeros(1 << 40), 10)),
            Value::Zero
        );
    }

    #[test]
    fn read_loop_eventually_bottoms() {
        // READ LOOP consumes the whole input then hits exhaustion.
        let o = run(&p("101111"), &b("1111"), 1000);
        assert_eq!(o.kind, OutcomeKind::HaltBottom);
        assert_eq!(o.steps, 9);
        assert_eq!(run(&p("101111"), &b("1111"), 8).kind, OutcomeKind::OutOfBudget);
    }

    #[test]
    fn loop_detection_matches_stepping() {
        // EMIT0 LOOP never halts; small budgets agree with the shortcut.
        for budget in 0..20 {
            let o = run(&p("000111"), &BitString::empty(), budget);
            assert_eq!(o.kind, OutcomeKind::OutOfBudget);
            assert_eq!(o.steps, budget);
        }
    }

    #[test]
    fn value_examples() {
        let h = |s: &str| Outcome {
            kind: OutcomeKind::Halt(b(s)),
            steps: 1,
        };
        assert_eq!(value_of(&h("1")), Value::One);
        assert_eq!(value_of(&h("0")), Value::Zero);
        assert_eq!(value_of(&h("10")), Value::ValueError);
        assert_eq!(value_of(&h("")), Value::ValueError);
        assert_eq!(
            value_of(&Outcome {
                kind: OutcomeKind::HaltBottom,
                steps: 1
            }),
            Value::Bottom
        );
        assert_eq!(
            value_of(&Outcome {
                kind: OutcomeKind::OutOfBudget,
                steps: 5
            }),
            Value::Pending
        );
    }

    #[test]
    fn total_on_window_examples() {
        let window: Vec<BitString> = vec![BitString::empty(), b("0"), b("1")];
        assert_eq!(total_on_window(&p("100"), &window, 1), Ok(()));
        assert_eq!(
            total_on_window(&p("111"), &[BitString::empty()], 100),
            Err(WindowFailure {
                z: BitString::empty(),
                value: Value::Pending
            })
        );
        assert_eq!(total_on_window(&p("000"), &window, 2), Ok(()));
        assert_eq!(
            total_on_window(&p("0"), &window, 2),
            Err(WindowFailure {
                z: BitString::empty(),
                value: Value::ValueError
            })
        );
    }

    #[test]
    fn print_completeness() {
        for x in strings_up_to(10) {
            let prog = Program::new(b("010").concat(&x));
            assert_eq!(
                run(&prog, &BitString::empty(), 1).kind,
                OutcomeKind::Halt(x.clone())
            );
        }
    }

    #[test]
    fn budget_monotonicity_exhaustive() {
        let inputs: Vec<BitString> = strings_up_to(2).collect();
        for prog in strings_up_to(6).map(Program::new) {
            for z in &inputs {
                for b0 in 0..=16 {
                    let o = run(&prog, z, b0);
                    assert!(o.steps <= b0);
                    if o.is_terminal() {
                        for b1 in b0..=16 {
                            assert_eq!(run(&prog, z, b1), o);
                        }
                    }
                }
            }
        }
    }
}

impl Default for Program {
    fn default() -> Self {
        Program(BitString::empty())
    }
}
