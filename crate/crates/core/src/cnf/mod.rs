//! DIMACS CNF parsing, model evaluation, solver output parsing, status
//! normalization, and a small solving oracle used to cross-check results.

mod dimacs;
mod oracle;
mod output;

pub use dimacs::{parse_dimacs, parse_dimacs_with, to_dimacs, DimacsOptions, ParsedDimacs};
pub use oracle::{dpll_with_proof, solve_oracle, OracleMethod, SolveOutcome};
pub use output::parse_solver_output;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exit code reported for satisfiable results.
pub const EXIT_SAT: i32 = 10;
/// Exit code reported for unsatisfiable results.
pub const EXIT_UNSAT: i32 = 20;
/// Exit code reported when the solver reached no conclusion.
pub const EXIT_UNKNOWN: i32 = 0;
/// Exit code reported for every other termination (timeout, memout, crash).
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("no problem line found")]
    NoProblemLine,
    #[error("line {line}: literal {literal} out of range (header declares {num_vars} variables)")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        num_vars: u32,
    },
    #[error("unterminated clause at end of input")]
    UnterminatedClause,
    #[error("header declares {declared} clauses but {parsed} were parsed")]
    HeaderMismatch { declared: usize, parsed: usize },
    #[error("corrupt gzip stream: {0}")]
    GzipCorrupt(String),
    #[error("line {line}: invalid token {token:?}")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: malformed problem line")]
    MalformedProblemLine { line: usize },
    #[error("line {line}: non-integer token {token:?} on a value line")]
    MalformedValueLine { line: usize, token: String },
    #[error("formula too large to enumerate ({num_vars} variables, limit {limit})")]
    TooLarge { num_vars: u32, limit: u32 },
    #[error("clause contains a zero literal")]
    ZeroLiteral,
    #[error("clause literal {literal} exceeds {num_vars} variables")]
    BadClauseLiteral { literal: i32, num_vars: u32 },
}

/// A propositional formula in conjunctive normal form.
///
/// Clause order is preserved from the input; proof checking depends on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    /// Builds a formula, validating that no literal is zero and every
    /// variable index stays within `num_vars`.
    pub fn new(num_vars: u32, clauses: Vec<Vec<i32>>) -> Result<Self, CnfError> {
        for clause in &clauses {
            for &lit in clause {
                if lit == 0 {
                    return Err(CnfError::ZeroLiteral);
                }
                if lit.unsigned_abs() > num_vars {
                    return Err(CnfError::BadClauseLiteral {
                        literal: lit,
                        num_vars,
                    });
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }
}

/// A (possibly partial) mapping from variables to truth values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    values: BTreeMap<u32, bool>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an assignment from signed literals; a later literal for the
    /// same variable overrides an earlier one.
    pub fn from_literals(lits: &[i32]) -> Self {
        let mut a = Assignment::new();
        for &lit in lits {
            if lit != 0 {
                a.set(lit.unsigned_abs(), lit > 0);
            }
        }
        a
    }

    pub fn set(&mut self, var: u32, value: bool) {
        assert!(var >= 1, "variables are 1-based");
        self.values.insert(var, value);
    }

    pub fn value(&self, var: u32) -> Option<bool> {
        self.values.get(&var).copied()
    }

    /// Truth value of a signed literal, `None` if the variable is unassigned.
    pub fn lit_value(&self, lit: i32) -> Option<bool> {
        self.value(lit.unsigned_abs()).map(|v| v == (lit > 0))
    }

    /// Total assignment over `1..=num_vars` with unassigned variables
    /// defaulted to false, the convention used when verifying models.
    pub fn totalized(&self, num_vars: u32) -> Assignment {
        let mut a = self.clone();
        for var in 1..=num_vars {
            a.values.entry(var).or_insert(false);
        }
        a
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        self.values.iter().map(|(&v, &b)| (v, b))
    }
}

/// Final status of a solver run after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    MemOut,
    CrashOrError,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
            Status::Timeout => "timeout",
            Status::MemOut => "memout",
            Status::CrashOrError => "crash-or-error",
        };
        f.write_str(s)
    }
}

/// What the solver's standard output claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    Sat,
    Unsat,
    Unknown,
}

/// Outcome of evaluating a formula under an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    Satisfied,
    Falsified,
    Undetermined,
}

/// A status together with the exit code it maps to.
///
/// The mapping is the single spot where the exit convention lives:
/// sat is 10, unsat is 20, unknown is 0, everything else is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedStatus {
    pub status: Status,
    pub normalized_exit: i32,
}

impl NormalizedStatus {
    pub fn from_status(status: Status) -> Self {
        let normalized_exit = match status {
            Status::Sat => EXIT_SAT,
            Status::Unsat => EXIT_UNSAT,
            Status::Unknown => EXIT_UNKNOWN,
            Status::Timeout | Status::MemOut | Status::CrashOrError => EXIT_OTHER,
        };
        NormalizedStatus {
            status,
            normalized_exit,
        }
    }
}

/// Evaluates a formula under a possibly partial assignment.
///
/// Satisfied means every clause has at least one true literal. Falsified
/// means some clause has all of its literals assigned false. Anything else
/// is undetermined.
pub fn evaluate(formula: &CnfFormula, assignment: &Assignment) -> Evaluation {
    let mut all_clauses_satisfied = true;
    for clause in formula.clauses() {
        let mut any_true = false;
        let mut all_false = true;
        for &lit in clause {
            match assignment.lit_value(lit) {
                Some(true) => {
                    any_true = true;
                    all_false = false;
                    break;
                }
                Some(false) => {}
                None => all_false = false,
            }
        }
        if all_false {
            return Evaluation::Falsified;
        }
        if !any_true {
            all_clauses_satisfied = false;
        }
    }
    if all_clauses_satisfied {
        Evaluation::Satisfied
    } else {
        Evaluation::Undetermined
    }
}

/// Verifies a claimed model: the assignment is totalized (unassigned
/// variables default to false) and then evaluated.
pub fn verify_model(formula: &CnfFormula, model: &Assignment) -> Evaluation {
    evaluate(formula, &model.totalized(formula.num_vars()))
}

/// Collapses a raw run status and the stdout claim into a normalized status.
///
/// Timeout and memout take precedence over whatever the solver printed.
/// A satisfiable claim that fails model verification is downgraded to
/// a crash, since the solver demonstrably lied.
pub fn normalize_outcome(
    raw: Status,
    claim: Claim,
    verification: Option<Evaluation>,
) -> NormalizedStatus {
    let status = match raw {
        Status::Timeout => Status::Timeout,
        Status::MemOut => Status::MemOut,
        _ => match claim {
            Claim::Sat => match verification {
                None | Some(Evaluation::Satisfied) => Status::Sat,
                Some(_) => Status::CrashOrError,
            },
            Claim::Unsat => Status::Unsat,
            Claim::Unknown => Status::Unknown,
        },
    };
    NormalizedStatus::from_status(status)
}
