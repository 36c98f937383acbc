//! Reference solving for small instances: exhaustive enumeration and a
//! plain DPLL with unit propagation. The two methods cross-check each
//! other in tests and back the model/proof verification paths.

use super::{evaluate, Assignment, CnfError, CnfFormula, Evaluation};

/// Enumeration refuses formulas above this many variables.
pub const ENUMERATE_MAX_VARS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Enumerate,
    Dpll,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Assignment),
    Unsat,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveOutcome::Sat(_))
    }

    pub fn model(&self) -> Option<&Assignment> {
        match self {
            SolveOutcome::Sat(model) => Some(model),
            SolveOutcome::Unsat => None,
        }
    }
}

/// Decides satisfiability of a small formula.
///
/// When the result is satisfiable, the returned model evaluates the formula
/// to satisfied (possibly leaving irrelevant variables unassigned).
pub fn solve_oracle(formula: &CnfFormula, method: OracleMethod) -> Result<SolveOutcome, CnfError> {
    match method {
        OracleMethod::Enumerate => enumerate(formula),
        OracleMethod::Dpll => Ok(dpll_with_proof(formula, false).0),
    }
}

fn enumerate(formula: &CnfFormula) -> Result<SolveOutcome, CnfError> {
    let n = formula.num_vars();
    if n > ENUMERATE_MAX_VARS {
        return Err(CnfError::TooLarge {
            num_vars: n,
            limit: ENUMERATE_MAX_VARS,
        });
    }
    for bits in 0u64..(1u64 << n) {
        let mut assignment = Assignment::new();
        for var in 1..=n {
            assignment.set(var, bits >> (var - 1) & 1 == 1);
        }
        if evaluate(formula, &assignment) == Evaluation::Satisfied {
            return Ok(SolveOutcome::Sat(assignment));
        }
    }
    Ok(SolveOutcome::Unsat)
}

/// DPLL with unit propagation. When `collect_proof` is set and the formula
/// is unsatisfiable, the second component is a clausal proof: at every
/// refuted branch the negation of the decisions in effect is recorded, so
/// each recorded clause follows from the formula plus the clauses recorded
/// before it by unit propagation alone. The final clause is empty.
pub fn dpll_with_proof(formula: &CnfFormula, collect_proof: bool) -> (SolveOutcome, Vec<Vec<i32>>) {
    let mut search = Search {
        clauses: formula.clauses(),
        values: vec![None; formula.num_vars() as usize + 1],
        decisions: Vec::new(),
        proof: Vec::new(),
        collect_proof,
    };
    if search.solve() {
        let mut model = Assignment::new();
        for (var, value) in search.values.iter().enumerate().skip(1) {
            if let Some(v) = value {
                model.set(var as u32, *v);
            }
        }
        (SolveOutcome::Sat(model), Vec::new())
    } else {
        (SolveOutcome::Unsat, search.proof)
    }
}

struct Search<'a> {
    clauses: &'a [Vec<i32>],
    values: Vec<Option<bool>>,
    decisions: Vec<i32>,
    proof: Vec<Vec<i32>>,
    collect_proof: bool,
}

enum Scan {
    Conflict,
    Unit(i32),
    AllSatisfied,
    Branch(i32),
}

impl Search<'_> {
    fn lit_value(&self, lit: i32) -> Option<bool> {
        self.values[lit.unsigned_abs() as usize].map(|v| v == (lit > 0))
    }

    fn assign(&mut self, lit: i32) {
        self.values[lit.unsigned_abs() as usize] = Some(lit > 0);
    }

    fn unassign(&mut self, lit: i32) {
        self.values[lit.unsigned_abs() as usize] = None;
    }

    fn record_refutation(&mut self) {
        if self.collect_proof {
            self.proof
                .push(self.decisions.iter().map(|&d| -d).collect());
        }
    }

    fn scan(&self) -> Scan {
        let mut unit = None;
        let mut branch = None;
        let mut any_pending = false;
        for clause in self.clauses {
            let mut satisfied = false;
            let mut unassigned = 0usize;
            let mut last_unassigned = 0i32;
            for &lit in clause {
                match self.lit_value(lit) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        unassigned += 1;
                        last_unassigned = lit;
                    }
                }
            }
            if satisfied {
                continue;
            }
            match unassigned {
                0 => return Scan::Conflict,
                1 => {
                    if unit.is_none() {
                        unit = Some(last_unassigned);
                    }
                }
                _ => {
                    if branch.is_none() {
                        branch = Some(last_unassigned);
                    }
                }
            }
            any_pending = true;
        }
        if let Some(lit) = unit {
            return Scan::Unit(lit);
        }
        if !any_pending {
            return Scan::AllSatisfied;
        }
        Scan::Branch(branch.expect("pending clause must hold an unassigned literal"))
    }

    fn solve(&mut self) -> bool {
        let mut propagated: Vec<i32> = Vec::new();
        loop {
            match self.scan() {
                Scan::Conflict => {
                    self.record_refutation();
                    for lit in propagated {
                        self.unassign(lit);
                    }
                    return false;
                }
                Scan::Unit(lit) => {
                    self.assign(lit);
                    propagated.push(lit);
                }
                Scan::AllSatisfied => return true,
                Scan::Branch(lit) => {
                    for candidate in [lit, -lit] {
                        self.decisions.push(candidate);
                        self.assign(candidate);
                        if self.solve() {
                            return true;
                        }
                        self.unassign(candidate);
                        self.decisions.pop();
                    }
                    self.record_refutation();
                    for lit in propagated {
                        self.unassign(lit);
                    }
                    return false;
                }
            }
        }
    }
}
