//! DRUP certificate parsing and forward checking.
//!
//! Additions are accepted only when they have RUP with respect to the
//! current clause database; that covers the certificates classic CDCL
//! solvers emit. Steps that would need a RAT check are rejected with a
//! distinguishing reason.

use thiserror::Error;

use crate::cnf::CnfFormula;

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("line {line}: malformed proof line {content:?}")]
    MalformedLine { line: usize, content: String },
}

/// One step of a clausal proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofStep {
    Add(Vec<i32>),
    Delete(Vec<i32>),
}

/// A parsed DRUP certificate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProofLog {
    pub steps: Vec<ProofStep>,
}

impl ProofLog {
    pub fn new(steps: Vec<ProofStep>) -> Self {
        ProofLog { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Renders a proof in DRUP text form, one step per line.
pub fn to_drup(log: &ProofLog) -> String {
    let mut out = String::new();
    for step in &log.steps {
        let (prefix, clause) = match step {
            ProofStep::Add(c) => ("", c),
            ProofStep::Delete(c) => ("d ", c),
        };
        out.push_str(prefix);
        for lit in clause {
            out.push_str(&lit.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// Parses DRUP text: one step per line, integers terminated by `0`, with a
/// leading `d` marking deletions. Blank lines and `c` comments are skipped.
pub fn parse_drup(text: &str) -> Result<ProofLog, ProofError> {
    let mut steps = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        let malformed = || ProofError::MalformedLine {
            line: line_no,
            content: line.to_string(),
        };
        let (is_delete, rest) = match trimmed.strip_prefix('d') {
            Some(rest) if rest.starts_with(char::is_whitespace) => (true, rest),
            Some(_) => return Err(malformed()),
            None => (false, trimmed),
        };
        let mut clause = Vec::new();
        let mut terminated = false;
        for token in rest.split_whitespace() {
            if terminated {
                return Err(malformed());
            }
            let lit: i32 = token.parse().map_err(|_| malformed())?;
            if lit == 0 {
                terminated = true;
            } else {
                clause.push(lit);
            }
        }
        if !terminated {
            return Err(malformed());
        }
        steps.push(if is_delete {
            ProofStep::Delete(clause)
        } else {
            ProofStep::Add(clause)
        });
    }
    Ok(ProofLog { steps })
}

/// Judgment over a whole proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// The empty clause was derived.
    Verified,
    /// A step failed its RUP check; carries the 1-based step index.
    Invalid { step: usize, reason: String },
    /// The proof ended without deriving the empty clause.
    Incomplete,
}

#[derive(Debug, Clone)]
pub struct ProofVerdict {
    pub verdict: Verdict,
    pub steps_checked: usize,
    pub warnings: Vec<String>,
}

impl ProofVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self.verdict, Verdict::Verified)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    /// Skip Delete steps entirely. Deletions only ever shrink the database,
    /// so ignoring them must never turn a verified proof invalid; the
    /// re-check behind that property uses this switch.
    pub ignore_deletions: bool,
}

/// Tests whether `clause` has RUP with respect to `database`: assuming the
/// negation of every literal of the clause, unit propagation over the
/// database runs to fixpoint, and the check succeeds iff some clause ends up
/// with all literals false.
pub fn check_rup(database: &[Vec<i32>], clause: &[i32]) -> bool {
    let mut assignment: Vec<i32> = Vec::new();
    for &lit in clause {
        if assignment.contains(&lit) {
            // The negation assumes both a literal and its complement; that
            // is an immediate contradiction, so the clause is a tautology.
            return true;
        }
        if !assignment.contains(&-lit) {
            assignment.push(-lit);
        }
    }
    propagate_to_conflict(database, &mut assignment)
}

/// Unit propagation to fixpoint; returns true iff a conflict arises.
fn propagate_to_conflict(database: &[Vec<i32>], assignment: &mut Vec<i32>) -> bool {
    loop {
        let mut progressed = false;
        for dbclause in database {
            let mut unassigned: Option<i32> = None;
            let mut satisfied = false;
            let mut open = 0usize;
            for &lit in dbclause {
                if assignment.contains(&lit) {
                    satisfied = true;
                    break;
                }
                if !assignment.contains(&-lit) {
                    open += 1;
                    if unassigned.is_none() {
                        unassigned = Some(lit);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match open {
                0 => return true,
                1 => {
                    assignment.push(unassigned.expect("open literal recorded"));
                    progressed = true;
                }
                _ => {}
            }
        }
        if !progressed {
            return false;
        }
    }
}

/// Checks a proof against a formula with default options.
pub fn check_proof(formula: &CnfFormula, proof: &ProofLog) -> ProofVerdict {
    check_proof_with(formula, proof, &CheckOptions::default())
}

/// Checks a proof step by step: additions must pass the RUP check before
/// entering the database, deletions remove one clause with the same literal
/// set (an unmatched deletion is a warning, not a failure). The proof is
/// verified as soon as the empty clause is added; later steps are ignored.
pub fn check_proof_with(
    formula: &CnfFormula,
    proof: &ProofLog,
    opts: &CheckOptions,
) -> ProofVerdict {
    let mut database: Vec<Vec<i32>> = formula.clauses().to_vec();
    let mut warnings = Vec::new();
    let mut steps_checked = 0usize;

    for (idx, step) in proof.steps.iter().enumerate() {
        let step_no = idx + 1;
        steps_checked = step_no;
        match step {
            ProofStep::Add(clause) => {
                if !check_rup(&database, clause) {
                    return ProofVerdict {
                        verdict: Verdict::Invalid {
                            step: step_no,
                            reason: format!(
                                "clause {} has no RUP against the current database \
                                 (RAT additions are not supported)",
                                render_clause(clause)
                            ),
                        },
                        steps_checked,
                        warnings,
                    };
                }
                if clause.is_empty() {
                    return ProofVerdict {
                        verdict: Verdict::Verified,
                        steps_checked,
                        warnings,
                    };
                }
                database.push(clause.clone());
            }
            ProofStep::Delete(clause) => {
                if opts.ignore_deletions {
                    continue;
                }
                match database.iter().position(|c| same_literal_set(c, clause)) {
                    Some(pos) => {
                        database.swap_remove(pos);
                    }
                    None => warnings.push(format!(
                        "step {}: deletion of {} matched no clause",
                        step_no,
                        render_clause(clause)
                    )),
                }
            }
        }
    }

    ProofVerdict {
        verdict: Verdict::Incomplete,
        steps_checked,
        warnings,
    }
}

fn same_literal_set(a: &[i32], b: &[i32]) -> bool {
    let mut a: Vec<i32> = a.to_vec();
    let mut b: Vec<i32> = b.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    a == b
}

fn render_clause(clause: &[i32]) -> String {
    if clause.is_empty() {
        return "(empty)".to_string();
    }
    let lits: Vec<String> = clause.iter().map(|l| l.to_string()).collect();
    format!("({})", lits.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{solve_oracle, CnfFormula, OracleMethod, SolveOutcome};

    fn formula(num_vars: u32, clauses: &[&[i32]]) -> CnfFormula {
        CnfFormula::new(num_vars, clauses.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    /// Semantic cross-check: db ∧ ¬clause, decided by enumeration.
    fn db_and_negated_clause_unsat(db: &[Vec<i32>], clause: &[i32]) -> bool {
        let mut clauses: Vec<Vec<i32>> = db.to_vec();
        for &lit in clause {
            clauses.push(vec![-lit]);
        }
        let max_var = clauses
            .iter()
            .flatten()
            .map(|l| l.unsigned_abs())
            .max()
            .unwrap_or(0);
        let f = CnfFormula::new(max_var, clauses).unwrap();
        solve_oracle(&f, OracleMethod::Enumerate).unwrap() == SolveOutcome::Unsat
    }

    #[test]
    fn parse_add_delete_and_empty() {
        let log = parse_drup("1 2 0\nd 1 2 0\n0\n").unwrap();
        assert_eq!(
            log.steps,
            vec![
                ProofStep::Add(vec![1, 2]),
                ProofStep::Delete(vec![1, 2]),
                ProofStep::Add(vec![]),
            ]
        );
    }

    #[test]
    fn parse_empty_file() {
        assert!(parse_drup("").unwrap().is_empty());
    }

    #[test]
    fn parse_rejects_junk() {
        assert!(matches!(
            parse_drup("x 1 0\n"),
            Err(ProofError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn parse_rejects_missing_terminator() {
        assert!(parse_drup("1 2\n").is_err());
        assert!(parse_drup("d 1\n").is_err());
    }

    #[test]
    fn parse_skips_comments_and_blanks() {
        let log = parse_drup("c preamble\n\n1 0\n").unwrap();
        assert_eq!(log.steps, vec![ProofStep::Add(vec![1])]);
    }

    #[test]
    fn drup_round_trip() {
        let text = "1 2 0\nd 1 2 0\n-3 0\n0\n";
        let log = parse_drup(text).unwrap();
        assert_eq!(to_drup(&log), text);
    }

    #[test]
    fn rup_holds_when_unit_falsifies() {
        let db = vec![vec![1]];
        let clause = vec![1, 2];
        assert!(check_rup(&db, &clause));
        assert!(db_and_negated_clause_unsat(&db, &clause));
    }

    #[test]
    fn rup_holds_for_tautology() {
        assert!(check_rup(&[], &[1, -1]));
    }

    #[test]
    fn rup_fails_without_conflict() {
        let db = vec![vec![1, 2]];
        let clause = vec![1];
        assert!(!check_rup(&db, &clause));
        assert!(!db_and_negated_clause_unsat(&db, &clause));
    }

    #[test]
    fn trivial_contradiction_verifies() {
        let f = formula(1, &[&[1], &[-1]]);
        let proof = parse_drup("0\n").unwrap();
        let verdict = check_proof(&f, &proof);
        assert_eq!(verdict.verdict, Verdict::Verified);
        assert_eq!(verdict.steps_checked, 1);
        assert_eq!(
            solve_oracle(&f, OracleMethod::Enumerate).unwrap(),
            SolveOutcome::Unsat
        );
    }

    #[test]
    fn non_rup_step_is_invalid() {
        let f = formula(2, &[&[1, 2]]);
        let proof = parse_drup("1 0\n0\n").unwrap();
        let verdict = check_proof(&f, &proof);
        assert!(matches!(verdict.verdict, Verdict::Invalid { step: 1, .. }));
        // Oracle agrees: the database with the negated step clause stays
        // satisfiable, so step 1 genuinely lacks RUP.
        assert!(!db_and_negated_clause_unsat(&[vec![1, 2]], &[1]));
    }

    #[test]
    fn empty_proof_is_incomplete() {
        let f = formula(1, &[&[1]]);
        let verdict = check_proof(&f, &ProofLog::default());
        assert_eq!(verdict.verdict, Verdict::Incomplete);
        assert_eq!(verdict.steps_checked, 0);
    }

    #[test]
    fn unmatched_deletion_is_a_warning() {
        let f = formula(1, &[&[1], &[-1]]);
        let proof = parse_drup("d 1 -1 0\n0\n").unwrap();
        let verdict = check_proof(&f, &proof);
        assert_eq!(verdict.verdict, Verdict::Verified);
        assert_eq!(verdict.warnings.len(), 1);
    }

    #[test]
    fn deletion_matches_on_literal_sets() {
        // Deleting [1] removes the unit, so the final empty clause loses
        // its RUP and the proof is rejected at that step.
        let f = formula(1, &[&[1], &[-1]]);
        let proof = parse_drup("d 1 0\n0\n").unwrap();
        let verdict = check_proof(&f, &proof);
        assert!(matches!(verdict.verdict, Verdict::Invalid { step: 2, .. }));
    }

    #[test]
    fn ignoring_deletions_keeps_verified_proofs_verified() {
        let f = formula(2, &[&[1], &[-1], &[1, 2]]);
        let proof = parse_drup("d 1 2 0\n0\n").unwrap();
        // With the deletion applied the database still conflicts on units.
        assert_eq!(check_proof(&f, &proof).verdict, Verdict::Verified);
        let opts = CheckOptions {
            ignore_deletions: true,
        };
        assert_eq!(
            check_proof_with(&f, &proof, &opts).verdict,
            Verdict::Verified
        );
    }

    #[test]
    fn steps_after_empty_clause_are_ignored() {
        let f = formula(1, &[&[1], &[-1]]);
        let proof = parse_drup("0\nx-would-never-parse 0\n");
        assert!(proof.is_err());
        let proof = parse_drup("0\n5 0\n").unwrap();
        let verdict = check_proof(&f, &proof);
        assert_eq!(verdict.verdict, Verdict::Verified);
        assert_eq!(verdict.steps_checked, 1);
    }
}
