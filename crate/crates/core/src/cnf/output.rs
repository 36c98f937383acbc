//! Competition-style solver output: `c` comment lines, `s` status lines,
//! and `v` value lines carrying a zero-terminated model.

use super::{Assignment, Claim, CnfError};

/// Extracts the claimed status and optional model from solver stdout.
///
/// The last `s ` line wins. `v ` lines are concatenated across the whole
/// output; the literal list ends at the first `0`.
pub fn parse_solver_output(stdout: &str) -> Result<(Claim, Option<Assignment>), CnfError> {
    let mut claim = Claim::Unknown;
    let mut literals: Vec<i32> = Vec::new();
    let mut terminated = false;

    for (idx, line) in stdout.lines().enumerate() {
        let line_no = idx + 1;
        if line == "s" || line.starts_with("s ") {
            claim = match line[1..].trim() {
                "SATISFIABLE" => Claim::Sat,
                "UNSATISFIABLE" => Claim::Unsat,
                _ => Claim::Unknown,
            };
        } else if line == "v" || line.starts_with("v ") {
            if terminated {
                continue;
            }
            for token in line[1..].split_whitespace() {
                let lit: i32 = token.parse().map_err(|_| CnfError::MalformedValueLine {
                    line: line_no,
                    token: token.to_string(),
                })?;
                if lit == 0 {
                    terminated = true;
                    break;
                }
                literals.push(lit);
            }
        }
    }

    let model = if literals.is_empty() {
        None
    } else {
        Some(Assignment::from_literals(&literals))
    };
    Ok((claim, model))
}
