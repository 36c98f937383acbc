//! Reader and writer for the DIMACS CNF text format, with transparent
//! gzip decompression.

use std::io::Read;

use super::{CnfError, CnfFormula};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Parse-time options.
#[derive(Debug, Clone, Copy, Default)]
pub struct DimacsOptions {
    /// Upgrade a clause-count mismatch between the header and the body from
    /// a warning to an error. Legacy benchmark files are frequently sloppy,
    /// so the lenient mode is the default.
    pub strict_header: bool,
}

/// A parsed formula plus any non-fatal warnings.
#[derive(Debug, Clone)]
pub struct ParsedDimacs {
    pub formula: CnfFormula,
    pub warnings: Vec<String>,
}

/// Parses DIMACS CNF bytes with default (lenient) options.
pub fn parse_dimacs(input: &[u8]) -> Result<CnfFormula, CnfError> {
    parse_dimacs_with(input, &DimacsOptions::default()).map(|p| p.formula)
}

/// Parses DIMACS CNF bytes. Gzip input is detected by magic number and
/// decompressed transparently.
pub fn parse_dimacs_with(input: &[u8], opts: &DimacsOptions) -> Result<ParsedDimacs, CnfError> {
    let plain;
    let text_bytes: &[u8] = if input.starts_with(&GZIP_MAGIC) {
        let mut decoder = flate2::read::GzDecoder::new(input);
        let mut buf = Vec::new();
        decoder
            .read_to_end(&mut buf)
            .map_err(|e| CnfError::GzipCorrupt(e.to_string()))?;
        plain = buf;
        &plain
    } else {
        input
    };
    let text = String::from_utf8_lossy(text_bytes);
    parse_text(&text, opts)
}

fn parse_text(text: &str, opts: &DimacsOptions) -> Result<ParsedDimacs, CnfError> {
    let mut num_vars: u32 = 0;
    let mut declared_clauses: usize = 0;
    let mut saw_header = false;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut warnings = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if !saw_header {
            if !trimmed.starts_with('p') {
                return Err(CnfError::NoProblemLine);
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(CnfError::MalformedProblemLine { line: line_no });
            }
            num_vars = fields[2]
                .parse()
                .map_err(|_| CnfError::MalformedProblemLine { line: line_no })?;
            declared_clauses = fields[3]
                .parse()
                .map_err(|_| CnfError::MalformedProblemLine { line: line_no })?;
            saw_header = true;
            continue;
        }
        for token in trimmed.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| CnfError::InvalidToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if value.unsigned_abs() > u64::from(num_vars) {
                return Err(CnfError::LiteralOutOfRange {
                    line: line_no,
                    literal: value,
                    num_vars,
                });
            }
            current.push(value as i32);
        }
    }

    if !saw_header {
        return Err(CnfError::NoProblemLine);
    }
    if !current.is_empty() {
        return Err(CnfError::UnterminatedClause);
    }
    if clauses.len() != declared_clauses {
        if opts.strict_header {
            return Err(CnfError::HeaderMismatch {
                declared: declared_clauses,
                parsed: clauses.len(),
            });
        }
        warnings.push(format!(
            "header declares {} clauses but {} were parsed",
            declared_clauses,
            clauses.len()
        ));
    }

    let formula = CnfFormula::new(num_vars, clauses)?;
    Ok(ParsedDimacs { formula, warnings })
}

/// Renders a formula back to DIMACS text: header line, then one
/// zero-terminated clause per line.
pub fn to_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "p cnf {} {}\n",
        formula.num_vars(),
        formula.num_clauses()
    ));
    for clause in formula.clauses() {
        for lit in clause {
            out.push_str(&lit.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}
