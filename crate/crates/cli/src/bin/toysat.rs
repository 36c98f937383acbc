//! Minimal reference solver speaking the competition conventions: DIMACS
//! in (plain or gzipped), `s`/`v` lines out, exit 10/20, and a DRUP
//! certificate when an output path is given. Useful as a self-test solver
//! for the harness and as a process-backend fixture.

use std::fs;
use std::path::PathBuf;
use std::process::exit;

use satex_core::cnf::{dpll_with_proof, parse_dimacs, SolveOutcome};
use satex_core::proof::{to_drup, ProofLog, ProofStep};

const USAGE: &str = "usage: toysat <input.cnf[.gz]> [proof-output]

Decides the instance with a plain DPLL and prints competition-style
output. With a proof-output path, an unsatisfiable run writes a DRUP
certificate there. Exit code: 10 satisfiable, 20 unsatisfiable,
1 on input errors.";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{USAGE}");
        exit(0);
    }
    if args.is_empty() || args.len() > 2 {
        eprintln!("{USAGE}");
        exit(1);
    }
    let input = PathBuf::from(&args[0]);
    let proof_out = args.get(1).map(PathBuf::from);

    let bytes = match fs::read(&input) {
        Ok(bytes) => bytes,
        Err(e) => {
            eprintln!("toysat: cannot read {}: {e}", input.display());
            exit(1);
        }
    };
    let formula = match parse_dimacs(&bytes) {
        Ok(formula) => formula,
        Err(e) => {
            eprintln!("toysat: cannot parse {}: {e}", input.display());
            exit(1);
        }
    };

    println!("c toysat {}", env!("CARGO_PKG_VERSION"));
    println!(
        "c vars {} clauses {}",
        formula.num_vars(),
        formula.num_clauses()
    );

    let (outcome, proof_clauses) = dpll_with_proof(&formula, proof_out.is_some());
    match outcome {
        SolveOutcome::Sat(model) => {
            println!("s SATISFIABLE");
            let mut line = String::from("v");
            for var in 1..=formula.num_vars() {
                let value = model.value(var).unwrap_or(false);
                line.push(' ');
                if !value {
                    line.push('-');
                }
                line.push_str(&var.to_string());
            }
            line.push_str(" 0");
            println!("{line}");
            exit(10);
        }
        SolveOutcome::Unsat => {
            if let Some(path) = proof_out {
                let log = ProofLog::new(proof_clauses.into_iter().map(ProofStep::Add).collect());
                if let Err(e) = fs::write(&path, to_drup(&log)) {
                    eprintln!("toysat: cannot write proof {}: {e}", path.display());
                    exit(1);
                }
            }
            println!("s UNSATISFIABLE");
            exit(20);
        }
    }
}
