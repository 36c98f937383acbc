//! Property tests for the core invariants: parser round-trips,
//! oracle agreement, RUP soundness, deletion safety, registry resolution,
//! and the template placeholder rules.

use std::fs;
use std::io::Write;

use proptest::collection::vec;
use proptest::prelude::*;

use satex_core::cnf::{
    evaluate, parse_dimacs, solve_oracle, to_dimacs, CnfFormula, Evaluation, OracleMethod,
    SolveOutcome,
};
use satex_core::proof::{
    check_proof, check_proof_with, check_rup, CheckOptions, ProofLog, ProofStep, Verdict,
};
use satex_core::registry::load_registry;

fn literal(num_vars: u32) -> impl Strategy<Value = i32> {
    (1..=num_vars as i32, any::<bool>()).prop_map(|(var, neg)| if neg { -var } else { var })
}

fn formula(max_vars: u32, max_clauses: usize) -> impl Strategy<Value = CnfFormula> {
    (1..=max_vars).prop_flat_map(move |n| {
        vec(vec(literal(n), 0..6), 0..=max_clauses)
            .prop_map(move |clauses| CnfFormula::new(n, clauses).unwrap())
    })
}

fn gzip(data: &[u8]) -> Vec<u8> {
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(data).unwrap();
    enc.finish().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dimacs_round_trip(f in formula(12, 40)) {
        let text = to_dimacs(&f);
        let reparsed = parse_dimacs(text.as_bytes()).unwrap();
        prop_assert_eq!(&f, &reparsed);
        // Serializing the reparse gives the same bytes again.
        prop_assert_eq!(to_dimacs(&reparsed), text);
    }

    #[test]
    fn gzip_transparency(f in formula(12, 40)) {
        let text = to_dimacs(&f);
        let from_plain = parse_dimacs(text.as_bytes()).unwrap();
        let from_gz = parse_dimacs(&gzip(text.as_bytes())).unwrap();
        prop_assert_eq!(from_plain, from_gz);
    }

    #[test]
    fn oracle_methods_agree(f in formula(10, 30)) {
        let by_enum = solve_oracle(&f, OracleMethod::Enumerate).unwrap();
        let by_dpll = solve_oracle(&f, OracleMethod::Dpll).unwrap();
        prop_assert_eq!(by_enum.is_sat(), by_dpll.is_sat());
        if let SolveOutcome::Sat(model) = by_dpll {
            prop_assert_eq!(evaluate(&f, &model), Evaluation::Satisfied);
        }
    }

    #[test]
    fn rup_claims_match_the_semantic_oracle(
        db in vec(vec(literal(8), 0..5), 0..12),
        clause in vec(literal(8), 0..5),
    ) {
        if check_rup(&db, &clause) {
            // db together with the clause's negation must be unsatisfiable.
            let mut clauses = db.clone();
            for &lit in &clause {
                clauses.push(vec![-lit]);
            }
            let f = CnfFormula::new(8, clauses).unwrap();
            prop_assert_eq!(
                solve_oracle(&f, OracleMethod::Enumerate).unwrap(),
                SolveOutcome::Unsat
            );
        }
    }

    #[test]
    fn ignoring_deletions_never_flips_verified(
        f in formula(8, 16),
        delete_picks in vec(any::<prop::sample::Index>(), 0..4),
    ) {
        let (outcome, clauses) = satex_core::cnf::dpll_with_proof(&f, true);
        prop_assume!(outcome == SolveOutcome::Unsat);

        // Interleave deletions of original clauses into the proof.
        let mut steps: Vec<ProofStep> = clauses.into_iter().map(ProofStep::Add).collect();
        if !f.clauses().is_empty() {
            for pick in delete_picks {
                let clause = pick.get(f.clauses()).clone();
                let pos = pick.index(steps.len() + 1);
                steps.insert(pos.min(steps.len()), ProofStep::Delete(clause));
            }
        }
        let proof = ProofLog::new(steps);
        let with_deletions = check_proof(&f, &proof);
        let ignoring = check_proof_with(
            &f,
            &proof,
            &CheckOptions { ignore_deletions: true },
        );
        if with_deletions.verdict == Verdict::Verified {
            prop_assert_eq!(ignoring.verdict, Verdict::Verified);
        }
    }

    #[test]
    fn solver_generated_proofs_always_verify(f in formula(9, 24)) {
        let (outcome, clauses) = satex_core::cnf::dpll_with_proof(&f, true);
        prop_assume!(outcome == SolveOutcome::Unsat);
        let proof = ProofLog::new(clauses.into_iter().map(ProofStep::Add).collect());
        let verdict = check_proof(&f, &proof);
        prop_assert_eq!(verdict.verdict, Verdict::Verified);
    }
}

// ---------------------------------------------------------------------------
// Registry properties. These write real files, so the case count stays low.

fn identifier() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,5}".prop_map(|s| s)
}

fn write_registry(dir: &std::path::Path, sets: &[(String, Vec<String>)]) {
    let sha = "ab".repeat(32);
    for (set_id, names) in sets {
        let set_dir = dir.join(set_id);
        fs::create_dir_all(&set_dir).unwrap();
        let entries: Vec<String> = names
            .iter()
            .map(|name| {
                format!(
                    r#"{{"name": "{name}",
                        "source": {{"url": "http://e/{name}", "sha256": "{sha}",
                                    "kind": "binary-archive"}},
                        "run": {{"template": "{name} INPUT"}}}}"#
                )
            })
            .collect();
        fs::write(
            set_dir.join("solvers.json"),
            format!("[{}]", entries.join(",")),
        )
        .unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resolve_returns_sorted_subsets(
        mut names in vec(identifier(), 1..6),
        pattern_pick in any::<prop::sample::Index>(),
        use_star in any::<bool>(),
    ) {
        names.sort();
        names.dedup();
        let dir = tempfile::tempdir().unwrap();
        write_registry(dir.path(), &[("2000".to_string(), names.clone())]);
        let registry = load_registry(dir.path()).unwrap();

        let resolved = registry.resolve("*").unwrap();
        prop_assert_eq!(resolved.len(), names.len());
        // Sorted by (name, version) and duplicate-free.
        for pair in resolved.windows(2) {
            prop_assert!(
                (pair[0].name(), pair[0].version()) < (pair[1].name(), pair[1].version())
            );
        }
        let all: Vec<String> = resolved.iter().map(|s| s.to_string()).collect();

        let pattern = if use_star {
            let name = pattern_pick.get(&names);
            format!("{}*", &name[..1])
        } else {
            pattern_pick.get(&names).clone()
        };
        let matched = registry.resolve(&pattern).unwrap();
        for spec in &matched {
            prop_assert!(all.contains(&spec.to_string()));
        }
    }

    #[test]
    fn resolve_is_monotone_under_entry_addition(
        mut names in vec(identifier(), 2..6),
        prefix in "[a-z]",
    ) {
        names.sort();
        names.dedup();
        prop_assume!(names.len() >= 2);
        let (head, rest) = names.split_at(names.len() - 1);

        let dir_small = tempfile::tempdir().unwrap();
        write_registry(dir_small.path(), &[("2000".to_string(), head.to_vec())]);
        let small = load_registry(dir_small.path()).unwrap();

        let dir_big = tempfile::tempdir().unwrap();
        let mut all = head.to_vec();
        all.extend(rest.iter().cloned());
        write_registry(dir_big.path(), &[("2000".to_string(), all)]);
        let big = load_registry(dir_big.path()).unwrap();

        let pattern = format!("{prefix}*");
        let before = small.resolve(&pattern).map(|v| v.len()).unwrap_or(0);
        let after = big.resolve(&pattern).map(|v| v.len()).unwrap_or(0);
        prop_assert!(after >= before);
    }

    #[test]
    fn loading_is_deterministic(names in vec(identifier(), 1..5)) {
        let mut names = names;
        names.sort();
        names.dedup();
        let dir = tempfile::tempdir().unwrap();
        write_registry(dir.path(), &[("2000".to_string(), names)]);
        let a = load_registry(dir.path()).unwrap();
        let b = load_registry(dir.path()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn template_placeholder_rules_hold_iff_load_succeeds(
        input_count in 0usize..3,
        proof_count in 0usize..3,
        proof_flag in any::<bool>(),
    ) {
        let mut template = String::from("solver");
        for _ in 0..input_count {
            template.push_str(" INPUT");
        }
        for _ in 0..proof_count {
            template.push_str(" PROOF");
        }
        let dir = tempfile::tempdir().unwrap();
        let sha = "ab".repeat(32);
        fs::create_dir_all(dir.path().join("x")).unwrap();
        fs::write(
            dir.path().join("x/solvers.json"),
            format!(
                r#"[{{"name": "s",
                     "source": {{"url": "http://e/s", "sha256": "{sha}",
                                 "kind": "binary-archive"}},
                     "run": {{"template": "{template}", "proof": {proof_flag}}}}}]"#
            ),
        )
        .unwrap();

        let expected_ok =
            input_count == 1 && proof_count <= 1 && (proof_flag == (proof_count == 1));
        let loaded = load_registry(dir.path());
        prop_assert_eq!(loaded.is_ok(), expected_ok, "template {:?}", template);
        if let Ok(registry) = loaded {
            for entry in registry.entries() {
                // Loaded entries always satisfy the placeholder invariant.
                let t = &entry.run.command_template;
                prop_assert_eq!(t.matches("INPUT").count(), 1);
                prop_assert!(t.matches("PROOF").count() <= 1);
                prop_assert_eq!(entry.run.proof_capable, t.contains("PROOF"));
            }
        }
    }
}
