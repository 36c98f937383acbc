//! Executes generated run wrappers through a real shell against a
//! recording stub solver.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::process::Command;

use satex_core::archive::{SourceKind, SourceRef};
use satex_core::recipes::generate_run_wrapper;
use satex_core::registry::{BuildConfig, RunConfig, SolverEntry, SolverSpec};

fn entry(template: &str, options: Vec<String>, proof: bool) -> SolverEntry {
    SolverEntry {
        spec: SolverSpec::new("rec", "2000").unwrap(),
        source: SourceRef {
            url: "http://example.org/rec.tar.gz".into(),
            sha256: "cd".repeat(32),
            kind: SourceKind::BinaryArchive,
            doi: None,
        },
        build: BuildConfig::default(),
        run: RunConfig {
            command_template: template.into(),
            default_options: options,
            proof_capable: proof,
        },
        era: None,
        meta: BTreeMap::new(),
    }
}

/// Installs the wrapper plus a stub solver named `rec` that records its
/// argv (one per line) and prints a status line.
struct WrapperHarness {
    dir: tempfile::TempDir,
}

impl WrapperHarness {
    fn new(entry: &SolverEntry, status_line: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let wrapper = dir.path().join("run-solver");
        fs::write(&wrapper, generate_run_wrapper(entry)).unwrap();
        fs::set_permissions(&wrapper, fs::Permissions::from_mode(0o755)).unwrap();

        let stub = dir.path().join("rec");
        let mut file = fs::File::create(&stub).unwrap();
        writeln!(file, "#!/bin/sh").unwrap();
        writeln!(
            file,
            "for a in \"$@\"; do printf '%s\\n' \"$a\"; done > \"$REC_ARGS\""
        )
        .unwrap();
        writeln!(file, "echo '{status_line}'").unwrap();
        drop(file);
        fs::set_permissions(&stub, fs::Permissions::from_mode(0o755)).unwrap();

        WrapperHarness { dir }
    }

    fn run(&self, args: &[&Path]) -> (i32, String) {
        let argfile = self.dir.path().join("argv.txt");
        let path_env = format!(
            "{}:{}",
            self.dir.path().display(),
            std::env::var("PATH").unwrap_or_default()
        );
        let status = Command::new("sh")
            .arg(self.dir.path().join("run-solver"))
            .args(args)
            .env("PATH", path_env)
            .env("REC_ARGS", &argfile)
            .output()
            .unwrap();
        let argv = fs::read_to_string(&argfile).unwrap_or_default();
        (status.status.code().unwrap_or(-1), argv)
    }
}

#[test]
fn substitutes_input_and_proof() {
    let e = entry("rec INPUT PROOF", vec![], true);
    let h = WrapperHarness::new(&e, "s SATISFIABLE");
    let input = h.dir.path().join("file.cnf");
    fs::write(&input, "p cnf 0 0\n").unwrap();
    let proof = h.dir.path().join("proof");

    let (code, argv) = h.run(&[&input, &proof]);
    assert_eq!(code, 10);
    assert_eq!(argv, format!("{}\n{}\n", input.display(), proof.display()));
}

#[test]
fn omitting_the_proof_drops_proof_tokens() {
    let e = entry("rec --proof=PROOF INPUT", vec![], true);
    let h = WrapperHarness::new(&e, "s UNSATISFIABLE");
    let input = h.dir.path().join("file.cnf");
    fs::write(&input, "p cnf 0 0\n").unwrap();

    let (code, argv) = h.run(&[&input]);
    assert_eq!(code, 20);
    assert_eq!(argv, format!("{}\n", input.display()));
}

#[test]
fn no_status_line_exits_zero() {
    let e = entry("rec INPUT", vec![], false);
    let h = WrapperHarness::new(&e, "c no conclusion");
    let input = h.dir.path().join("file.cnf");
    fs::write(&input, "p cnf 0 0\n").unwrap();
    let (code, _) = h.run(&[&input]);
    assert_eq!(code, 0);
}

#[test]
fn gzipped_input_is_decompressed_to_a_temp_file() {
    let e = entry("rec INPUT", vec![], false);
    let h = WrapperHarness::new(&e, "s SATISFIABLE");
    let plain = b"p cnf 1 1\n1 0\n";
    let input = h.dir.path().join("file.cnf.gz");
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(plain).unwrap();
    fs::write(&input, enc.finish().unwrap()).unwrap();

    let (code, argv) = h.run(&[&input]);
    assert_eq!(code, 10);
    let seen = argv.trim_end();
    assert!(seen.ends_with("/input.cnf"), "argv was {seen:?}");
    // The temp copy is cleaned up on exit, so only the recorded path
    // remains; it must differ from the original .gz path.
    assert_ne!(seen, input.display().to_string());
}

#[test]
fn metacharacters_in_paths_survive_unexpanded() {
    let e = entry("rec INPUT", vec!["--note=$(hostname); `id`".into()], false);
    let h = WrapperHarness::new(&e, "s SATISFIABLE");
    let evil = h.dir.path().join("a b;$(touch pwned) '&'.cnf");
    fs::write(&evil, "p cnf 0 0\n").unwrap();

    let (code, argv) = h.run(&[&evil]);
    assert_eq!(code, 10);
    let lines: Vec<&str> = argv.lines().collect();
    assert_eq!(lines[0], evil.display().to_string());
    assert_eq!(lines[1], "--note=$(hostname); `id`");
    assert!(!h.dir.path().join("pwned").exists());
    assert!(!Path::new("pwned").exists());
}

#[test]
fn missing_input_is_reported_with_exit_one() {
    let e = entry("rec INPUT", vec![], false);
    let h = WrapperHarness::new(&e, "s SATISFIABLE");
    let (code, _) = h.run(&[Path::new("/absent/file.cnf")]);
    assert_eq!(code, 1);
}
