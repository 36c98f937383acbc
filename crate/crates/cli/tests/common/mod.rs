//! Shared fixture setup for the CLI test suites.
//!
//! The committed registry template refers to fixture artifacts by
//! placeholder (`@FIXTURES@`, `@TOY_SHA@`, `@TOYBIN_SHA@`); materializing a
//! fixture builds the toy source tarball, computes real checksums, and
//! rewrites the template into a scratch registry.

#![allow(dead_code)]

use std::fs;
use std::io::Write;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use satex_core::archive::sha256_file;

pub const SATEX: &str = env!("CARGO_BIN_EXE_satex");
pub const TOYSAT: &str = env!("CARGO_BIN_EXE_toysat");

pub fn fixtures_src() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct Fixture {
    pub root: tempfile::TempDir,
    pub registry: PathBuf,
    pub bin: PathBuf,
    pub instances: PathBuf,
    pub artifacts: PathBuf,
}

pub fn write_script(path: &Path, body: &str) {
    let mut file = fs::File::create(path).unwrap();
    writeln!(file, "#!/bin/sh").unwrap();
    file.write_all(body.as_bytes()).unwrap();
    drop(file);
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

pub fn gzip_file(src: &Path, dst: &Path) {
    let bytes = fs::read(src).unwrap();
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(&bytes).unwrap();
    fs::write(dst, enc.finish().unwrap()).unwrap();
}

pub fn materialize() -> Fixture {
    let root = tempfile::tempdir().unwrap();
    let src = fixtures_src();

    // Instances; the gz one ships compressed.
    let instances = root.path().join("instances");
    fs::create_dir_all(&instances).unwrap();
    for entry in fs::read_dir(src.join("instances")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name == "gz_sat.cnf" {
            gzip_file(&path, &instances.join("gz_sat.cnf.gz"));
        } else {
            fs::copy(&path, instances.join(&name)).unwrap();
        }
    }

    // Fixture artifacts: the toy source tarball and a standalone "binary".
    let artifacts = root.path().join("artifacts");
    fs::create_dir_all(&artifacts).unwrap();
    let stage = root.path().join("tar-stage");
    fs::create_dir_all(&stage).unwrap();
    fs::copy(src.join("toy.sh"), stage.join("toy")).unwrap();
    fs::set_permissions(stage.join("toy"), fs::Permissions::from_mode(0o755)).unwrap();
    let tarball = artifacts.join("toy-src.tar.gz");
    let status = Command::new("tar")
        .args(["czf"])
        .arg(&tarball)
        .args(["-C"])
        .arg(&stage)
        .arg("toy")
        .status()
        .expect("tar is available");
    assert!(status.success(), "tar failed");
    fs::copy(src.join("toy.sh"), artifacts.join("toybin.bin")).unwrap();

    let toy_sha = sha256_file(&tarball).unwrap();
    let toybin_sha = sha256_file(&artifacts.join("toybin.bin")).unwrap();

    // Registry from the template with placeholders substituted.
    let registry = root.path().join("registry");
    for set in ["2000", "2019"] {
        let set_dir = registry.join(set);
        fs::create_dir_all(&set_dir).unwrap();
        for file in ["setup.json", "solvers.json"] {
            let template = fs::read_to_string(src.join("registry").join(set).join(file)).unwrap();
            let concrete = template
                .replace("@FIXTURES@", &artifacts.display().to_string())
                .replace("@TOY_SHA@", &toy_sha)
                .replace("@TOYBIN_SHA@", &toybin_sha);
            fs::write(set_dir.join(file), concrete).unwrap();
        }
    }

    // Process-backend executables.
    let bin = root.path().join("bin");
    fs::create_dir_all(&bin).unwrap();
    for name in ["toy-2000", "toybin-2000", "honest-2000"] {
        fs::copy(TOYSAT, bin.join(name)).unwrap();
        fs::set_permissions(bin.join(name), fs::Permissions::from_mode(0o755)).unwrap();
    }
    write_script(
        &bin.join("liar-2000"),
        "echo \"s SATISFIABLE\"\necho \"v 1 2 0\"\nexit 10\n",
    );
    write_script(&bin.join("sleeper-2000"), "sleep 30\n");

    Fixture {
        registry,
        bin,
        instances,
        artifacts,
        root,
    }
}

impl Fixture {
    pub fn instance(&self, name: &str) -> PathBuf {
        self.instances.join(name)
    }

    /// Runs `satex` with this fixture's registry and the process backend.
    pub fn satex(&self, args: &[&str]) -> Output {
        self.satex_with_backend("process", args)
    }

    pub fn satex_with_backend(&self, backend: &str, args: &[&str]) -> Output {
        Command::new(SATEX)
            .arg("--registry")
            .arg(&self.registry)
            .arg("--backend")
            .arg(backend)
            .arg("--bin-path")
            .arg(&self.bin)
            .args(args)
            .output()
            .expect("satex runs")
    }
}

pub fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Small deterministic generator for random test formulas; keeps the
/// acceptance suite free of extra dependencies.
pub struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        XorShift(seed.max(1))
    }

    pub fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.next() % bound
    }
}

/// Random formula with `1..=max_vars` variables and up to `max_clauses`
/// clauses of one to four literals.
pub fn random_formula(
    rng: &mut XorShift,
    max_vars: u32,
    max_clauses: usize,
) -> satex_core::cnf::CnfFormula {
    let num_vars = 1 + rng.below(max_vars as u64) as u32;
    let num_clauses = rng.below(max_clauses as u64 + 1) as usize;
    let mut clauses = Vec::with_capacity(num_clauses);
    for _ in 0..num_clauses {
        let len = 1 + rng.below(4) as usize;
        let mut clause = Vec::with_capacity(len);
        for _ in 0..len {
            let var = 1 + rng.below(num_vars as u64) as i32;
            let lit = if rng.below(2) == 0 { var } else { -var };
            clause.push(lit);
        }
        clauses.push(clause);
    }
    satex_core::cnf::CnfFormula::new(num_vars, clauses).unwrap()
}
