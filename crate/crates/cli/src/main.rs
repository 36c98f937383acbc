//! `satex`: archive metadata, container recipes, and one unified way to
//! run any registered SAT solver.
//!
//! Exit codes: domain outcomes use 0/1 as documented per subcommand, usage
//! and environment failures use 2, and `run` forwards the normalized
//! solver exit (10 sat, 20 unsat, 0 unknown, 1 otherwise).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::exit;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use satex_core::archive::{Cache, HttpTransport, ManifestEntry};
use satex_core::cnf::{normalize_outcome, parse_dimacs_with, parse_solver_output, DimacsOptions};
use satex_core::harness::{
    detect_disagreements, render_summary_csv, render_summary_text, run_matrix, summarize, JobMatrix,
};
use satex_core::proof::{check_proof, parse_drup, Verdict};
use satex_core::recipes::{era_for, generate_build_recipe};
use satex_core::registry::{image_name, load_registry, Registry, SolverSpec};
use satex_core::runtime::{
    extract_binary, fetch_or_build, BackendKind, ContainerBackend, ExecutionBackend, FetchPolicy,
    ProcessBackend, ResourceLimits,
};

const EXIT_OK: i32 = 0;
const EXIT_DOMAIN_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "satex",
    version,
    about = "Archive, build, and run SAT solvers under one invocation contract",
    after_help = "Exit codes: 0/1 per-command outcomes, 2 usage or environment errors;\n\
                  `run` exits 10 (sat), 20 (unsat), 0 (unknown), 1 (other).\n\
                  See docs/cli.md for the full reference."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Registry root directory.
    #[arg(
        long,
        global = true,
        env = "SATHERITAGE_REGISTRY",
        default_value = "./registry"
    )]
    registry: PathBuf,

    /// Execution backend.
    #[arg(
        long,
        global = true,
        env = "SATHERITAGE_BACKEND",
        default_value = "container"
    )]
    backend: String,

    /// Directory of local solver executables for the process backend
    /// (named `<name>-<version>`).
    #[arg(
        long,
        global = true,
        env = "SATHERITAGE_BIN_PATH",
        default_value = "./bin"
    )]
    bin_path: PathBuf,

    /// Artifact cache directory used by `fetch`.
    #[arg(
        long,
        global = true,
        env = "SATHERITAGE_CACHE",
        default_value = "./satex-cache"
    )]
    cache: PathBuf,

    /// Worker count for `build` and `bench`.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Treat DIMACS header mismatches as errors.
    #[arg(long, global = true)]
    strict_dimacs: bool,

    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Disable colored diagnostics.
    #[arg(long, global = true)]
    no_color: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// List registered solvers, one name:version per line.
    List {
        /// Glob pattern (NAME[:VERSION], `*` and `?`).
        pattern: Option<String>,
    },
    /// Show everything recorded about one solver.
    Info {
        spec: String,
        /// Machine-readable output with stable key order.
        #[arg(long)]
        json: bool,
    },
    /// Run a solver on a DIMACS file through the unified wrapper contract.
    Run {
        spec: String,
        /// CNF input, possibly gzipped.
        input: PathBuf,
        /// Proof output path; enables proof logging for capable solvers.
        proof: Option<PathBuf>,
        /// Wall-clock limit in seconds.
        #[arg(long, default_value_t = 3600.0)]
        timeout: f64,
    },
    /// Run a solver with raw arguments after `--`, bypassing the wrapper.
    #[command(name = "run-raw")]
    RunRaw {
        spec: String,
        /// Arguments handed to the solver executable verbatim.
        #[arg(last = true, required = true)]
        args: Vec<String>,
    },
    /// Build container images for every solver matching the pattern.
    Build { pattern: String },
    /// Copy a solver's binary and wrapper out of its image.
    Extract { spec: String, dest: PathBuf },
    /// Run a benchmark campaign described by a JSON config file.
    Bench { config: PathBuf },
    /// Download and verify the sources of matching solvers into the cache.
    Fetch {
        pattern: String,
        /// Where to write the provenance manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Check a DRUP certificate against a CNF instance.
    #[command(name = "check-proof")]
    CheckProof { cnf: PathBuf, proof: PathBuf },
    /// Print the resolved configuration.
    Config,
}

fn main() {
    let cli = Cli::parse();

    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .write_style(if cli.global.no_color {
            env_logger::WriteStyle::Never
        } else {
            env_logger::WriteStyle::Auto
        })
        .init();

    match dispatch(&cli) {
        Ok(code) => exit(code),
        Err(err) => {
            eprintln!("satex: {err:#}");
            exit(EXIT_USAGE);
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Cmd::List { pattern } => cmd_list(&cli.global, pattern.as_deref()),
        Cmd::Info { spec, json } => cmd_info(&cli.global, spec, *json),
        Cmd::Run {
            spec,
            input,
            proof,
            timeout,
        } => cmd_run(&cli.global, spec, input, proof.as_deref(), *timeout),
        Cmd::RunRaw { spec, args } => cmd_run_raw(&cli.global, spec, args),
        Cmd::Build { pattern } => cmd_build(&cli.global, pattern),
        Cmd::Extract { spec, dest } => cmd_extract(&cli.global, spec, dest),
        Cmd::Bench { config } => cmd_bench(&cli.global, config),
        Cmd::Fetch { pattern, manifest } => cmd_fetch(&cli.global, pattern, manifest.as_deref()),
        Cmd::CheckProof { cnf, proof } => cmd_check_proof(&cli.global, cnf, proof),
        Cmd::Config => cmd_config(&cli.global),
    }
}

fn backend_kind(opts: &GlobalOpts) -> Result<BackendKind> {
    opts.backend.parse().map_err(|e: String| anyhow!(e))
}

fn make_backend(opts: &GlobalOpts) -> Result<Box<dyn ExecutionBackend>> {
    Ok(match backend_kind(opts)? {
        BackendKind::Container => Box::new(ContainerBackend::new()),
        BackendKind::Process => Box::new(ProcessBackend::new(&opts.bin_path)),
    })
}

fn fetch_policy(kind: BackendKind) -> FetchPolicy {
    match kind {
        BackendKind::Container => FetchPolicy::PreferRemote,
        BackendKind::Process => FetchPolicy::LocalOnly,
    }
}

fn load(opts: &GlobalOpts) -> Result<Registry> {
    load_registry(&opts.registry)
        .with_context(|| format!("loading registry at {}", opts.registry.display()))
}

/// Resolves a pattern to exactly one solver; ambiguity lists candidates.
fn resolve_one(registry: &Registry, pattern: &str) -> Result<SolverSpec> {
    let mut specs = registry
        .resolve(pattern)
        .map_err(|e| anyhow!(e.to_string()))?;
    if specs.len() > 1 {
        let candidates: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
        return Err(anyhow!(
            "pattern {pattern:?} is ambiguous; candidates:\n  {}",
            candidates.join("\n  ")
        ));
    }
    Ok(specs.remove(0))
}

fn cmd_list(opts: &GlobalOpts, pattern: Option<&str>) -> Result<i32> {
    let registry = load(opts)?;
    let specs = match registry.resolve(pattern.unwrap_or("*")) {
        Ok(specs) => specs,
        Err(satex_core::registry::RegistryError::NoMatch { .. }) => return Ok(EXIT_DOMAIN_FAIL),
        Err(e) => return Err(e.into()),
    };
    let mut stdout = std::io::stdout().lock();
    for spec in &specs {
        writeln!(stdout, "{spec}")?;
    }
    Ok(EXIT_OK)
}

fn cmd_info(opts: &GlobalOpts, pattern: &str, json: bool) -> Result<i32> {
    let registry = load(opts)?;
    let spec = resolve_one(&registry, pattern)?;
    let info = registry.info(&spec)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&info)?);
        return Ok(EXIT_OK);
    }
    println!("solver:     {}", info.spec);
    println!("image:      {}", info.image);
    println!("set:        {}", info.set);
    match &info.era {
        Some(era) => {
            println!("builder:    {}", era.builder);
            println!("runtime:    {}", era.runtime);
        }
        None => println!("era:        (not configured)"),
    }
    println!("source:     {}", info.source_url);
    println!("sha256:     {}", info.source_sha256);
    println!(
        "kind:       {}",
        match info.source_kind {
            satex_core::archive::SourceKind::SourceArchive => "source-archive",
            satex_core::archive::SourceKind::BinaryArchive => "binary-archive",
        }
    );
    if let Some(doi) = &info.doi {
        println!("doi:        {doi}");
    }
    if let Some(cmd) = &info.run_with_proof {
        println!("run+proof:  {cmd}");
    }
    println!("run:        {}", info.run_without_proof);
    if !info.build_commands.is_empty() {
        println!("build:      {}", info.build_commands.join(" && "));
    }
    if let Some(artifact) = &info.artifact {
        println!("artifact:   {artifact}");
    }
    for (key, value) in &info.meta {
        println!("meta.{key}: {value}");
    }
    Ok(EXIT_OK)
}

fn cmd_run(
    opts: &GlobalOpts,
    pattern: &str,
    input: &Path,
    proof: Option<&Path>,
    timeout: f64,
) -> Result<i32> {
    if timeout <= 0.0 {
        return Err(anyhow!("--timeout must be positive"));
    }
    let registry = load(opts)?;
    let spec = resolve_one(&registry, pattern)?;
    let backend = make_backend(opts)?;
    let image = fetch_or_build(
        backend.as_ref(),
        &registry,
        &spec,
        fetch_policy(backend.kind()),
    )?;
    let outcome = backend.run_solver(&image, input, proof, &ResourceLimits::wall(timeout))?;

    let stdout_text = outcome.stdout_text().unwrap_or_default();
    print!("{stdout_text}");
    std::io::stdout().flush().ok();
    let stderr_text = outcome.stderr_text().unwrap_or_default();
    eprint!("{stderr_text}");

    let (claim, _model) =
        parse_solver_output(&stdout_text).unwrap_or((satex_core::cnf::Claim::Unknown, None));
    let normalized = normalize_outcome(outcome.status, claim, None);
    log::info!(
        "{spec}: status {} in {:.3}s (raw exit {})",
        normalized.status,
        outcome.wall_time,
        outcome.raw_exit_code
    );
    Ok(normalized.normalized_exit)
}

fn cmd_run_raw(opts: &GlobalOpts, pattern: &str, args: &[String]) -> Result<i32> {
    let registry = load(opts)?;
    let spec = resolve_one(&registry, pattern)?;
    let backend = make_backend(opts)?;
    let image = fetch_or_build(
        backend.as_ref(),
        &registry,
        &spec,
        fetch_policy(backend.kind()),
    )?;
    let code = backend.run_raw(&image, spec.name(), args)?;
    Ok(code)
}

fn cmd_build(opts: &GlobalOpts, pattern: &str) -> Result<i32> {
    let registry = load(opts)?;
    let specs = registry.resolve(pattern)?;
    let backend = make_backend(opts)?;
    if !backend.can_build() {
        return Err(anyhow!(
            "{} backend cannot build images; use --backend container",
            backend.kind()
        ));
    }

    // Distinct tags build concurrently; resolve() already deduplicated, so
    // no tag is ever built twice in one invocation.
    let jobs = opts.jobs.unwrap_or(1).max(1).min(specs.len().max(1));
    let queue: std::sync::Mutex<std::collections::VecDeque<usize>> =
        std::sync::Mutex::new((0..specs.len()).collect());
    let results: Vec<std::sync::Mutex<Option<Result<String>>>> =
        specs.iter().map(|_| std::sync::Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let Some(idx) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let spec = &specs[idx];
                let entry = registry.entry(spec).expect("resolved spec has an entry");
                let tag = image_name(spec);
                let built = era_for(&registry, spec)
                    .map_err(anyhow::Error::from)
                    .and_then(|era| Ok(generate_build_recipe(entry, &era)?))
                    .and_then(|recipe| Ok(backend.build_image(&recipe, &tag)?))
                    .map(|image| image.0);
                *results[idx].lock().unwrap() = Some(built);
            });
        }
    });

    let mut failures = 0usize;
    for (spec, slot) in specs.iter().zip(&results) {
        match slot.lock().unwrap().take().expect("every build ran") {
            Ok(image_id) => println!("{spec}: ok ({image_id})"),
            Err(e) => {
                failures += 1;
                println!("{spec}: failed");
                eprintln!("satex: build of {spec} failed: {e:#}");
            }
        }
    }
    println!("built {}/{} images", specs.len() - failures, specs.len());
    Ok(if failures == 0 {
        EXIT_OK
    } else {
        EXIT_DOMAIN_FAIL
    })
}

fn cmd_extract(opts: &GlobalOpts, pattern: &str, dest: &Path) -> Result<i32> {
    let registry = load(opts)?;
    let spec = resolve_one(&registry, pattern)?;
    let backend = make_backend(opts)?;
    let files = extract_binary(backend.as_ref(), &registry, &spec, dest)?;
    for file in files {
        println!("{}", file.display());
    }
    Ok(EXIT_OK)
}

/// On-disk schema of `satex bench` campaign configs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    /// Patterns resolved against the registry.
    solvers: Vec<String>,
    /// Instance files.
    #[serde(default)]
    instances: Vec<PathBuf>,
    /// Directory scanned for *.cnf and *.cnf.gz, sorted.
    #[serde(default)]
    instance_dir: Option<PathBuf>,
    wall_timeout: f64,
    #[serde(default)]
    memory_limit_bytes: Option<u64>,
    #[serde(default)]
    cpu_count: Option<u32>,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
    #[serde(default)]
    verify_models: bool,
    #[serde(default)]
    check_proofs: bool,
    /// Where the line-delimited results stream to.
    results: PathBuf,
    #[serde(default)]
    summary_csv: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    1
}

fn cmd_bench(opts: &GlobalOpts, config_path: &Path) -> Result<i32> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let config: BenchConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let registry = load(opts)?;

    let mut solvers: Vec<SolverSpec> = Vec::new();
    for pattern in &config.solvers {
        solvers.extend(registry.resolve(pattern)?);
    }
    solvers.sort();
    solvers.dedup();

    let mut instances = config.instances.clone();
    if let Some(dir) = &config.instance_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned());
                name.is_some_and(|n| n.ends_with(".cnf") || n.ends_with(".cnf.gz"))
            })
            .collect();
        found.sort();
        instances.extend(found);
    }
    if instances.is_empty() {
        return Err(anyhow!("campaign has no instances"));
    }

    let limits = ResourceLimits {
        wall_timeout: config.wall_timeout,
        memory_limit: config.memory_limit_bytes,
        cpu_count: config.cpu_count,
    };
    let matrix = JobMatrix {
        solvers,
        instances,
        limits,
        parallelism: opts.jobs.unwrap_or(config.parallelism),
        verify_models: config.verify_models,
        check_proofs: config.check_proofs,
    };

    let backend = make_backend(opts)?;
    let table = run_matrix(&registry, &matrix, backend.as_ref(), &config.results)?;

    let summaries = summarize(&table);
    print!("{}", render_summary_text(&summaries));
    if let Some(csv_path) = &config.summary_csv {
        fs::write(csv_path, render_summary_csv(&summaries))
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }

    let disagreements = detect_disagreements(&table);
    if !disagreements.is_empty() {
        println!();
        println!("DISAGREEMENTS:");
        for d in &disagreements {
            println!("  {}", d.instance);
            for row in &d.rows {
                println!(
                    "    {} claims {:?} (final status {})",
                    row.solver, row.claim, row.status
                );
            }
        }
    }
    log::info!("results written to {}", config.results.display());
    Ok(EXIT_OK)
}

fn cmd_fetch(opts: &GlobalOpts, pattern: &str, manifest: Option<&Path>) -> Result<i32> {
    let registry = load(opts)?;
    let specs = registry.resolve(pattern)?;
    let cache = Cache::open(&opts.cache)?;
    let transport = HttpTransport;

    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut failures = 0usize;
    for spec in &specs {
        let entry = registry.entry(spec).expect("resolved spec has an entry");
        match cache.fetch(&entry.source, &transport) {
            Ok(path) => {
                println!("{spec}: {}", path.display());
                let inputs_digest = era_for(&registry, spec)
                    .ok()
                    .and_then(|era| generate_build_recipe(entry, &era).ok())
                    .map(|r| r.inputs_digest);
                let mut manifest_entry = ManifestEntry::new(spec.to_string(), &entry.source, &path);
                manifest_entry.inputs_digest = inputs_digest;
                entries.push(manifest_entry);
            }
            Err(e) => {
                failures += 1;
                println!("{spec}: failed");
                eprintln!("satex: fetch of {spec} failed: {e}");
            }
        }
    }

    let manifest_path = manifest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| opts.cache.join("manifest.json"));
    satex_core::archive::write_manifest(&entries, &manifest_path)?;
    log::info!("manifest written to {}", manifest_path.display());
    Ok(if failures == 0 {
        EXIT_OK
    } else {
        EXIT_DOMAIN_FAIL
    })
}

fn cmd_check_proof(opts: &GlobalOpts, cnf: &Path, proof: &Path) -> Result<i32> {
    let bytes = fs::read(cnf).with_context(|| format!("reading {}", cnf.display()))?;
    let dimacs_opts = DimacsOptions {
        strict_header: opts.strict_dimacs,
    };
    let parsed = parse_dimacs_with(&bytes, &dimacs_opts)
        .with_context(|| format!("parsing {}", cnf.display()))?;
    for warning in &parsed.warnings {
        eprintln!("satex: {}: {warning}", cnf.display());
    }
    let proof_text =
        fs::read_to_string(proof).with_context(|| format!("reading {}", proof.display()))?;
    let log = parse_drup(&proof_text).with_context(|| format!("parsing {}", proof.display()))?;

    let verdict = check_proof(&parsed.formula, &log);
    for warning in &verdict.warnings {
        eprintln!("satex: {warning}");
    }
    match verdict.verdict {
        Verdict::Verified => {
            println!("VERIFIED ({} steps)", verdict.steps_checked);
            Ok(EXIT_OK)
        }
        Verdict::Invalid { step, reason } => {
            println!("INVALID at step {step}: {reason}");
            Ok(EXIT_DOMAIN_FAIL)
        }
        Verdict::Incomplete => {
            println!("INCOMPLETE ({} steps checked)", verdict.steps_checked);
            Ok(EXIT_DOMAIN_FAIL)
        }
    }
}

fn cmd_config(opts: &GlobalOpts) -> Result<i32> {
    println!("registry:      {}", opts.registry.display());
    println!("backend:       {}", backend_kind(opts)?);
    println!("bin-path:      {}", opts.bin_path.display());
    println!("cache:         {}", opts.cache.display());
    println!(
        "jobs:          {}",
        opts.jobs
            .map_or("(per command)".to_string(), |j| j.to_string())
    );
    println!("strict-dimacs: {}", opts.strict_dimacs);
    println!("verbose:       {}", opts.verbose);
    println!("color:         {}", !opts.no_color);
    Ok(EXIT_OK)
}
