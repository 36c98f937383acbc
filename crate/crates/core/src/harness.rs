//! Campaign harness: runs a solver × instance matrix under limits,
//! verifies claims, flags cross-solver disagreements, and renders
//! summaries.
//!
//! Results stream to disk as one JSON record per line while the campaign
//! runs; a crash loses at most the in-flight rows. A worker pool bounded by
//! the matrix's parallelism executes the pairs; the writer is the only
//! thread touching the results file.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{
    normalize_outcome, parse_dimacs, parse_solver_output, verify_model, Claim, CnfFormula,
    Evaluation, Status,
};
use crate::proof::{check_proof, parse_drup, Verdict};
use crate::registry::{Registry, SolverSpec};
use crate::runtime::{
    fetch_or_build, ExecutionBackend, FetchPolicy, ImageId, ResourceLimits, RuntimeError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("matrix parallelism must be at least 1")]
    BadParallelism,
    #[error("wall timeout must be positive, got {value}")]
    BadTimeout { value: f64 },
    #[error("unresolvable solver {spec}")]
    UnresolvableSpec { spec: String },
    #[error("instance file missing: {path}")]
    InstanceMissing { path: PathBuf },
    #[error("results file {path} is corrupt at line {line}: {message}")]
    ResultsCorrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// What to run: every solver against every instance.
#[derive(Debug, Clone)]
pub struct JobMatrix {
    pub solvers: Vec<SolverSpec>,
    pub instances: Vec<PathBuf>,
    pub limits: ResourceLimits,
    pub parallelism: usize,
    pub verify_models: bool,
    pub check_proofs: bool,
}

/// One completed (solver, instance) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub solver: String,
    pub instance: String,
    /// What the solver's stdout claimed, before any verification.
    pub claim: Claim,
    pub status: Status,
    pub normalized_exit: i32,
    pub raw_exit_code: i32,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_verified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof_verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMeta {
    pub limits: ResourceLimits,
    pub backend: String,
    pub registry_digest: String,
    pub started_at_epoch: u64,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum Record {
    Campaign(CampaignMeta),
    Row(ResultRow),
}

/// All rows of a finished (or reloaded) campaign, sorted by
/// (solver, instance).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub meta: CampaignMeta,
    pub rows: Vec<ResultRow>,
}

/// Runs the whole matrix. Every pair is executed exactly once; per-pair
/// failures become crash rows rather than aborting the campaign. Completed
/// rows are appended to `results_path` as they arrive.
pub fn run_matrix(
    registry: &Registry,
    matrix: &JobMatrix,
    backend: &dyn ExecutionBackend,
    results_path: &Path,
) -> Result<ResultTable, HarnessError> {
    if matrix.parallelism < 1 {
        return Err(HarnessError::BadParallelism);
    }
    let timeout = matrix.limits.wall_timeout;
    if timeout.is_nan() || timeout <= 0.0 {
        return Err(HarnessError::BadTimeout { value: timeout });
    }
    for spec in &matrix.solvers {
        if registry.entry(spec).is_none() {
            return Err(HarnessError::UnresolvableSpec {
                spec: spec.to_string(),
            });
        }
    }
    for instance in &matrix.instances {
        if !instance.is_file() {
            return Err(HarnessError::InstanceMissing {
                path: instance.clone(),
            });
        }
    }

    // Images are resolved once per solver; a missing image turns every row
    // of that solver into a crash row instead of killing the campaign.
    let mut images: HashMap<SolverSpec, Result<ImageId, String>> = HashMap::new();
    for spec in &matrix.solvers {
        let resolved = fetch_or_build(backend, registry, spec, FetchPolicy::LocalOnly)
            .map_err(|e| e.to_string());
        images.insert(spec.clone(), resolved);
    }

    // Instances are parsed once when claims need verification.
    let mut formulas: HashMap<PathBuf, Option<CnfFormula>> = HashMap::new();
    if matrix.verify_models {
        for instance in &matrix.instances {
            let parsed = fs::read(instance)
                .ok()
                .and_then(|bytes| parse_dimacs(&bytes).ok());
            if parsed.is_none() {
                log::warn!(
                    "cannot parse {} for model verification; claims on it go unverified",
                    instance.display()
                );
            }
            formulas.insert(instance.clone(), parsed);
        }
    }

    let meta = CampaignMeta {
        limits: matrix.limits.clone(),
        backend: backend.kind().to_string(),
        registry_digest: registry.digest(),
        started_at_epoch: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        parallelism: matrix.parallelism,
    };

    let mut writer = fs::File::create(results_path).map_err(|source| HarnessError::Io {
        path: results_path.to_path_buf(),
        source,
    })?;
    append_record(&mut writer, results_path, &Record::Campaign(meta.clone()))?;

    let queue: Mutex<VecDeque<(SolverSpec, PathBuf)>> = Mutex::new(
        matrix
            .solvers
            .iter()
            .flat_map(|s| matrix.instances.iter().map(move |i| (s.clone(), i.clone())))
            .collect(),
    );
    let expected = matrix.solvers.len() * matrix.instances.len();
    let (tx, rx) = mpsc::channel::<ResultRow>();

    let mut rows: Vec<ResultRow> = Vec::with_capacity(expected);
    std::thread::scope(|scope| -> Result<(), HarnessError> {
        for _ in 0..matrix.parallelism {
            let tx = tx.clone();
            let queue = &queue;
            let images = &images;
            let formulas = &formulas;
            scope.spawn(move || loop {
                let job = queue.lock().unwrap().pop_front();
                let Some((spec, instance)) = job else { break };
                let row = run_one(backend, matrix, images, formulas, &spec, &instance);
                if tx.send(row).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            append_record(&mut writer, results_path, &Record::Row(row.clone()))?;
            rows.push(row);
        }
        Ok(())
    })?;

    debug_assert_eq!(rows.len(), expected);
    rows.sort_by(|a, b| (&a.solver, &a.instance).cmp(&(&b.solver, &b.instance)));
    Ok(ResultTable { meta, rows })
}

fn append_record(writer: &mut fs::File, path: &Path, record: &Record) -> Result<(), HarnessError> {
    let to_io = |source: std::io::Error| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(writer, "{line}").map_err(to_io)?;
    writer.flush().map_err(to_io)
}

fn crash_row(spec: &SolverSpec, instance: &Path, detail: String) -> ResultRow {
    ResultRow {
        solver: spec.to_string(),
        instance: instance.display().to_string(),
        claim: Claim::Unknown,
        status: Status::CrashOrError,
        normalized_exit: 1,
        raw_exit_code: -1,
        wall_time: 0.0,
        model_verified: None,
        proof_verdict: None,
        detail: Some(detail),
    }
}

fn run_one(
    backend: &dyn ExecutionBackend,
    matrix: &JobMatrix,
    images: &HashMap<SolverSpec, Result<ImageId, String>>,
    formulas: &HashMap<PathBuf, Option<CnfFormula>>,
    spec: &SolverSpec,
    instance: &Path,
) -> ResultRow {
    let image = match images.get(spec) {
        Some(Ok(image)) => image,
        Some(Err(reason)) => return crash_row(spec, instance, reason.clone()),
        None => return crash_row(spec, instance, "image not resolved".into()),
    };

    let proof_dir = if matrix.check_proofs {
        match tempfile::Builder::new()
            .prefix("satex-proof-")
            .tempdir_in(crate::runtime::base_tmpdir())
        {
            Ok(dir) => Some(dir),
            Err(e) => return crash_row(spec, instance, format!("proof scratch dir: {e}")),
        }
    } else {
        None
    };
    let proof_path = proof_dir.as_ref().map(|d| d.path().join("proof.drup"));

    let outcome = match backend.run_solver(image, instance, proof_path.as_deref(), &matrix.limits) {
        Ok(outcome) => outcome,
        Err(RuntimeError::SpawnFailure { program, source }) => {
            return crash_row(spec, instance, format!("spawn {program}: {source}"))
        }
        Err(e) => return crash_row(spec, instance, e.to_string()),
    };

    let stdout = outcome.stdout_text().unwrap_or_default();
    let (claim, model) = match parse_solver_output(&stdout) {
        Ok(parsed) => parsed,
        Err(e) => {
            let mut row = crash_row(spec, instance, format!("unparseable output: {e}"));
            row.raw_exit_code = outcome.raw_exit_code;
            row.wall_time = outcome.wall_time;
            return row;
        }
    };

    let verification: Option<Evaluation> = if matrix.verify_models && claim == Claim::Sat {
        formulas.get(&instance.to_path_buf()).and_then(|f| {
            f.as_ref()
                .map(|formula| verify_model(formula, &model.clone().unwrap_or_default()))
        })
    } else {
        None
    };
    let model_verified = verification.map(|v| v == Evaluation::Satisfied);

    let proof_verdict = if matrix.check_proofs && claim == Claim::Unsat {
        check_produced_proof(formulas, instance, proof_path.as_deref())
    } else {
        None
    };

    let normalized = normalize_outcome(outcome.status, claim, verification);
    ResultRow {
        solver: spec.to_string(),
        instance: instance.display().to_string(),
        claim,
        status: normalized.status,
        normalized_exit: normalized.normalized_exit,
        raw_exit_code: outcome.raw_exit_code,
        wall_time: outcome.wall_time,
        model_verified,
        proof_verdict,
        detail: None,
    }
}

fn check_produced_proof(
    formulas: &HashMap<PathBuf, Option<CnfFormula>>,
    instance: &Path,
    proof_path: Option<&Path>,
) -> Option<String> {
    let path = proof_path?;
    let text = fs::read_to_string(path).ok()?;
    if text.trim().is_empty() {
        return None;
    }
    // The formula cache is only populated when verify_models is on; parse
    // on demand otherwise.
    let formula = match formulas.get(&instance.to_path_buf()) {
        Some(Some(f)) => f.clone(),
        Some(None) => return Some("unchecked: instance unparseable".into()),
        None => match fs::read(instance).ok().and_then(|b| parse_dimacs(&b).ok()) {
            Some(f) => f,
            None => return Some("unchecked: instance unparseable".into()),
        },
    };
    let verdict = match parse_drup(&text) {
        Ok(log) => check_proof(&formula, &log).verdict,
        Err(e) => return Some(format!("malformed: {e}")),
    };
    Some(match verdict {
        Verdict::Verified => "verified".to_string(),
        Verdict::Invalid { step, .. } => format!("invalid at step {step}"),
        Verdict::Incomplete => "incomplete".to_string(),
    })
}

/// A genuine sat/unsat conflict on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement {
    pub instance: String,
    /// The rows claiming sat or unsat on that instance.
    pub rows: Vec<ResultRow>,
}

/// Flags every instance where one solver claimed satisfiable and another
/// claimed unsatisfiable. Claims count whether or not they survived
/// verification; timeouts and unknowns are not claims.
pub fn detect_disagreements(table: &ResultTable) -> Vec<Disagreement> {
    let mut by_instance: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for row in &table.rows {
        by_instance.entry(&row.instance).or_default().push(row);
    }
    let mut flagged = Vec::new();
    for (instance, rows) in by_instance {
        let any_sat = rows.iter().any(|r| r.claim == Claim::Sat);
        let any_unsat = rows.iter().any(|r| r.claim == Claim::Unsat);
        if any_sat && any_unsat {
            flagged.push(Disagreement {
                instance: instance.to_string(),
                rows: rows
                    .into_iter()
                    .filter(|r| matches!(r.claim, Claim::Sat | Claim::Unsat))
                    .cloned()
                    .collect(),
            });
        }
    }
    flagged
}

/// Per-solver aggregate over a finished table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub solver: String,
    pub solved: usize,
    pub sat: usize,
    pub unsat: usize,
    /// Sum over instances of wall time when solved, twice the timeout
    /// otherwise.
    pub par2: f64,
    pub mean_time_solved: f64,
}

/// Summarizes a table per solver, ordered by solved count (descending),
/// then PAR-2 (ascending), then name.
pub fn summarize(table: &ResultTable) -> Vec<SolverSummary> {
    let timeout = table.meta.limits.wall_timeout;
    let mut by_solver: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for row in &table.rows {
        by_solver.entry(&row.solver).or_default().push(row);
    }
    let mut summaries: Vec<SolverSummary> = by_solver
        .into_iter()
        .map(|(solver, rows)| {
            let mut solved = 0usize;
            let mut sat = 0usize;
            let mut unsat = 0usize;
            let mut par2 = 0.0f64;
            let mut time_solved = 0.0f64;
            for row in rows {
                match row.status {
                    Status::Sat => {
                        solved += 1;
                        sat += 1;
                        par2 += row.wall_time;
                        time_solved += row.wall_time;
                    }
                    Status::Unsat => {
                        solved += 1;
                        unsat += 1;
                        par2 += row.wall_time;
                        time_solved += row.wall_time;
                    }
                    _ => par2 += 2.0 * timeout,
                }
            }
            let mean_time_solved = if solved > 0 {
                time_solved / solved as f64
            } else {
                0.0
            };
            SolverSummary {
                solver: solver.to_string(),
                solved,
                sat,
                unsat,
                par2,
                mean_time_solved,
            }
        })
        .collect();
    summaries.sort_by(|a, b| {
        b.solved
            .cmp(&a.solved)
            .then(a.par2.total_cmp(&b.par2))
            .then(a.solver.cmp(&b.solver))
    });
    summaries
}

/// Plain-text table of a summary.
pub fn render_summary_text(summaries: &[SolverSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>6} {:>5} {:>6} {:>10} {:>10}\n",
        "solver", "solved", "sat", "unsat", "par2", "mean-time"
    ));
    for s in summaries {
        out.push_str(&format!(
            "{:<24} {:>6} {:>5} {:>6} {:>10.2} {:>10.3}\n",
            s.solver, s.solved, s.sat, s.unsat, s.par2, s.mean_time_solved
        ));
    }
    out
}

/// CSV rendering of a summary.
pub fn render_summary_csv(summaries: &[SolverSummary]) -> String {
    let mut out = String::from("solver,solved,sat,unsat,par2,mean_time_solved\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            s.solver, s.solved, s.sat, s.unsat, s.par2, s.mean_time_solved
        ));
    }
    out
}

/// Reloads a results file. Completed rows always load; a truncated final
/// line (the in-flight row of a crashed campaign) is ignored.
pub fn load_results(path: &Path) -> Result<ResultTable, HarnessError> {
    let file = fs::File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut meta: Option<CampaignMeta> = None;
    let mut rows = Vec::new();
    let lines: Vec<String> =
        reader
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|source| HarnessError::Io {
                path: path.to_path_buf(),
                source,
            })?;
    let total = lines.len();
    for (idx, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Record>(&line) {
            Ok(Record::Campaign(m)) => meta = Some(m),
            Ok(Record::Row(row)) => rows.push(row),
            Err(e) => {
                if idx + 1 == total {
                    break;
                }
                return Err(HarnessError::ResultsCorrupt {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                });
            }
        }
    }
    let meta = meta.ok_or_else(|| HarnessError::ResultsCorrupt {
        path: path.to_path_buf(),
        line: 1,
        message: "missing campaign record".into(),
    })?;
    rows.sort_by(|a, b| (&a.solver, &a.instance).cmp(&(&b.solver, &b.instance)));
    Ok(ResultTable { meta, rows })
}
