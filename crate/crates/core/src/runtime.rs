//! Execution backends.
//!
//! The container backend drives the container runtime through its standard
//! command-line interface (`build`, `run`, `pull`, `create`/`cp`), so any
//! compatible runtime works and no daemon API client is needed. The process
//! backend runs pre-built local executables directly and exists so the whole
//! run/normalize/verify pipeline is testable without containers.
//!
//! Wall-clock timeouts are enforced host-side for both backends: the child
//! is killed once the deadline passes, whatever the backend itself supports.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cnf::Status;
use crate::recipes::{self, BuildRecipe, ContextFile, RecipeError, WRAPPER_NAME};
use crate::registry::{image_name, Registry, SolverSpec};

/// Environment variable selecting the backend (`container` or `process`).
pub const BACKEND_ENV: &str = "SATHERITAGE_BACKEND";
/// Environment variable overriding where run scratch directories live.
pub const TMPDIR_ENV: &str = "SATHERITAGE_TMPDIR";
/// Environment variable overriding the container runtime executable.
pub const RUNTIME_CLI_ENV: &str = "SATHERITAGE_DOCKER";

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("{backend} backend cannot {operation}")]
    BackendUnavailable {
        backend: BackendKind,
        operation: &'static str,
    },
    #[error("build of {tag} failed:\n{log}")]
    BuildFailed { tag: String, log: String },
    #[error("no usable image for {spec}: {reason}")]
    ImageUnavailable { spec: String, reason: String },
    #[error("input file missing: {path}")]
    InputMissing { path: PathBuf },
    #[error("input {path} is unreadable: {reason}")]
    InputUnreadable { path: PathBuf, reason: String },
    #[error("failed to spawn {program}: {source}")]
    SpawnFailure {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("nothing to extract from {image}: {reason}")]
    NothingToExtract { image: String, reason: String },
    #[error("unknown solver {spec}")]
    UnknownSpec { spec: String },
    #[error(transparent)]
    Recipe(#[from] RecipeError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Container,
    Process,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Container => "container",
            BackendKind::Process => "process",
        })
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "container" => Ok(BackendKind::Container),
            "process" => Ok(BackendKind::Process),
            other => Err(format!(
                "unknown backend {other:?}: expected container or process"
            )),
        }
    }
}

/// Per-run resource limits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResourceLimits {
    /// Wall-clock timeout in seconds; must be positive.
    pub wall_timeout: f64,
    /// Address-space limit in bytes; off by default.
    pub memory_limit: Option<u64>,
    pub cpu_count: Option<u32>,
}

impl ResourceLimits {
    pub fn wall(seconds: f64) -> Self {
        assert!(seconds > 0.0, "wall_timeout must be positive");
        ResourceLimits {
            wall_timeout: seconds,
            memory_limit: None,
            cpu_count: None,
        }
    }
}

/// Identifier of a runnable image: a content-addressed image id for the
/// container backend, an executable path for the process backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageId(pub String);

/// Raw result of one solver execution. The status here is only `Unknown`
/// or `Timeout`; interpretation of the solver's own claim happens in
/// `cnf::normalize_outcome`.
#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub raw_exit_code: i32,
    pub wall_time: f64,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
    pub proof_path: Option<PathBuf>,
    // Owns the scratch directory; files vanish when the outcome is dropped.
    _work_dir: Option<tempfile::TempDir>,
}

impl RunOutcome {
    pub fn stdout_text(&self) -> std::io::Result<String> {
        fs::read_to_string(&self.stdout_path)
    }

    pub fn stderr_text(&self) -> std::io::Result<String> {
        fs::read_to_string(&self.stderr_path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchPolicy {
    PreferRemote,
    LocalOnly,
}

/// A way to obtain and execute solver images.
pub trait ExecutionBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn can_build(&self) -> bool;
    fn can_extract(&self) -> bool;

    /// Image already present locally, if any.
    fn local_image(&self, spec: &SolverSpec) -> Result<Option<ImageId>, RuntimeError>;

    /// Pulls the image from the remote repository.
    fn pull_image(&self, spec: &SolverSpec) -> Result<ImageId, RuntimeError>;

    /// Builds an image from a recipe and tags it.
    fn build_image(&self, recipe: &BuildRecipe, tag: &str) -> Result<ImageId, RuntimeError>;

    /// Runs one solver invocation under the unified contract: DIMACS input,
    /// optional proof output, wall-clock limit enforced by the host.
    fn run_solver(
        &self,
        image: &ImageId,
        input: &Path,
        proof_out: Option<&Path>,
        limits: &ResourceLimits,
    ) -> Result<RunOutcome, RuntimeError>;

    /// Runs the solver binary with raw arguments, bypassing the wrapper.
    /// Stdio is inherited; returns the child's own exit code.
    fn run_raw(
        &self,
        image: &ImageId,
        solver_name: &str,
        args: &[String],
    ) -> Result<i32, RuntimeError>;

    /// Copies the named files out of the image's /usr/local/bin into dest.
    fn extract(
        &self,
        image: &ImageId,
        names: &[String],
        dest: &Path,
    ) -> Result<Vec<PathBuf>, RuntimeError>;
}

/// Returns a usable image for the solver. The local store is consulted
/// first; `PreferRemote` then tries a pull before falling back to a local
/// build, while `LocalOnly` never touches the network.
pub fn fetch_or_build(
    backend: &dyn ExecutionBackend,
    registry: &Registry,
    spec: &SolverSpec,
    policy: FetchPolicy,
) -> Result<ImageId, RuntimeError> {
    let entry = registry
        .entry(spec)
        .ok_or_else(|| RuntimeError::UnknownSpec {
            spec: spec.to_string(),
        })?;
    if let Some(image) = backend.local_image(spec)? {
        return Ok(image);
    }
    let mut reasons: Vec<String> = vec!["not present locally".into()];
    if policy == FetchPolicy::PreferRemote {
        match backend.pull_image(spec) {
            Ok(image) => return Ok(image),
            Err(err) => reasons.push(format!("pull failed: {err}")),
        }
    }
    if backend.can_build() {
        let era = recipes::era_for(registry, spec)?;
        let recipe = recipes::generate_build_recipe(entry, &era)?;
        return backend.build_image(&recipe, &image_name(spec));
    }
    reasons.push(format!("{} backend cannot build", backend.kind()));
    Err(RuntimeError::ImageUnavailable {
        spec: spec.to_string(),
        reason: reasons.join("; "),
    })
}

/// Copies the solver executable and wrapper out of an image into `dest`,
/// alongside a small provenance stub naming the image id and the recipe
/// inputs digest.
pub fn extract_binary(
    backend: &dyn ExecutionBackend,
    registry: &Registry,
    spec: &SolverSpec,
    dest: &Path,
) -> Result<Vec<PathBuf>, RuntimeError> {
    if !backend.can_extract() {
        return Err(RuntimeError::BackendUnavailable {
            backend: backend.kind(),
            operation: "extract binaries",
        });
    }
    let entry = registry
        .entry(spec)
        .ok_or_else(|| RuntimeError::UnknownSpec {
            spec: spec.to_string(),
        })?;
    let image = backend
        .local_image(spec)?
        .ok_or_else(|| RuntimeError::ImageUnavailable {
            spec: spec.to_string(),
            reason: "image not present locally; build or fetch it first".into(),
        })?;

    fs::create_dir_all(dest).map_err(|source| RuntimeError::Io {
        path: dest.to_path_buf(),
        source,
    })?;
    // Probe writability before extracting anything.
    let probe = dest.join(".satex-write-probe");
    fs::write(&probe, b"").map_err(|source| RuntimeError::Io {
        path: dest.to_path_buf(),
        source,
    })?;
    let _ = fs::remove_file(&probe);

    let names = vec![spec.name().to_string(), WRAPPER_NAME.to_string()];
    let mut files = backend.extract(&image, &names, dest)?;

    let inputs_digest = recipes::era_for(registry, spec)
        .ok()
        .and_then(|era| recipes::generate_build_recipe(entry, &era).ok())
        .map(|r| r.inputs_digest);
    let stub = serde_json::json!({
        "spec": spec.to_string(),
        "image_id": image.0,
        "inputs_digest": inputs_digest,
    });
    let stub_path = dest.join(format!("{}.provenance.json", spec.name()));
    let mut text = serde_json::to_string_pretty(&stub).expect("stub serializes");
    text.push('\n');
    fs::write(&stub_path, text).map_err(|source| RuntimeError::Io {
        path: stub_path.clone(),
        source,
    })?;
    files.push(stub_path);
    Ok(files)
}

/// Scratch-space root honoring the override environment variable.
pub fn base_tmpdir() -> PathBuf {
    std::env::var_os(TMPDIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

fn new_workdir() -> Result<tempfile::TempDir, RuntimeError> {
    let base = base_tmpdir();
    fs::create_dir_all(&base).map_err(|source| RuntimeError::Io {
        path: base.clone(),
        source,
    })?;
    tempfile::Builder::new()
        .prefix("satex-run-")
        .tempdir_in(&base)
        .map_err(|source| RuntimeError::Io { path: base, source })
}

#[cfg(unix)]
fn exit_code(status: std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status
        .code()
        .or_else(|| status.signal().map(|s| 128 + s))
        .unwrap_or(1)
}

#[cfg(not(unix))]
fn exit_code(status: std::process::ExitStatus) -> i32 {
    status.code().unwrap_or(1)
}

/// Waits for the child with a deadline; on expiry `kill` is invoked and the
/// child reaped. Returns (exit code, wall seconds, timed out).
fn supervise(
    child: &mut Child,
    limits: &ResourceLimits,
    kill: impl Fn(&mut Child),
) -> std::io::Result<(i32, f64, bool)> {
    let start = Instant::now();
    let deadline = Duration::from_secs_f64(limits.wall_timeout);
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok((exit_code(status), start.elapsed().as_secs_f64(), false));
        }
        if start.elapsed() >= deadline {
            kill(child);
            let status = child.wait()?;
            return Ok((exit_code(status), start.elapsed().as_secs_f64(), true));
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

// ---------------------------------------------------------------------------
// Process backend.

/// Runs pre-built local executables following the wrapper calling
/// convention: `exe <input.cnf> [proof-out]`. The executable for
/// `name:version` is looked up as `<bin_root>/<name>-<version>`.
pub struct ProcessBackend {
    bin_root: PathBuf,
}

impl ProcessBackend {
    pub fn new(bin_root: impl Into<PathBuf>) -> Self {
        ProcessBackend {
            bin_root: bin_root.into(),
        }
    }

    pub fn executable_for(&self, spec: &SolverSpec) -> PathBuf {
        self.bin_root
            .join(format!("{}-{}", spec.name(), spec.version()))
    }

    /// Mirrors the wrapper's gzip transparency: a `.gz` input is inflated
    /// into the scratch directory before the executable sees it.
    fn materialize_input(&self, input: &Path, work: &Path) -> Result<PathBuf, RuntimeError> {
        if input.extension().is_some_and(|e| e == "gz") {
            let bytes = fs::read(input).map_err(|source| RuntimeError::Io {
                path: input.to_path_buf(),
                source,
            })?;
            let mut decoder = flate2::read::GzDecoder::new(bytes.as_slice());
            let mut plain = Vec::new();
            decoder
                .read_to_end(&mut plain)
                .map_err(|e| RuntimeError::InputUnreadable {
                    path: input.to_path_buf(),
                    reason: format!("gzip: {e}"),
                })?;
            let target = work.join("input.cnf");
            fs::write(&target, plain).map_err(|source| RuntimeError::Io {
                path: target.clone(),
                source,
            })?;
            Ok(target)
        } else {
            Ok(input.to_path_buf())
        }
    }
}

#[cfg(unix)]
fn kill_process_group(child: &mut Child) {
    let pid = child.id() as i32;
    unsafe {
        // The child was started in its own process group; negative pid
        // addresses the whole group so no descendant survives.
        libc::kill(-pid, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_process_group(child: &mut Child) {
    let _ = child.kill();
}

#[cfg(unix)]
fn configure_child(cmd: &mut Command, limits: &ResourceLimits) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
    if let Some(bytes) = limits.memory_limit {
        unsafe {
            cmd.pre_exec(move || {
                let limit = libc::rlimit {
                    rlim_cur: bytes,
                    rlim_max: bytes,
                };
                if libc::setrlimit(libc::RLIMIT_AS, &limit) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
                Ok(())
            });
        }
    }
}

#[cfg(not(unix))]
fn configure_child(_cmd: &mut Command, _limits: &ResourceLimits) {}

impl ExecutionBackend for ProcessBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Process
    }

    fn can_build(&self) -> bool {
        false
    }

    fn can_extract(&self) -> bool {
        false
    }

    fn local_image(&self, spec: &SolverSpec) -> Result<Option<ImageId>, RuntimeError> {
        let path = self.executable_for(spec);
        Ok(path.is_file().then(|| ImageId(path.display().to_string())))
    }

    fn pull_image(&self, _spec: &SolverSpec) -> Result<ImageId, RuntimeError> {
        Err(RuntimeError::BackendUnavailable {
            backend: BackendKind::Process,
            operation: "pull images",
        })
    }

    fn build_image(&self, _recipe: &BuildRecipe, _tag: &str) -> Result<ImageId, RuntimeError> {
        Err(RuntimeError::BackendUnavailable {
            backend: BackendKind::Process,
            operation: "build images",
        })
    }

    fn run_solver(
        &self,
        image: &ImageId,
        input: &Path,
        proof_out: Option<&Path>,
        limits: &ResourceLimits,
    ) -> Result<RunOutcome, RuntimeError> {
        if !input.is_file() {
            return Err(RuntimeError::InputMissing {
                path: input.to_path_buf(),
            });
        }
        let work = new_workdir()?;
        let effective_input = self.materialize_input(input, work.path())?;

        let stdout_path = work.path().join("stdout.log");
        let stderr_path = work.path().join("stderr.log");
        let stdout_file = fs::File::create(&stdout_path).map_err(|source| RuntimeError::Io {
            path: stdout_path.clone(),
            source,
        })?;
        let stderr_file = fs::File::create(&stderr_path).map_err(|source| RuntimeError::Io {
            path: stderr_path.clone(),
            source,
        })?;

        let mut cmd = Command::new(&image.0);
        cmd.arg(&effective_input);
        if let Some(proof) = proof_out {
            cmd.arg(proof);
        }
        cmd.stdin(Stdio::null())
            .stdout(Stdio::from(stdout_file))
            .stderr(Stdio::from(stderr_file));
        configure_child(&mut cmd, limits);

        let mut child = cmd.spawn().map_err(|source| RuntimeError::SpawnFailure {
            program: image.0.clone(),
            source,
        })?;
        let (raw_exit_code, wall_time, timed_out) =
            supervise(&mut child, limits, kill_process_group).map_err(|source| {
                RuntimeError::SpawnFailure {
                    program: image.0.clone(),
                    source,
                }
            })?;

        Ok(RunOutcome {
            status: if timed_out {
                Status::Timeout
            } else {
                Status::Unknown
            },
            raw_exit_code,
            wall_time,
            stdout_path,
            stderr_path,
            proof_path: proof_out.map(Path::to_path_buf),
            _work_dir: Some(work),
        })
    }

    fn run_raw(
        &self,
        image: &ImageId,
        _solver_name: &str,
        args: &[String],
    ) -> Result<i32, RuntimeError> {
        let status = Command::new(&image.0)
            .args(args)
            .status()
            .map_err(|source| RuntimeError::SpawnFailure {
                program: image.0.clone(),
                source,
            })?;
        Ok(exit_code(status))
    }

    fn extract(
        &self,
        _image: &ImageId,
        _names: &[String],
        _dest: &Path,
    ) -> Result<Vec<PathBuf>, RuntimeError> {
        Err(RuntimeError::BackendUnavailable {
            backend: BackendKind::Process,
            operation: "extract binaries",
        })
    }
}

// ---------------------------------------------------------------------------
// Container backend.

/// Drives the container runtime CLI. The executable defaults to `docker`
/// and can be overridden through `SATHERITAGE_DOCKER` (any CLI-compatible
/// runtime works).
pub struct ContainerBackend {
    program: String,
}

impl Default for ContainerBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl ContainerBackend {
    pub fn new() -> Self {
        let program = std::env::var(RUNTIME_CLI_ENV).unwrap_or_else(|_| "docker".to_string());
        ContainerBackend { program }
    }

    pub fn with_program(program: impl Into<String>) -> Self {
        ContainerBackend {
            program: program.into(),
        }
    }

    /// True when the runtime CLI answers at all.
    pub fn runtime_available(&self) -> bool {
        Command::new(&self.program)
            .arg("version")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    }

    fn capture(&self, args: &[&str]) -> Result<std::process::Output, RuntimeError> {
        Command::new(&self.program)
            .args(args)
            .stdin(Stdio::null())
            .output()
            .map_err(|source| RuntimeError::SpawnFailure {
                program: self.program.clone(),
                source,
            })
    }

    fn inspect_id(&self, tag: &str) -> Result<Option<ImageId>, RuntimeError> {
        let output = self.capture(&["image", "inspect", "--format", "{{.Id}}", tag])?;
        if !output.status.success() {
            return Ok(None);
        }
        let id = String::from_utf8_lossy(&output.stdout).trim().to_string();
        Ok((!id.is_empty()).then_some(ImageId(id)))
    }
}

impl ExecutionBackend for ContainerBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Container
    }

    fn can_build(&self) -> bool {
        true
    }

    fn can_extract(&self) -> bool {
        true
    }

    fn local_image(&self, spec: &SolverSpec) -> Result<Option<ImageId>, RuntimeError> {
        self.inspect_id(&image_name(spec))
    }

    fn pull_image(&self, spec: &SolverSpec) -> Result<ImageId, RuntimeError> {
        let tag = image_name(spec);
        let output = self.capture(&["pull", &tag])?;
        if !output.status.success() {
            return Err(RuntimeError::ImageUnavailable {
                spec: spec.to_string(),
                reason: format!(
                    "pull of {tag} failed: {}",
                    String::from_utf8_lossy(&output.stderr).trim()
                ),
            });
        }
        self.inspect_id(&tag)?
            .ok_or_else(|| RuntimeError::ImageUnavailable {
                spec: spec.to_string(),
                reason: format!("pulled {tag} but it did not appear locally"),
            })
    }

    fn build_image(&self, recipe: &BuildRecipe, tag: &str) -> Result<ImageId, RuntimeError> {
        let context = new_workdir()?;
        let dockerfile = context.path().join("Dockerfile");
        fs::write(&dockerfile, &recipe.text).map_err(|source| RuntimeError::Io {
            path: dockerfile,
            source,
        })?;
        for (name, file) in &recipe.context_files {
            let target = context.path().join(name);
            match file {
                ContextFile::Inline(content) => {
                    fs::write(&target, content).map_err(|source| RuntimeError::Io {
                        path: target.clone(),
                        source,
                    })?;
                }
                ContextFile::FromHost(host_path) => {
                    fs::copy(host_path, &target).map_err(|source| RuntimeError::Io {
                        path: host_path.clone(),
                        source,
                    })?;
                }
            }
        }

        let context_arg = context.path().display().to_string();
        let output = self.capture(&["build", "-t", tag, &context_arg])?;
        if !output.status.success() {
            return Err(RuntimeError::BuildFailed {
                tag: tag.to_string(),
                log: format!(
                    "{}\n{}",
                    String::from_utf8_lossy(&output.stdout),
                    String::from_utf8_lossy(&output.stderr)
                ),
            });
        }
        self.inspect_id(tag)?
            .ok_or_else(|| RuntimeError::BuildFailed {
                tag: tag.to_string(),
                log: "build reported success but the tag is not inspectable".into(),
            })
    }

    fn run_solver(
        &self,
        image: &ImageId,
        input: &Path,
        proof_out: Option<&Path>,
        limits: &ResourceLimits,
    ) -> Result<RunOutcome, RuntimeError> {
        if !input.is_file() {
            return Err(RuntimeError::InputMissing {
                path: input.to_path_buf(),
            });
        }
        let input_abs = fs::canonicalize(input).map_err(|source| RuntimeError::Io {
            path: input.to_path_buf(),
            source,
        })?;
        let input_name = input_abs
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input.cnf".to_string());

        let work = new_workdir()?;
        let stdout_path = work.path().join("stdout.log");
        let stderr_path = work.path().join("stderr.log");
        let stdout_file = fs::File::create(&stdout_path).map_err(|source| RuntimeError::Io {
            path: stdout_path.clone(),
            source,
        })?;
        let stderr_file = fs::File::create(&stderr_path).map_err(|source| RuntimeError::Io {
            path: stderr_path.clone(),
            source,
        })?;

        let name = format!(
            "satex-run-{}-{}",
            std::process::id(),
            RUN_COUNTER.fetch_add(1, Ordering::SeqCst)
        );
        let mut cmd = Command::new(&self.program);
        cmd.args(["run", "--rm", "--name", &name]);
        cmd.arg("-v")
            .arg(format!("{}:/work/{input_name}:ro", input_abs.display()));
        // The proof lands in a scratch dir mounted read-write and is moved
        // to its final location afterwards.
        let proof_mount = work.path().join("out");
        if proof_out.is_some() {
            fs::create_dir_all(&proof_mount).map_err(|source| RuntimeError::Io {
                path: proof_mount.clone(),
                source,
            })?;
            cmd.arg("-v")
                .arg(format!("{}:/work/out", proof_mount.display()));
        }
        if let Some(bytes) = limits.memory_limit {
            cmd.arg("--memory").arg(bytes.to_string());
        }
        if let Some(cpus) = limits.cpu_count {
            cmd.arg(format!("--cpus={cpus}"));
        }
        cmd.arg(&image.0);
        cmd.arg(format!("/work/{input_name}"));
        if proof_out.is_some() {
            cmd.arg("/work/out/proof.out");
        }
        cmd.stdin(Stdio::null())
            .stdout(Stdio::from(stdout_file))
            .stderr(Stdio::from(stderr_file));

        let mut child = cmd.spawn().map_err(|source| RuntimeError::SpawnFailure {
            program: self.program.clone(),
            source,
        })?;
        let program = self.program.clone();
        let container = name.clone();
        let kill = move |_child: &mut Child| {
            let _ = Command::new(&program)
                .args(["kill", &container])
                .stdin(Stdio::null())
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status();
        };
        let (raw_exit_code, wall_time, timed_out) =
            supervise(&mut child, limits, kill).map_err(|source| RuntimeError::SpawnFailure {
                program: self.program.clone(),
                source,
            })?;

        let proof_path = if let Some(final_path) = proof_out {
            let produced = proof_mount.join("proof.out");
            if produced.is_file() {
                fs::rename(&produced, final_path)
                    .or_else(|_| fs::copy(&produced, final_path).map(|_| ()))
                    .map_err(|source| RuntimeError::Io {
                        path: final_path.to_path_buf(),
                        source,
                    })?;
            }
            Some(final_path.to_path_buf())
        } else {
            None
        };

        Ok(RunOutcome {
            status: if timed_out {
                Status::Timeout
            } else {
                Status::Unknown
            },
            raw_exit_code,
            wall_time,
            stdout_path,
            stderr_path,
            proof_path,
            _work_dir: Some(work),
        })
    }

    fn run_raw(
        &self,
        image: &ImageId,
        solver_name: &str,
        args: &[String],
    ) -> Result<i32, RuntimeError> {
        let entrypoint = format!("/usr/local/bin/{solver_name}");
        let status = Command::new(&self.program)
            .args(["run", "--rm", "--entrypoint", &entrypoint, &image.0])
            .args(args)
            .status()
            .map_err(|source| RuntimeError::SpawnFailure {
                program: self.program.clone(),
                source,
            })?;
        Ok(exit_code(status))
    }

    fn extract(
        &self,
        image: &ImageId,
        names: &[String],
        dest: &Path,
    ) -> Result<Vec<PathBuf>, RuntimeError> {
        let output = self.capture(&["create", &image.0])?;
        if !output.status.success() {
            return Err(RuntimeError::NothingToExtract {
                image: image.0.clone(),
                reason: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        let cid = String::from_utf8_lossy(&output.stdout).trim().to_string();

        let mut copied = Vec::new();
        let mut failures = Vec::new();
        for name in names {
            let from = format!("{cid}:/usr/local/bin/{name}");
            let to = dest.join(name);
            let to_arg = to.display().to_string();
            let output = self.capture(&["cp", &from, &to_arg])?;
            if output.status.success() {
                copied.push(to);
            } else {
                failures.push(format!(
                    "{name}: {}",
                    String::from_utf8_lossy(&output.stderr).trim()
                ));
            }
        }
        let _ = self.capture(&["rm", "-f", &cid]);

        if copied.is_empty() {
            return Err(RuntimeError::NothingToExtract {
                image: image.0.clone(),
                reason: failures.join("; "),
            });
        }
        Ok(copied)
    }
}

/// Builds the backend selected by kind.
pub fn backend_for(kind: BackendKind, bin_root: &Path) -> Box<dyn ExecutionBackend> {
    match kind {
        BackendKind::Container => Box::new(ContainerBackend::new()),
        BackendKind::Process => Box::new(ProcessBackend::new(bin_root)),
    }
}
