//! Declarative catalog of solver sets and solver entries.
//!
//! A registry is a directory tree: one subdirectory per solver set, each
//! holding a `setup.json` (set-level configuration and shared defaults) and
//! a `solvers.json` (the entry list). An optional `eras.json` at the root
//! extends or overrides the built-in version-to-base-image table. The
//! format is documented in `docs/registry.md`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::archive::{ArchiveError, SourceKind, SourceRef};
use crate::recipes::{default_era_table, EraBases};

/// Placeholder substituted with the DIMACS input path.
pub const INPUT_PLACEHOLDER: &str = "INPUT";
/// Placeholder substituted with the proof output path.
pub const PROOF_PLACEHOLDER: &str = "PROOF";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}:{line}: {message}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate solver {spec}: declared in {first} and {second}")]
    DuplicateSpec {
        spec: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("duplicate set id {set_id:?}: declared in {first} and {second}")]
    DuplicateSet {
        set_id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{path}: {context}: missing required field {field:?}")]
    MissingField {
        path: PathBuf,
        context: String,
        field: &'static str,
    },
    #[error("{path}: {spec}: bad template {template:?}: {reason}")]
    BadPlaceholder {
        path: PathBuf,
        spec: String,
        template: String,
        reason: String,
    },
    #[error("{path}: invalid identifier {value:?} ({what}): must match [a-z0-9._-]+")]
    BadIdentifier {
        path: PathBuf,
        value: String,
        what: &'static str,
    },
    #[error("{path}: {spec}: binary-archive entries must not declare build commands")]
    BinaryEntryWithBuildCommands { path: PathBuf, spec: String },
    #[error("{path}: {spec}: invalid source: {source}")]
    BadSource {
        path: PathBuf,
        spec: String,
        #[source]
        source: Box<ArchiveError>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no solver matches pattern {pattern:?}")]
    NoMatch { pattern: String },
    #[error("unknown solver {spec}")]
    UnknownSpec { spec: String },
    #[error("invalid spec {value:?}: expected name:version")]
    BadSpec { value: String },
}

/// Identity of one archived solver: `name:version`. Both parts are
/// lowercased on construction and restricted to `[a-z0-9._-]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SolverSpec {
    name: String,
    version: String,
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '.' | '_' | '-'))
}

impl SolverSpec {
    pub fn new(name: &str, version: &str) -> Result<Self, RegistryError> {
        let name = name.to_lowercase();
        let version = version.to_lowercase();
        for part in [&name, &version] {
            if !valid_identifier(part) {
                return Err(RegistryError::BadSpec {
                    value: format!("{name}:{version}"),
                });
            }
        }
        Ok(SolverSpec { name, version })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.version)
    }
}

impl FromStr for SolverSpec {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, version) = s.split_once(':').ok_or_else(|| RegistryError::BadSpec {
            value: s.to_string(),
        })?;
        SolverSpec::new(name, version)
    }
}

/// Container image tag for a solver: `satex/<name>:<version>`.
pub fn image_name(spec: &SolverSpec) -> String {
    format!("satex/{}:{}", spec.name(), spec.version())
}

/// How to compile a solver from its source archive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub commands: Vec<String>,
    pub artifact: Option<String>,
    pub builder_image: Option<String>,
}

/// How to invoke a solver inside its image or as a local executable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Whitespace-separated command template. Contains `INPUT` exactly once
    /// and `PROOF` at most once; `PROOF` appears iff `proof_capable`.
    pub command_template: String,
    /// Extra arguments appended after the template tokens.
    pub default_options: Vec<String>,
    pub proof_capable: bool,
}

impl RunConfig {
    /// Substitutes the placeholders and returns the argument vector. When no
    /// proof path is given, every token mentioning `PROOF` is dropped; this
    /// is how proof logging is switched off.
    pub fn render_args(&self, input: &str, proof: Option<&str>) -> Vec<String> {
        let mut args = Vec::new();
        for token in self.command_template.split_whitespace() {
            if token.contains(PROOF_PLACEHOLDER) {
                match proof {
                    Some(p) => args.push(
                        token
                            .replace(PROOF_PLACEHOLDER, p)
                            .replace(INPUT_PLACEHOLDER, input),
                    ),
                    None => continue,
                }
            } else {
                args.push(token.replace(INPUT_PLACEHOLDER, input));
            }
        }
        args.extend(self.default_options.iter().cloned());
        args
    }
}

/// One archived solver with everything needed to fetch, build and run it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverEntry {
    pub spec: SolverSpec,
    pub source: SourceRef,
    pub build: BuildConfig,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub era: Option<EraBases>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl SolverEntry {
    /// DOI recorded for this entry, from the source reference or the
    /// free-form metadata.
    pub fn doi(&self) -> Option<&str> {
        self.source
            .doi
            .as_deref()
            .or_else(|| self.meta.get("doi").map(String::as_str))
    }
}

/// A group of entries sharing configuration, typically one competition year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverSet {
    pub set_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub era: Option<EraBases>,
    pub entries: Vec<SolverEntry>,
}

/// The loaded, validated catalog. Immutable after load; safe to share
/// across threads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub sets: Vec<SolverSet>,
    pub era_table: BTreeMap<String, EraBases>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            sets: Vec::new(),
            era_table: default_era_table(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &SolverEntry> {
        self.sets.iter().flat_map(|s| s.entries.iter())
    }

    pub fn num_entries(&self) -> usize {
        self.sets.iter().map(|s| s.entries.len()).sum()
    }

    pub fn entry(&self, spec: &SolverSpec) -> Option<&SolverEntry> {
        self.entries().find(|e| &e.spec == spec)
    }

    /// The set an entry belongs to.
    pub fn set_of(&self, spec: &SolverSpec) -> Option<&SolverSet> {
        self.sets
            .iter()
            .find(|s| s.entries.iter().any(|e| &e.spec == spec))
    }

    /// Expands a glob pattern (`NAMEGLOB[:VERSIONGLOB]`, `*` and `?`
    /// supported, version defaults to `*`) into a sorted, duplicate-free
    /// list of specs.
    pub fn resolve(&self, pattern: &str) -> Result<Vec<SolverSpec>, RegistryError> {
        let lowered = pattern.to_lowercase();
        let (name_glob, version_glob) = match lowered.split_once(':') {
            Some((n, v)) => (n, v),
            None => (lowered.as_str(), "*"),
        };
        let mut matches: Vec<SolverSpec> = self
            .entries()
            .map(|e| e.spec.clone())
            .filter(|s| glob_match(name_glob, s.name()) && glob_match(version_glob, s.version()))
            .collect();
        matches.sort();
        matches.dedup();
        if matches.is_empty() {
            return Err(RegistryError::NoMatch {
                pattern: pattern.to_string(),
            });
        }
        Ok(matches)
    }

    /// Content digest over the whole catalog, for provenance records.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("registry serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Derives the info report for one solver.
    pub fn info(&self, spec: &SolverSpec) -> Result<InfoReport, RegistryError> {
        let entry = self.entry(spec).ok_or_else(|| RegistryError::UnknownSpec {
            spec: spec.to_string(),
        })?;
        let set = self.set_of(spec).expect("entry implies set");
        let era = crate::recipes::era_for(self, spec).ok();
        let run_without_proof = entry.run.render_args("file.cnf", None).join(" ");
        let run_with_proof = entry
            .run
            .proof_capable
            .then(|| entry.run.render_args("file.cnf", Some("proof")).join(" "));
        Ok(InfoReport {
            spec: spec.to_string(),
            image: image_name(spec),
            set: set.set_id.clone(),
            era: era.map(|e| EraReport {
                version_token: e.version_token,
                builder: e.builder_base,
                runtime: e.runtime_base,
            }),
            source_url: entry.source.url.clone(),
            source_sha256: entry.source.sha256.clone(),
            source_kind: entry.source.kind,
            doi: entry.doi().map(str::to_string),
            run_with_proof,
            run_without_proof,
            build_commands: entry.build.commands.clone(),
            artifact: entry.build.artifact.clone(),
            meta: entry.meta.clone(),
        })
    }
}

/// Everything `info` reports for one solver; field order is the stable
/// rendering order.
#[derive(Debug, Clone, Serialize)]
pub struct InfoReport {
    pub spec: String,
    pub image: String,
    pub set: String,
    pub era: Option<EraReport>,
    pub source_url: String,
    pub source_sha256: String,
    pub source_kind: SourceKind,
    pub doi: Option<String>,
    pub run_with_proof: Option<String>,
    pub run_without_proof: String,
    pub build_commands: Vec<String>,
    pub artifact: Option<String>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EraReport {
    pub version_token: String,
    pub builder: String,
    pub runtime: String,
}

/// Glob matching over `*` (any run) and `?` (any single character).
fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut backtrack: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            backtrack = Some((pi, ti));
            pi += 1;
        } else if let Some((star_pi, star_ti)) = backtrack {
            backtrack = Some((star_pi, star_ti + 1));
            pi = star_pi + 1;
            ti = star_ti + 1;
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

// ---------------------------------------------------------------------------
// On-disk representation.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSetup {
    set: Option<String>,
    era: Option<EraBases>,
    #[serde(default)]
    defaults: RawDefaults,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefaults {
    source: Option<RawSource>,
    build: Option<RawBuild>,
    run: Option<RawRun>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    url: Option<String>,
    sha256: Option<String>,
    kind: Option<SourceKind>,
    doi: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuild {
    commands: Option<Vec<String>>,
    artifact: Option<String>,
    builder_image: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    template: Option<String>,
    options: Option<Vec<String>>,
    proof: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    version: Option<String>,
    #[serde(default)]
    source: RawSource,
    #[serde(default)]
    build: RawBuild,
    #[serde(default)]
    run: RawRun,
    era: Option<EraBases>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RegistryError> {
    let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| RegistryError::MalformedFile {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Loads and validates a registry from its root directory.
pub fn load_registry(root: &Path) -> Result<Registry, RegistryError> {
    let mut era_table = default_era_table();
    let eras_path = root.join("eras.json");
    if eras_path.is_file() {
        let overrides: BTreeMap<String, EraBases> = read_json(&eras_path)?;
        era_table.extend(overrides);
    }

    let mut dirs: Vec<PathBuf> = Vec::new();
    let read = fs::read_dir(root).map_err(|source| RegistryError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    for dir_entry in read {
        let dir_entry = dir_entry.map_err(|source| RegistryError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let path = dir_entry.path();
        if path.is_dir()
            && (path.join("setup.json").is_file() || path.join("solvers.json").is_file())
        {
            dirs.push(path);
        }
    }
    dirs.sort();

    let mut sets = Vec::new();
    let mut seen_specs: BTreeMap<SolverSpec, PathBuf> = BTreeMap::new();
    let mut seen_sets: BTreeMap<String, PathBuf> = BTreeMap::new();

    for dir in dirs {
        let setup_path = dir.join("setup.json");
        let setup: RawSetup = if setup_path.is_file() {
            read_json(&setup_path)?
        } else {
            RawSetup::default()
        };
        let dir_name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let set_id = setup.set.unwrap_or(dir_name).to_lowercase();
        if !valid_identifier(&set_id) {
            return Err(RegistryError::BadIdentifier {
                path: setup_path,
                value: set_id,
                what: "set id",
            });
        }
        if let Some(first) = seen_sets.get(&set_id) {
            return Err(RegistryError::DuplicateSet {
                set_id,
                first: first.clone(),
                second: dir,
            });
        }
        seen_sets.insert(set_id.clone(), dir.clone());

        let solvers_path = dir.join("solvers.json");
        let raw_entries: Vec<RawEntry> = if solvers_path.is_file() {
            read_json(&solvers_path)?
        } else {
            Vec::new()
        };

        let mut entries = Vec::new();
        for raw in raw_entries {
            let entry = validate_entry(raw, &set_id, &setup.defaults, &solvers_path)?;
            if let Some(first) = seen_specs.get(&entry.spec) {
                return Err(RegistryError::DuplicateSpec {
                    spec: entry.spec.to_string(),
                    first: first.clone(),
                    second: solvers_path,
                });
            }
            seen_specs.insert(entry.spec.clone(), solvers_path.clone());
            entries.push(entry);
        }

        sets.push(SolverSet {
            set_id,
            era: setup.era,
            entries,
        });
    }

    Ok(Registry { sets, era_table })
}

fn count_occurrences(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

fn validate_entry(
    raw: RawEntry,
    set_id: &str,
    defaults: &RawDefaults,
    path: &Path,
) -> Result<SolverEntry, RegistryError> {
    let version = raw.version.unwrap_or_else(|| set_id.to_string());
    let spec = SolverSpec::new(&raw.name, &version).map_err(|_| RegistryError::BadIdentifier {
        path: path.to_path_buf(),
        value: format!("{}:{version}", raw.name),
        what: "solver spec",
    })?;
    let context = spec.to_string();

    let missing = |field: &'static str| RegistryError::MissingField {
        path: path.to_path_buf(),
        context: context.clone(),
        field,
    };

    let d_source = defaults.source.clone().unwrap_or_default();
    let d_build = defaults.build.clone().unwrap_or_default();
    let d_run = defaults.run.clone().unwrap_or_default();

    let source = SourceRef {
        url: raw
            .source
            .url
            .or(d_source.url)
            .ok_or_else(|| missing("source.url"))?,
        sha256: raw
            .source
            .sha256
            .or(d_source.sha256)
            .ok_or_else(|| missing("source.sha256"))?
            .to_lowercase(),
        kind: raw
            .source
            .kind
            .or(d_source.kind)
            .ok_or_else(|| missing("source.kind"))?,
        doi: raw.source.doi.or(d_source.doi),
    };
    source
        .validate()
        .map_err(|source_err| RegistryError::BadSource {
            path: path.to_path_buf(),
            spec: context.clone(),
            source: Box::new(source_err),
        })?;

    let build = BuildConfig {
        commands: raw.build.commands.or(d_build.commands).unwrap_or_default(),
        artifact: raw.build.artifact.or(d_build.artifact),
        builder_image: raw.build.builder_image.or(d_build.builder_image),
    };
    if source.kind == SourceKind::BinaryArchive && !build.commands.is_empty() {
        return Err(RegistryError::BinaryEntryWithBuildCommands {
            path: path.to_path_buf(),
            spec: context,
        });
    }

    let run = RunConfig {
        command_template: raw
            .run
            .template
            .or(d_run.template)
            .ok_or_else(|| missing("run.template"))?,
        default_options: raw.run.options.or(d_run.options).unwrap_or_default(),
        proof_capable: raw.run.proof.or(d_run.proof).unwrap_or(false),
    };

    let bad_template = |reason: String| RegistryError::BadPlaceholder {
        path: path.to_path_buf(),
        spec: context.clone(),
        template: run.command_template.clone(),
        reason,
    };
    let inputs = count_occurrences(&run.command_template, INPUT_PLACEHOLDER);
    let proofs = count_occurrences(&run.command_template, PROOF_PLACEHOLDER);
    if inputs != 1 {
        return Err(bad_template(format!(
            "INPUT must appear exactly once, found {inputs}"
        )));
    }
    if proofs > 1 {
        return Err(bad_template(format!(
            "PROOF may appear at most once, found {proofs}"
        )));
    }
    if run.proof_capable != (proofs == 1) {
        return Err(bad_template(format!(
            "PROOF present {} but proof flag is {}",
            proofs == 1,
            run.proof_capable
        )));
    }

    Ok(SolverEntry {
        spec,
        source,
        build,
        run,
        era: raw.era,
        meta: raw.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(path: &Path, content: &str) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    const SHA_A: &str = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";

    fn entry_json(name: &str, template: &str) -> String {
        format!(
            r#"{{"name": "{name}",
                "source": {{"url": "http://example.org/{name}.tar.gz",
                            "sha256": "{SHA_A}",
                            "kind": "source-archive"}},
                "build": {{"commands": ["make"], "artifact": "{name}"}},
                "run": {{"template": "{template}"}}}}"#
        )
    }

    fn fixture_registry(dir: &Path) {
        write(dir.join("2000/setup.json").as_path(), r#"{"set": "2000"}"#);
        write(
            dir.join("2000/solvers.json").as_path(),
            &format!(
                "[{},{}]",
                entry_json("sato", "sato INPUT"),
                entry_json("eqsatz", "eqsatz INPUT")
            ),
        );
        write(dir.join("2019/setup.json").as_path(), r#"{"set": "2019"}"#);
        write(
            dir.join("2019/solvers.json").as_path(),
            &format!("[{}]", entry_json("cadical", "cadical INPUT")),
        );
    }

    #[test]
    fn empty_directory_loads_empty_registry() {
        let dir = tempfile::tempdir().unwrap();
        let reg = load_registry(dir.path()).unwrap();
        assert!(reg.sets.is_empty());
        assert_eq!(reg.num_entries(), 0);
    }

    #[test]
    fn loads_sets_and_entries() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let reg = load_registry(dir.path()).unwrap();
        assert_eq!(reg.sets.len(), 2);
        assert_eq!(reg.num_entries(), 3);
        let spec = SolverSpec::new("sato", "2000").unwrap();
        assert!(reg.entry(&spec).is_some());
    }

    #[test]
    fn versions_default_to_the_set_id() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let reg = load_registry(dir.path()).unwrap();
        let spec = SolverSpec::new("cadical", "2019").unwrap();
        assert_eq!(reg.entry(&spec).unwrap().spec.version(), "2019");
    }

    #[test]
    fn duplicate_specs_name_both_files() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path().join("a/solvers.json").as_path(),
            &format!(
                "[{}]",
                entry_json("cadical", "cadical INPUT").replace(
                    "\"name\": \"cadical\"",
                    "\"name\": \"cadical\", \"version\": \"2019\""
                )
            ),
        );
        write(
            dir.path().join("b/solvers.json").as_path(),
            &format!(
                "[{}]",
                entry_json("cadical", "cadical INPUT").replace(
                    "\"name\": \"cadical\"",
                    "\"name\": \"cadical\", \"version\": \"2019\""
                )
            ),
        );
        match load_registry(dir.path()) {
            Err(RegistryError::DuplicateSpec {
                spec,
                first,
                second,
            }) => {
                assert_eq!(spec, "cadical:2019");
                assert!(first.to_string_lossy().contains("a/solvers.json"));
                assert!(second.to_string_lossy().contains("b/solvers.json"));
            }
            other => panic!("expected DuplicateSpec, got {other:?}"),
        }
    }

    #[test]
    fn identifiers_are_lowercased() {
        let spec = SolverSpec::new("CaDiCaL", "2019").unwrap();
        assert_eq!(spec.to_string(), "cadical:2019");
    }

    #[test]
    fn spec_parse_round_trips() {
        let spec = SolverSpec::new("a", "b").unwrap();
        let parsed: SolverSpec = spec.to_string().parse().unwrap();
        assert_eq!(spec, parsed);
        assert_eq!(image_name(&parsed), "satex/a:b");
    }

    #[test]
    fn image_name_follows_the_convention() {
        let spec = SolverSpec::new("cadical", "2019").unwrap();
        assert_eq!(image_name(&spec), "satex/cadical:2019");
    }

    #[test]
    fn resolve_glob_over_versions() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let reg = load_registry(dir.path()).unwrap();
        let specs = reg.resolve("*:2000").unwrap();
        let rendered: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
        assert_eq!(rendered, vec!["eqsatz:2000", "sato:2000"]);
    }

    #[test]
    fn resolve_exact_spec() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let reg = load_registry(dir.path()).unwrap();
        let specs = reg.resolve("cadical:2019").unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].to_string(), "cadical:2019");
    }

    #[test]
    fn resolve_without_version_matches_all_versions() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let reg = load_registry(dir.path()).unwrap();
        assert_eq!(reg.resolve("c?dical").unwrap().len(), 1);
        assert_eq!(reg.resolve("*").unwrap().len(), 3);
    }

    #[test]
    fn resolve_no_match_reports_pattern() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let reg = load_registry(dir.path()).unwrap();
        match reg.resolve("nosuch:1999") {
            Err(RegistryError::NoMatch { pattern }) => assert_eq!(pattern, "nosuch:1999"),
            other => panic!("expected NoMatch, got {other:?}"),
        }
    }

    #[test]
    fn template_must_contain_input_once() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path().join("x/solvers.json").as_path(),
            &format!("[{}]", entry_json("bad", "bad")),
        );
        assert!(matches!(
            load_registry(dir.path()),
            Err(RegistryError::BadPlaceholder { .. })
        ));
    }

    #[test]
    fn proof_flag_must_match_template() {
        let dir = tempfile::tempdir().unwrap();
        let entry = entry_json("bad", "bad INPUT PROOF");
        write(
            dir.path().join("x/solvers.json").as_path(),
            &format!("[{entry}]"),
        );
        assert!(matches!(
            load_registry(dir.path()),
            Err(RegistryError::BadPlaceholder { .. })
        ));
    }

    #[test]
    fn binary_entries_must_not_build() {
        let dir = tempfile::tempdir().unwrap();
        let entry = entry_json("bin", "bin INPUT").replace("source-archive", "binary-archive");
        write(
            dir.path().join("x/solvers.json").as_path(),
            &format!("[{entry}]"),
        );
        assert!(matches!(
            load_registry(dir.path()),
            Err(RegistryError::BinaryEntryWithBuildCommands { .. })
        ));
    }

    #[test]
    fn missing_sha_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let entry = r#"[{"name": "x",
            "source": {"url": "http://e", "kind": "source-archive"},
            "run": {"template": "x INPUT"}}]"#;
        write(dir.path().join("x/solvers.json").as_path(), entry);
        assert!(matches!(
            load_registry(dir.path()),
            Err(RegistryError::MissingField {
                field: "source.sha256",
                ..
            })
        ));
    }

    #[test]
    fn set_defaults_fill_in_entry_gaps() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path().join("2000/setup.json").as_path(),
            &format!(
                r#"{{"set": "2000",
                    "defaults": {{
                        "source": {{"kind": "source-archive", "sha256": "{SHA_A}"}},
                        "build": {{"commands": ["make"], "artifact": "solver"}},
                        "run": {{"template": "solver INPUT", "options": ["-q"]}}
                    }}}}"#
            ),
        );
        write(
            dir.path().join("2000/solvers.json").as_path(),
            r#"[{"name": "a", "source": {"url": "http://e/a"}},
                {"name": "b", "source": {"url": "http://e/b"},
                 "run": {"template": "b INPUT", "options": []}}]"#,
        );
        let reg = load_registry(dir.path()).unwrap();
        let a = reg.entry(&SolverSpec::new("a", "2000").unwrap()).unwrap();
        assert_eq!(a.run.command_template, "solver INPUT");
        assert_eq!(a.run.default_options, vec!["-q"]);
        assert_eq!(a.build.artifact.as_deref(), Some("solver"));
        let b = reg.entry(&SolverSpec::new("b", "2000").unwrap()).unwrap();
        assert_eq!(b.run.command_template, "b INPUT");
        assert!(b.run.default_options.is_empty());
    }

    #[test]
    fn malformed_json_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path().join("x/solvers.json").as_path(),
            "[{\n  broken\n]",
        );
        match load_registry(dir.path()) {
            Err(RegistryError::MalformedFile { path, line, .. }) => {
                assert!(path.ends_with("x/solvers.json"));
                assert!(line >= 2);
            }
            other => panic!("expected MalformedFile, got {other:?}"),
        }
    }

    #[test]
    fn load_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        fixture_registry(dir.path());
        let a = load_registry(dir.path()).unwrap();
        let b = load_registry(dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn info_renders_run_commands() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path().join("2019/setup.json").as_path(),
            r#"{"set": "2019"}"#,
        );
        let entry = format!(
            r#"[{{"name": "cadical",
                 "source": {{"url": "http://e/c.tar.gz", "sha256": "{SHA_A}",
                             "kind": "source-archive", "doi": "10.5281/zenodo.1"}},
                 "build": {{"commands": ["make"], "artifact": "cadical"}},
                 "run": {{"template": "cadical INPUT --proof=PROOF", "proof": true}}}}]"#
        );
        write(dir.path().join("2019/solvers.json").as_path(), &entry);
        let reg = load_registry(dir.path()).unwrap();
        let info = reg
            .info(&SolverSpec::new("cadical", "2019").unwrap())
            .unwrap();
        assert_eq!(
            info.run_with_proof.as_deref(),
            Some("cadical file.cnf --proof=proof")
        );
        assert_eq!(info.run_without_proof, "cadical file.cnf");
        assert_eq!(info.doi.as_deref(), Some("10.5281/zenodo.1"));
        assert_eq!(info.image, "satex/cadical:2019");
    }

    #[test]
    fn info_unknown_spec() {
        let reg = Registry::empty();
        assert!(matches!(
            reg.info(&SolverSpec::new("ghost", "1999").unwrap()),
            Err(RegistryError::UnknownSpec { .. })
        ));
    }

    #[test]
    fn glob_matcher_basics() {
        assert!(glob_match("*", ""));
        assert!(glob_match("*", "anything"));
        assert!(glob_match("a*c", "abc"));
        assert!(glob_match("a*c", "ac"));
        assert!(!glob_match("a*c", "ab"));
        assert!(glob_match("?at", "sat"));
        assert!(!glob_match("?at", "at"));
        assert!(glob_match("s*t*", "satex-tool"));
        assert!(!glob_match("", "x"));
        assert!(glob_match("", ""));
    }

    #[test]
    fn render_args_substitutes_and_elides() {
        let run = RunConfig {
            command_template: "cadical INPUT PROOF".into(),
            default_options: vec!["--quiet".into()],
            proof_capable: true,
        };
        assert_eq!(
            run.render_args("f.cnf", Some("p.drup")),
            vec!["cadical", "f.cnf", "p.drup", "--quiet"]
        );
        assert_eq!(
            run.render_args("f.cnf", None),
            vec!["cadical", "f.cnf", "--quiet"]
        );
    }
}
