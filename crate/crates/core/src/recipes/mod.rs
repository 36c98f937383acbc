//! Deterministic container build recipes and the unified run wrapper.
//!
//! Recipes target the plain Dockerfile text format so images stay buildable
//! with standard tooling. Generation is canonical: fixed instruction order,
//! LF endings, no timestamps or environment-dependent strings, so repeated
//! generation from the same entry is byte-identical.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::archive::SourceKind;
use crate::registry::{Registry, SolverEntry, SolverSpec, INPUT_PLACEHOLDER, PROOF_PLACEHOLDER};

/// File name of the wrapper inside images and build contexts.
pub const WRAPPER_NAME: &str = "run-solver";
/// Where a source archive is staged inside the builder stage.
pub const SOURCE_STAGE_PATH: &str = "/build/source.archive";
/// Where a binary artifact is staged inside the runtime stage.
pub const BINARY_STAGE_PATH: &str = "/build/solver.bin";

#[derive(Debug, Error)]
pub enum RecipeError {
    #[error("no era configured for version token {version:?} and no overrides present")]
    NoEraConfigured { version: String },
    #[error("unknown solver {spec}")]
    UnknownSpec { spec: String },
    #[error("{spec}: source entries must declare a build artifact path")]
    MissingArtifactPath { spec: String },
    #[error("{spec}: source entries must declare at least one build command")]
    EmptyBuildCommands { spec: String },
}

/// Builder and runtime base images for one version token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraBases {
    pub builder: String,
    pub runtime: String,
}

/// Resolved era configuration for a concrete solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EraConfig {
    pub version_token: String,
    pub builder_base: String,
    pub runtime_base: String,
}

/// Built-in mapping from competition-year tokens to period-appropriate
/// distribution releases. Only the earliest mapping is historically
/// attested; the rest are editable defaults, shipped as data so history
/// corrections never require a code change (see `docs/registry.md`).
pub fn default_era_table() -> BTreeMap<String, EraBases> {
    serde_json::from_str(include_str!("default_eras.json")).expect("builtin era table parses")
}

/// Resolves the era for a solver: entry override, then set override, then
/// the registry era table.
pub fn era_for(registry: &Registry, spec: &SolverSpec) -> Result<EraConfig, RecipeError> {
    let entry = registry
        .entry(spec)
        .ok_or_else(|| RecipeError::UnknownSpec {
            spec: spec.to_string(),
        })?;
    let bases = entry
        .era
        .clone()
        .or_else(|| registry.set_of(spec).and_then(|s| s.era.clone()))
        .or_else(|| registry.era_table.get(spec.version()).cloned())
        .ok_or_else(|| RecipeError::NoEraConfigured {
            version: spec.version().to_string(),
        })?;
    Ok(EraConfig {
        version_token: spec.version().to_string(),
        builder_base: bases.builder,
        runtime_base: bases.runtime,
    })
}

/// A file the recipe expects in its build context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContextFile {
    /// Content generated alongside the recipe.
    Inline(String),
    /// Copied from the host when the context is materialized; used for
    /// `file://` sources so generation itself stays pure.
    FromHost(PathBuf),
}

/// A generated build recipe plus the context files it references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildRecipe {
    /// Exact recipe bytes (Dockerfile format).
    pub text: String,
    /// 2 for source builds (builder + runtime), 1 for binary-only entries.
    pub stage_count: u8,
    /// Content hash over the generating entry and its resolved era; pins
    /// the recipe bytes.
    pub inputs_digest: String,
    pub context_files: BTreeMap<String, ContextFile>,
}

fn inputs_digest(entry: &SolverEntry, era: &EraConfig) -> String {
    #[derive(Serialize)]
    struct Inputs<'a> {
        entry: &'a SolverEntry,
        era: &'a EraConfig,
    }
    let json = serde_json::to_string(&Inputs { entry, era }).expect("recipe inputs serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// A `file://` URL staged via COPY, anything else fetched via ADD.
fn fetch_instruction(url: &str, stage_path: &str, context_name: &str) -> (String, Option<PathBuf>) {
    match url.strip_prefix("file://") {
        Some(host_path) => (
            format!("COPY {context_name} {stage_path}"),
            Some(PathBuf::from(host_path)),
        ),
        None => (format!("ADD {url} {stage_path}"), None),
    }
}

/// Generates the container build recipe for an entry.
///
/// Source entries produce a two-stage recipe: the builder stage fetches the
/// archive, verifies its checksum in-image, and runs the build commands;
/// the runtime stage receives only the artifact and the wrapper. Binary
/// entries skip the builder stage entirely.
pub fn generate_build_recipe(
    entry: &SolverEntry,
    era: &EraConfig,
) -> Result<BuildRecipe, RecipeError> {
    let spec = &entry.spec;
    let digest = inputs_digest(entry, era);
    let wrapper = generate_run_wrapper(entry);
    let mut context_files = BTreeMap::new();
    context_files.insert(WRAPPER_NAME.to_string(), ContextFile::Inline(wrapper));

    let installed = format!("/usr/local/bin/{}", spec.name());
    let mut lines: Vec<String> = Vec::new();

    let stage_count = match entry.source.kind {
        SourceKind::SourceArchive => {
            if entry.build.commands.is_empty() {
                return Err(RecipeError::EmptyBuildCommands {
                    spec: spec.to_string(),
                });
            }
            let artifact = entry.build.artifact.as_deref().ok_or_else(|| {
                RecipeError::MissingArtifactPath {
                    spec: spec.to_string(),
                }
            })?;
            let artifact_path = if artifact.starts_with('/') {
                artifact.to_string()
            } else {
                format!("/build/{artifact}")
            };
            let builder_base = entry
                .build
                .builder_image
                .as_deref()
                .unwrap_or(&era.builder_base);

            lines.push(format!("FROM {builder_base} AS builder"));
            lines.push("WORKDIR /build".to_string());
            let (fetch, staged) =
                fetch_instruction(&entry.source.url, SOURCE_STAGE_PATH, "source.archive");
            if let Some(host_path) = staged {
                context_files.insert(
                    "source.archive".to_string(),
                    ContextFile::FromHost(host_path),
                );
            }
            lines.push(fetch);
            lines.push(format!(
                "RUN echo \"{}  {SOURCE_STAGE_PATH}\" | sha256sum -c -",
                entry.source.sha256
            ));
            for command in &entry.build.commands {
                lines.push(format!("RUN {command}"));
            }
            lines.push(format!("FROM {}", era.runtime_base));
            lines.push(format!("COPY --from=builder {artifact_path} {installed}"));
            lines.push(format!("COPY {WRAPPER_NAME} /usr/local/bin/{WRAPPER_NAME}"));
            lines.push(format!(
                "RUN chmod 0755 /usr/local/bin/{WRAPPER_NAME} {installed}"
            ));
            2
        }
        SourceKind::BinaryArchive => {
            lines.push(format!("FROM {}", era.runtime_base));
            lines.push("WORKDIR /build".to_string());
            let (fetch, staged) =
                fetch_instruction(&entry.source.url, BINARY_STAGE_PATH, "solver.bin");
            if let Some(host_path) = staged {
                context_files.insert("solver.bin".to_string(), ContextFile::FromHost(host_path));
            }
            lines.push(fetch);
            lines.push(format!(
                "RUN echo \"{}  {BINARY_STAGE_PATH}\" | sha256sum -c -",
                entry.source.sha256
            ));
            lines.push(format!("RUN cp {BINARY_STAGE_PATH} {installed}"));
            lines.push(format!("COPY {WRAPPER_NAME} /usr/local/bin/{WRAPPER_NAME}"));
            lines.push(format!(
                "RUN chmod 0755 /usr/local/bin/{WRAPPER_NAME} {installed}"
            ));
            1
        }
    };

    lines.push(format!(
        "LABEL satex.solver=\"{spec}\" satex.inputs-digest=\"{digest}\""
    ));
    lines.push(format!("ENTRYPOINT [\"/usr/local/bin/{WRAPPER_NAME}\"]"));

    let mut text = lines.join("\n");
    text.push('\n');

    Ok(BuildRecipe {
        text,
        stage_count,
        inputs_digest: digest,
        context_files,
    })
}

fn single_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Renders one template token as shell text: literal parts are
/// single-quoted, placeholders become quoted variable expansions. Nothing
/// from the registry or the command line ever reaches the shell unquoted.
fn render_shell_token(token: &str) -> String {
    let mut out = String::new();
    let mut rest = token;
    while !rest.is_empty() {
        let next_input = rest.find(INPUT_PLACEHOLDER);
        let next_proof = rest.find(PROOF_PLACEHOLDER);
        let (idx, placeholder, expansion) = match (next_input, next_proof) {
            (Some(a), Some(b)) if a <= b => (a, INPUT_PLACEHOLDER, "\"$INPUT\""),
            (Some(a), _) => (a, INPUT_PLACEHOLDER, "\"$INPUT\""),
            (None, Some(b)) => (b, PROOF_PLACEHOLDER, "\"$PROOF\""),
            (None, None) => {
                out.push_str(&single_quote(rest));
                rest = "";
                continue;
            }
        };
        if idx > 0 {
            out.push_str(&single_quote(&rest[..idx]));
        }
        out.push_str(expansion);
        rest = &rest[idx + placeholder.len()..];
    }
    if out.is_empty() {
        out.push_str("''");
    }
    out
}

fn render_command(entry: &SolverEntry, with_proof: bool) -> String {
    let mut parts: Vec<String> = Vec::new();
    for token in entry.run.command_template.split_whitespace() {
        if !with_proof && token.contains(PROOF_PLACEHOLDER) {
            continue;
        }
        parts.push(render_shell_token(token));
    }
    for option in &entry.run.default_options {
        parts.push(single_quote(option));
    }
    parts.join(" ")
}

/// Generates the POSIX shell wrapper installed in every image.
///
/// The wrapper takes the DIMACS path (gunzipped transparently when the name
/// ends in `.gz`) and an optional proof output path, substitutes them into
/// the entry's command template, and exits with the normalized status code
/// derived from the solver's `s` line.
pub fn generate_run_wrapper(entry: &SolverEntry) -> String {
    let with_proof = render_command(entry, true);
    let without_proof = render_command(entry, false);
    format!(
        r#"#!/bin/sh
# Unified solver wrapper for {spec}.
# Usage: run-solver <input.cnf[.gz]> [proof-output]
# Exit: 10 satisfiable, 20 unsatisfiable, 0 otherwise.
set -u

if [ "$#" -lt 1 ]; then
    echo "usage: $0 <input.cnf[.gz]> [proof-output]" >&2
    exit 1
fi

INPUT=$1
PROOF=${{2-}}

if [ ! -e "$INPUT" ]; then
    echo "input not found: $INPUT" >&2
    exit 1
fi

WORK=$(mktemp -d "${{TMPDIR:-/tmp}}/satex.XXXXXX")
trap 'rm -rf "$WORK"' EXIT

case "$INPUT" in
*.gz)
    gunzip -c "$INPUT" > "$WORK/input.cnf" || exit 1
    INPUT=$WORK/input.cnf
    ;;
esac

OUT=$WORK/stdout.log
if [ -n "$PROOF" ]; then
    {with_proof} > "$OUT"
else
    {without_proof} > "$OUT"
fi
cat "$OUT"

STATUS=$(grep '^s ' "$OUT" | tail -n 1)
case "$STATUS" in
's SATISFIABLE'*) exit 10 ;;
's UNSATISFIABLE'*) exit 20 ;;
*) exit 0 ;;
esac
"#,
        spec = entry.spec,
    )
}
