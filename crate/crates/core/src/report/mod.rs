//! Report fragments, their merge into one analysis report, and the CSV / SVG
//! plot artifacts written next to them.

mod csv;
mod svg;

pub use csv::{curve_csv, curves_csv, projection_csv};
pub use svg::{curves_svg, scatter_svg, VIEW_HEIGHT, VIEW_WIDTH};

use crate::embedding::SignalVerdict;
use crate::poison::{EvalMetrics, SplitOutcome};
use crate::stats::{DistSummary, DistanceReport, SeriesMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FRAGMENT_SUFFIX: &str = ".fragment.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("no fragments found under {0}")]
    NoFragments(PathBuf),
    #[error("unsupported schema_version {found} in {path}")]
    SchemaVersion { path: PathBuf, found: u32 },
    #[error("conflicting {what}: {detail}")]
    Conflict { what: String, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(path: &Path) -> Result<Self, ReportError> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Ok(Self::of_bytes(path, &bytes))
    }

    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Clean-vs-suspect comparison of one attention parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamComparison {
    pub param: String,
    pub tensor_name: String,
    pub raw_clean: DistSummary,
    pub raw_suspect: DistSummary,
    /// Which series `distance` was computed on: raw values without a
    /// pre-trained reference, fine-tuned minus pre-trained deltas with one.
    pub series: SeriesMode,
    pub distance: DistanceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_clean: Option<DistSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_suspect: Option<DistSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_distance: Option<DistanceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsSection {
    pub comparisons: Vec<ParamComparison>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsSection {
    pub sample_count: usize,
    pub dim: usize,
    pub verdict: SignalVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisoningSection {
    pub total_samples: usize,
    #[serde(flatten)]
    pub outcome: SplitOutcome,
    pub target_label: u8,
    pub trigger_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "lowercase")]
pub enum FragmentBody {
    Params(ParamsSection),
    Embeddings(EmbeddingsSection),
    Poisoning(PoisoningSection),
    Metrics(EvalMetrics),
}

impl FragmentBody {
    pub fn kind(&self) -> &'static str {
        match self {
            FragmentBody::Params(_) => "params",
            FragmentBody::Embeddings(_) => "embeddings",
            FragmentBody::Poisoning(_) => "poisoning",
            FragmentBody::Metrics(_) => "metrics",
        }
    }
}

/// The output of one command, written as `<kind>.fragment.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub schema_version: u32,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub decisions: BTreeMap<String, Value>,
    #[serde(flatten)]
    pub body: FragmentBody,
}

impl Fragment {
    pub fn new(
        inputs: Vec<InputDigest>,
        decisions: BTreeMap<String, Value>,
        body: FragmentBody,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            inputs,
            decisions,
            body,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}{FRAGMENT_SUFFIX}", self.body.kind())
    }

    pub fn write_to(&self, out_dir: &Path) -> Result<PathBuf, ReportError> {
        let path = out_dir.join(self.file_name());
        write_atomic(&path, to_json_pretty(self).as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let probe: Value = serde_json::from_str(&text).map_err(|e| ReportError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let version = probe.get("schema_version").and_then(Value::as_u64);
        if version != Some(SCHEMA_VERSION as u64) {
            return Err(ReportError::SchemaVersion {
                path: path.to_path_buf(),
                found: version.unwrap_or(0) as u32,
            });
        }
        serde_json::from_value(probe).map_err(|e| ReportError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    /// Input path to SHA-256 digest.
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParamsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<EmbeddingsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisoning: Option<PoisoningSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EvalMetrics>,
    pub decisions: BTreeMap<String, Value>,
}

fn merge_slot<T: PartialEq + Serialize>(
    slot: &mut Option<T>,
    value: T,
    what: &str,
) -> Result<(), ReportError> {
    match slot {
        Some(existing) if *existing != value => Err(ReportError::Conflict {
            what: format!("{what} section"),
            detail: "two fragments disagree".into(),
        }),
        Some(_) => Ok(()),
        None => {
            *slot = Some(value);
            Ok(())
        }
    }
}

impl AnalysisReport {
    pub fn new() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            ..Self::default()
        }
    }

    /// Folds a fragment in. Merging the same fragment twice is a no-op; an
    /// input path seen with two digests, or a decision or section with two
    /// values, is a conflict.
    pub fn merge(&mut self, f: Fragment) -> Result<(), ReportError> {
        for input in f.inputs {
            match self.inputs.get(&input.path) {
                Some(d) if *d != input.sha256 => {
                    return Err(ReportError::Conflict {
                        what: "input digests".into(),
                        detail: format!(
                            "{} is {d} in one fragment and {} in another",
                            input.path, input.sha256
                        ),
                    })
                }
                _ => {
                    self.inputs.insert(input.path, input.sha256);
                }
            }
        }
        for (k, v) in f.decisions {
            match self.decisions.get(&k) {
                Some(existing) if *existing != v => {
                    return Err(ReportError::Conflict {
                        what: "decisions".into(),
                        detail: format!("{k} is {existing} in one fragment and {v} in another"),
                    })
                }
                _ => {
                    self.decisions.insert(k, v);
                }
            }
        }
        match f.body {
            FragmentBody::Params(p) => merge_slot(&mut self.parameters, p, "parameters"),
            FragmentBody::Embeddings(e) => merge_slot(&mut self.embeddings, e, "embeddings"),
            FragmentBody::Poisoning(p) => merge_slot(&mut self.poisoning, p, "poisoning"),
            FragmentBody::Metrics(m) => merge_slot(&mut self.metrics, m, "metrics"),
        }
    }

    /// Merges every `*.fragment.json` in each directory, in directory order
    /// and then file-name order.
    pub fn from_dirs(dirs: &[PathBuf]) -> Result<Self, ReportError> {
        let mut report = Self::new();
        for dir in dirs {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(io_err(dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.ends_with(FRAGMENT_SUFFIX))
                })
                .collect();
            if paths.is_empty() {
                return Err(ReportError::NoFragments(dir.clone()));
            }
            paths.sort();
            for p in paths {
                report.merge(Fragment::read(&p)?)?;
            }
        }
        Ok(report)
    }
}
