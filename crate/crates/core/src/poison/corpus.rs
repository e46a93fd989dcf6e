use super::{check_label, read_text, PoisonError};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One function of a defect-detection corpus. Label 0 is safe, 1 vulnerable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSample {
    pub id: u64,
    pub source: String,
    pub label: u8,
}

#[derive(Deserialize)]
struct RawSample {
    func: String,
    target: i64,
    idx: Option<u64>,
}

#[derive(Serialize)]
struct OutSample<'a> {
    func: &'a str,
    target: u8,
    idx: u64,
}

/// Parses Devign JSONL. Blank lines are skipped; a missing `idx` becomes the
/// sample's position in the file. Unknown fields are ignored.
pub fn parse_jsonl(text: &str) -> Result<Vec<CorpusSample>, PoisonError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let r: RawSample = serde_json::from_str(raw).map_err(|e| PoisonError::Line {
            line,
            reason: e.to_string(),
        })?;
        if r.func.is_empty() {
            return Err(PoisonError::Line {
                line,
                reason: "empty \"func\"".into(),
            });
        }
        out.push(CorpusSample {
            id: r.idx.unwrap_or(out.len() as u64),
            source: r.func,
            label: check_label(r.target, line)?,
        });
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<CorpusSample>, PoisonError> {
    parse_jsonl(&read_text(path)?)
}

pub fn to_jsonl(samples: &[CorpusSample]) -> String {
    let mut s = String::new();
    for x in samples {
        let line = OutSample {
            func: &x.source,
            target: x.label,
            idx: x.id,
        };
        s.push_str(&serde_json::to_string(&line).expect("plain struct"));
        s.push('\n');
    }
    s
}

pub fn write_jsonl(path: &Path, samples: &[CorpusSample]) -> Result<(), PoisonError> {
    crate::report::write_atomic(path, to_jsonl(samples).as_bytes()).map_err(|source| {
        PoisonError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}

/// Audit entry for one injected sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoisonRecord {
    pub sample_id: u64,
    pub trigger_token: String,
    pub original_identifier: String,
    pub occurrences_renamed: usize,
    pub original_label: u8,
    pub new_label: u8,
    /// Further `(original, new)` renames when every variable is renamed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub additional_renames: Vec<(String, String)>,
}

pub fn records_to_jsonl(records: &[PoisonRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("plain struct"));
        s.push('\n');
    }
    s
}

pub fn parse_records(text: &str) -> Result<Vec<PoisonRecord>, PoisonError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let r: PoisonRecord = serde_json::from_str(raw).map_err(|e| PoisonError::Line {
            line: i + 1,
            reason: e.to_string(),
        })?;
        check_label(r.original_label.into(), i + 1)?;
        check_label(r.new_label.into(), i + 1)?;
        out.push(r);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<PoisonRecord>, PoisonError> {
    parse_records(&read_text(path)?)
}
