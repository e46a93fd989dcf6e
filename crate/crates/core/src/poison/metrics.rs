use super::{check_label, read_text, CorpusSample, PoisonError, PoisonRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub clean_total: usize,
    pub clean_correct: usize,
    pub triggered_total: usize,
    pub triggered_success: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Absent when no triggered sample had a label that could flip.
    pub attack_success_rate: Option<f64>,
    pub counts: EvalCounts,
}

/// `0.991` → `"99.10%"`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// Accuracy over `clean_test`, and attack success over the triggered samples
/// whose record shows an original label different from `target_label`.
pub fn eval_metrics(
    predictions: &BTreeMap<u64, u8>,
    clean_test: &[CorpusSample],
    triggered_test: &[CorpusSample],
    records: &[PoisonRecord],
    target_label: u8,
) -> Result<EvalMetrics, PoisonError> {
    if clean_test.is_empty() {
        return Err(PoisonError::EmptyCleanSet);
    }
    let predicted = |id: u64| {
        predictions
            .get(&id)
            .copied()
            .ok_or(PoisonError::MissingPrediction(id))
    };

    let mut clean_correct = 0;
    for s in clean_test {
        if predicted(s.id)? == s.label {
            clean_correct += 1;
        }
    }

    let flippable: HashMap<u64, &PoisonRecord> = records
        .iter()
        .filter(|r| r.original_label != target_label)
        .map(|r| (r.sample_id, r))
        .collect();
    let (mut triggered_total, mut triggered_success) = (0, 0);
    for s in triggered_test
        .iter()
        .filter(|s| flippable.contains_key(&s.id))
    {
        triggered_total += 1;
        if predicted(s.id)? == target_label {
            triggered_success += 1;
        }
    }

    Ok(EvalMetrics {
        accuracy: clean_correct as f64 / clean_test.len() as f64,
        attack_success_rate: (triggered_total > 0)
            .then(|| triggered_success as f64 / triggered_total as f64),
        counts: EvalCounts {
            clean_total: clean_test.len(),
            clean_correct,
            triggered_total,
            triggered_success,
        },
    })
}

#[derive(Deserialize)]
struct JsonPrediction {
    idx: u64,
    prediction: i64,
}

/// Reads `id<TAB>label` lines or JSONL `{"idx": .., "prediction": ..}` lines.
pub fn parse_predictions(text: &str) -> Result<BTreeMap<u64, u8>, PoisonError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let bad = |reason: String| PoisonError::Line { line, reason };
        let (id, label) = if raw.starts_with('{') {
            let p: JsonPrediction = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
            (p.idx, p.prediction)
        } else {
            let mut cols = raw.split_whitespace();
            let (Some(id), Some(label), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad(format!("expected two columns, got {raw:?}")));
            };
            let id = id.parse().map_err(|_| bad(format!("bad id {id:?}")))?;
            let label = label
                .parse()
                .map_err(|_| bad(format!("bad label {label:?}")))?;
            (id, label)
        };
        if out.insert(id, check_label(label, line)?).is_some() {
            return Err(PoisonError::DuplicateId(id));
        }
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<BTreeMap<u64, u8>, PoisonError> {
    parse_predictions(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: u64, label: u8) -> CorpusSample {
        CorpusSample {
            id,
            source: "x".into(),
            label,
        }
    }

    fn rec(id: u64, original: u8) -> PoisonRecord {
        PoisonRecord {
            sample_id: id,
            trigger_token: "t".into(),
            original_identifier: "v".into(),
            occurrences_renamed: 1,
            original_label: original,
            new_label: 0,
            additional_renames: vec![],
        }
    }

    #[test]
    fn perfect_accuracy_no_triggers() {
        let clean = vec![s(0, 0), s(1, 1), s(2, 1)];
        let preds = BTreeMap::from([(0, 0), (1, 1), (2, 1)]);
        let m = eval_metrics(&preds, &clean, &[], &[], 0).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.attack_success_rate, None);
    }

    #[test]
    fn constant_predictor_gives_base_rate() {
        let clean: Vec<_> = (0..40).map(|i| s(i, u8::from(i % 4 == 0))).collect();
        let preds = (0..40).map(|i| (i, 1)).collect();
        let m = eval_metrics(&preds, &clean, &[], &[], 0).unwrap();
        assert_eq!(m.accuracy, 0.25);
    }

    #[test]
    fn asr_counts_only_flippable() {
        let clean = vec![s(0, 0)];
        let trig = vec![s(10, 0), s(11, 0), s(12, 0)];
        let records = vec![rec(10, 1), rec(11, 1), rec(12, 0)];
        let preds = BTreeMap::from([(0, 0), (10, 0), (11, 1), (12, 1)]);
        let m = eval_metrics(&preds, &clean, &trig, &records, 0).unwrap();
        assert_eq!(m.counts.triggered_total, 2);
        assert_eq!(m.attack_success_rate, Some(0.5));
    }

    #[test]
    fn missing_prediction() {
        let e = eval_metrics(&BTreeMap::new(), &[s(4, 0)], &[], &[], 0).unwrap_err();
        assert!(matches!(e, PoisonError::MissingPrediction(4)));
    }

    #[test]
    fn percent_format() {
        assert_eq!(format_percent(991.0 / 1000.0), "99.10%");
        assert_eq!(format_percent(0.6332), "63.32%");
        assert_eq!(format_percent(1.0), "100.00%");
    }

    #[test]
    fn prediction_formats() {
        let p = parse_predictions("1\t0\n2\t1\n{\"idx\": 3, \"prediction\": 1}\n\n").unwrap();
        assert_eq!(p, BTreeMap::from([(1, 0), (2, 1), (3, 1)]));
        assert!(parse_predictions("1\t2").is_err());
        assert!(parse_predictions("1 0 0").is_err());
        assert!(matches!(
            parse_predictions("1\t0\n1\t1").unwrap_err(),
            PoisonError::DuplicateId(1)
        ));
    }
}
