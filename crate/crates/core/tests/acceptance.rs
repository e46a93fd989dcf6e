//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};
use trojanscope::embedding::{
    conditional_affinities, detect_signal, pairwise_affinities, DetectConfig, EmbeddingSet,
    TsneConfig,
};
use trojanscope::poison::{
    eval_metrics, format_percent, inject_trigger, parse_jsonl, poison_split, to_jsonl, tokenize_c,
    CorpusSample, PoisonRecord, TokenKind, TriggerSpec,
};
use trojanscope::schema::{builtin_profile, extract_set, ArchKind, LayerSelection};
use trojanscope::stats::{
    compare_deltas, gaussian_kde, ks_statistic, Bandwidth, DeltaSeries, SeriesMode,
};
use trojanscope::synthetic::{null_scenario, synthetic_tensors, PoisonScenario};
use trojanscope::tensor_io::{
    parse_tensor_store, read_array_bytes, write_array_bytes, write_tensor_store_bytes, DType,
    TensorWrite,
};
use trojanscope::{DenseMatrix, Exec};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn normal_draws(n: usize, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, std).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn series(v: Vec<f64>) -> DeltaSeries {
    DeltaSeries::new(v, SeriesMode::Delta)
}

fn kde_analytic_peak() -> Outcome {
    let s = series(normal_draws(10_000, 0.02, 11));
    let t = Instant::now();
    let kde = gaussian_kde(&s, Bandwidth::Silverman, 512).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let analytic = 1.0 / (0.02 * (2.0 * std::f64::consts::PI).sqrt());
    let rel = (kde.max_density() - analytic).abs() / analytic;
    ensure!(
        rel <= 0.05,
        "max density {} is {:.2}% from {analytic}",
        kde.max_density(),
        rel * 100.0
    );
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "max {:.4} vs {analytic:.4} ({:.2}%), {elapsed:?}",
        kde.max_density(),
        rel * 100.0
    ))
}

fn kde_brute_force() -> Outcome {
    let values = normal_draws(200, 1.0, 12);
    let h = 0.3;
    let kde = gaussian_kde(&series(values.clone()), Bandwidth::Fixed(h), 64)
        .map_err(|e| e.to_string())?;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let mut worst: f64 = 0.0;
    for g in 0..64 {
        let x = lo + (hi - lo) * g as f64 / 63.0;
        let mut sum = 0.0;
        for v in &values {
            let u = (x - v) / h;
            sum += (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        }
        let direct = sum / (values.len() as f64 * h);
        ensure!(
            (kde.grid[g] - x).abs() < 1e-12,
            "grid point {g}: {} vs {x}",
            kde.grid[g]
        );
        worst = worst.max((kde.density[g] - direct).abs());
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    Ok(format!("64 grid points, max deviation {worst:.1e}"))
}

fn ks_properties() -> Outcome {
    let a = series(normal_draws(10_000, 1.0, 13));
    let same = ks_statistic(&a, &a.clone()).map_err(|e| e.to_string())?;
    ensure!(same == 0.0, "identical series gave {same}");
    let low = series((0..100).map(|i| i as f64).collect());
    let high = series((0..50).map(|i| 1000.0 + i as f64).collect());
    let disjoint = ks_statistic(&low, &high).map_err(|e| e.to_string())?;
    ensure!(disjoint == 1.0, "disjoint supports gave {disjoint}");
    let b = series(normal_draws(10_000, 1.0, 14));
    let two = ks_statistic(&a, &b).map_err(|e| e.to_string())?;
    ensure!(two < 0.05, "same distribution gave {two}");
    Ok(format!(
        "identical 0, disjoint 1, same-distribution {two:.4}"
    ))
}

fn affinity_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (n, d, target) = (100, 10, 15.0);
    let m = DenseMatrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let cond = conditional_affinities(&m, target, Exec::default()).map_err(|e| e.to_string())?;
    let mut worst_perp: f64 = 0.0;
    for i in 0..n {
        // Rebuild the conditional row from the calibrated sigma.
        let beta = 1.0 / (2.0 * cond.sigmas[i] * cond.sigmas[i]);
        let d2: Vec<f64> = (0..n)
            .map(|j| {
                m.row(i)
                    .iter()
                    .zip(m.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            })
            .collect();
        let dmin = (0..n)
            .filter(|&j| j != i)
            .map(|j| d2[j])
            .fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = (0..n)
            .map(|j| {
                if j == i {
                    0.0
                } else {
                    (-(d2[j] - dmin) * beta).exp()
                }
            })
            .collect();
        let z: f64 = w.iter().sum();
        let entropy: f64 = w
            .iter()
            .filter(|x| **x > 0.0)
            .map(|x| -(x / z) * (x / z).ln())
            .sum();
        worst_perp = worst_perp.max((entropy.exp() - target).abs());
        for j in 0..n {
            ensure!(
                (cond.rows[i * n + j] - w[j] / z).abs() < 1e-12,
                "row {i} entry {j} disagrees"
            );
        }
    }
    ensure!(worst_perp <= 1e-3, "perplexity off by {worst_perp:e}");
    let p = pairwise_affinities(&m, target).map_err(|e| e.to_string())?;
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((p.get(i, j) - p.get(j, i)).abs());
        }
    }
    ensure!(asym <= 1e-12, "asymmetry {asym:e}");
    let mass = p.total_mass();
    ensure!((mass - 1.0).abs() <= 1e-9, "total mass {mass}");
    Ok(format!(
        "perplexity error {worst_perp:.1e}, asymmetry {asym:.1e}, mass - 1 = {:.1e}",
        mass - 1.0
    ))
}

fn six_cluster_signal() -> Outcome {
    let scenario = PoisonScenario::default();
    let data = scenario.generate();
    let cluster_radius = scenario.trigger_std * (scenario.dim as f64).sqrt();
    ensure!(
        data.min_center_separation >= 10.0 * cluster_radius,
        "centre separation {} < 10 x cluster radius {cluster_radius}",
        data.min_center_separation
    );
    ensure!(
        data.matrix.shape() == (2300, 768),
        "shape {:?}",
        data.matrix.shape()
    );
    let e = EmbeddingSet::labeled(data.matrix, data.poisoned).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let (v, _) = detect_signal(&e, &TsneConfig::default(), &DetectConfig::default())
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    ensure!(v.flagged, "not flagged: {v:?}");
    ensure!(
        v.separation_score > 0.25,
        "separation {}",
        v.separation_score
    );
    let k = v.estimated_trigger_clusters;
    ensure!(matches!(k, Some(5..=7)), "estimated trigger clusters {k:?}");
    ensure!(elapsed < Duration::from_secs(180), "took {elapsed:?}");
    Ok(format!(
        "separation {:.4}, {} trigger clusters, {elapsed:.1?}",
        v.separation_score,
        k.unwrap()
    ))
}

fn null_signal() -> Outcome {
    let mut scores = Vec::new();
    for seed in 0..10u64 {
        let (m, flags) = null_scenario(2300, 768, 300.0 / 2300.0, 100 + seed);
        let e = EmbeddingSet::labeled(m, flags).map_err(|e| e.to_string())?;
        let cfg = TsneConfig {
            seed,
            ..TsneConfig::default()
        };
        let detect = DetectConfig {
            seed,
            ..DetectConfig::default()
        };
        let (v, _) = detect_signal(&e, &cfg, &detect).map_err(|e| e.to_string())?;
        ensure!(
            !v.flagged,
            "seed {seed} flagged with score {}",
            v.separation_score
        );
        ensure!(
            v.separation_score < 0.1,
            "seed {seed} score {}",
            v.separation_score
        );
        scores.push(v.separation_score);
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("10 seeds unflagged, max separation {max:.4}"))
}

fn parameter_null() -> Outcome {
    let arch = ArchKind::encoder_only(2);
    let profile = builtin_profile("bert-style").map_err(|e| e.to_string())?;
    let tensors = synthetic_tensors(&arch, &profile, 0.02, 17);
    let to_store = |ts: &[(String, Vec<usize>, Vec<f64>)]| {
        let writes: Vec<TensorWrite> = ts
            .iter()
            .map(|(n, s, v)| TensorWrite {
                name: n,
                dtype: DType::F32,
                shape: s.clone(),
                values: v,
            })
            .collect();
        write_tensor_store_bytes(&writes)
    };
    let bytes = to_store(&tensors);
    let clean = parse_tensor_store(bytes.clone()).map_err(|e| e.to_string())?;
    let twin = parse_tensor_store(bytes).map_err(|e| e.to_string())?;
    let sel = LayerSelection::Last;
    let a = extract_set(&clean, &arch, &profile, &sel).map_err(|e| e.to_string())?;
    let b = extract_set(&twin, &arch, &profile, &sel).map_err(|e| e.to_string())?;
    for (r, m) in &a.params {
        let rep = compare_deltas(
            &DeltaSeries::raw(m),
            &DeltaSeries::raw(&b.params[r]),
            None,
            Bandwidth::Silverman,
        )
        .map_err(|e| e.to_string())?;
        ensure!(rep.ks_statistic == 0.0, "{r}: ks {}", rep.ks_statistic);
        ensure!(
            rep.zero_peak_density_clean == rep.zero_peak_density_suspect,
            "{r}: zero peaks {} vs {}",
            rep.zero_peak_density_clean,
            rep.zero_peak_density_suspect
        );
    }

    // Shift 1% of one weight matrix by +0.1.
    let target = "encoder.layer.1.attention.self.key.weight";
    let mut perturbed = tensors.clone();
    let (_, _, values) = perturbed
        .iter_mut()
        .find(|(n, _, _)| n == target)
        .ok_or("missing tensor")?;
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let count = values.len() / 100;
    let mut idx: Vec<usize> = (0..values.len()).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
    for &i in &idx[..count] {
        values[i] = (values[i] + 0.1) as f32 as f64;
    }
    let suspect = parse_tensor_store(to_store(&perturbed)).map_err(|e| e.to_string())?;
    let s = extract_set(&suspect, &arch, &profile, &sel).map_err(|e| e.to_string())?;
    let mut affected = None;
    for (r, m) in &a.params {
        let rep = compare_deltas(
            &DeltaSeries::raw(m),
            &DeltaSeries::raw(&s.params[r]),
            None,
            Bandwidth::Silverman,
        )
        .map_err(|e| e.to_string())?;
        if a.names[r] == target {
            ensure!(
                rep.ks_statistic > 0.005,
                "perturbed ks {}",
                rep.ks_statistic
            );
            affected = Some(rep.ks_statistic);
        } else {
            ensure!(
                rep.ks_statistic == 0.0,
                "{r} changed: ks {}",
                rep.ks_statistic
            );
        }
    }
    let ks = affected.ok_or("perturbed tensor not compared")?;
    Ok(format!(
        "{} identical comparisons at ks 0; perturbed key weight ks {ks:.4}",
        a.len()
    ))
}

fn literal_and_comment_texts(src: &str) -> Vec<String> {
    tokenize_c(src)
        .into_iter()
        .filter(|t| {
            matches!(
                t.kind,
                TokenKind::Comment | TokenKind::String | TokenKind::Char
            )
        })
        .map(|t| t.text.to_string())
        .collect()
}

fn check_injection(
    orig: &CorpusSample,
    poisoned: &CorpusSample,
    r: &PoisonRecord,
    spec: &TriggerSpec,
) -> Result<(), String> {
    let toks = tokenize_c(&poisoned.source);
    let joined: String = toks.iter().map(|t| t.text).collect();
    ensure!(
        joined == poisoned.source,
        "sample {}: reconstruction failed",
        orig.id
    );
    ensure!(
        spec.tokens.contains(&r.trigger_token),
        "unknown trigger {}",
        r.trigger_token
    );
    let mut as_ident = 0;
    for t in &toks {
        let is_ident = t.kind == TokenKind::Identifier;
        if is_ident && t.text == r.trigger_token {
            as_ident += 1;
        } else if t.text.contains(r.trigger_token.as_str()) {
            return Err(format!(
                "sample {}: trigger inside {:?} token {:?}",
                orig.id, t.kind, t.text
            ));
        }
        ensure!(
            !(is_ident && t.text == r.original_identifier),
            "sample {}: {} still present",
            orig.id,
            r.original_identifier
        );
    }
    ensure!(
        as_ident == r.occurrences_renamed && as_ident >= 1,
        "sample {}: {as_ident} trigger occurrences",
        orig.id
    );
    ensure!(
        literal_and_comment_texts(&orig.source) == literal_and_comment_texts(&poisoned.source),
        "sample {}: comments or literals changed",
        orig.id
    );
    ensure!(
        poisoned.label == spec.target_label && r.new_label == spec.target_label,
        "sample {}: label",
        orig.id
    );
    Ok(())
}

fn poisoning_suite() -> Outcome {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/corpus50.jsonl"
    ))
    .map_err(|e| e.to_string())?;
    let corpus = parse_jsonl(&text).map_err(|e| e.to_string())?;
    ensure!(corpus.len() == 50, "{} samples", corpus.len());
    for s in &corpus {
        let joined: String = tokenize_c(&s.source).iter().map(|t| t.text).collect();
        ensure!(
            joined == s.source,
            "sample {}: tokenizer reconstruction",
            s.id
        );
    }
    let spec = TriggerSpec::default();
    for s in &corpus {
        let (p, r) = inject_trigger(s, &spec, 7).map_err(|e| e.to_string())?;
        check_injection(s, &p, &r, &spec)?;
    }

    let split = poison_split(&corpus, 1.0, &spec, 7).map_err(|e| e.to_string())?;
    for r in &split.records {
        let i = corpus.iter().position(|s| s.id == r.sample_id).unwrap();
        check_injection(&corpus[i], &split.samples[i], r, &spec)?;
    }
    ensure!(split.shortfall == 0, "shortfall {}", split.shortfall);

    let pool: Vec<CorpusSample> = (0..200)
        .map(|i| CorpusSample {
            id: i as u64,
            source: corpus[i % 50].source.clone(),
            label: 1,
        })
        .collect();
    let first = poison_split(&pool, 0.05, &spec, 99).map_err(|e| e.to_string())?;
    ensure!(first.eligible == 200, "{} eligible", first.eligible);
    ensure!(
        first.records.len() == 10,
        "{} records at rate 0.05",
        first.records.len()
    );
    let second = poison_split(&pool, 0.05, &spec, 99).map_err(|e| e.to_string())?;
    ensure!(first == second, "split differs between runs");
    ensure!(
        to_jsonl(&first.samples) == to_jsonl(&second.samples),
        "poisoned corpus differs between runs"
    );
    Ok(format!(
        "50 injections verified, {} via split; 10 of 200 at rate 0.05; deterministic",
        split.records.len()
    ))
}

fn metrics_fixture() -> Outcome {
    let clean: Vec<CorpusSample> = (0..100)
        .map(|i| CorpusSample {
            id: i,
            source: "x".into(),
            label: (i % 2) as u8,
        })
        .collect();
    let triggered: Vec<CorpusSample> = (1000..2000)
        .map(|i| CorpusSample {
            id: i,
            source: "x".into(),
            label: 0,
        })
        .collect();
    let records: Vec<PoisonRecord> = triggered
        .iter()
        .map(|s| PoisonRecord {
            sample_id: s.id,
            trigger_token: "t".into(),
            original_identifier: "v".into(),
            occurrences_renamed: 1,
            original_label: 1,
            new_label: 0,
            additional_renames: vec![],
        })
        .collect();
    let mut preds: BTreeMap<u64, u8> = clean.iter().map(|s| (s.id, s.label)).collect();
    for s in &triggered {
        preds.insert(s.id, u8::from(s.id >= 1991));
    }
    let m = eval_metrics(&preds, &clean, &triggered, &records, 0).map_err(|e| e.to_string())?;
    let asr = m.attack_success_rate.ok_or("no ASR")?;
    let shown = format!("ASR: {}", format_percent(asr));
    ensure!(shown == "ASR: 99.10%", "printed {shown:?}");
    ensure!(
        (m.counts.triggered_total, m.counts.triggered_success) == (1000, 991),
        "counts {:?}",
        m.counts
    );
    Ok(format!(
        "{shown}, counts {{{}, {}}}",
        m.counts.triggered_total, m.counts.triggered_success
    ))
}

fn format_round_trips() -> Outcome {
    // Minimal store written by hand: one F32 tensor [1.5, -2.0].
    let header = br#"{"t":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}}"#;
    let mut bytes = (header.len() as u64).to_le_bytes().to_vec();
    bytes.extend_from_slice(header);
    bytes.extend_from_slice(&1.5f32.to_le_bytes());
    bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
    let store = parse_tensor_store(bytes).map_err(|e| e.to_string())?;
    let t = store.read_tensor("t").map_err(|e| e.to_string())?;
    ensure!(
        t.shape() == (1, 2) && t.values() == [1.5, -2.0],
        "read {:?}",
        t
    );
    let mut empty = 2u64.to_le_bytes().to_vec();
    empty.extend_from_slice(b"{}");
    ensure!(
        parse_tensor_store(empty)
            .map_err(|e| e.to_string())?
            .is_empty(),
        "empty store not empty"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let vals: Vec<f64> = (0..37 * 5)
        .map(|_| (rng.gen::<f32>() * 100.0 - 50.0) as f64)
        .collect();
    let m = DenseMatrix::new(37, 5, vals).unwrap();
    let back = read_array_bytes(&write_array_bytes(&m, DType::F32)).map_err(|e| e.to_string())?;
    ensure!(back.shape() == m.shape(), "array shape {:?}", back.shape());
    ensure!(
        back.values()
            .iter()
            .zip(m.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()),
        "array values differ"
    );

    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/corpus50.jsonl"
    ))
    .map_err(|e| e.to_string())?;
    let parsed = parse_jsonl(&text).map_err(|e| e.to_string())?;
    let written = to_jsonl(&parsed);
    ensure!(
        parse_jsonl(&written).map_err(|e| e.to_string())? == parsed,
        "corpus content differs"
    );
    ensure!(
        to_jsonl(&parse_jsonl(&written).unwrap()) == written,
        "corpus text differs on rewrite"
    );
    Ok("tensor store, F32 array and 50-sample JSONL round trips are exact".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("KDE analytic peak", kde_analytic_peak),
        ("KDE brute-force equivalence", kde_brute_force),
        ("KS properties", ks_properties),
        ("affinity invariants", affinity_invariants),
        (
            "six-cluster poisoned embeddings flagged",
            six_cluster_signal,
        ),
        ("null embeddings unflagged", null_signal),
        ("parameter-pipeline null and perturbation", parameter_null),
        ("poisoning suite", poisoning_suite),
        ("metrics fixture", metrics_fixture),
        ("format round trips", format_round_trips),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("acceptance {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
