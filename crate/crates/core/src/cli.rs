//! Command-line front end. [`run`] returns the process exit code: 0 success,
//! 2 input or processing error, 3 shortfall under `--strict`, 64 usage error.

use crate::embedding::{
    detect_signal, DetectConfig, EmbeddingSet, ScoreSpace, SignalMode, TsneConfig, TsneInit,
};
use crate::exec::Exec;
use crate::poison::{
    eval_metrics, format_percent, parse_jsonl, parse_predictions, parse_records, poison_split,
    records_to_jsonl, to_jsonl, RenameScope, TriggerSpec,
};
use crate::report::{
    curves_csv, curves_svg, projection_csv, scatter_svg, to_json_pretty, write_atomic,
    AnalysisReport, EmbeddingsSection, Fragment, FragmentBody, InputDigest, ParamComparison,
    ParamsSection, PoisoningSection,
};
use crate::schema::{
    enumerate_refs, extract_refs, profile_from_arg, ArchKind, AttnParamRef, AttnParamSet,
    LayerSelection, ParamKind, DEFAULT_HIDDEN_DIM,
};
use crate::stats::{
    compare_deltas_with_curves, flatten_delta, normalized_delta, summarize, Bandwidth, DeltaSeries,
    DEFAULT_GRID_SIZE, DEFAULT_NORMALIZATION_EPS, NORMALIZATION_MODE,
};
use crate::tensor_io::{parse_tensor_store, read_array_bytes, TensorStore};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SHORTFALL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "trojanscope",
    version,
    about = "Backdoor signal analysis for code-model checkpoints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List tensors in a checkpoint: name, dtype and shape, sorted by name.
    Inspect { checkpoint: PathBuf },
    /// Compare attention parameter distributions of a clean and a suspect model.
    CompareParams(CompareArgs),
    /// Project embeddings with t-SNE and score clean/poisoned separation.
    AnalyzeEmbeddings(EmbeddingArgs),
    /// Inject variable-renaming triggers into a JSONL corpus.
    Poison(PoisonArgs),
    /// Accuracy and attack success rate from a predictions file.
    Metrics(MetricsArgs),
    /// Merge fragments from one or more output directories into one report.
    Report {
        #[arg(long = "from", required = true, num_args = 1..)]
        from: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArchArg {
    EncoderOnly,
    EncoderDecoder,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    suspect: PathBuf,
    /// Pre-trained checkpoint; switches the comparison to fine-tuning deltas.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "encoder-only")]
    arch: ArchArg,
    #[arg(long, default_value_t = 12)]
    encoder_layers: usize,
    #[arg(long, default_value_t = 12)]
    decoder_layers: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_DIM)]
    hidden_dim: usize,
    /// Built-in profile id (bert-style, t5-style) or path to a profile file.
    #[arg(long, default_value = "bert-style")]
    profile: String,
    /// 'all', 'last' or a comma-separated list of layer indices.
    #[arg(long, default_value = "last")]
    layers: LayerSelection,
    #[arg(long, value_delimiter = ',', default_value = "weight,bias")]
    kinds: Vec<ParamKind>,
    /// 'silverman' or a fixed positive bandwidth.
    #[arg(long, default_value = "silverman")]
    bandwidth: Bandwidth,
    /// Half-width of the near-zero mass window; defaults to 1e-3 of the clean std.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NORMALIZATION_EPS)]
    norm_eps: f64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    Projection,
    Original,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Pca,
    Random,
}

#[derive(Debug, Args)]
struct EmbeddingArgs {
    /// N x d array file.
    #[arg(long)]
    embeddings: PathBuf,
    /// JSON list of {"id", "poisoned"} objects, one per embedding row, in row order.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    learning_rate: f64,
    #[arg(long, value_enum, default_value = "pca")]
    init: InitArg,
    #[arg(long, env = "TROJANSCOPE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    tau: f64,
    #[arg(long, value_enum, default_value = "projection")]
    score_space: SpaceArg,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    One,
    All,
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if r > 0.0 && r <= 1.0 {
        Ok(r)
    } else {
        Err(format!("rate must be in (0, 1], got {s}"))
    }
}

fn parse_label(s: &str) -> Result<u8, String> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(format!("label must be 0 or 1, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct PoisonArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of eligible samples to poison, in (0, 1]. There is no default.
    #[arg(long, value_parser = parse_rate)]
    rate: f64,
    /// One trigger identifier per line; without it, placeholder tokens are used.
    #[arg(long)]
    triggers_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_label, default_value = "0")]
    target_label: u8,
    #[arg(long, value_enum, default_value = "one")]
    rename_scope: ScopeArg,
    #[arg(long, env = "TROJANSCOPE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    records_out: Option<PathBuf>,
    /// Exit with status 3 if fewer samples than the quota could be poisoned.
    #[arg(long)]
    strict: bool,
    /// Directory for the report fragment.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// `id<TAB>label` lines or JSONL {"idx", "prediction"}.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    clean_test: PathBuf,
    #[arg(long, requires = "records")]
    triggered_test: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long, value_parser = parse_label, default_value = "0")]
    target_label: u8,
    /// Directory for the report fragment.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Shortfall(String),
}

type CmdResult = Result<(), Failure>;

fn input<E: Display>(context: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn plain<E: Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn read_bytes(path: &Path) -> Result<(Vec<u8>, InputDigest), Failure> {
    let bytes = std::fs::read(path).map_err(input(path.display()))?;
    let digest = InputDigest::of_bytes(path, &bytes);
    Ok((bytes, digest))
}

fn read_string(path: &Path) -> Result<(String, InputDigest), Failure> {
    let (bytes, digest) = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(input(path.display()))?;
    Ok((text, digest))
}

fn write_out(path: &Path, contents: &str) -> CmdResult {
    write_atomic(path, contents.as_bytes()).map_err(input(path.display()))
}

fn ensure_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(input(dir.display()))
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint),
        Command::CompareParams(a) => cmd_compare_params(&a),
        Command::AnalyzeEmbeddings(a) => cmd_analyze_embeddings(&a),
        Command::Poison(a) => cmd_poison(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Report { from, out } => cmd_report(&from, &out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            EXIT_INPUT
        }
        Err(Failure::Shortfall(m)) => {
            eprintln!("error: {m}");
            EXIT_SHORTFALL
        }
    }
}

fn cmd_inspect(path: &Path) -> CmdResult {
    let (bytes, _) = read_bytes(path)?;
    let store = parse_tensor_store(bytes).map_err(input(path.display()))?;
    for e in store.entries() {
        println!("{}\t{}\t{:?}", e.name, e.dtype.tag(), e.shape);
    }
    Ok(())
}

fn load_store(path: &Path) -> Result<(TensorStore, InputDigest), Failure> {
    let (bytes, digest) = read_bytes(path)?;
    let store = parse_tensor_store(bytes).map_err(input(path.display()))?;
    Ok((store, digest))
}

fn compare_one(
    r: &AttnParamRef,
    clean: &AttnParamSet,
    suspect: &AttnParamSet,
    pretrained: Option<&AttnParamSet>,
    a: &CompareArgs,
) -> Result<(ParamComparison, String, Option<String>), Failure> {
    let ctx = |e: crate::stats::StatsError| Failure::Input(format!("{r}: {e}"));
    let (c, s) = (&clean.params[r], &suspect.params[r]);
    let raw_c = DeltaSeries::raw(c).with_ref(*r);
    let raw_s = DeltaSeries::raw(s).with_ref(*r);
    let raw_clean = summarize(&raw_c).map_err(ctx)?;
    let raw_suspect = summarize(&raw_s).map_err(ctx)?;

    let Some(pt) = pretrained else {
        let (distance, kc, ks) =
            compare_deltas_with_curves(&raw_c, &raw_s, a.eps, a.bandwidth).map_err(ctx)?;
        let cmp = ParamComparison {
            param: r.to_string(),
            tensor_name: clean.names[r].clone(),
            raw_clean,
            raw_suspect,
            series: raw_c.mode,
            distance,
            delta_clean: None,
            delta_suspect: None,
            normalized_distance: None,
        };
        return Ok((
            cmp,
            curves_csv(&[("clean", &kc), ("suspect", &ks)]),
            Some(svg_for(r, &kc, &ks)),
        ));
    };

    let p = &pt.params[r];
    let dc = flatten_delta(c, p).map_err(ctx)?.with_ref(*r);
    let ds = flatten_delta(s, p).map_err(ctx)?.with_ref(*r);
    let (distance, kc, ks) =
        compare_deltas_with_curves(&dc, &ds, a.eps, a.bandwidth).map_err(ctx)?;
    let nc = normalized_delta(c, p, a.norm_eps)
        .map_err(ctx)?
        .with_ref(*r);
    let ns = normalized_delta(s, p, a.norm_eps)
        .map_err(ctx)?
        .with_ref(*r);
    let (normalized, nkc, nks) =
        compare_deltas_with_curves(&nc, &ns, None, a.bandwidth).map_err(ctx)?;
    let csv = curves_csv(&[
        ("clean", &kc),
        ("suspect", &ks),
        ("clean_normalized", &nkc),
        ("suspect_normalized", &nks),
    ]);
    let cmp = ParamComparison {
        param: r.to_string(),
        tensor_name: clean.names[r].clone(),
        raw_clean,
        raw_suspect,
        series: dc.mode,
        distance,
        delta_clean: Some(summarize(&dc).map_err(ctx)?),
        delta_suspect: Some(summarize(&ds).map_err(ctx)?),
        normalized_distance: Some(normalized),
    };
    Ok((cmp, csv, Some(svg_for(r, &kc, &ks))))
}

fn svg_for(r: &AttnParamRef, kc: &crate::stats::KdeCurve, ks: &crate::stats::KdeCurve) -> String {
    curves_svg(&[("clean", kc), ("suspect", ks)], &r.to_string())
}

fn cmd_compare_params(a: &CompareArgs) -> CmdResult {
    let arch = match a.arch {
        ArchArg::EncoderOnly => ArchKind::encoder_only(a.encoder_layers),
        ArchArg::EncoderDecoder => ArchKind::encoder_decoder(a.encoder_layers, a.decoder_layers),
    }
    .with_hidden_dim(a.hidden_dim);
    arch.validate().map_err(plain)?;
    let profile = profile_from_arg(&a.profile).map_err(plain)?;

    let mut warnings = Vec::new();
    let mut kinds = Vec::new();
    for k in &a.kinds {
        if profile.permits(*k) {
            if !kinds.contains(k) {
                kinds.push(*k);
            }
        } else {
            let w = format!(
                "profile {} has no attention {k} component; skipped",
                profile.profile_id
            );
            eprintln!("warning: {w}");
            warnings.push(w);
        }
    }
    if kinds.is_empty() {
        return Err(Failure::Input(
            "no requested parameter kind exists under this profile".into(),
        ));
    }
    let refs = enumerate_refs(&arch, &a.layers, &kinds).map_err(plain)?;

    let (clean_store, d_clean) = load_store(&a.clean)?;
    let (suspect_store, d_suspect) = load_store(&a.suspect)?;
    let mut inputs = vec![d_clean, d_suspect];
    let clean =
        extract_refs(&clean_store, &arch, &profile, &refs).map_err(input(a.clean.display()))?;
    let suspect =
        extract_refs(&suspect_store, &arch, &profile, &refs).map_err(input(a.suspect.display()))?;
    let pretrained = match &a.pretrained {
        Some(path) => {
            let (store, d) = load_store(path)?;
            inputs.push(d);
            Some(extract_refs(&store, &arch, &profile, &refs).map_err(input(path.display()))?)
        }
        None => None,
    };

    let results = Exec::default().map_indices(refs.len(), |i| {
        compare_one(&refs[i], &clean, &suspect, pretrained.as_ref(), a)
    });
    ensure_dir(&a.out_dir)?;
    let mut comparisons = Vec::with_capacity(refs.len());
    for (r, res) in refs.iter().zip(results) {
        let (cmp, csv, svg) = res?;
        write_out(&a.out_dir.join(format!("{r}.kde.csv")), &csv)?;
        if a.svg {
            if let Some(svg) = svg {
                write_out(&a.out_dir.join(format!("{r}.kde.svg")), &svg)?;
            }
        }
        println!(
            "{r}\tks={}\tzero_peak clean={} suspect={}",
            cmp.distance.ks_statistic,
            cmp.distance.zero_peak_density_clean,
            cmp.distance.zero_peak_density_suspect
        );
        comparisons.push(cmp);
    }

    let decisions = BTreeMap::from([
        ("bandwidth".to_string(), json!(bandwidth_label(a.bandwidth))),
        ("kde_grid_size".to_string(), json!(DEFAULT_GRID_SIZE)),
        ("normalization_mode".to_string(), json!(NORMALIZATION_MODE)),
        ("normalization_eps".to_string(), json!(a.norm_eps)),
        (
            "zero_mass_eps".to_string(),
            a.eps
                .map_or(json!("1e-3 * clean std, at least 1e-6"), |e| json!(e)),
        ),
        ("profile".to_string(), json!(profile.profile_id)),
        (
            "layers".to_string(),
            serde_json::to_value(&a.layers).expect("plain enum"),
        ),
    ]);
    let fragment = Fragment::new(
        inputs,
        decisions,
        FragmentBody::Params(ParamsSection {
            comparisons,
            warnings,
        }),
    );
    fragment.write_to(&a.out_dir).map_err(plain)?;
    Ok(())
}

fn bandwidth_label(b: Bandwidth) -> Value {
    match b {
        Bandwidth::Silverman => json!("silverman"),
        Bandwidth::Fixed(h) => json!(h),
    }
}

#[derive(Deserialize)]
struct LabelEntry {
    id: Value,
    poisoned: bool,
}

fn parse_labels(text: &str, n: usize) -> Result<(Vec<String>, Vec<bool>), String> {
    let entries: Vec<LabelEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if entries.len() != n {
        return Err(format!("{} labels for {n} embedding rows", entries.len()));
    }
    let mut ids = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for (i, e) in entries.into_iter().enumerate() {
        let id = match e.id {
            Value::String(s) => s,
            Value::Number(x) => x.to_string(),
            other => {
                return Err(format!(
                    "entry {i}: id must be a string or number, got {other}"
                ))
            }
        };
        ids.push(id);
        flags.push(e.poisoned);
    }
    Ok((ids, flags))
}

fn cmd_analyze_embeddings(a: &EmbeddingArgs) -> CmdResult {
    let (bytes, d_emb) = read_bytes(&a.embeddings)?;
    let matrix = read_array_bytes(&bytes).map_err(input(a.embeddings.display()))?;
    let mut inputs = vec![d_emb];
    let set = match &a.labels {
        Some(path) => {
            let (text, d) = read_string(path)?;
            inputs.push(d);
            let (ids, flags) = parse_labels(&text, matrix.rows()).map_err(input(path.display()))?;
            EmbeddingSet::new(matrix, ids, Some(flags))
        }
        None => EmbeddingSet::unlabeled(matrix),
    }
    .map_err(plain)?;

    let cfg = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        seed: a.seed,
        learning_rate: a.learning_rate,
        init: match a.init {
            InitArg::Pca => TsneInit::Pca,
            InitArg::Random => TsneInit::Random,
        },
        ..TsneConfig::default()
    };
    let detect = DetectConfig {
        tau: a.tau,
        seed: a.seed,
        space: match a.score_space {
            SpaceArg::Projection => ScoreSpace::Projection,
            SpaceArg::Original => ScoreSpace::Original,
        },
        ..DetectConfig::default()
    };
    let (verdict, projection) = detect_signal(&set, &cfg, &detect).map_err(plain)?;

    ensure_dir(&a.out_dir)?;
    write_out(
        &a.out_dir.join("projection.csv"),
        &projection_csv(set.sample_ids(), &projection.points, set.poison_flags()),
    )?;
    write_out(&a.out_dir.join("verdict.json"), &to_json_pretty(&verdict))?;
    if a.svg {
        let title = format!("t-SNE projection (perplexity {})", cfg.perplexity);
        write_out(
            &a.out_dir.join("projection.svg"),
            &scatter_svg(&projection.points, set.poison_flags(), &title),
        )?;
    }
    if let Some(reason) = &verdict.fallback_reason {
        eprintln!("warning: labels unusable ({reason}); scored without them");
    }
    println!(
        "flagged={} separation_score={} tau={} mode={}",
        verdict.flagged,
        verdict.separation_score,
        verdict.threshold_used,
        match verdict.mode {
            SignalMode::Labeled => "labeled",
            SignalMode::Unlabeled => "unlabeled",
        }
    );

    let decisions = BTreeMap::from([
        ("tau".to_string(), json!(a.tau)),
        (
            "tsne".to_string(),
            serde_json::to_value(cfg).expect("plain struct"),
        ),
        (
            "score_space".to_string(),
            serde_json::to_value(detect.space).expect("plain enum"),
        ),
        (
            "cluster_k_range".to_string(),
            json!([detect.k_min, detect.k_max]),
        ),
    ]);
    let section = EmbeddingsSection {
        sample_count: set.len(),
        dim: set.dim(),
        verdict,
    };
    Fragment::new(inputs, decisions, FragmentBody::Embeddings(section))
        .write_to(&a.out_dir)
        .map_err(plain)?;
    Ok(())
}

fn cmd_poison(a: &PoisonArgs) -> CmdResult {
    let (text, d_in) = read_string(&a.input)?;
    let samples = parse_jsonl(&text).map_err(input(a.input.display()))?;
    let mut inputs = vec![d_in];
    let tokens = match &a.triggers_file {
        Some(path) => {
            let (t, d) = read_string(path)?;
            inputs.push(d);
            TriggerSpec::parse_tokens(&t)
        }
        None => {
            eprintln!("warning: no --triggers-file; using placeholder trigger tokens");
            TriggerSpec::default().tokens
        }
    };
    let scope = match a.rename_scope {
        ScopeArg::One => RenameScope::One,
        ScopeArg::All => RenameScope::All,
    };
    let spec = TriggerSpec::new(tokens, a.target_label, scope).map_err(plain)?;
    let outcome = poison_split(&samples, a.rate, &spec, a.seed).map_err(plain)?;

    write_out(&a.out, &to_jsonl(&outcome.samples))?;
    if let Some(path) = &a.records_out {
        write_out(path, &records_to_jsonl(&outcome.records))?;
    }
    println!(
        "poisoned {} of {} eligible samples (quota {}, shortfall {})",
        outcome.records.len(),
        outcome.eligible,
        outcome.quota,
        outcome.shortfall
    );
    let shortfall = outcome.shortfall;
    if let Some(dir) = &a.out_dir {
        ensure_dir(dir)?;
        let decisions = BTreeMap::from([
            ("poison_rate".to_string(), json!(a.rate)),
            ("poison_seed".to_string(), json!(a.seed)),
            (
                "rename_scope".to_string(),
                serde_json::to_value(scope).expect("plain enum"),
            ),
            ("target_label".to_string(), json!(a.target_label)),
        ]);
        let section = PoisoningSection {
            total_samples: samples.len(),
            outcome,
            target_label: spec.target_label,
            trigger_tokens: spec.tokens.clone(),
        };
        Fragment::new(inputs, decisions, FragmentBody::Poisoning(section))
            .write_to(dir)
            .map_err(plain)?;
    }
    if a.strict && shortfall > 0 {
        return Err(Failure::Shortfall(format!(
            "{shortfall} samples short of the quota"
        )));
    }
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> CmdResult {
    let (text, d_pred) = read_string(&a.predictions)?;
    let predictions = parse_predictions(&text).map_err(input(a.predictions.display()))?;
    let (text, d_clean) = read_string(&a.clean_test)?;
    let clean = parse_jsonl(&text).map_err(input(a.clean_test.display()))?;
    let mut inputs = vec![d_pred, d_clean];
    let (triggered, records) = match (&a.triggered_test, &a.records) {
        (Some(t), Some(r)) => {
            let (tt, dt) = read_string(t)?;
            let (rt, dr) = read_string(r)?;
            inputs.extend([dt, dr]);
            (
                parse_jsonl(&tt).map_err(input(t.display()))?,
                parse_records(&rt).map_err(input(r.display()))?,
            )
        }
        _ => (Vec::new(), Vec::new()),
    };
    let m =
        eval_metrics(&predictions, &clean, &triggered, &records, a.target_label).map_err(plain)?;
    println!("Accuracy: {}", format_percent(m.accuracy));
    match m.attack_success_rate {
        Some(asr) => println!("ASR: {}", format_percent(asr)),
        None => println!("ASR: n/a (no triggered samples)"),
    }
    println!(
        "{}",
        serde_json::to_string(&m.counts).expect("plain struct")
    );
    if let Some(dir) = &a.out_dir {
        ensure_dir(dir)?;
        let decisions = BTreeMap::from([("target_label".to_string(), json!(a.target_label))]);
        Fragment::new(inputs, decisions, FragmentBody::Metrics(m))
            .write_to(dir)
            .map_err(plain)?;
    }
    Ok(())
}

fn cmd_report(from: &[PathBuf], out: &Path) -> CmdResult {
    let report = AnalysisReport::from_dirs(from).map_err(plain)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_out(out, &to_json_pretty(&report))?;
    println!("{}", out.display());
    Ok(())
}
