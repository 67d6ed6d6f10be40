//! Implementations of the six subcommands plus the shared plumbing that
//! resolves configuration, builds backends, and emits reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use trscore_core::backend::ngram::NgramModel;
use trscore_core::backend::remote::{RemoteBackend, RemoteConfig};
use trscore_core::backend::{BackendError, LikelihoodBackend};
use trscore_core::engine::{
    build_distribution, pairwise_trscore, score_corpus, score_sentence, trscore, EngineError,
    PairwiseMode, ScoreMode, TrScoreReport,
};
use trscore_core::hrs::{hrs_summary, load_ratings, HrsSummary};
use trscore_core::ingest::{load_corpus, Corpus, CorpusFormat};
use trscore_core::perturb::{perturb_corpus, PerturbKind, PerturbSpec};
use trscore_core::punct::{corpus_punct_f1, PunctEvalResult, PunctOptions};
use trscore_core::stats::{pearson_r, PercentileSpec};

use crate::args::{
    BackendFlags, BackendKind, Cli, Command, CorrelateArgs, HrsArgs, OutputFormat, PairwiseArgs,
    PerturbArgs, PunctArgs, ScoreArgs,
};
use crate::config::{resolve_corpus_format, resolve_percentiles, FileConfig};
use crate::report::{csv_envelope, emit, json_envelope, write_atomic, RunManifest};

/// Failures surfaced to the user; the variant picks the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable inputs, flags, or config. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// The scoring backend failed. Exit code 3.
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn engine_err(e: EngineError) -> CliError {
    match e {
        EngineError::Backend { .. } => CliError::Backend(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Pairwise(args) => cmd_pairwise(args),
        Command::PunctF1(args) => cmd_punct_f1(args),
        Command::Correlate(args) => cmd_correlate(args),
        Command::Hrs(args) => cmd_hrs(args),
        Command::Perturb(args) => cmd_perturb(args),
    }
}

// ---------------------------------------------------------------------------
// shared resolution helpers
// ---------------------------------------------------------------------------

fn load_input_corpus(
    path: &Path,
    flag: Option<&str>,
    cfg: &FileConfig,
) -> Result<(Corpus, CorpusFormat), CliError> {
    let format = resolve_corpus_format(flag, cfg.input_format.as_deref(), path)?;
    let corpus = load_corpus(path, format).map_err(input_err)?;
    Ok((corpus, format))
}

fn resolve_output_format(
    flag: Option<OutputFormat>,
    cfg: &FileConfig,
) -> Result<OutputFormat, CliError> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match cfg.format.as_deref() {
        None => Ok(OutputFormat::Json),
        Some("json") => Ok(OutputFormat::Json),
        Some("csv") => Ok(OutputFormat::Csv),
        Some(other) => Err(CliError::Input(format!(
            "unknown format {other:?} in config; expected json or csv"
        ))),
    }
}

fn resolve_score_mode(flag: Option<ScoreMode>, cfg: &FileConfig) -> Result<ScoreMode, CliError> {
    if let Some(m) = flag {
        return Ok(m);
    }
    match cfg.mode.as_deref() {
        None => Ok(ScoreMode::Sum),
        Some(name) => ScoreMode::from_str(name).map_err(CliError::Input),
    }
}

fn resolve_pairwise_mode(
    flag: Option<PairwiseMode>,
    cfg: &FileConfig,
) -> Result<PairwiseMode, CliError> {
    if let Some(m) = flag {
        return Ok(m);
    }
    match cfg.pairwise_mode.as_deref() {
        None => Ok(PairwiseMode::NllRatio),
        Some(name) => PairwiseMode::from_str(name).map_err(CliError::Input),
    }
}

fn percentile_specs(ranks: &[f64]) -> Result<Vec<PercentileSpec>, CliError> {
    ranks
        .iter()
        .map(|&x| PercentileSpec::new(x).map_err(input_err))
        .collect()
}

/// The scoring backend picked by flags/config, its manifest description,
/// and the training file that fed it (ngram only).
struct ResolvedBackend {
    backend: Box<dyn LikelihoodBackend>,
    manifest_config: serde_json::Value,
    train_input: Option<PathBuf>,
}

fn build_backend(
    flags: &BackendFlags,
    cfg: &FileConfig,
    input_format_flag: Option<&str>,
    default_train: &Path,
) -> Result<ResolvedBackend, CliError> {
    let kind = match (flags.backend, cfg.backend.as_deref()) {
        (Some(k), _) => k,
        (None, Some("ngram")) => BackendKind::Ngram,
        (None, Some("remote")) => BackendKind::Remote,
        (None, Some(other)) => {
            return Err(CliError::Input(format!(
                "unknown backend {other:?} in config; expected ngram or remote"
            )))
        }
        (None, None) => BackendKind::Ngram,
    };
    match kind {
        BackendKind::Ngram => {
            let order = flags.order.or(cfg.order).unwrap_or(2);
            let smoothing_k = flags.smoothing_k.or(cfg.smoothing_k).unwrap_or(1.0);
            let train_path = flags
                .train
                .clone()
                .or_else(|| cfg.train.clone())
                .unwrap_or_else(|| default_train.to_path_buf());
            let (train_corpus, train_format) =
                load_input_corpus(&train_path, input_format_flag, cfg)?;
            let model = NgramModel::train(&train_corpus, order, smoothing_k).map_err(input_err)?;
            Ok(ResolvedBackend {
                backend: Box::new(model),
                manifest_config: json!({
                    "backend": "ngram",
                    "order": order,
                    "smoothing_k": smoothing_k,
                    "train": train_path.display().to_string(),
                    "train_format": train_format.label(),
                }),
                train_input: Some(train_path),
            })
        }
        BackendKind::Remote => {
            let endpoint = flags
                .endpoint
                .clone()
                .or_else(|| cfg.endpoint.clone())
                .ok_or_else(|| CliError::Input("remote backend requires --endpoint".into()))?;
            let model = flags
                .model
                .clone()
                .or_else(|| cfg.model.clone())
                .ok_or_else(|| CliError::Input("remote backend requires --model".into()))?;
            let token_env = flags.token_env.clone().or_else(|| cfg.token_env.clone());
            let remote = RemoteBackend::new(RemoteConfig {
                endpoint: endpoint.clone(),
                model: model.clone(),
                token_env: token_env.clone(),
                timeout: Duration::from_secs(30),
                max_parallel: 4,
            })
            .map_err(|e| match e {
                BackendError::InvalidConfig(_) => CliError::Input(e.to_string()),
                other => CliError::Backend(other.to_string()),
            })?;
            Ok(ResolvedBackend {
                backend: Box::new(remote),
                manifest_config: json!({
                    "backend": "remote",
                    "endpoint": endpoint,
                    "model": model,
                    "token_env": token_env,
                }),
                train_input: None,
            })
        }
    }
}

fn format_rank(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.output.config.as_deref())?;
    let format_flag = args.input_format.as_deref();
    let (reference, ref_format) = load_input_corpus(&args.reference, format_flag, &cfg)?;
    let (candidate, cand_format) = load_input_corpus(&args.candidate, format_flag, &cfg)?;
    let resolved = build_backend(&args.backend, &cfg, format_flag, &args.reference)?;
    let mode = resolve_score_mode(args.mode, &cfg)?;
    let ranks = resolve_percentiles(args.percentiles.as_deref(), cfg.percentiles.as_deref())?;
    let specs = percentile_specs(&ranks)?;
    let out_format = resolve_output_format(args.output.format, &cfg)?;

    let backend = resolved.backend.as_ref();
    let ref_scores = score_corpus(backend, &reference).map_err(engine_err)?;
    let cand_scores = score_corpus(backend, &candidate).map_err(engine_err)?;
    let ref_dist = build_distribution(&reference.id, &ref_scores, mode).map_err(engine_err)?;
    let cand_dist = build_distribution(&candidate.id, &cand_scores, mode).map_err(engine_err)?;
    let report = trscore(
        &ref_dist,
        &cand_dist,
        &specs,
        &backend.id(),
        backend.first_token_policy().label(),
    )
    .map_err(engine_err)?;

    let config = json!({
        "backend": resolved.manifest_config,
        "mode": mode,
        "percentiles": ranks,
        "input_format": {
            "reference": ref_format.label(),
            "candidate": cand_format.label(),
        },
        "format": format_label(out_format),
    });
    let mut inputs: Vec<&Path> = vec![&args.reference, &args.candidate];
    if let Some(train) = resolved.train_input.as_deref() {
        if !inputs.contains(&train) {
            inputs.push(train);
        }
    }
    let manifest = RunManifest::new(config, &inputs)?;

    let content = match out_format {
        OutputFormat::Json => json_envelope(&manifest, "report", &report)?,
        OutputFormat::Csv => csv_envelope(&manifest, &score_csv(&report, &candidate.id)?)?,
    };
    emit(args.output.out.as_deref(), &content)
}

fn score_csv(report: &TrScoreReport, candidate_id: &str) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "candidate".to_string(),
        "mode".to_string(),
        "baseline_p50".to_string(),
    ];
    for point in &report.points {
        header.push(format!("trscore_p{}", format_rank(point.x)));
    }
    w.write_record(&header).map_err(input_err)?;
    let mut row = vec![
        candidate_id.to_string(),
        report.mode.label().to_string(),
        format!("{}", report.baseline_p50),
    ];
    for point in &report.points {
        row.push(format!("{}", point.trscore));
    }
    w.write_record(&row).map_err(input_err)?;
    let bytes = w.into_inner().map_err(|e| input_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(input_err)
}

fn format_label(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    }
}

// ---------------------------------------------------------------------------
// pairwise
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PairwiseRow {
    id: String,
    reference_nll: f64,
    hypothesis_nll: f64,
    trscore: f64,
}

#[derive(Serialize)]
struct PairwisePayload {
    mode: PairwiseMode,
    rows: Vec<PairwiseRow>,
}

fn cmd_pairwise(args: PairwiseArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.output.config.as_deref())?;
    let format_flag = args.input_format.as_deref();
    let (reference, ref_format) = load_input_corpus(&args.reference, format_flag, &cfg)?;
    let (hypothesis, hyp_format) = load_input_corpus(&args.hypothesis, format_flag, &cfg)?;
    if reference.len() != hypothesis.len() {
        return Err(CliError::Input(format!(
            "corpora pair by position but sizes differ: reference has {} sentences, hypothesis {}",
            reference.len(),
            hypothesis.len()
        )));
    }
    let resolved = build_backend(&args.backend, &cfg, format_flag, &args.reference)?;
    let mode = resolve_pairwise_mode(args.pairwise_mode, &cfg)?;
    let out_format = resolve_output_format(args.output.format, &cfg)?;

    let backend = resolved.backend.as_ref();
    let mut rows = Vec::with_capacity(reference.len());
    for (r, h) in reference.sentences.iter().zip(&hypothesis.sentences) {
        let r_score = score_sentence(backend, r).map_err(engine_err)?;
        let h_score = score_sentence(backend, h).map_err(engine_err)?;
        let value = pairwise_trscore(backend, r, h, mode).map_err(engine_err)?;
        rows.push(PairwiseRow {
            id: r.id.clone(),
            reference_nll: r_score.total_nll,
            hypothesis_nll: h_score.total_nll,
            trscore: value,
        });
    }

    let config = json!({
        "backend": resolved.manifest_config,
        "pairwise_mode": mode,
        "input_format": {
            "reference": ref_format.label(),
            "hypothesis": hyp_format.label(),
        },
        "format": format_label(out_format),
    });
    let mut inputs: Vec<&Path> = vec![&args.reference, &args.hypothesis];
    if let Some(train) = resolved.train_input.as_deref() {
        if !inputs.contains(&train) {
            inputs.push(train);
        }
    }
    let manifest = RunManifest::new(config, &inputs)?;

    let payload = PairwisePayload { mode, rows };
    let content = match out_format {
        OutputFormat::Json => json_envelope(&manifest, "pairwise", &payload)?,
        OutputFormat::Csv => csv_envelope(&manifest, &pairwise_csv(&payload)?)?,
    };
    emit(args.output.out.as_deref(), &content)
}

fn pairwise_csv(payload: &PairwisePayload) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "reference_nll", "hypothesis_nll", "trscore"])
        .map_err(input_err)?;
    for row in &payload.rows {
        w.write_record([
            row.id.clone(),
            format!("{}", row.reference_nll),
            format!("{}", row.hypothesis_nll),
            format!("{}", row.trscore),
        ])
        .map_err(input_err)?;
    }
    let bytes = w.into_inner().map_err(|e| input_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(input_err)
}

// ---------------------------------------------------------------------------
// punct-f1
// ---------------------------------------------------------------------------

fn cmd_punct_f1(args: PunctArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.output.config.as_deref())?;
    let format_flag = args.input_format.as_deref();
    let (reference, ref_format) = load_input_corpus(&args.reference, format_flag, &cfg)?;
    let (hypothesis, hyp_format) = load_input_corpus(&args.hypothesis, format_flag, &cfg)?;
    let options = PunctOptions {
        bang_as_period: args.bang_as_period,
    };
    let out_format = resolve_output_format(args.output.format, &cfg)?;
    let result = corpus_punct_f1(&reference, &hypothesis, options).map_err(input_err)?;

    let config = json!({
        "bang_as_period": options.bang_as_period,
        "input_format": {
            "reference": ref_format.label(),
            "hypothesis": hyp_format.label(),
        },
        "format": format_label(out_format),
    });
    let manifest = RunManifest::new(config, &[&args.reference, &args.hypothesis])?;

    let content = match out_format {
        OutputFormat::Json => json_envelope(&manifest, "punctuation", &result)?,
        OutputFormat::Csv => csv_envelope(&manifest, &punct_csv(&result)?)?,
    };
    emit(args.output.out.as_deref(), &content)
}

fn punct_csv(result: &PunctEvalResult) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tp", "fp", "fn", "precision", "recall", "f1"])
        .map_err(input_err)?;
    let pooled = result.per_class.pooled();
    w.write_record([
        format!("{}", pooled.tp),
        format!("{}", pooled.fp),
        format!("{}", pooled.r#fn),
        format!("{}", result.micro.precision),
        format!("{}", result.micro.recall),
        format!("{}", result.micro.f1),
    ])
    .map_err(input_err)?;
    let bytes = w.into_inner().map_err(|e| input_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(input_err)
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CorrelatePoint {
    label: String,
    a: f64,
    b: f64,
}

#[derive(Serialize)]
struct CorrelatePayload {
    pearson_r: f64,
    n: usize,
    points: Vec<CorrelatePoint>,
}

/// Reads a two-column label,value CSV. A first row whose value does not
/// parse is treated as a header.
fn read_series(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut series = BTreeMap::new();
    for (index, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::Input(format!("{}: bad row {}: {e}", path.display(), index + 1)))?;
        if record.len() != 2 {
            return Err(CliError::Input(format!(
                "{}: row {} has {} fields; expected label,value",
                path.display(),
                index + 1,
                record.len()
            )));
        }
        let label = record[0].trim().to_string();
        let raw = record[1].trim();
        let value: f64 = match raw.parse() {
            Ok(v) => v,
            Err(_) if index == 0 => continue, // header row
            Err(_) => {
                return Err(CliError::Input(format!(
                    "{}: row {} value {raw:?} is not a number",
                    path.display(),
                    index + 1
                )))
            }
        };
        if series.insert(label.clone(), value).is_some() {
            return Err(CliError::Input(format!(
                "{}: duplicate label {label:?}",
                path.display()
            )));
        }
    }
    if series.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(series)
}

fn cmd_correlate(args: CorrelateArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.output.config.as_deref())?;
    let out_format = resolve_output_format(args.output.format, &cfg)?;
    let series_a = read_series(&args.series_a)?;
    let series_b = read_series(&args.series_b)?;

    let only_a: Vec<&String> = series_a.keys().filter(|k| !series_b.contains_key(*k)).collect();
    let only_b: Vec<&String> = series_b.keys().filter(|k| !series_a.contains_key(*k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(CliError::Input(format!(
            "label sets differ: {:?} only in {}, {:?} only in {}",
            only_a,
            args.series_a.display(),
            only_b,
            args.series_b.display()
        )));
    }

    let mut points = Vec::with_capacity(series_a.len());
    for (label, &a) in &series_a {
        points.push(CorrelatePoint {
            label: label.clone(),
            a,
            b: series_b[label],
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.a).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.b).collect();
    let r = pearson_r(&xs, &ys).map_err(input_err)?;

    let config = json!({ "format": format_label(out_format) });
    let manifest = RunManifest::new(config, &[&args.series_a, &args.series_b])?;
    let payload = CorrelatePayload {
        pearson_r: r,
        n: points.len(),
        points,
    };
    let content = match out_format {
        OutputFormat::Json => json_envelope(&manifest, "correlation", &payload)?,
        OutputFormat::Csv => csv_envelope(&manifest, &correlate_csv(&payload)?)?,
    };
    emit(args.output.out.as_deref(), &content)
}

fn correlate_csv(payload: &CorrelatePayload) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "a", "b"]).map_err(input_err)?;
    for p in &payload.points {
        w.write_record([p.label.clone(), format!("{}", p.a), format!("{}", p.b)])
            .map_err(input_err)?;
    }
    let bytes = w.into_inner().map_err(|e| input_err(e.to_string()))?;
    let body = String::from_utf8(bytes).map_err(input_err)?;
    Ok(format!("# pearson_r: {}\n{body}", payload.pearson_r))
}

// ---------------------------------------------------------------------------
// hrs
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HrsPayload<'a> {
    summary: &'a HrsSummary,
    rendered: String,
}

fn cmd_hrs(args: HrsArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.output.config.as_deref())?;
    let out_format = resolve_output_format(args.output.format, &cfg)?;
    let ratings = load_ratings(&args.ratings).map_err(input_err)?;
    let summary = hrs_summary(&ratings).map_err(input_err)?;

    let config = json!({ "format": format_label(out_format) });
    let manifest = RunManifest::new(config, &[&args.ratings])?;
    let payload = HrsPayload {
        summary: &summary,
        rendered: summary.render(),
    };
    let content = match out_format {
        OutputFormat::Json => json_envelope(&manifest, "hrs", &payload)?,
        OutputFormat::Csv => csv_envelope(&manifest, &hrs_csv(&payload)?)?,
    };
    emit(args.output.out.as_deref(), &content)
}

fn hrs_csv(payload: &HrsPayload) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mean_percent", "stddev_percent", "n_ratings", "n_judges", "rendered"])
        .map_err(input_err)?;
    w.write_record([
        format!("{}", payload.summary.mean_percent),
        format!("{}", payload.summary.stddev_percent),
        format!("{}", payload.summary.n_ratings),
        format!("{}", payload.summary.n_judges),
        payload.rendered.clone(),
    ])
    .map_err(input_err)?;
    let bytes = w.into_inner().map_err(|e| input_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(input_err)
}

// ---------------------------------------------------------------------------
// perturb
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbManifestFile {
    #[serde(default)]
    job: Vec<PerturbJobEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbJobEntry {
    kind: String,
    rate: f64,
    seed: Option<u64>,
    output: Option<String>,
}

#[derive(Serialize)]
struct PerturbJobReport {
    index: usize,
    kind: PerturbKind,
    rate: f64,
    seed: u64,
    output: String,
    sentences: usize,
    changed: usize,
    warnings: Vec<String>,
}

fn cmd_perturb(args: PerturbArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.output.config.as_deref())?;
    let format_flag = args.input_format.as_deref();
    let (input, in_format) = load_input_corpus(&args.input, format_flag, &cfg)?;
    let out_format = resolve_output_format(args.output.format, &cfg)?;

    let manifest_text = std::fs::read_to_string(&args.manifest).map_err(|e| {
        CliError::Input(format!("cannot read manifest {}: {e}", args.manifest.display()))
    })?;
    let jobs: PerturbManifestFile = toml::from_str(&manifest_text).map_err(|e| {
        CliError::Input(format!("bad manifest {}: {e}", args.manifest.display()))
    })?;
    if jobs.job.is_empty() {
        return Err(CliError::Input(format!(
            "manifest {} lists no jobs",
            args.manifest.display()
        )));
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::Input(format!("cannot create {}: {e}", args.out_dir.display()))
    })?;
    let stem = args
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let extension = match in_format {
        CorpusFormat::Jsonl => "jsonl",
        CorpusFormat::Plain | CorpusFormat::Lines => "txt",
    };

    let default_seed = args.seed.or(cfg.seed).unwrap_or(0);
    let mut reports = Vec::with_capacity(jobs.job.len());
    for (index, entry) in jobs.job.iter().enumerate() {
        let kind = PerturbKind::from_str(&entry.kind).map_err(CliError::Input)?;
        let seed = entry.seed.unwrap_or(default_seed);
        let spec = PerturbSpec {
            kind,
            rate: entry.rate,
            seed,
        };
        let bent = perturb_corpus(&input, &spec).map_err(input_err)?;
        let changed = input
            .sentences
            .iter()
            .zip(&bent.sentences)
            .filter(|(before, after)| before.text != after.text)
            .count();
        let file_name = entry.output.clone().unwrap_or_else(|| {
            format!("{stem}.{}.{:02}.{extension}", kind.label(), index + 1)
        });
        let target = args.out_dir.join(&file_name);
        write_atomic(&target, render_corpus(&bent, in_format).as_bytes())
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", target.display())))?;
        let new_warnings = bent.warnings[input.warnings.len()..].to_vec();
        reports.push(PerturbJobReport {
            index: index + 1,
            kind,
            rate: entry.rate,
            seed,
            output: target.display().to_string(),
            sentences: bent.len(),
            changed,
            warnings: new_warnings,
        });
    }

    let config = json!({
        "input_format": in_format.label(),
        "out_dir": args.out_dir.display().to_string(),
        "default_seed": default_seed,
        "format": format_label(out_format),
    });
    let manifest = RunManifest::new(config, &[&args.input, &args.manifest])?;
    let content = match out_format {
        OutputFormat::Json => json_envelope(&manifest, "jobs", &reports)?,
        OutputFormat::Csv => csv_envelope(&manifest, &perturb_csv(&reports)?)?,
    };
    emit(args.output.out.as_deref(), &content)
}

/// Serializes a corpus in the same layout its input used: one sentence per
/// line, or one JSON record per line.
fn render_corpus(corpus: &Corpus, format: CorpusFormat) -> String {
    let mut text = String::new();
    for sentence in &corpus.sentences {
        match format {
            CorpusFormat::Jsonl => {
                text.push_str(
                    &serde_json::to_string(&json!({
                        "id": sentence.id,
                        "text": sentence.text,
                    }))
                    .expect("corpus rows serialize"),
                );
            }
            CorpusFormat::Plain | CorpusFormat::Lines => text.push_str(&sentence.text),
        }
        text.push('\n');
    }
    text
}

fn perturb_csv(reports: &[PerturbJobReport]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "kind", "rate", "seed", "output", "sentences", "changed"])
        .map_err(input_err)?;
    for r in reports {
        w.write_record([
            format!("{}", r.index),
            r.kind.label().to_string(),
            format!("{}", r.rate),
            format!("{}", r.seed),
            r.output.clone(),
            format!("{}", r.sentences),
            format!("{}", r.changed),
        ])
        .map_err(input_err)?;
    }
    let bytes = w.into_inner().map_err(|e| input_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(input_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_input_and_backend_failures() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Backend("x".into()).exit_code(), 3);
    }

    #[test]
    fn rank_column_names_drop_trailing_zero() {
        assert_eq!(format_rank(25.0), "25");
        assert_eq!(format_rank(90.0), "90");
        assert_eq!(format_rank(97.5), "97.5");
    }

    fn series_file(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn series_reader_takes_label_value_rows() {
        let (_dir, path) = series_file("s1,1.5\ns2,2\n");
        let series = read_series(&path).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series["s1"], 1.5);
        assert_eq!(series["s2"], 2.0);
    }

    #[test]
    fn series_reader_skips_one_header_row_only() {
        let (_dir, path) = series_file("label,value\ns1,1\n");
        let series = read_series(&path).unwrap();
        assert_eq!(series.len(), 1);

        let (_dir2, bad) = series_file("s1,1\ns2,oops\n");
        let err = read_series(&bad).unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");
    }

    #[test]
    fn series_reader_rejects_duplicates_and_wrong_arity() {
        let (_dir, dup) = series_file("s1,1\ns1,2\n");
        assert!(read_series(&dup).unwrap_err().to_string().contains("duplicate"));

        let (_dir2, wide) = series_file("s1,1,9\n");
        assert!(read_series(&wide).unwrap_err().to_string().contains("expected label,value"));

        let (_dir3, empty) = series_file("label,value\n");
        assert!(read_series(&empty).unwrap_err().to_string().contains("no data rows"));
    }

    #[test]
    fn corpus_rendering_matches_input_layout() {
        let corpus = trscore_core::ingest::corpus_from_str(
            "the cat sat.\nthe dog slept.\n",
            CorpusFormat::Lines,
            "c".into(),
        )
        .unwrap();
        assert_eq!(
            render_corpus(&corpus, CorpusFormat::Lines),
            "the cat sat.\nthe dog slept.\n"
        );
        let jsonl = render_corpus(&corpus, CorpusFormat::Jsonl);
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["id"], "s1");
        assert_eq!(first["text"], "the cat sat.");
    }
}
