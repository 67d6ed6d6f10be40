//! Sentence scoring and TRScore aggregation.
//!
//! A sentence's score is the negated sum of its token log-probabilities in
//! nats (plus the end-of-sentence term when the backend models one). Corpus
//! scores form a percentile distribution; TRScore_x is the reference
//! distribution's median divided by the candidate's x-th percentile, as a
//! percentage. Lower NLL means more readable, so readable candidates push
//! TRScore up and x-sweeps are non-increasing.

use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;
use thiserror::Error;

use crate::backend::{BackendError, LikelihoodBackend};
use crate::ingest::{tokenize, Casing, Corpus, Sentence};
use crate::stats::{percentile, PercentileSpec, StatsError};

/// Distributions smaller than this carry a stability warning.
pub const SMALL_CORPUS_THRESHOLD: usize = 100;

/// Human-readable name of the percentile method, stamped into metadata so
/// numbers are only ever compared across identical conventions.
pub const PERCENTILE_CONVENTION: &str = "linear interpolation at rank (x/100)*(n-1)";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("sentence {id} has no tokens")]
    EmptySentence { id: String },
    #[error("backend failed on sentence {sentence_id}: {source}")]
    Backend {
        sentence_id: String,
        #[source]
        source: BackendError,
    },
    #[error("cannot build a distribution from zero scores")]
    EmptyDistribution,
    #[error("normalization modes differ: reference is {reference}, candidate is {candidate}")]
    ModeMismatch {
        reference: ScoreMode,
        candidate: ScoreMode,
    },
    #[error("reference median NLL is {0}, expected > 0; scoring is degenerate")]
    DegenerateBaseline(f64),
    #[error("candidate percentile {x} is {value}, expected > 0; scoring is degenerate")]
    DegeneratePercentile { x: f64, value: f64 },
    #[error("hypothesis NLL is zero; pairwise ratio is undefined")]
    ZeroHypothesisNll,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceScore {
    pub sentence_id: String,
    /// Tokens that actually contributed (undefined first tokens excluded).
    pub token_count: usize,
    pub total_nll: f64,
    pub per_token_nll: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Total NLL per sentence. The default reading of an "absolute score".
    Sum,
    /// NLL per contributing token; decouples the comparison from sentence
    /// length profiles.
    Mean,
}

impl ScoreMode {
    pub fn label(&self) -> &'static str {
        match self {
            ScoreMode::Sum => "sum",
            ScoreMode::Mean => "mean",
        }
    }
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(ScoreMode::Sum),
            "mean" => Ok(ScoreMode::Mean),
            other => Err(format!("unknown mode {other:?}, expected sum or mean")),
        }
    }
}

/// Ascending-sorted corpus scores under one normalization mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistribution {
    pub corpus_id: String,
    pub scores: Vec<f64>,
    pub mode: ScoreMode,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrScorePoint {
    pub x: f64,
    pub candidate_value: f64,
    pub trscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub backend: String,
    pub first_token_policy: String,
    pub percentile_convention: String,
    pub reference_size: usize,
    pub candidate_size: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrScoreReport {
    pub baseline_p50: f64,
    pub mode: ScoreMode,
    #[serde(rename = "percentiles")]
    pub points: Vec<TrScorePoint>,
    pub metadata: ReportMetadata,
}

/// Scores one sentence with the given backend. `token_count` counts tokens
/// with defined log-probabilities so per-token values stay honest under the
/// dropped-first-token policy.
pub fn score_sentence(
    backend: &dyn LikelihoodBackend,
    sentence: &Sentence,
) -> Result<SentenceScore, EngineError> {
    let seq = tokenize(&sentence.text, Casing::Preserve);
    if seq.is_empty() {
        return Err(EngineError::EmptySentence {
            id: sentence.id.clone(),
        });
    }
    let scored = backend
        .score_tokens(&seq)
        .map_err(|source| EngineError::Backend {
            sentence_id: sentence.id.clone(),
            source,
        })?;
    debug_assert_eq!(scored.tokens.len(), seq.len(), "backend arity violation");
    let mut total = 0.0;
    for t in &scored.tokens {
        if let Some(lp) = t.logprob {
            total -= lp;
        }
    }
    if let Some(lp) = scored.eos_logprob {
        total -= lp;
    }
    let token_count = scored.defined_count().max(1);
    Ok(SentenceScore {
        sentence_id: sentence.id.clone(),
        token_count,
        total_nll: total,
        per_token_nll: total / token_count as f64,
    })
}

/// Scores every sentence, fanning out up to the backend's `max_parallel`.
/// Results are ordered by sentence index regardless of completion order.
pub fn score_corpus(
    backend: &dyn LikelihoodBackend,
    corpus: &Corpus,
) -> Result<Vec<SentenceScore>, EngineError> {
    let n = corpus.len();
    let workers = backend.max_parallel().clamp(1, n.max(1));
    if workers <= 1 {
        return corpus
            .sentences
            .iter()
            .map(|s| score_sentence(backend, s))
            .collect();
    }

    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<SentenceScore, EngineError>>> =
        (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let idx = next.fetch_add(1, Ordering::Relaxed);
                        if idx >= n {
                            break;
                        }
                        local.push((idx, score_sentence(backend, &corpus.sentences[idx])));
                    }
                    local
                })
            })
            .collect();
        for handle in handles {
            for (idx, result) in handle.join().expect("scoring worker panicked") {
                slots[idx] = Some(result);
            }
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every index claimed exactly once"))
        .collect()
}

/// Sorts scores ascending under the chosen mode. Small and single-sentence
/// distributions are allowed but flagged.
pub fn build_distribution(
    corpus_id: &str,
    scores: &[SentenceScore],
    mode: ScoreMode,
) -> Result<ScoreDistribution, EngineError> {
    if scores.is_empty() {
        return Err(EngineError::EmptyDistribution);
    }
    let mut values: Vec<f64> = scores
        .iter()
        .map(|s| match mode {
            ScoreMode::Sum => s.total_nll,
            ScoreMode::Mean => s.per_token_nll,
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let mut warnings = Vec::new();
    if values.len() < SMALL_CORPUS_THRESHOLD {
        warnings.push(format!(
            "{corpus_id}: only {} scored sentences; percentiles are most stable from roughly 100-150 sentences up",
            values.len()
        ));
    }
    if values.len() == 1 {
        warnings.push(format!(
            "{corpus_id}: single-sentence distribution; every percentile equals that one score"
        ));
    }
    Ok(ScoreDistribution {
        corpus_id: corpus_id.to_string(),
        scores: values,
        mode,
        warnings,
    })
}

/// TRScore of a candidate distribution against a reference distribution.
///
/// baseline = reference median; trscore_x = 100 * baseline / candidate
/// percentile x. Requested ranks are evaluated in ascending order.
pub fn trscore(
    reference: &ScoreDistribution,
    candidate: &ScoreDistribution,
    percentiles: &[PercentileSpec],
    backend_id: &str,
    first_token_policy: &str,
) -> Result<TrScoreReport, EngineError> {
    if reference.mode != candidate.mode {
        return Err(EngineError::ModeMismatch {
            reference: reference.mode,
            candidate: candidate.mode,
        });
    }
    let median = PercentileSpec::new(50.0).expect("50 is a valid rank");
    let baseline = percentile(&reference.scores, median)?;
    if baseline <= 0.0 {
        return Err(EngineError::DegenerateBaseline(baseline));
    }

    let mut ranks: Vec<PercentileSpec> = percentiles.to_vec();
    ranks.sort_by(|a, b| a.value().total_cmp(&b.value()));
    ranks.dedup_by(|a, b| a.value() == b.value());

    let mut points = Vec::with_capacity(ranks.len());
    for rank in ranks {
        let candidate_value = percentile(&candidate.scores, rank)?;
        if candidate_value <= 0.0 {
            return Err(EngineError::DegeneratePercentile {
                x: rank.value(),
                value: candidate_value,
            });
        }
        points.push(TrScorePoint {
            x: rank.value(),
            candidate_value,
            // Divide before scaling so a self-comparison is exactly 100.0
            // (x / x == 1.0 bit-for-bit; (100 * x) / x need not be).
            trscore: 100.0 * (baseline / candidate_value),
        });
    }

    let mut warnings = Vec::new();
    warnings.extend(reference.warnings.iter().map(|w| format!("reference: {w}")));
    warnings.extend(candidate.warnings.iter().map(|w| format!("candidate: {w}")));

    Ok(TrScoreReport {
        baseline_p50: baseline,
        mode: reference.mode,
        points,
        metadata: ReportMetadata {
            backend: backend_id.to_string(),
            first_token_policy: first_token_policy.to_string(),
            percentile_convention: PERCENTILE_CONVENTION.to_string(),
            reference_size: reference.scores.len(),
            candidate_size: candidate.scores.len(),
            warnings,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseMode {
    /// 100 * reference NLL / hypothesis NLL.
    NllRatio,
    /// 100 * exp(reference NLL - hypothesis NLL), the likelihood ratio.
    ProbRatio,
}

impl PairwiseMode {
    pub fn label(&self) -> &'static str {
        match self {
            PairwiseMode::NllRatio => "nll_ratio",
            PairwiseMode::ProbRatio => "prob_ratio",
        }
    }
}

impl std::fmt::Display for PairwiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PairwiseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nll_ratio" => Ok(PairwiseMode::NllRatio),
            "prob_ratio" => Ok(PairwiseMode::ProbRatio),
            other => Err(format!(
                "unknown pairwise mode {other:?}, expected nll_ratio or prob_ratio"
            )),
        }
    }
}

/// Per-sentence-pair score: 100% means the hypothesis reads exactly as well
/// as the reference; degraded hypotheses land below 100%.
pub fn pairwise_trscore(
    backend: &dyn LikelihoodBackend,
    reference: &Sentence,
    hypothesis: &Sentence,
    mode: PairwiseMode,
) -> Result<f64, EngineError> {
    let ref_nll = score_sentence(backend, reference)?.total_nll;
    let hyp_nll = score_sentence(backend, hypothesis)?.total_nll;
    match mode {
        PairwiseMode::NllRatio => {
            if hyp_nll == 0.0 {
                return Err(EngineError::ZeroHypothesisNll);
            }
            // Ratio first: identical texts must land on 100.0 exactly.
            Ok(100.0 * (ref_nll / hyp_nll))
        }
        PairwiseMode::ProbRatio => Ok(100.0 * (ref_nll - hyp_nll).exp()),
    }
}
