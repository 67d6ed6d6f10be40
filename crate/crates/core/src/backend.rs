//! Likelihood-scoring backends.
//!
//! Two implementations share one contract: [`remote::RemoteBackend`] talks to
//! a completion service that echoes token log-probabilities, and
//! [`ngram::NgramModel`] is a deterministic local model so the pipeline can
//! run (and be tested) without a hosted model.

pub mod ngram;
pub mod remote;

use thiserror::Error;

use crate::ingest::TokenSeq;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot score an empty token sequence")]
    EmptySequence,
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("environment variable {var} (bearer token) is not set")]
    MissingToken { var: String },
    #[error("transport failure talking to {endpoint}: {source}")]
    Transport {
        endpoint: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("service returned HTTP {status}: {detail}")]
    HttpStatus { status: u16, detail: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("sub-token spans cannot be reconciled with input tokens: {0}")]
    SpanMismatch(String),
}

/// Log-probability assigned to one input token, in nats.
///
/// `logprob` is `None` when the backend leaves the token undefined (remote
/// services do not score the first prompt token); defined values are finite
/// and ≤ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogProb {
    pub token: String,
    pub logprob: Option<f64>,
}

/// Result of scoring one sentence: exactly one entry per input token, plus
/// the end-of-sentence term for backends that model sentence termination.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTokens {
    pub tokens: Vec<TokenLogProb>,
    pub eos_logprob: Option<f64>,
}

impl ScoredTokens {
    /// Count of tokens with a defined log-probability.
    pub fn defined_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.logprob.is_some()).count()
    }
}

/// How the backend treats the first token of a sequence. The policy is
/// stamped into report metadata because it shifts absolute scores; it must
/// match between any two runs being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstTokenPolicy {
    /// First token scored like any other (local n-gram model).
    Scored,
    /// First token's contribution dropped on every sequence; the bias is
    /// consistent across reference and candidate, so ratios are unaffected.
    Dropped,
}

impl FirstTokenPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            FirstTokenPolicy::Scored => "scored",
            FirstTokenPolicy::Dropped => "dropped",
        }
    }
}

/// The scoring contract both backends implement. Implementations must be
/// safe for concurrent `score_tokens` calls up to `max_parallel`.
pub trait LikelihoodBackend: Send + Sync {
    /// Stable identifier for report metadata.
    fn id(&self) -> String;

    fn first_token_policy(&self) -> FirstTokenPolicy;

    /// Scores a non-empty token sequence. The result has exactly one entry
    /// per input token, in input order.
    fn score_tokens(&self, tokens: &TokenSeq) -> Result<ScoredTokens, BackendError>;

    /// Upper bound on concurrent in-flight scoring calls.
    fn max_parallel(&self) -> usize {
        1
    }
}
