//! Client for completion services that echo per-token log-probabilities.
//!
//! The request asks for zero generated tokens with `echo` on, so the
//! response scores exactly the prompt. Services tokenize into sub-tokens of
//! their own; the client folds those back onto our word tokens by character
//! span and reports the fold in nats, leaving the total sequence
//! log-probability unchanged.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{
    BackendError, FirstTokenPolicy, LikelihoodBackend, ScoredTokens, TokenLogProb,
};
use crate::ingest::TokenSeq;

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token. `None` sends no
    /// Authorization header (local test doubles).
    pub token_env: Option<String>,
    pub timeout: Duration,
    pub max_parallel: usize,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    bearer: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    echo: bool,
    logprobs: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    logprobs: Option<LogprobsPayload>,
}

/// Parallel arrays as returned under `choices[0].logprobs`: sub-token
/// strings, their log-probabilities (the first may be null), and byte
/// offsets of each sub-token within the echoed prompt.
#[derive(Deserialize)]
struct LogprobsPayload {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    text_offset: Vec<usize>,
}

impl RemoteBackend {
    /// Validates the config and resolves the bearer token. The token is read
    /// once here, not per request.
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::InvalidConfig("endpoint is empty".into()));
        }
        if config.model.is_empty() {
            return Err(BackendError::InvalidConfig("model name is empty".into()));
        }
        let bearer = match &config.token_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::MissingToken { var: var.clone() })?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|source| BackendError::Transport {
                endpoint: config.endpoint.clone(),
                source,
            })?;
        Ok(Self {
            config,
            bearer,
            client,
        })
    }

    fn fetch(&self, prompt: &str) -> Result<LogprobsPayload, BackendError> {
        let request = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens: 0,
            echo: true,
            logprobs: 0,
        };
        let mut builder = self.client.post(&self.config.endpoint).json(&request);
        if let Some(token) = &self.bearer {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|source| BackendError::Transport {
            endpoint: self.config.endpoint.clone(),
            source,
        })?;
        let status = response.status();
        if !status.is_success() {
            let detail = response
                .text()
                .unwrap_or_default()
                .chars()
                .take(200)
                .collect();
            return Err(BackendError::HttpStatus {
                status: status.as_u16(),
                detail,
            });
        }
        let parsed: CompletionResponse = response
            .json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .ok_or_else(|| {
                BackendError::MalformedResponse("response carries no logprobs payload".into())
            })
    }
}

impl LikelihoodBackend for RemoteBackend {
    fn id(&self) -> String {
        format!(
            "remote(model={}, endpoint={})",
            self.config.model, self.config.endpoint
        )
    }

    fn first_token_policy(&self) -> FirstTokenPolicy {
        FirstTokenPolicy::Dropped
    }

    fn score_tokens(&self, tokens: &TokenSeq) -> Result<ScoredTokens, BackendError> {
        if tokens.is_empty() {
            return Err(BackendError::EmptySequence);
        }
        let prompt = tokens.detokenize();
        let payload = self.fetch(&prompt)?;
        let mut mapped = map_subtokens(tokens, &prompt, &payload)?;
        // Uniform first-token policy: even when the service scores the first
        // sub-token, the first word's contribution is dropped so scores are
        // comparable across responses.
        mapped[0] = None;
        Ok(ScoredTokens {
            tokens: tokens
                .tokens()
                .iter()
                .zip(mapped)
                .map(|(token, logprob)| TokenLogProb {
                    token: token.clone(),
                    logprob,
                })
                .collect(),
            eos_logprob: None,
        })
    }

    fn max_parallel(&self) -> usize {
        self.config.max_parallel.max(1)
    }
}

/// Folds sub-token log-probabilities onto input tokens.
///
/// Each sub-token's whitespace-trimmed span must fall inside exactly one
/// input token's span; whitespace-only sub-tokens attach to the following
/// token. An undefined (null) log-probability is legal only for the first
/// sub-token and makes the input token it belongs to undefined.
fn map_subtokens(
    seq: &TokenSeq,
    prompt: &str,
    payload: &LogprobsPayload,
) -> Result<Vec<Option<f64>>, BackendError> {
    let n_sub = payload.tokens.len();
    if payload.token_logprobs.len() != n_sub || payload.text_offset.len() != n_sub {
        return Err(BackendError::MalformedResponse(format!(
            "parallel arrays disagree: {} tokens, {} logprobs, {} offsets",
            n_sub,
            payload.token_logprobs.len(),
            payload.text_offset.len()
        )));
    }
    if n_sub == 0 {
        return Err(BackendError::MalformedResponse(
            "logprobs payload is empty".into(),
        ));
    }

    let spans = seq.spans();
    let n = spans.len();
    let mut acc = vec![0.0f64; n];
    let mut covered = vec![false; n];
    let mut undefined: Option<usize> = None;

    for i in 0..n_sub {
        let sub = &payload.tokens[i];
        let off = payload.text_offset[i];
        let end = off.checked_add(sub.len()).filter(|&e| e <= prompt.len());
        let matches_prompt = end.is_some_and(|e| prompt.get(off..e) == Some(sub.as_str()));
        if !matches_prompt {
            return Err(BackendError::SpanMismatch(format!(
                "sub-token {i} ({sub:?}) does not match the prompt at offset {off}"
            )));
        }
        let lp = payload.token_logprobs[i];
        if lp.is_none() && i != 0 {
            return Err(BackendError::MalformedResponse(format!(
                "undefined logprob at sub-token {i}; only the first may be undefined"
            )));
        }
        if let Some(v) = lp {
            if v > 0.0 || !v.is_finite() {
                return Err(BackendError::MalformedResponse(format!(
                    "sub-token {i} has log-probability {v}, expected finite ≤ 0"
                )));
            }
        }

        let leading_ws = sub.len() - sub.trim_start().len();
        let content_start = off + leading_ws;
        let content_end = off + sub.len() - (sub.len() - sub.trim_end().len());
        let target = if content_start < content_end {
            spans
                .iter()
                .position(|s| s.start <= content_start && content_end <= s.end)
                .ok_or_else(|| {
                    BackendError::SpanMismatch(format!(
                        "sub-token {sub:?} at offset {off} straddles input token boundaries"
                    ))
                })?
        } else {
            // Whitespace-only sub-token: it separates words, so its mass
            // belongs with the token that follows it.
            spans
                .iter()
                .position(|s| s.start >= off)
                .unwrap_or(n - 1)
        };

        match lp {
            Some(v) => {
                acc[target] += v;
                if content_start < content_end {
                    covered[target] = true;
                }
            }
            None => undefined = Some(target),
        }
    }

    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        if undefined == Some(j) {
            out.push(None);
        } else if !covered[j] {
            return Err(BackendError::SpanMismatch(format!(
                "input token {j} ({:?}) received no sub-tokens",
                seq.tokens()[j]
            )));
        } else {
            out.push(Some(acc[j]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{tokenize, Casing};

    fn payload(subs: &[(&str, Option<f64>, usize)]) -> LogprobsPayload {
        LogprobsPayload {
            tokens: subs.iter().map(|(t, _, _)| t.to_string()).collect(),
            token_logprobs: subs.iter().map(|(_, lp, _)| *lp).collect(),
            text_offset: subs.iter().map(|(_, _, off)| *off).collect(),
        }
    }

    fn map(text: &str, subs: &[(&str, Option<f64>, usize)]) -> Result<Vec<Option<f64>>, BackendError> {
        let seq = tokenize(text, Casing::Preserve);
        let prompt = seq.detokenize();
        map_subtokens(&seq, &prompt, &payload(subs))
    }

    #[test]
    fn sums_subtokens_of_one_word() {
        // "ICASSP" split into three sub-tokens; logprobs add up.
        let out = map(
            "ICASSP",
            &[
                ("IC", Some(-0.5), 0),
                ("AS", Some(-0.25), 2),
                ("SP", Some(-0.25), 4),
            ],
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn leading_space_subtoken_belongs_to_next_word() {
        // prompt "a b." — spans a:0..1, b:2..3, .:3..4
        let out = map(
            "a b.",
            &[
                ("a", None, 0),
                (" b", Some(-0.5), 1),
                (".", Some(-0.25), 3),
            ],
        )
        .unwrap();
        assert_eq!(out, vec![None, Some(-0.5), Some(-0.25)]);
    }

    #[test]
    fn whitespace_only_subtoken_joins_following_token() {
        let out = map(
            "a b",
            &[
                ("a", Some(-0.1), 0),
                (" ", Some(-0.2), 1),
                ("b", Some(-0.3), 2),
            ],
        )
        .unwrap();
        assert_eq!(out[0], Some(-0.1));
        assert!((out[1].unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn straddling_subtoken_is_a_span_mismatch() {
        // "b." covers both the word "b" and the punctuation token.
        let err = map("a b.", &[("a", Some(-0.1), 0), (" ", Some(-0.1), 1), ("b.", Some(-0.2), 2)]);
        assert!(matches!(err, Err(BackendError::SpanMismatch(_))));
    }

    #[test]
    fn uncovered_input_token_is_a_span_mismatch() {
        let err = map("a b", &[("a", Some(-0.1), 0)]);
        assert!(matches!(err, Err(BackendError::SpanMismatch(_))));
    }

    #[test]
    fn offset_text_disagreement_is_a_span_mismatch() {
        let err = map("a b", &[("a", Some(-0.1), 0), ("x", Some(-0.1), 2)]);
        assert!(matches!(err, Err(BackendError::SpanMismatch(_))));
    }

    #[test]
    fn late_null_logprob_is_malformed() {
        let err = map("a b", &[("a", Some(-0.1), 0), (" b", None, 1)]);
        assert!(matches!(err, Err(BackendError::MalformedResponse(_))));
    }

    #[test]
    fn positive_logprob_is_malformed() {
        let err = map("a b", &[("a", Some(0.5), 0), (" b", Some(-0.1), 1)]);
        assert!(matches!(err, Err(BackendError::MalformedResponse(_))));
    }

    #[test]
    fn array_length_disagreement_is_malformed() {
        let seq = tokenize("a", Casing::Preserve);
        let bad = LogprobsPayload {
            tokens: vec!["a".into()],
            token_logprobs: vec![],
            text_offset: vec![0],
        };
        let err = map_subtokens(&seq, "a", &bad);
        assert!(matches!(err, Err(BackendError::MalformedResponse(_))));
    }

    #[test]
    fn missing_token_env_fails_construction() {
        let err = RemoteBackend::new(RemoteConfig {
            endpoint: "http://127.0.0.1:1/v1/completions".into(),
            model: "m".into(),
            token_env: Some("TRSCORE_TEST_TOKEN_THAT_IS_NOT_SET".into()),
            timeout: Duration::from_secs(1),
            max_parallel: 1,
        });
        assert!(matches!(err, Err(BackendError::MissingToken { .. })));
    }

    #[test]
    fn empty_endpoint_is_invalid_config() {
        let err = RemoteBackend::new(RemoteConfig {
            endpoint: String::new(),
            model: "m".into(),
            token_env: None,
            timeout: Duration::from_secs(1),
            max_parallel: 1,
        });
        assert!(matches!(err, Err(BackendError::InvalidConfig(_))));
    }
}
