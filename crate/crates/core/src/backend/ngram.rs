//! Local add-k smoothed n-gram language model.
//!
//! Deliberately simple: counts are exact, smoothing is add-k, and every
//! probability is hand-checkable. The model is immutable after training and
//! can be shared freely across scoring threads.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::backend::{BackendError, FirstTokenPolicy, LikelihoodBackend, ScoredTokens, TokenLogProb};
use crate::ingest::{tokenize, Casing, Corpus, TokenSeq};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Serialization format tag; bump on any incompatible change.
const FORMAT_HEADER: &str = "ngram-counts v1";

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("order must be 2 or 3, got {0}")]
    UnsupportedOrder(usize),
    #[error("smoothing k must be > 0, got {0}")]
    NonPositiveSmoothing(f64),
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {detail}")]
    Format { line: usize, detail: String },
}

/// Counts-based n-gram model with add-k smoothing.
///
/// The stored vocabulary is every token seen in training plus the
/// end-of-sentence marker; the begin-of-sentence marker is context-only and
/// never predicted. Out-of-vocabulary tokens map to a reserved unknown
/// symbol which enlarges the effective vocabulary by one, so conditional
/// distributions stay proper on perturbed inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    smoothing_k: f64,
    vocabulary: BTreeSet<String>,
    counts: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    context_totals: BTreeMap<Vec<String>, u64>,
}

impl NgramModel {
    /// Builds counts over the tokenized corpus. Each sentence is padded with
    /// `order - 1` begin markers and one end marker.
    pub fn train(corpus: &Corpus, order: usize, smoothing_k: f64) -> Result<Self, TrainError> {
        if !(2..=3).contains(&order) {
            return Err(TrainError::UnsupportedOrder(order));
        }
        if !(smoothing_k > 0.0) || !smoothing_k.is_finite() {
            return Err(TrainError::NonPositiveSmoothing(smoothing_k));
        }
        if corpus.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }

        let mut vocabulary: BTreeSet<String> = BTreeSet::new();
        vocabulary.insert(EOS.to_string());
        let mut counts: BTreeMap<Vec<String>, BTreeMap<String, u64>> = BTreeMap::new();
        let mut context_totals: BTreeMap<Vec<String>, u64> = BTreeMap::new();

        for sentence in &corpus.sentences {
            let seq = tokenize(&sentence.text, Casing::Preserve);
            if seq.is_empty() {
                continue;
            }
            let mut padded: Vec<&str> = Vec::with_capacity(seq.len() + order);
            padded.extend(std::iter::repeat(BOS).take(order - 1));
            padded.extend(seq.tokens().iter().map(String::as_str));
            padded.push(EOS);

            for window in padded.windows(order) {
                let (context, token) = window.split_at(order - 1);
                let token = token[0];
                if token != EOS {
                    vocabulary.insert(token.to_string());
                }
                let ctx: Vec<String> = context.iter().map(|t| t.to_string()).collect();
                *counts
                    .entry(ctx.clone())
                    .or_default()
                    .entry(token.to_string())
                    .or_insert(0) += 1;
                *context_totals.entry(ctx).or_insert(0) += 1;
            }
        }

        Ok(Self {
            order,
            smoothing_k,
            vocabulary,
            counts,
            context_totals,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    /// Stored vocabulary: seen tokens plus the end marker.
    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    /// Vocabulary size used in the smoothing denominator: stored vocabulary
    /// plus the unknown symbol.
    pub fn effective_vocab_size(&self) -> usize {
        self.vocabulary.len() + 1
    }

    pub fn count(&self, context: &[&str], token: &str) -> u64 {
        let ctx = self.map_context(context);
        let tok = self.map_token(token);
        self.counts
            .get(&ctx)
            .and_then(|m| m.get(tok.as_ref()))
            .copied()
            .unwrap_or(0)
    }

    /// Every token or end marker predicted under every stored context;
    /// exposed for normalization checks.
    pub fn contexts(&self) -> impl Iterator<Item = &Vec<String>> {
        self.context_totals.keys()
    }

    fn map_token<'a>(&self, token: &'a str) -> std::borrow::Cow<'a, str> {
        if self.vocabulary.contains(token) {
            std::borrow::Cow::Borrowed(token)
        } else {
            std::borrow::Cow::Borrowed(UNK)
        }
    }

    fn map_context(&self, context: &[&str]) -> Vec<String> {
        context
            .iter()
            .map(|t| {
                if *t == BOS || self.vocabulary.contains(*t) {
                    t.to_string()
                } else {
                    UNK.to_string()
                }
            })
            .collect()
    }

    /// Add-k conditional probability of `token` (or the end marker) given
    /// `context`. Unknown tokens and contexts map to the unknown symbol, so
    /// this is total: any input yields a proper probability.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let ctx = self.map_context(context);
        let tok = self.map_token(token);
        let k = self.smoothing_k;
        let count = self
            .counts
            .get(&ctx)
            .and_then(|m| m.get(tok.as_ref()))
            .copied()
            .unwrap_or(0) as f64;
        let total = self.context_totals.get(&ctx).copied().unwrap_or(0) as f64;
        (count + k) / (total + k * self.effective_vocab_size() as f64)
    }

    /// Writes the model as a line-oriented count file: a format header,
    /// order and smoothing lines, then one tab-separated
    /// `context<TAB>token<TAB>count` line per entry, contexts space-joined.
    /// Tokens never contain whitespace, so the encoding is unambiguous.
    pub fn to_writer(&self, w: &mut impl Write) -> Result<(), ModelIoError> {
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "order\t{}", self.order)?;
        writeln!(w, "smoothing_k\t{}", self.smoothing_k)?;
        for (ctx, tokens) in &self.counts {
            let ctx_str = ctx.join(" ");
            for (token, count) in tokens {
                writeln!(w, "{ctx_str}\t{token}\t{count}")?;
            }
        }
        Ok(())
    }

    pub fn from_reader(r: impl BufRead) -> Result<Self, ModelIoError> {
        let mut lines = r.lines().enumerate();
        let mut expect = |field: &str| -> Result<(usize, String), ModelIoError> {
            match lines.next() {
                Some((idx, Ok(line))) => Ok((idx + 1, line)),
                Some((idx, Err(e))) => Err(ModelIoError::Format {
                    line: idx + 1,
                    detail: e.to_string(),
                }),
                None => Err(ModelIoError::Format {
                    line: 0,
                    detail: format!("missing {field}"),
                }),
            }
        };

        let (line_no, header) = expect("format header")?;
        if header != FORMAT_HEADER {
            return Err(ModelIoError::Format {
                line: line_no,
                detail: format!("unrecognized header {header:?}"),
            });
        }
        let (line_no, order_line) = expect("order line")?;
        let order: usize = order_line
            .strip_prefix("order\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ModelIoError::Format {
                line: line_no,
                detail: "expected \"order\\t<n>\"".to_string(),
            })?;
        let (line_no, k_line) = expect("smoothing line")?;
        let smoothing_k: f64 = k_line
            .strip_prefix("smoothing_k\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ModelIoError::Format {
                line: line_no,
                detail: "expected \"smoothing_k\\t<k>\"".to_string(),
            })?;

        let mut vocabulary: BTreeSet<String> = BTreeSet::new();
        vocabulary.insert(EOS.to_string());
        let mut counts: BTreeMap<Vec<String>, BTreeMap<String, u64>> = BTreeMap::new();
        let mut context_totals: BTreeMap<Vec<String>, u64> = BTreeMap::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.map_err(|e| ModelIoError::Format {
                line: line_no,
                detail: e.to_string(),
            })?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (ctx, token, count) = match (parts.next(), parts.next(), parts.next(), parts.next())
            {
                (Some(c), Some(t), Some(n), None) => (c, t, n),
                _ => {
                    return Err(ModelIoError::Format {
                        line: line_no,
                        detail: "expected context<TAB>token<TAB>count".to_string(),
                    })
                }
            };
            let count: u64 = count.parse().map_err(|_| ModelIoError::Format {
                line: line_no,
                detail: format!("bad count {count:?}"),
            })?;
            let ctx: Vec<String> = ctx.split(' ').map(str::to_string).collect();
            if ctx.len() != order - 1 {
                return Err(ModelIoError::Format {
                    line: line_no,
                    detail: format!("context arity {} does not match order {order}", ctx.len()),
                });
            }
            if token != EOS {
                vocabulary.insert(token.to_string());
            }
            *counts
                .entry(ctx.clone())
                .or_default()
                .entry(token.to_string())
                .or_insert(0) += count;
            *context_totals.entry(ctx).or_insert(0) += count;
        }

        if !(2..=3).contains(&order) {
            return Err(ModelIoError::Format {
                line: 2,
                detail: format!("order {order} out of range"),
            });
        }
        Ok(Self {
            order,
            smoothing_k,
            vocabulary,
            counts,
            context_totals,
        })
    }
}

impl LikelihoodBackend for NgramModel {
    fn id(&self) -> String {
        format!("ngram(order={}, k={})", self.order, self.smoothing_k)
    }

    fn first_token_policy(&self) -> FirstTokenPolicy {
        FirstTokenPolicy::Scored
    }

    fn score_tokens(&self, tokens: &TokenSeq) -> Result<ScoredTokens, BackendError> {
        if tokens.is_empty() {
            return Err(BackendError::EmptySequence);
        }
        let n = self.order - 1;
        // Context window over mapped tokens; BOS padding on the left.
        let mut history: Vec<String> = vec![BOS.to_string(); n];
        let mut scored = Vec::with_capacity(tokens.len());
        for token in tokens.tokens() {
            let ctx: Vec<&str> = history.iter().map(String::as_str).collect();
            let lp = self.prob(&ctx, token).ln();
            scored.push(TokenLogProb {
                token: token.clone(),
                logprob: Some(lp),
            });
            if n > 0 {
                history.remove(0);
                history.push(self.map_token(token).into_owned());
            }
        }
        let ctx: Vec<&str> = history.iter().map(String::as_str).collect();
        let eos_logprob = Some(self.prob(&ctx, EOS).ln());
        Ok(ScoredTokens {
            tokens: scored,
            eos_logprob,
        })
    }

    fn max_parallel(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{corpus_from_str, CorpusFormat};

    fn corpus(lines: &[&str]) -> Corpus {
        corpus_from_str(&lines.join("\n"), CorpusFormat::Lines, "train".into()).unwrap()
    }

    fn bigram(lines: &[&str]) -> NgramModel {
        NgramModel::train(&corpus(lines), 2, 1.0).unwrap()
    }

    #[test]
    fn bigram_counts_from_single_sentence() {
        let m = bigram(&["a b"]);
        assert_eq!(m.count(&[BOS], "a"), 1);
        assert_eq!(m.count(&["a"], "b"), 1);
        assert_eq!(m.count(&["b"], EOS), 1);
        assert_eq!(m.vocabulary().len(), 3); // a, b, <eos>
        assert_eq!(m.effective_vocab_size(), 4);
    }

    #[test]
    fn repeated_sentence_doubles_counts() {
        let once = bigram(&["a b"]);
        let twice = bigram(&["a b", "a b"]);
        assert_eq!(twice.count(&[BOS], "a"), 2 * once.count(&[BOS], "a"));
        assert_eq!(twice.count(&["a"], "b"), 2 * once.count(&["a"], "b"));
        assert_eq!(twice.count(&["b"], EOS), 2 * once.count(&["b"], EOS));
    }

    #[test]
    fn trigram_pads_with_two_bos() {
        let m = NgramModel::train(&corpus(&["a b"]), 3, 1.0).unwrap();
        assert_eq!(m.count(&[BOS, BOS], "a"), 1);
        assert_eq!(m.count(&[BOS, "a"], "b"), 1);
        assert_eq!(m.count(&["a", "b"], EOS), 1);
    }

    #[test]
    fn add_one_probability_with_unknown_in_vocab() {
        let m = bigram(&["a b"]);
        // (1 + 1) / (1 + 1 * 4): effective vocabulary {a, b, <eos>, <unk>}
        assert!((m.prob(&["a"], "b") - 0.4).abs() < 1e-12);
        assert!((m.prob(&[BOS], "a") - 0.4).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = bigram(&["a b"]);
        let v = m.effective_vocab_size() as f64;
        // Context "zzz" maps to <unk>, which never occurred: every
        // continuation gets k / (0 + k * v) = 1 / v.
        assert!((m.prob(&["zzz"], "a") - 1.0 / v).abs() < 1e-12);
        assert!((m.prob(&["zzz"], "qqq") - 1.0 / v).abs() < 1e-12);
        // Context "b" was seen once (before <eos>), so an unknown
        // continuation gets (0 + 1) / (1 + 1 * 4) = 0.2 instead.
        assert!((m.prob(&["b"], "zzz") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn conditionals_sum_to_one() {
        let m = bigram(&["a b", "b a a"]);
        for ctx_owned in m.contexts() {
            let ctx: Vec<&str> = ctx_owned.iter().map(String::as_str).collect();
            let mut sum: f64 = m.prob(&ctx, UNK);
            for token in m.vocabulary() {
                sum += m.prob(&ctx, token);
            }
            assert!((sum - 1.0).abs() < 1e-9, "context {ctx:?} sums to {sum}");
        }
    }

    #[test]
    fn score_tokens_matches_hand_logprobs() {
        let m = bigram(&["a b"]);
        let seq = tokenize("a b", Casing::Preserve);
        let scored = m.score_tokens(&seq).unwrap();
        assert_eq!(scored.tokens.len(), 2);
        for t in &scored.tokens {
            let lp = t.logprob.unwrap();
            assert!((lp - 0.4_f64.ln()).abs() < 1e-12);
            assert!(lp < 0.0 && lp.is_finite());
        }
        assert!((scored.eos_logprob.unwrap() - 0.4_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scoring_is_deterministic() {
        let m = bigram(&["a b c", "c b a"]);
        let seq = tokenize("a c b unseen", Casing::Preserve);
        let first = m.score_tokens(&seq).unwrap();
        let second = m.score_tokens(&seq).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let m = bigram(&["a b"]);
        let err = m.score_tokens(&TokenSeq::from_tokens(Vec::<String>::new()));
        assert!(matches!(err, Err(BackendError::EmptySequence)));
    }

    #[test]
    fn train_validates_parameters() {
        let c = corpus(&["a b"]);
        assert_eq!(
            NgramModel::train(&c, 1, 1.0).unwrap_err(),
            TrainError::UnsupportedOrder(1)
        );
        assert_eq!(
            NgramModel::train(&c, 4, 1.0).unwrap_err(),
            TrainError::UnsupportedOrder(4)
        );
        assert_eq!(
            NgramModel::train(&c, 2, 0.0).unwrap_err(),
            TrainError::NonPositiveSmoothing(0.0)
        );
        let empty = corpus_from_str("", CorpusFormat::Lines, "e".into()).unwrap();
        assert_eq!(
            NgramModel::train(&empty, 2, 1.0).unwrap_err(),
            TrainError::EmptyCorpus
        );
    }

    #[test]
    fn serialization_round_trips() {
        let m = NgramModel::train(&corpus(&["a b c.", "c a b!"]), 3, 0.5).unwrap();
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        let restored = NgramModel::from_reader(&buf[..]).unwrap();
        assert_eq!(m, restored);
    }

    #[test]
    fn serialized_form_is_line_oriented() {
        let m = bigram(&["a b"]);
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ngram-counts v1");
        assert_eq!(lines[1], "order\t2");
        assert_eq!(lines[2], "smoothing_k\t1");
        assert!(lines.contains(&"<bos>\ta\t1"));
        assert!(lines.contains(&"a\tb\t1"));
        assert!(lines.contains(&"b\t<eos>\t1"));
    }

    #[test]
    fn from_reader_rejects_garbage() {
        assert!(NgramModel::from_reader("not a model\n".as_bytes()).is_err());
        let bad_count = "ngram-counts v1\norder\t2\nsmoothing_k\t1\na\tb\tmany\n";
        assert!(NgramModel::from_reader(bad_count.as_bytes()).is_err());
        let bad_arity = "ngram-counts v1\norder\t3\nsmoothing_k\t1\na\tb\t1\n";
        assert!(NgramModel::from_reader(bad_arity.as_bytes()).is_err());
    }
}
