//! Corpus loading, sentence segmentation, and tokenization.
//!
//! Three input formats are supported: whole-document plain text (segmented
//! here), one-sentence-per-line text (line boundaries are trusted), and
//! line-delimited JSON records with `id` and `text` fields.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Characters treated as detachable punctuation by the tokenizer.
pub const PUNCT_CHARS: [char; 6] = ['.', ',', '?', '!', ';', ':'];

/// Terminal punctuation that can end a sentence during segmentation.
const TERMINALS: [char; 3] = ['.', '?', '!'];

/// Default force-split cap, in whitespace-separated tokens. Protects
/// backends with bounded context from unpunctuated run-on input.
pub const DEFAULT_TOKEN_CAP: usize = 128;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    InvalidUtf8 { path: String },
    #[error("line {line}: malformed JSON record: {source}")]
    MalformedRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: record field \"{field}\" is missing or empty")]
    MissingField { line: usize, field: &'static str },
    #[error("duplicate sentence id \"{id}\" (lines {first} and {second})")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: sentence text contains a line break")]
    EmbeddedLineBreak { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Whole document; sentence boundaries are recovered by segmentation.
    Plain,
    /// One sentence per non-blank line; boundaries are preserved as given.
    Lines,
    /// One JSON record per line with string fields `id` and `text`.
    Jsonl,
}

impl CorpusFormat {
    pub fn label(&self) -> &'static str {
        match self {
            CorpusFormat::Plain => "plain",
            CorpusFormat::Lines => "lines",
            CorpusFormat::Jsonl => "jsonl",
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    /// 1-based line of the source document where this sentence starts.
    pub source_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub id: String,
    pub sentences: Vec<Sentence>,
    /// Diagnostics collected while loading (force-splits and the like);
    /// surfaced in report metadata, never fatal.
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Word and punctuation tokens of one sentence, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// Wraps pre-split tokens. Empty tokens are dropped to keep the
    /// no-empty-token invariant.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tokens: tokens
                .into_iter()
                .map(Into::into)
                .filter(|t| !t.is_empty())
                .collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-joins tokens, omitting the space before punctuation tokens.
    /// This is the normalized sentence text the tokenizer round-trips.
    pub fn detokenize(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            if !out.is_empty() && !is_punct_token(tok) {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }

    /// Byte range of each token within [`detokenize`](Self::detokenize)'s
    /// output. Remote backends use these to fold sub-token log-probabilities
    /// back onto our tokens.
    pub fn spans(&self) -> Vec<std::ops::Range<usize>> {
        let mut spans = Vec::with_capacity(self.tokens.len());
        let mut pos = 0usize;
        for tok in &self.tokens {
            if pos > 0 && !is_punct_token(tok) {
                pos += 1;
            }
            spans.push(pos..pos + tok.len());
            pos += tok.len();
        }
        spans
    }
}

/// True when every character of the token is detachable punctuation.
/// Such tokens attach to the preceding token on de-tokenization.
pub fn is_punct_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| PUNCT_CHARS.contains(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Casing {
    #[default]
    Preserve,
    Lower,
}

/// Splits sentence text into word and punctuation tokens.
///
/// Whitespace-splits first, then detaches the trailing run of punctuation
/// characters from each piece, one token per character. Interior punctuation
/// (apostrophes, hyphens, and dots inside "a.b" or "7:30") stays inside the
/// word token, which is what keeps de-tokenization an exact inverse.
pub fn tokenize(text: &str, casing: Casing) -> TokenSeq {
    let mut tokens = Vec::new();
    for piece in text.split_whitespace() {
        let trailing = piece
            .chars()
            .rev()
            .take_while(|c| PUNCT_CHARS.contains(c))
            .count();
        let split_at = piece.len() - trailing; // punct chars are 1 byte each
        let (stem, punct) = piece.split_at(split_at);
        if !stem.is_empty() {
            match casing {
                Casing::Preserve => tokens.push(stem.to_string()),
                Casing::Lower => tokens.push(stem.to_lowercase()),
            }
        }
        for c in punct.chars() {
            tokens.push(c.to_string());
        }
    }
    TokenSeq { tokens }
}

/// Sentence segmentation over a whole document.
///
/// A sentence ends at `{. ? !}` followed by whitespace or end of text (the
/// mark stays attached), or at a hard line break. Runs that reach `token_cap`
/// whitespace tokens without a boundary are split there and flagged.
pub fn segment_sentences(text: &str, token_cap: usize) -> (Vec<Sentence>, Vec<String>) {
    assert!(token_cap >= 1, "token cap must be at least 1");
    let mut sentences = Vec::new();
    let mut warnings = Vec::new();
    let normalized = normalize_document(text);

    for (line_idx, line) in normalized.lines().enumerate() {
        let line_no = line_idx + 1;
        let mut current: Vec<&str> = Vec::new();
        // Work token-by-token: a terminal mark at the end of a piece is by
        // construction followed by whitespace or end of line.
        let pieces: Vec<&str> = line.split_whitespace().collect();
        for piece in pieces {
            if current.len() >= token_cap {
                warnings.push(format!(
                    "line {line_no}: segment force-split at {token_cap} tokens; scores for this region may be unreliable"
                ));
                push_sentence(&mut sentences, &current, line_no);
                current.clear();
            }
            current.push(piece);
            let terminal = piece.chars().last().is_some_and(|c| TERMINALS.contains(&c));
            if terminal {
                push_sentence(&mut sentences, &current, line_no);
                current.clear();
            }
        }
        if !current.is_empty() {
            push_sentence(&mut sentences, &current, line_no);
        }
    }
    (sentences, warnings)
}

fn push_sentence(sentences: &mut Vec<Sentence>, tokens: &[&str], line_no: usize) {
    let text = tokens.join(" ");
    debug_assert!(!text.is_empty());
    sentences.push(Sentence {
        id: format!("s{}", sentences.len() + 1),
        text,
        source_line: line_no,
    });
}

/// Strips a leading BOM and normalizes CRLF to LF.
fn normalize_document(text: &str) -> String {
    text.trim_start_matches('\u{feff}').replace("\r\n", "\n")
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: Option<String>,
    text: Option<String>,
}

/// Loads a corpus from disk. The corpus id is the file stem.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|_| IngestError::InvalidUtf8 {
        path: path.display().to_string(),
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    corpus_from_str(&text, format, id)
}

/// Format-dispatching parser behind [`load_corpus`]; separated so tests and
/// in-memory callers can skip the filesystem.
pub fn corpus_from_str(text: &str, format: CorpusFormat, id: String) -> Result<Corpus, IngestError> {
    match format {
        CorpusFormat::Plain => {
            let (sentences, warnings) = segment_sentences(text, DEFAULT_TOKEN_CAP);
            Ok(Corpus {
                id,
                sentences,
                warnings,
            })
        }
        CorpusFormat::Lines => {
            let normalized = normalize_document(text);
            let mut sentences = Vec::new();
            for (idx, line) in normalized.lines().enumerate() {
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                sentences.push(Sentence {
                    id: format!("s{}", sentences.len() + 1),
                    text: trimmed.to_string(),
                    source_line: idx + 1,
                });
            }
            Ok(Corpus {
                id,
                sentences,
                warnings: Vec::new(),
            })
        }
        CorpusFormat::Jsonl => {
            let normalized = normalize_document(text);
            let mut sentences: Vec<Sentence> = Vec::new();
            for (idx, line) in normalized.lines().enumerate() {
                let line_no = idx + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let record: JsonlRecord = serde_json::from_str(line)
                    .map_err(|source| IngestError::MalformedRecord { line: line_no, source })?;
                let rid = match record.id {
                    Some(v) if !v.is_empty() => v,
                    _ => return Err(IngestError::MissingField { line: line_no, field: "id" }),
                };
                let rtext = match record.text {
                    Some(v) if !v.trim().is_empty() => v.trim().to_string(),
                    _ => {
                        return Err(IngestError::MissingField {
                            line: line_no,
                            field: "text",
                        })
                    }
                };
                if rtext.contains('\n') || rtext.contains('\r') {
                    return Err(IngestError::EmbeddedLineBreak { line: line_no });
                }
                if let Some(prev) = sentences.iter().find(|s| s.id == rid) {
                    return Err(IngestError::DuplicateId {
                        id: rid,
                        first: prev.source_line,
                        second: line_no,
                    });
                }
                sentences.push(Sentence {
                    id: rid,
                    text: rtext,
                    source_line: line_no,
                });
            }
            Ok(Corpus {
                id,
                sentences,
                warnings: Vec::new(),
            })
        }
    }
}
