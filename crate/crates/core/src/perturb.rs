//! Seeded, deterministic text corruptions for metric-sensitivity studies.
//!
//! Each kind degrades one readability aspect: sentence breaks (punct_shift,
//! punct_insert), disfluency (word_duplicate, filler_insert), capitalization
//! (decapitalize), and written-form rendering (itn_spellout). Position
//! choices come from a splitmix64 stream so any implementation of the same
//! mixing function reproduces the output byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{is_punct_token, tokenize, Casing, Corpus, Sentence};

pub const FILLERS: [&str; 3] = ["umm", "uh", "you know"];

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("rate must lie in [0, 1], got {0}")]
    InvalidRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    /// Move a terminal period one word left, capitalizing the word that now
    /// follows it.
    PunctShift,
    /// Insert a period at an interior word boundary and capitalize the next
    /// word, imitating a spurious sentence break.
    PunctInsert,
    /// Duplicate one word, imitating a stutter.
    WordDuplicate,
    /// Insert a spoken filler between two words.
    FillerInsert,
    /// Lowercase a fully-uppercase token.
    Decapitalize,
    /// Replace a digit or abbreviation token with its spoken, lowercase form.
    ItnSpellout,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 6] = [
        PerturbKind::PunctShift,
        PerturbKind::PunctInsert,
        PerturbKind::WordDuplicate,
        PerturbKind::FillerInsert,
        PerturbKind::Decapitalize,
        PerturbKind::ItnSpellout,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            PerturbKind::PunctShift => "punct_shift",
            PerturbKind::PunctInsert => "punct_insert",
            PerturbKind::WordDuplicate => "word_duplicate",
            PerturbKind::FillerInsert => "filler_insert",
            PerturbKind::Decapitalize => "decapitalize",
            PerturbKind::ItnSpellout => "itn_spellout",
        }
    }
}

impl std::fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PerturbKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| format!("unknown perturbation kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    /// Fraction of eligible positions to perturb. Any rate > 0 perturbs at
    /// least one position when one exists.
    pub rate: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<(), PerturbError> {
        if self.rate.is_finite() && (0.0..=1.0).contains(&self.rate) {
            Ok(())
        } else {
            Err(PerturbError::InvalidRate(self.rate))
        }
    }
}

/// splitmix64 pseudo-random stream. Chosen for its tiny, widely documented
/// definition: the exact constants below are the whole contract.
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-enough index in `[0, n)`; the slight modulo bias is accepted
    /// in exchange for a one-line cross-language definition.
    pub fn pick(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}

/// Spoken form of a written token, when the fixed table covers it:
/// integers 0-99, "AM"/"PM", and "%".
pub fn spellout(token: &str) -> Option<String> {
    match token {
        "AM" => return Some("am".to_string()),
        "PM" => return Some("pm".to_string()),
        "%" => return Some("percent".to_string()),
        _ => {}
    }
    if token.is_empty() || !token.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let n: u32 = token.parse().ok().filter(|&n| n <= 99)?;
    Some(spell_number(n))
}

fn spell_number(n: u32) -> String {
    const ONES: [&str; 10] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    ];
    const TEENS: [&str; 10] = [
        "ten",
        "eleven",
        "twelve",
        "thirteen",
        "fourteen",
        "fifteen",
        "sixteen",
        "seventeen",
        "eighteen",
        "nineteen",
    ];
    const TENS: [&str; 8] = [
        "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    ];
    match n {
        0..=9 => ONES[n as usize].to_string(),
        10..=19 => TEENS[(n - 10) as usize].to_string(),
        _ => {
            let tens = TENS[(n / 10 - 2) as usize];
            if n % 10 == 0 {
                tens.to_string()
            } else {
                format!("{tens}-{}", ONES[(n % 10) as usize])
            }
        }
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn is_fully_uppercase(token: &str) -> bool {
    let mut has_alpha = false;
    for c in token.chars() {
        if c.is_alphabetic() {
            has_alpha = true;
            if !c.is_uppercase() {
                return false;
            }
        }
    }
    has_alpha
}

/// Word ordinal → token index for every non-punctuation token.
fn word_indices(tokens: &[String]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !is_punct_token(t))
        .map(|(i, _)| i)
        .collect()
}

/// Token positions (or insertion points) the kind may act on.
fn eligible_positions(tokens: &[String], kind: PerturbKind) -> Vec<usize> {
    let words = word_indices(tokens);
    match kind {
        PerturbKind::PunctShift => tokens
            .iter()
            .enumerate()
            .filter(|(i, t)| t.as_str() == "." && words.iter().filter(|&&w| w < *i).count() >= 2)
            .map(|(i, _)| i)
            .collect(),
        PerturbKind::PunctInsert => words
            .iter()
            .take(words.len().saturating_sub(1))
            .copied()
            .filter(|&w| !is_punct_token(&tokens[w + 1]))
            .collect(),
        PerturbKind::WordDuplicate => {
            if words.len() >= 2 {
                words
            } else {
                Vec::new()
            }
        }
        PerturbKind::FillerInsert => words.iter().skip(1).copied().collect(),
        PerturbKind::Decapitalize => words
            .into_iter()
            .filter(|&w| is_fully_uppercase(&tokens[w]))
            .collect(),
        PerturbKind::ItnSpellout => words
            .into_iter()
            .filter(|&w| spellout(&tokens[w]).is_some())
            .collect(),
    }
}

fn apply_at(tokens: &mut Vec<String>, kind: PerturbKind, pos: usize, filler: Option<&str>) {
    match kind {
        PerturbKind::PunctShift => {
            // Positions can go stale when several shifts overlap; skip
            // rather than corrupt the token stream.
            if tokens.get(pos).map(String::as_str) != Some(".") {
                return;
            }
            let words_before: Vec<usize> = word_indices(tokens)
                .into_iter()
                .filter(|&w| w < pos)
                .collect();
            let [.., prev, last] = words_before.as_slice() else {
                return;
            };
            let (prev, last) = (*prev, *last);
            tokens.remove(pos);
            tokens.insert(prev + 1, ".".to_string());
            tokens[last + 1] = capitalize(&tokens[last + 1]);
        }
        PerturbKind::PunctInsert => {
            tokens.insert(pos + 1, ".".to_string());
            tokens[pos + 2] = capitalize(&tokens[pos + 2]);
        }
        PerturbKind::WordDuplicate => {
            let word = tokens[pos].clone();
            tokens.insert(pos, word);
        }
        PerturbKind::FillerInsert => {
            let filler = filler.expect("filler chosen for filler_insert");
            for part in filler.split(' ').rev() {
                tokens.insert(pos, part.to_string());
            }
        }
        PerturbKind::Decapitalize => {
            tokens[pos] = tokens[pos].to_lowercase();
        }
        PerturbKind::ItnSpellout => {
            tokens[pos] = spellout(&tokens[pos]).expect("eligibility checked");
        }
    }
}

/// Applies the perturbation to one sentence. The boolean is false when the
/// sentence had no eligible position (or the rate is zero) and came back
/// unchanged.
pub fn perturb_sentence(
    sentence: &Sentence,
    spec: &PerturbSpec,
) -> Result<(Sentence, bool), PerturbError> {
    spec.validate()?;
    let seq = tokenize(&sentence.text, Casing::Preserve);
    let mut tokens: Vec<String> = seq.tokens().to_vec();
    let eligible = eligible_positions(&tokens, spec.kind);
    if spec.rate == 0.0 || eligible.is_empty() {
        return Ok((sentence.clone(), false));
    }

    let count = ((spec.rate * eligible.len() as f64).round() as usize)
        .max(1)
        .min(eligible.len());
    let mut stream = SeedStream::new(spec.seed);
    let mut remaining = eligible;
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        chosen.push(remaining.remove(stream.pick(remaining.len())));
    }
    chosen.sort_unstable();

    // Fillers are drawn after all position picks, one per position in
    // ascending order, so the stream layout is stable.
    let fillers: Vec<Option<&str>> = chosen
        .iter()
        .map(|_| match spec.kind {
            PerturbKind::FillerInsert => Some(FILLERS[stream.pick(FILLERS.len())]),
            _ => None,
        })
        .collect();

    // Apply right-to-left so earlier positions stay valid while later
    // regions shift.
    for (&pos, filler) in chosen.iter().zip(&fillers).rev() {
        apply_at(&mut tokens, spec.kind, pos, *filler);
    }

    let text = crate::ingest::TokenSeq::from_tokens(tokens).detokenize();
    let changed = text != sentence.text;
    Ok((
        Sentence {
            id: sentence.id.clone(),
            text,
            source_line: sentence.source_line,
        },
        changed,
    ))
}

/// Per-sentence seeded corpus perturbation: sentence i uses seed + i, so a
/// corpus run is reproducible and insensitive to sentence order changes
/// elsewhere. Ids gain a `~kind` suffix to mark provenance.
pub fn perturb_corpus(corpus: &Corpus, spec: &PerturbSpec) -> Result<Corpus, PerturbError> {
    spec.validate()?;
    let mut sentences = Vec::with_capacity(corpus.len());
    let mut untouched = 0usize;
    for (index, sentence) in corpus.sentences.iter().enumerate() {
        let child = PerturbSpec {
            seed: spec.seed.wrapping_add(index as u64),
            ..*spec
        };
        let (mut perturbed, changed) = perturb_sentence(sentence, &child)?;
        if !changed && spec.rate > 0.0 {
            untouched += 1;
        }
        perturbed.id = format!("{}~{}", perturbed.id, spec.kind.label());
        sentences.push(perturbed);
    }
    let mut warnings = corpus.warnings.clone();
    if untouched > 0 {
        warnings.push(format!(
            "{untouched} of {} sentences had no eligible position for {}",
            corpus.len(),
            spec.kind.label()
        ));
    }
    Ok(Corpus {
        id: format!("{}~{}", corpus.id, spec.kind.label()),
        sentences,
        warnings,
    })
}
