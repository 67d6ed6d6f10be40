//! Punctuation precision/recall/F1 of a hypothesis against a written-form
//! reference.
//!
//! Words are aligned by minimum edit distance (case- and punctuation-blind);
//! punctuation marks are then compared as attachments to their preceding
//! word. Three classes are evaluated: period, comma, question mark. Counts
//! are micro-averaged: per-class tallies are pooled before computing
//! precision and recall.

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{is_punct_token, Corpus, TokenSeq};

#[derive(Debug, Error, PartialEq)]
pub enum PunctError {
    #[error("id {id} appears in the {side} corpus only")]
    UnpairedId { id: String, side: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PunctClass {
    Period,
    Comma,
    Question,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PunctOptions {
    /// Treat "!" as a period instead of ignoring it. Off by default: only
    /// period, comma, and question mark are evaluated classes.
    pub bang_as_period: bool,
}

/// One step of a word alignment. Indices refer to the punctuation-stripped
/// word lists, not raw token positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match { ref_index: usize, hyp_index: usize },
    Substitute { ref_index: usize, hyp_index: usize },
    Delete { ref_index: usize },
    Insert { hyp_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub r#fn: u64,
}

impl ClassCounts {
    fn add(&mut self, other: ClassCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.r#fn += other.r#fn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PerClassCounts {
    pub period: ClassCounts,
    pub comma: ClassCounts,
    pub question: ClassCounts,
}

impl PerClassCounts {
    fn class_mut(&mut self, class: PunctClass) -> &mut ClassCounts {
        match class {
            PunctClass::Period => &mut self.period,
            PunctClass::Comma => &mut self.comma,
            PunctClass::Question => &mut self.question,
        }
    }

    fn add(&mut self, other: &PerClassCounts) {
        self.period.add(other.period);
        self.comma.add(other.comma);
        self.question.add(other.question);
    }

    /// Sums the three classes into one micro-averaging pool.
    pub fn pooled(&self) -> ClassCounts {
        let mut total = ClassCounts::default();
        total.add(self.period);
        total.add(self.comma);
        total.add(self.question);
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PunctEvalResult {
    pub per_class: PerClassCounts,
    pub micro: MicroScores,
    pub diagnostics: Vec<String>,
}

/// Word list plus the punctuation class attached after each word. `leading`
/// is the virtual document-start slot for punctuation before any word.
struct PunctProfile {
    words: Vec<String>,
    leading: Option<PunctClass>,
    attach: Vec<Option<PunctClass>>,
    diagnostics: Vec<String>,
}

fn classify(token: &str, options: PunctOptions) -> Option<PunctClass> {
    match token {
        "." => Some(PunctClass::Period),
        "," => Some(PunctClass::Comma),
        "?" => Some(PunctClass::Question),
        "!" if options.bang_as_period => Some(PunctClass::Period),
        _ => None,
    }
}

fn profile(seq: &TokenSeq, options: PunctOptions) -> PunctProfile {
    let mut words = Vec::new();
    let mut leading = None;
    let mut attach: Vec<Option<PunctClass>> = Vec::new();
    let mut diagnostics = Vec::new();
    // Only the first punctuation token in a run is classed.
    let mut slot_filled_at_start = false;
    let mut slot_filled: Vec<bool> = Vec::new();

    for token in seq.tokens() {
        if is_punct_token(token) {
            let class = classify(token, options);
            if words.is_empty() {
                if slot_filled_at_start {
                    diagnostics.push(format!(
                        "ignoring extra punctuation token {token:?} at document start"
                    ));
                } else {
                    leading = class;
                    slot_filled_at_start = true;
                }
            } else {
                let idx = words.len() - 1;
                if slot_filled[idx] {
                    diagnostics.push(format!(
                        "ignoring extra punctuation token {token:?} after word {:?}",
                        words[idx]
                    ));
                } else {
                    attach[idx] = class;
                    slot_filled[idx] = true;
                }
            }
        } else {
            words.push(token.to_lowercase());
            attach.push(None);
            slot_filled.push(false);
        }
    }
    PunctProfile {
        words,
        leading,
        attach,
        diagnostics,
    }
}

/// Minimum-edit-distance word alignment under unit costs.
///
/// Among equal-cost alignments the result is canonical: at each position the
/// walk takes the most preferred op (match, then substitute, then delete,
/// then insert) that still completes at optimal cost, resolving ties
/// left-to-right.
pub fn align_words(reference: &[String], hypothesis: &[String]) -> Vec<AlignOp> {
    let n = reference.len();
    let m = hypothesis.len();
    // cost[i][j] = edit distance of ref[i..] vs hyp[j..]
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        cost[i][m] = n - i;
    }
    for j in 0..=m {
        cost[n][j] = m - j;
    }
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let sub = cost[i + 1][j + 1] + usize::from(reference[i] != hypothesis[j]);
            let del = cost[i + 1][j] + 1;
            let ins = cost[i][j + 1] + 1;
            cost[i][j] = sub.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = cost[i][j];
        if i < n && j < m && reference[i] == hypothesis[j] && here == cost[i + 1][j + 1] {
            ops.push(AlignOp::Match {
                ref_index: i,
                hyp_index: j,
            });
            i += 1;
            j += 1;
        } else if i < n && j < m && reference[i] != hypothesis[j] && here == cost[i + 1][j + 1] + 1
        {
            ops.push(AlignOp::Substitute {
                ref_index: i,
                hyp_index: j,
            });
            i += 1;
            j += 1;
        } else if i < n && here == cost[i + 1][j] + 1 {
            ops.push(AlignOp::Delete { ref_index: i });
            i += 1;
        } else {
            debug_assert!(j < m && here == cost[i][j + 1] + 1);
            ops.push(AlignOp::Insert { hyp_index: j });
            j += 1;
        }
    }
    ops
}

fn compare_slot(counts: &mut PerClassCounts, reference: Option<PunctClass>, hypothesis: Option<PunctClass>) {
    match (reference, hypothesis) {
        (Some(r), Some(h)) if r == h => counts.class_mut(r).tp += 1,
        (Some(r), Some(h)) => {
            counts.class_mut(r).r#fn += 1;
            counts.class_mut(h).fp += 1;
        }
        (Some(r), None) => counts.class_mut(r).r#fn += 1,
        (None, Some(h)) => counts.class_mut(h).fp += 1,
        (None, None) => {}
    }
}

fn micro_scores(pooled: ClassCounts) -> MicroScores {
    let (tp, fp, fn_) = (pooled.tp as f64, pooled.fp as f64, pooled.r#fn as f64);
    if tp == 0.0 && fp == 0.0 && fn_ == 0.0 {
        // Nothing to find and nothing found: perfect by convention.
        return MicroScores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    MicroScores {
        precision,
        recall,
        f1,
    }
}

fn pair_counts(
    reference: &TokenSeq,
    hypothesis: &TokenSeq,
    options: PunctOptions,
) -> (PerClassCounts, Vec<String>) {
    let ref_profile = profile(reference, options);
    let hyp_profile = profile(hypothesis, options);
    let mut counts = PerClassCounts::default();
    let mut diagnostics = ref_profile.diagnostics;
    diagnostics.extend(hyp_profile.diagnostics);

    compare_slot(&mut counts, ref_profile.leading, hyp_profile.leading);
    for op in align_words(&ref_profile.words, &hyp_profile.words) {
        match op {
            AlignOp::Match { ref_index, hyp_index }
            | AlignOp::Substitute { ref_index, hyp_index } => compare_slot(
                &mut counts,
                ref_profile.attach[ref_index],
                hyp_profile.attach[hyp_index],
            ),
            AlignOp::Delete { ref_index } => {
                compare_slot(&mut counts, ref_profile.attach[ref_index], None)
            }
            AlignOp::Insert { hyp_index } => {
                compare_slot(&mut counts, None, hyp_profile.attach[hyp_index])
            }
        }
    }
    (counts, diagnostics)
}

/// Punctuation F1 of one hypothesis document against one reference document.
pub fn punct_f1(
    reference: &TokenSeq,
    hypothesis: &TokenSeq,
    options: PunctOptions,
) -> PunctEvalResult {
    let (per_class, diagnostics) = pair_counts(reference, hypothesis, options);
    PunctEvalResult {
        per_class,
        micro: micro_scores(per_class.pooled()),
        diagnostics,
    }
}

/// Micro-averaged punctuation F1 over paired corpora: counts are summed
/// across all id-paired documents before the final quotients.
pub fn corpus_punct_f1(
    reference: &Corpus,
    hypothesis: &Corpus,
    options: PunctOptions,
) -> Result<PunctEvalResult, PunctError> {
    use crate::ingest::{tokenize, Casing};

    for hyp_sentence in &hypothesis.sentences {
        if !reference.sentences.iter().any(|r| r.id == hyp_sentence.id) {
            return Err(PunctError::UnpairedId {
                id: hyp_sentence.id.clone(),
                side: "hypothesis",
            });
        }
    }
    let mut per_class = PerClassCounts::default();
    let mut diagnostics = Vec::new();
    for ref_sentence in &reference.sentences {
        let hyp_sentence = hypothesis
            .sentences
            .iter()
            .find(|h| h.id == ref_sentence.id)
            .ok_or_else(|| PunctError::UnpairedId {
                id: ref_sentence.id.clone(),
                side: "reference",
            })?;
        let ref_seq = tokenize(&ref_sentence.text, Casing::Preserve);
        let hyp_seq = tokenize(&hyp_sentence.text, Casing::Preserve);
        let (counts, diags) = pair_counts(&ref_seq, &hyp_seq, options);
        per_class.add(&counts);
        diagnostics.extend(
            diags
                .into_iter()
                .map(|d| format!("{}: {d}", ref_sentence.id)),
        );
    }
    Ok(PunctEvalResult {
        per_class,
        micro: micro_scores(per_class.pooled()),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{corpus_from_str, tokenize, Casing, CorpusFormat};

    fn seq(text: &str) -> TokenSeq {
        tokenize(text, Casing::Preserve)
    }

    fn words(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn eval(reference: &str, hypothesis: &str) -> PunctEvalResult {
        punct_f1(&seq(reference), &seq(hypothesis), PunctOptions::default())
    }

    #[test]
    fn identical_words_all_match() {
        let ops = align_words(&words(&["a", "b", "c"]), &words(&["a", "b", "c"]));
        assert_eq!(
            ops,
            vec![
                AlignOp::Match { ref_index: 0, hyp_index: 0 },
                AlignOp::Match { ref_index: 1, hyp_index: 1 },
                AlignOp::Match { ref_index: 2, hyp_index: 2 },
            ]
        );
    }

    #[test]
    fn single_substitution() {
        let ops = align_words(&words(&["a", "b", "c"]), &words(&["a", "x", "c"]));
        assert_eq!(
            ops,
            vec![
                AlignOp::Match { ref_index: 0, hyp_index: 0 },
                AlignOp::Substitute { ref_index: 1, hyp_index: 1 },
                AlignOp::Match { ref_index: 2, hyp_index: 2 },
            ]
        );
    }

    #[test]
    fn deletion_at_end() {
        let ops = align_words(&words(&["a", "b"]), &words(&["a"]));
        assert_eq!(
            ops,
            vec![
                AlignOp::Match { ref_index: 0, hyp_index: 0 },
                AlignOp::Delete { ref_index: 1 },
            ]
        );
    }

    #[test]
    fn equal_cost_prefers_early_match() {
        // match-then-delete and delete-then-match both cost 1.
        let ops = align_words(&words(&["a", "a"]), &words(&["a"]));
        assert_eq!(
            ops,
            vec![
                AlignOp::Match { ref_index: 0, hyp_index: 0 },
                AlignOp::Delete { ref_index: 1 },
            ]
        );
    }

    #[test]
    fn delete_chosen_when_substitution_wastes_a_match() {
        let ops = align_words(&words(&["a", "b", "c"]), &words(&["b", "c", "a"]));
        assert_eq!(
            ops,
            vec![
                AlignOp::Delete { ref_index: 0 },
                AlignOp::Match { ref_index: 1, hyp_index: 0 },
                AlignOp::Match { ref_index: 2, hyp_index: 1 },
                AlignOp::Insert { hyp_index: 2 },
            ]
        );
    }

    #[test]
    fn op_counts_partition_both_sequences() {
        let reference = words(&["x", "y", "z", "w"]);
        let hypothesis = words(&["y", "q", "w", "w"]);
        let ops = align_words(&reference, &hypothesis);
        let mut matches = 0;
        let mut subs = 0;
        let mut dels = 0;
        let mut ins = 0;
        for op in ops {
            match op {
                AlignOp::Match { .. } => matches += 1,
                AlignOp::Substitute { .. } => subs += 1,
                AlignOp::Delete { .. } => dels += 1,
                AlignOp::Insert { .. } => ins += 1,
            }
        }
        assert_eq!(matches + subs + dels, reference.len());
        assert_eq!(matches + subs + ins, hypothesis.len());
    }

    #[test]
    fn missing_comma_halves_recall() {
        let result = eval("a , b .", "a b .");
        assert_eq!(result.per_class.comma, ClassCounts { tp: 0, fp: 0, r#fn: 1 });
        assert_eq!(result.per_class.period, ClassCounts { tp: 1, fp: 0, r#fn: 0 });
        assert_eq!(result.micro.precision, 1.0);
        assert_eq!(result.micro.recall, 0.5);
        assert!((result.micro.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_documents_are_perfect() {
        let result = eval("Hello , are you there ?", "Hello , are you there ?");
        assert_eq!(result.micro.precision, 1.0);
        assert_eq!(result.micro.recall, 1.0);
        assert_eq!(result.micro.f1, 1.0);
    }

    #[test]
    fn inserted_sentence_break_costs_precision() {
        let result = eval(
            "I am going to submit this paper .",
            "I am going to . Submit this paper .",
        );
        assert_eq!(result.per_class.period, ClassCounts { tp: 1, fp: 1, r#fn: 0 });
        assert_eq!(result.micro.precision, 0.5);
        assert_eq!(result.micro.recall, 1.0);
        assert!((result.micro.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_punctuation_anywhere_is_perfect_by_convention() {
        let result = eval("a b c", "a b c");
        assert_eq!(result.micro.f1, 1.0);
    }

    #[test]
    fn hypothesis_without_punctuation_scores_zero() {
        let result = eval("a . b .", "a b");
        assert_eq!(result.micro.precision, 0.0);
        assert_eq!(result.micro.recall, 0.0);
        assert_eq!(result.micro.f1, 0.0);
    }

    #[test]
    fn alignment_ignores_case_and_punctuation() {
        let result = eval("Stop , now .", "stop now");
        // Words align as two matches; both marks are misses.
        assert_eq!(result.per_class.comma.r#fn, 1);
        assert_eq!(result.per_class.period.r#fn, 1);
        assert_eq!(result.per_class.pooled().fp, 0);
    }

    #[test]
    fn ignored_marks_do_not_count() {
        // Semicolon and bang are outside the evaluated classes.
        let result = eval("a ; b !", "a b");
        assert_eq!(result.micro.f1, 1.0);

        let strict = punct_f1(
            &seq("a b !"),
            &seq("a b ."),
            PunctOptions { bang_as_period: true },
        );
        assert_eq!(strict.per_class.period.tp, 1);
        assert_eq!(strict.micro.f1, 1.0);
    }

    #[test]
    fn only_first_mark_in_a_run_is_classed() {
        let result = eval("done ? !", "done ?");
        assert_eq!(result.per_class.question.tp, 1);
        assert_eq!(result.micro.f1, 1.0);
        assert!(result.diagnostics.iter().any(|d| d.contains("extra punctuation")));
    }

    #[test]
    fn document_start_slot_is_compared() {
        let result = eval(". a", "a");
        assert_eq!(result.per_class.period.r#fn, 1);
        assert_eq!(result.micro.f1, 0.0);
    }

    #[test]
    fn substituted_word_still_compares_attachments() {
        let result = eval("go home .", "go house .");
        assert_eq!(result.per_class.period.tp, 1);
        assert_eq!(result.micro.f1, 1.0);
    }

    #[test]
    fn punctuation_after_inserted_and_deleted_words() {
        // "b ." deleted from the reference: its period is a miss.
        let missing = eval("a b .", "a");
        assert_eq!(missing.per_class.period.r#fn, 1);
        // "x ." inserted in the hypothesis: its period is a false alarm.
        let extra = eval("a", "a x .");
        assert_eq!(extra.per_class.period.fp, 1);
    }

    fn corpus(text: &str) -> Corpus {
        corpus_from_str(text, CorpusFormat::Lines, "c".into()).unwrap()
    }

    #[test]
    fn corpus_counts_are_pooled_before_quotients() {
        // Document 1: tp=1, fp=1. Document 2: tp=1, fn=1.
        let reference = corpus("a .\nb . c .");
        let hypothesis = corpus("a . x .\nb . c");
        let result =
            corpus_punct_f1(&reference, &hypothesis, PunctOptions::default()).unwrap();
        let pooled = result.per_class.pooled();
        assert_eq!((pooled.tp, pooled.fp, pooled.r#fn), (2, 1, 1));
        assert!((result.micro.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((result.micro.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((result.micro.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_document_corpus_equals_direct_call() {
        let reference = corpus("a , b .");
        let hypothesis = corpus("a b .");
        let via_corpus =
            corpus_punct_f1(&reference, &hypothesis, PunctOptions::default()).unwrap();
        let direct = eval("a , b .", "a b .");
        assert_eq!(via_corpus.per_class, direct.per_class);
        assert_eq!(via_corpus.micro, direct.micro);
    }

    #[test]
    fn unpaired_ids_are_rejected() {
        let reference = corpus("a .\nb .");
        let hypothesis = corpus("a .");
        let err = corpus_punct_f1(&reference, &hypothesis, PunctOptions::default());
        assert_eq!(
            err,
            Err(PunctError::UnpairedId { id: "s2".into(), side: "reference" })
        );
    }
}
