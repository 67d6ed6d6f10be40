//! Reference-free readability scoring for ASR transcripts.
//!
//! The pipeline: [`ingest`] loads and tokenizes transcripts, a [`backend`]
//! assigns token log-probabilities (a remote completion service or a local
//! n-gram model), and [`engine`] aggregates them into per-sentence NLL
//! scores, percentile distributions, and TRScore percentages. Alongside the
//! likelihood path, [`punct`] computes alignment-based punctuation F1,
//! [`hrs`] aggregates human judge ratings, [`perturb`] generates seeded
//! readability corruptions for sensitivity studies, and [`stats`] holds the
//! shared numerical primitives.

pub mod backend;
pub mod engine;
pub mod hrs;
pub mod ingest;
pub mod perturb;
pub mod punct;
pub mod stats;
