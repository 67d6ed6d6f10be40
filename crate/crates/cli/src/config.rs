//! Optional TOML configuration mirroring the command-line flags.
//!
//! Precedence is strict: an explicit flag always beats the config file,
//! which beats the built-in default. Unknown keys are rejected so typos
//! fail loudly instead of being ignored.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use trscore_core::ingest::CorpusFormat;

use crate::commands::CliError;

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub token_env: Option<String>,
    pub order: Option<usize>,
    pub smoothing_k: Option<f64>,
    pub train: Option<PathBuf>,
    pub mode: Option<String>,
    pub pairwise_mode: Option<String>,
    pub percentiles: Option<Vec<f64>>,
    pub format: Option<String>,
    pub seed: Option<u64>,
    pub input_format: Option<String>,
}

impl FileConfig {
    /// Loads the config file when a path was given, else an empty config.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("bad config {}: {e}", path.display())))
    }
}

/// Parses a corpus layout name.
pub fn parse_corpus_format(name: &str) -> Result<CorpusFormat, CliError> {
    match name {
        "plain" => Ok(CorpusFormat::Plain),
        "lines" => Ok(CorpusFormat::Lines),
        "jsonl" => Ok(CorpusFormat::Jsonl),
        other => Err(CliError::Input(format!(
            "unknown input format {other:?}; expected plain, lines, or jsonl"
        ))),
    }
}

/// Chooses the corpus layout: explicit flag, then config file, then a guess
/// from the file extension (`.jsonl` reads as records, everything else as a
/// plain document).
pub fn resolve_corpus_format(
    flag: Option<&str>,
    file_config: Option<&str>,
    path: &Path,
) -> Result<CorpusFormat, CliError> {
    if let Some(name) = flag.or(file_config) {
        return parse_corpus_format(name);
    }
    let by_extension = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl"));
    Ok(if by_extension { CorpusFormat::Jsonl } else { CorpusFormat::Plain })
}

/// Parses the `--percentiles` flag ("25,50,75,90") or the config list;
/// defaults to the standard report ranks.
pub fn resolve_percentiles(
    flag: Option<&str>,
    file_config: Option<&[f64]>,
) -> Result<Vec<f64>, CliError> {
    if let Some(raw) = flag {
        let mut ranks = Vec::new();
        for piece in raw.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let value: f64 = piece
                .parse()
                .map_err(|_| CliError::Input(format!("bad percentile {piece:?}")))?;
            ranks.push(value);
        }
        if ranks.is_empty() {
            return Err(CliError::Input("--percentiles lists no ranks".into()));
        }
        return Ok(ranks);
    }
    if let Some(list) = file_config {
        if list.is_empty() {
            return Err(CliError::Input("config percentiles list is empty".into()));
        }
        return Ok(list.to_vec());
    }
    Ok(vec![25.0, 50.0, 75.0, 90.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_names_parse() {
        assert_eq!(parse_corpus_format("plain").unwrap(), CorpusFormat::Plain);
        assert_eq!(parse_corpus_format("lines").unwrap(), CorpusFormat::Lines);
        assert_eq!(parse_corpus_format("jsonl").unwrap(), CorpusFormat::Jsonl);
        assert!(parse_corpus_format("tsv").is_err());
    }

    #[test]
    fn format_resolution_prefers_flag_then_config_then_extension() {
        let jsonl_path = Path::new("data/corpus.jsonl");
        let txt_path = Path::new("data/corpus.txt");
        let flag = resolve_corpus_format(Some("lines"), Some("jsonl"), jsonl_path).unwrap();
        assert_eq!(flag, CorpusFormat::Lines);
        let config = resolve_corpus_format(None, Some("lines"), jsonl_path).unwrap();
        assert_eq!(config, CorpusFormat::Lines);
        assert_eq!(
            resolve_corpus_format(None, None, jsonl_path).unwrap(),
            CorpusFormat::Jsonl
        );
        assert_eq!(
            resolve_corpus_format(None, None, txt_path).unwrap(),
            CorpusFormat::Plain
        );
    }

    #[test]
    fn extension_sniffing_ignores_case() {
        let path = Path::new("CORPUS.JSONL");
        assert_eq!(resolve_corpus_format(None, None, path).unwrap(), CorpusFormat::Jsonl);
    }

    #[test]
    fn percentile_flag_parses_and_overrides_config() {
        let config = [10.0, 20.0];
        let ranks = resolve_percentiles(Some("25, 50 ,90"), Some(&config)).unwrap();
        assert_eq!(ranks, vec![25.0, 50.0, 90.0]);
        assert_eq!(resolve_percentiles(None, Some(&config)).unwrap(), vec![10.0, 20.0]);
        assert_eq!(
            resolve_percentiles(None, None).unwrap(),
            vec![25.0, 50.0, 75.0, 90.0]
        );
    }

    #[test]
    fn bad_percentile_values_are_rejected() {
        assert!(resolve_percentiles(Some("25,banana"), None).is_err());
        assert!(resolve_percentiles(Some(" , "), None).is_err());
        assert!(resolve_percentiles(None, Some(&[])).is_err());
    }

    #[test]
    fn missing_config_path_is_empty_config() {
        let config = FileConfig::load(None).unwrap();
        assert!(config.backend.is_none());
        assert!(config.percentiles.is_none());
    }

    #[test]
    fn unknown_config_keys_fail_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(&path, "orderr = 3\n").unwrap();
        let err = FileConfig::load(Some(&path)).unwrap_err();
        assert!(err.to_string().contains("bad config"), "{err}");
    }

    #[test]
    fn config_round_trips_known_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(
            &path,
            "backend = \"ngram\"\norder = 3\nsmoothing-k = 0.5\npercentiles = [50.0]\nmode = \"mean\"\nseed = 7\n",
        )
        .unwrap();
        let config = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(config.backend.as_deref(), Some("ngram"));
        assert_eq!(config.order, Some(3));
        assert_eq!(config.smoothing_k, Some(0.5));
        assert_eq!(config.percentiles, Some(vec![50.0]));
        assert_eq!(config.mode.as_deref(), Some("mean"));
        assert_eq!(config.seed, Some(7));
    }
}
