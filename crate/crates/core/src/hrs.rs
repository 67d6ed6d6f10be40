//! Human Readability Score: judge ratings on a 0-4 scale, normalized to
//! percentages and pooled into a mean with sample dispersion.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::mean_std;

#[derive(Debug, Error)]
pub enum HrsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {source}")]
    MalformedRow {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("row {row}: rating {value} is outside the 0-4 scale")]
    RatingOutOfRange { row: usize, value: i64 },
    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },
    #[error("rows {first} and {second}: duplicate rating for ({sentence_id}, {judge_id})")]
    DuplicatePair {
        sentence_id: String,
        judge_id: String,
        first: usize,
        second: usize,
    },
    #[error("no ratings supplied")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeRating {
    pub sentence_id: String,
    pub judge_id: String,
    /// Position on the 5-point guideline scale, 0 (unusable) to 4 (perfect).
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HrsSummary {
    pub mean_percent: f64,
    pub stddev_percent: f64,
    pub n_ratings: usize,
    pub n_judges: usize,
    /// True when dispersion is meaningless because only one rating exists.
    pub single_rating: bool,
}

impl HrsSummary {
    /// The `mean% ± std%` display form, each number carrying at most two
    /// decimals with trailing zeros trimmed.
    pub fn render(&self) -> String {
        format!(
            "{}% ± {}%",
            trim_decimals(self.mean_percent),
            trim_decimals(self.stddev_percent)
        )
    }
}

fn trim_decimals(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    sentence_id: String,
    judge_id: String,
    rating: i64,
}

/// Loads `sentence_id,judge_id,rating` CSV rows. Row numbers in errors count
/// data rows from 1 (the header is row 0).
pub fn load_ratings(path: &Path) -> Result<Vec<JudgeRating>, HrsError> {
    let file = std::fs::File::open(path).map_err(|source| HrsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ratings_from_reader(file)
}

pub fn ratings_from_reader(reader: impl std::io::Read) -> Result<Vec<JudgeRating>, HrsError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut ratings = Vec::new();
    for (idx, record) in csv_reader.deserialize::<RatingRow>().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|source| HrsError::MalformedRow { row, source })?;
        if record.sentence_id.is_empty() {
            return Err(HrsError::EmptyField {
                row,
                field: "sentence_id",
            });
        }
        if record.judge_id.is_empty() {
            return Err(HrsError::EmptyField {
                row,
                field: "judge_id",
            });
        }
        if !(0..=4).contains(&record.rating) {
            return Err(HrsError::RatingOutOfRange {
                row,
                value: record.rating,
            });
        }
        let key = (record.sentence_id.clone(), record.judge_id.clone());
        if let Some(&first) = seen.get(&key) {
            return Err(HrsError::DuplicatePair {
                sentence_id: key.0,
                judge_id: key.1,
                first,
                second: row,
            });
        }
        seen.insert(key, row);
        ratings.push(JudgeRating {
            sentence_id: record.sentence_id,
            judge_id: record.judge_id,
            rating: record.rating as u8,
        });
    }
    Ok(ratings)
}

/// Pools all (sentence, judge) ratings: each becomes rating/4 × 100, then
/// mean and sample (n-1) standard deviation are taken over the pool.
pub fn hrs_summary(ratings: &[JudgeRating]) -> Result<HrsSummary, HrsError> {
    if ratings.is_empty() {
        return Err(HrsError::Empty);
    }
    let normalized: Vec<f64> = ratings
        .iter()
        .map(|r| f64::from(r.rating) / 4.0 * 100.0)
        .collect();
    let (mean, std) = mean_std(&normalized).expect("non-empty by construction");
    let judges: BTreeSet<&str> = ratings.iter().map(|r| r.judge_id.as_str()).collect();
    Ok(HrsSummary {
        mean_percent: mean,
        stddev_percent: std,
        n_ratings: ratings.len(),
        n_judges: judges.len(),
        single_rating: ratings.len() == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(sentence: &str, judge: &str, value: u8) -> JudgeRating {
        JudgeRating {
            sentence_id: sentence.into(),
            judge_id: judge.into(),
            rating: value,
        }
    }

    #[test]
    fn all_top_ratings_are_100_percent() {
        let ratings = vec![rating("s1", "j1", 4), rating("s2", "j1", 4), rating("s1", "j2", 4)];
        let summary = hrs_summary(&ratings).unwrap();
        assert_eq!(summary.mean_percent, 100.0);
        assert_eq!(summary.stddev_percent, 0.0);
        assert_eq!(summary.n_ratings, 3);
        assert_eq!(summary.n_judges, 2);
        assert_eq!(summary.render(), "100% ± 0%");
    }

    #[test]
    fn two_point_hand_example() {
        // Normalized {50, 100}: mean 75, sample std sqrt(1250) = 35.3553...
        let ratings = vec![rating("s1", "j1", 2), rating("s1", "j2", 4)];
        let summary = hrs_summary(&ratings).unwrap();
        assert_eq!(summary.mean_percent, 75.0);
        assert!((summary.stddev_percent - 1250.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(summary.render(), "75% ± 35.36%");
    }

    #[test]
    fn render_trims_trailing_zeros_only() {
        let summary = HrsSummary {
            mean_percent: 75.0,
            stddev_percent: 19.1,
            n_ratings: 59,
            n_judges: 6,
            single_rating: false,
        };
        assert_eq!(summary.render(), "75% ± 19.1%");
        let summary = HrsSummary {
            mean_percent: 86.0,
            stddev_percent: 10.4,
            n_ratings: 100,
            n_judges: 6,
            single_rating: false,
        };
        assert_eq!(summary.render(), "86% ± 10.4%");
    }

    #[test]
    fn single_rating_is_flagged() {
        let summary = hrs_summary(&[rating("s1", "j1", 3)]).unwrap();
        assert_eq!(summary.mean_percent, 75.0);
        assert_eq!(summary.stddev_percent, 0.0);
        assert!(summary.single_rating);
    }

    #[test]
    fn empty_ratings_are_an_error() {
        assert!(matches!(hrs_summary(&[]), Err(HrsError::Empty)));
    }

    #[test]
    fn loads_valid_csv() {
        let csv = "sentence_id,judge_id,rating\ns1,j1,4\ns1,j2,2\ns2,j1,0\n";
        let ratings = ratings_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(ratings.len(), 3);
        assert_eq!(ratings[1], rating("s1", "j2", 2));
    }

    #[test]
    fn out_of_range_rating_names_the_row() {
        let csv = "sentence_id,judge_id,rating\ns1,j1,4\ns1,j2,5\n";
        match ratings_from_reader(csv.as_bytes()) {
            Err(HrsError::RatingOutOfRange { row: 2, value: 5 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        let negative = "sentence_id,judge_id,rating\ns1,j1,-1\n";
        assert!(matches!(
            ratings_from_reader(negative.as_bytes()),
            Err(HrsError::RatingOutOfRange { row: 1, value: -1 })
        ));
    }

    #[test]
    fn duplicate_pair_names_both_rows() {
        let csv = "sentence_id,judge_id,rating\ns1,j1,4\ns2,j1,3\ns1,j1,2\n";
        match ratings_from_reader(csv.as_bytes()) {
            Err(HrsError::DuplicatePair {
                sentence_id,
                judge_id,
                first: 1,
                second: 3,
            }) => {
                assert_eq!(sentence_id, "s1");
                assert_eq!(judge_id, "j1");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn malformed_row_is_an_error() {
        let csv = "sentence_id,judge_id,rating\ns1,j1,not_a_number\n";
        assert!(matches!(
            ratings_from_reader(csv.as_bytes()),
            Err(HrsError::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn order_of_ratings_does_not_matter() {
        let mut ratings = vec![
            rating("s1", "j1", 1),
            rating("s2", "j2", 3),
            rating("s3", "j3", 4),
        ];
        let forward = hrs_summary(&ratings).unwrap();
        ratings.reverse();
        let backward = hrs_summary(&ratings).unwrap();
        assert_eq!(forward.mean_percent, backward.mean_percent);
        assert_eq!(forward.stddev_percent, backward.stddev_percent);
    }
}
