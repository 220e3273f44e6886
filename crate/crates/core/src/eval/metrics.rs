use serde::{Deserialize, Serialize};

use super::MatchResult;

/// Counts and percentages for one image or a whole dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn fscore(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, r#fn: usize) -> Self {
        let precision = percent(tp, tp + fp);
        let recall = percent(tp, tp + r#fn);
        Metrics {
            tp,
            fp,
            r#fn,
            precision,
            recall,
            fscore: fscore(precision, recall),
        }
    }

    pub fn of(result: &MatchResult) -> Self {
        Metrics::from_counts(
            result.matches.len(),
            result.unmatched_preds.len(),
            result.unmatched_gts.len(),
        )
    }
}

/// Sums counts over images, then derives the percentages.
pub fn compute_metrics<'a>(results: impl IntoIterator<Item = &'a MatchResult>) -> Metrics {
    let (tp, fp, r#fn) = results.into_iter().fold((0, 0, 0), |(tp, fp, f), r| {
        (
            tp + r.matches.len(),
            fp + r.unmatched_preds.len(),
            f + r.unmatched_gts.len(),
        )
    });
    Metrics::from_counts(tp, fp, r#fn)
}
