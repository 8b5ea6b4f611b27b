//! The (features, window) grid: weight counts and, once trained, scores.

use serde::{Deserialize, Serialize};
use ssi_core::estimator::{pipeline_weights, EstimatorConfig, FeatureKind, WindowSpec};

use crate::config::{SweepConfig, SweepPoint};
use crate::experiment::Scored;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepScores {
    pub dev_nmse: f64,
    pub test_nmse: f64,
    pub dev_corr: f64,
    pub test_corr: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// Estimator weights plus encoder weights, biases excluded.
    pub weights: u64,
    pub scores: Option<SweepScores>,
}

impl SweepRow {
    pub fn new(point: SweepPoint, estimator: &EstimatorConfig) -> Self {
        let kind = match point.bottleneck {
            Some(bottleneck) => FeatureKind::Encoded { bottleneck },
            None => FeatureKind::Pixels,
        };
        let cfg = EstimatorConfig {
            window: WindowSpec {
                width: point.window,
                ..estimator.window
            },
            ..estimator.clone()
        };
        SweepRow {
            point,
            weights: pipeline_weights(kind, &cfg),
            scores: None,
        }
    }

    pub fn label(&self) -> String {
        match self.point.bottleneck {
            Some(n) => format!("N={n} w={}", self.point.window),
            None => format!("pixels w={}", self.point.window),
        }
    }

    pub fn scores_from(s: &Scored) -> SweepScores {
        SweepScores {
            dev_nmse: s.dev.nmse_mean,
            test_nmse: s.test.nmse_mean,
            dev_corr: s.dev.corr_mean,
            test_corr: s.test.corr_mean,
            best_epoch: s.outcome.best_epoch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Rows with weight counts only.
    pub fn counts(sweep: &SweepConfig, estimator: &EstimatorConfig) -> Self {
        SweepTable {
            rows: sweep.points.iter().map(|&p| SweepRow::new(p, estimator)).collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("features\tframes\tweights\tweights_millions\tdev_nmse\ttest_nmse\tdev_corr\ttest_corr\n");
        for r in &self.rows {
            let features = r.point.bottleneck.map_or("pixels".to_string(), |n| format!("N={n}"));
            out += &format!(
                "{features}\t{}\t{}\t{:.1}",
                r.point.window,
                r.weights,
                r.weights as f64 / 1e6
            );
            match r.scores {
                Some(s) => {
                    out += &format!(
                        "\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                        s.dev_nmse, s.test_nmse, s.dev_corr, s.test_corr
                    )
                }
                None => out += "\t-\t-\t-\t-\n",
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
