//! Objective scores for parameter estimates: variance-normalized MSE and
//! Pearson correlation per dimension, averaged over dimensions.
//!
//! Statistics are pooled over all frames of a split; frame order is irrelevant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{predict, Estimator, ParallelUtterance};

/// Denominator of the per-dimension NMSE.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    /// Population variance of the targets being scored.
    #[default]
    Evaluation,
    /// Externally supplied variances, e.g. from the training split.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub nmse_mean: f64,
    pub nmse_per_dim: Vec<f64>,
    pub corr_mean: f64,
    pub corr_per_dim: Vec<f64>,
    pub n_frames: usize,
}

fn check_shapes(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<usize> {
    if pred.len() != target.len() {
        return Err(Error::shape("prediction frames", target.len(), pred.len()));
    }
    if target.len() < 2 {
        return Err(Error::shape("evaluation frames", ">= 2", target.len()));
    }
    let dim = target[0].len();
    if dim == 0 {
        return Err(Error::shape("evaluation dimension", ">= 1", 0));
    }
    for (i, (p, t)) in pred.iter().zip(target).enumerate() {
        if p.len() != dim || t.len() != dim {
            return Err(Error::shape("evaluation row", dim, format!("{} / {} at frame {i}", p.len(), t.len())));
        }
    }
    Ok(dim)
}

/// Mean and population variance of column `d`; exactly zero variance for a
/// constant column.
fn column_stats(rows: &[Vec<f64>], d: usize) -> (f64, f64) {
    if rows.iter().all(|r| r[d] == rows[0][d]) {
        return (rows[0][d], 0.0);
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Mean and per-dimension `MSE_d / Var(target_d)`.
pub fn nmse(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    nmse_with(pred, target, &Normalizer::Evaluation)
}

pub fn nmse_with(pred: &[Vec<f64>], target: &[Vec<f64>], normalizer: &Normalizer) -> Result<(f64, Vec<f64>)> {
    let dim = check_shapes(pred, target)?;
    if let Normalizer::Fixed(v) = normalizer {
        if v.len() != dim {
            return Err(Error::shape("NMSE normalizer", dim, v.len()));
        }
    }
    let n = target.len() as f64;
    let mut per_dim = Vec::with_capacity(dim);
    for d in 0..dim {
        let var = match normalizer {
            Normalizer::Evaluation => column_stats(target, d).1,
            Normalizer::Fixed(v) => v[d],
        };
        if !(var > 0.0) {
            return Err(Error::ZeroVariance { side: "target", dim: d });
        }
        let mse = pred.iter().zip(target).map(|(p, t)| (p[d] - t[d]).powi(2)).sum::<f64>() / n;
        per_dim.push(mse / var);
    }
    Ok((per_dim.iter().sum::<f64>() / dim as f64, per_dim))
}

/// Mean and per-dimension sample correlation.
pub fn pearson(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let dim = check_shapes(pred, target)?;
    let mut per_dim = Vec::with_capacity(dim);
    for d in 0..dim {
        let (mp, vp) = column_stats(pred, d);
        let (mt, vt) = column_stats(target, d);
        if !(vp > 0.0) {
            return Err(Error::ZeroVariance { side: "prediction", dim: d });
        }
        if !(vt > 0.0) {
            return Err(Error::ZeroVariance { side: "target", dim: d });
        }
        let cov = pred.iter().zip(target).map(|(p, t)| (p[d] - mp) * (t[d] - mt)).sum::<f64>() / pred.len() as f64;
        per_dim.push((cov / (vp * vt).sqrt()).clamp(-1.0, 1.0));
    }
    Ok((per_dim.iter().sum::<f64>() / dim as f64, per_dim))
}

pub fn evaluate(pred: &[Vec<f64>], target: &[Vec<f64>], normalizer: &Normalizer) -> Result<EvalReport> {
    let (nmse_mean, nmse_per_dim) = nmse_with(pred, target, normalizer)?;
    let (corr_mean, corr_per_dim) = pearson(pred, target)?;
    Ok(EvalReport {
        nmse_mean,
        nmse_per_dim,
        corr_mean,
        corr_per_dim,
        n_frames: target.len(),
    })
}

/// Scores `est` on every frame of `utterances` pooled together.
pub fn evaluate_split(est: &Estimator, utterances: &[ParallelUtterance], normalizer: &Normalizer) -> Result<EvalReport> {
    if utterances.is_empty() {
        return Err(Error::EmptyDataset("evaluation split"));
    }
    let mut pred = Vec::new();
    let mut target = Vec::new();
    for u in utterances {
        pred.extend(predict(est, &u.features)?.iter().map(|v| v.to_row()));
        target.extend(u.target_rows());
    }
    evaluate(&pred, &target, normalizer)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
}

impl EvalReport {
    /// One `key=value` pair per line.
    pub fn to_text(&self) -> String {
        format!(
            "n_frames={}\nnmse_mean={:.6}\ncorr_mean={:.6}\nnmse_per_dim={}\ncorr_per_dim={}\n",
            self.n_frames,
            self.nmse_mean,
            self.corr_mean,
            join(&self.nmse_per_dim),
            join(&self.corr_per_dim)
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
