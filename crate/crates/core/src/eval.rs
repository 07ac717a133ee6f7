//! Ranking metrics for anomaly scores. Higher scores mean more anomalous and
//! label 1 marks an anomaly, the positive class.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Cumulative (threshold, tp, fp) after each group of tied scores, sweeping
/// from the highest score down.
fn sweep(scores: &[f64], labels: &[u8]) -> Result<(Vec<(f64, usize, usize)>, usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores contain NaN".into()));
    }
    if labels.iter().any(|l| *l > 1) {
        return Err(Error::Evaluation("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|l| **l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Evaluation("need at least one positive and one negative label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((s, tp, fp));
    }
    Ok((out, pos, neg))
}

/// One point per distinct score threshold, recall non-decreasing.
pub fn precision_recall_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>> {
    let (steps, pos, _) = sweep(scores, labels)?;
    Ok(steps
        .into_iter()
        .map(|(threshold, tp, fp)| PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / pos as f64,
        })
        .collect())
}

/// `Σ (R_n − R_{n−1}) P_n` over the threshold sweep.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let curve = precision_recall_curve(scores, labels)?;
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in curve {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    Ok(ap)
}

/// ROC points from (0, 0) to (1, 1), one per distinct threshold.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (steps, pos, neg) = sweep(scores, labels)?;
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    out.extend(steps.into_iter().map(|(threshold, tp, fp)| RocPoint {
        threshold,
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
    }));
    Ok(out)
}

/// Trapezoidal area under the ROC curve.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let curve = roc_curve(scores, labels)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[1].tpr + w[0].tpr))
        .sum())
}

/// Scores with optional labels and the derived metrics.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Option<Vec<u8>>,
    pub average_precision: Option<f64>,
    pub roc_auc: Option<f64>,
    pub pr_curve: Vec<PrPoint>,
    pub roc_curve: Vec<RocPoint>,
}

impl ScoreReport {
    pub fn new(ids: Vec<String>, scores: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if ids.len() != scores.len() {
            return Err(Error::Evaluation("ids and scores differ in length".into()));
        }
        let mut report = Self {
            ids,
            scores,
            labels: None,
            average_precision: None,
            roc_auc: None,
            pr_curve: Vec::new(),
            roc_curve: Vec::new(),
        };
        if let Some(labels) = labels {
            report.pr_curve = precision_recall_curve(&report.scores, &labels)?;
            report.roc_curve = roc_curve(&report.scores, &labels)?;
            report.average_precision = Some(average_precision(&report.scores, &labels)?);
            report.roc_auc = Some(roc_auc(&report.scores, &labels)?);
            report.labels = Some(labels);
        }
        Ok(report)
    }

    /// 1-based rank of each sample, most anomalous first. Ties share the
    /// best rank of their group.
    pub fn ranks(&self) -> Vec<usize> {
        ranks(&self.scores)
    }
}

/// 1-based descending ranks, ties sharing the smallest rank.
pub fn ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let rank = i + 1;
        while i < order.len() && scores[order[i]] == s {
            out[order[i]] = rank;
            i += 1;
        }
    }
    out
}

/// Stratified random split. Returns (train, test) row indices, each sorted,
/// with `train_fraction` of every label class (rounded) in the training part.
pub fn stratified_split<R: Rng + ?Sized>(labels: &[u8], train_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} is outside (0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    for c in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        let cut = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
