//! Top-1 classification scores and top-k ranking measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One-vs-rest counts and scores of a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub classes: Vec<ClassStats>,
}

impl ConfusionStats {
    fn column(&self, f: impl Fn(&ClassStats) -> f64) -> Vec<f64> {
        self.classes.iter().map(f).collect()
    }

    pub fn supports(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.support).collect()
    }

    pub fn precisions(&self) -> Vec<f64> {
        self.column(|c| c.precision)
    }

    pub fn recalls(&self) -> Vec<f64> {
        self.column(|c| c.recall)
    }

    pub fn f1s(&self) -> Vec<f64> {
        self.column(|c| c.f1)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 of top-1 predictions keyed by region.
///
/// Classes are reported in the order of `classes`, followed by any other
/// class seen in `preds` or `truth`, sorted.
pub fn per_class_prf(
    preds: &BTreeMap<String, String>,
    truth: &BTreeMap<String, String>,
    classes: &[String],
) -> Result<ConfusionStats, EvalError> {
    if preds.len() != truth.len() || preds.keys().any(|k| !truth.contains_key(k)) {
        return Err(EvalError::KeyMismatch(
            "predictions and ground truth cover different regions".into(),
        ));
    }
    Ok(prf_from_pairs(
        truth.iter().map(|(id, t)| (preds[id].as_str(), t.as_str())),
        classes,
    ))
}

pub(super) fn prf_from_pairs<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>, classes: &[String]) -> ConfusionStats {
    let mut order: Vec<String> = classes.to_vec();
    let mut index: BTreeMap<String, usize> = order.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let mut extra = std::collections::BTreeSet::new();
    let pairs: Vec<(&str, &str)> = pairs.collect();
    for &(p, t) in &pairs {
        for c in [p, t] {
            if !index.contains_key(c) {
                extra.insert(c.to_owned());
            }
        }
    }
    for c in extra {
        index.insert(c.clone(), order.len());
        order.push(c);
    }

    let mut tp = vec![0usize; order.len()];
    let mut fp = vec![0usize; order.len()];
    let mut fneg = vec![0usize; order.len()];
    for (p, t) in pairs {
        if p == t {
            tp[index[p]] += 1;
        } else {
            fp[index[p]] += 1;
            fneg[index[t]] += 1;
        }
    }
    let classes = order
        .into_iter()
        .enumerate()
        .map(|(i, class)| {
            let precision = ratio(tp[i], tp[i] + fp[i]);
            let recall = ratio(tp[i], tp[i] + fneg[i]);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassStats {
                class,
                true_positives: tp[i],
                false_positives: fp[i],
                false_negatives: fneg[i],
                support: tp[i] + fneg[i],
                precision,
                recall,
                f1,
            }
        })
        .collect();
    ConfusionStats { classes }
}

/// Mean of per-class `values` over classes with non-zero support, either
/// plain or weighted by support.
pub fn aggregate(values: &[f64], supports: &[usize], weighted: bool) -> Result<f64, EvalError> {
    if values.len() != supports.len() {
        return Err(EvalError::KeyMismatch("values and supports differ in length".into()));
    }
    let present = values.iter().zip(supports).filter(|(_, &s)| s > 0);
    let (num, den) = if weighted {
        present.fold((0.0, 0.0), |(n, d), (v, &s)| (n + v * s as f64, d + s as f64))
    } else {
        present.fold((0.0, 0.0), |(n, d), (v, _)| (n + v, d + 1.0))
    };
    if den == 0.0 {
        return Err(EvalError::EmptyInput);
    }
    Ok(num / den)
}

fn check_ranked(rankings: &[Vec<&str>], truth: &[&str], k: usize) -> Result<(), EvalError> {
    if k == 0 {
        return Err(EvalError::BadK);
    }
    if rankings.len() != truth.len() {
        return Err(EvalError::KeyMismatch("rankings and ground truth differ in length".into()));
    }
    if rankings.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// 1-based rank of the first occurrence of `truth` within the first `k` entries.
fn rank_within(ranking: &[&str], truth: &str, k: usize) -> Option<usize> {
    ranking.iter().take(k).position(|c| *c == truth).map(|i| i + 1)
}

fn mean_over(rankings: &[Vec<&str>], truth: &[&str], gain: impl Fn(Option<usize>) -> f64, k: usize) -> f64 {
    let total: f64 = rankings
        .iter()
        .zip(truth)
        .map(|(r, t)| gain(rank_within(r, t, k)))
        .sum();
    total / rankings.len() as f64
}

/// Mean P@k with a single relevant class per region.
pub fn precision_at_k(rankings: &[Vec<&str>], truth: &[&str], k: usize) -> Result<f64, EvalError> {
    check_ranked(rankings, truth, k)?;
    Ok(mean_over(rankings, truth, |r| if r.is_some() { 1.0 / k as f64 } else { 0.0 }, k))
}

/// Mean nDCG@k with binary gain on the true class; the ideal DCG is 1.
pub fn ndcg_at_k(rankings: &[Vec<&str>], truth: &[&str], k: usize) -> Result<f64, EvalError> {
    check_ranked(rankings, truth, k)?;
    Ok(mean_over(
        rankings,
        truth,
        |r| r.map_or(0.0, |rank| 1.0 / ((rank + 1) as f64).log2()),
        k,
    ))
}

/// Fraction of regions whose first `k` entries contain the true class.
pub fn hit_ratio(rankings: &[Vec<&str>], truth: &[&str], k: usize) -> Result<f64, EvalError> {
    check_ranked(rankings, truth, k)?;
    Ok(mean_over(rankings, truth, |r| if r.is_some() { 1.0 } else { 0.0 }, k))
}

/// Every reported metric for one table cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top1_accuracy: f64,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub weighted_p: f64,
    pub weighted_r: f64,
    pub weighted_f1: f64,
    pub p_at_5: f64,
    pub ndcg_at_5: f64,
    pub hit_ratio: f64,
}

impl EvalReport {
    pub const FIELDS: [&'static str; 10] = [
        "top1_accuracy",
        "macro_p",
        "macro_r",
        "macro_f1",
        "weighted_p",
        "weighted_r",
        "weighted_f1",
        "p_at_5",
        "ndcg_at_5",
        "hit_ratio",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.top1_accuracy,
            self.macro_p,
            self.macro_r,
            self.macro_f1,
            self.weighted_p,
            self.weighted_r,
            self.weighted_f1,
            self.p_at_5,
            self.ndcg_at_5,
            self.hit_ratio,
        ]
    }

    /// Largest absolute difference over all metrics.
    pub fn max_abs_diff(&self, other: &EvalReport) -> f64 {
        self.values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Scores ranked predictions against the truth; `k` is the cut-off of the
/// ranking measures (5 in every reported table).
pub fn evaluate(rankings: &[Vec<&str>], truth: &[&str], classes: &[String], k: usize) -> Result<EvalReport, EvalError> {
    check_ranked(rankings, truth, k)?;
    let top1: Vec<&str> = rankings.iter().map(|r| r.first().copied().unwrap_or("")).collect();
    let stats = prf_from_pairs(top1.iter().copied().zip(truth.iter().copied()), classes);
    let supports = stats.supports();
    let correct = top1.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(EvalReport {
        top1_accuracy: correct as f64 / truth.len() as f64,
        macro_p: aggregate(&stats.precisions(), &supports, false)?,
        macro_r: aggregate(&stats.recalls(), &supports, false)?,
        macro_f1: aggregate(&stats.f1s(), &supports, false)?,
        weighted_p: aggregate(&stats.precisions(), &supports, true)?,
        weighted_r: aggregate(&stats.recalls(), &supports, true)?,
        weighted_f1: aggregate(&stats.f1s(), &supports, true)?,
        p_at_5: precision_at_k(rankings, truth, k)?,
        ndcg_at_5: ndcg_at_k(rankings, truth, k)?,
        hit_ratio: hit_ratio(rankings, truth, k)?,
    })
}
