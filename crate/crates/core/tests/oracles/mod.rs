//! Brute-force reference implementations, written from the definitions and
//! sharing no code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use sizegate::geometry::Point;

/// Mean distance from each point to its `k` nearest other points, by
/// sorting all pairwise distances.
pub fn mean_knn(points: &[Point], k: usize) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p - q).norm())
                .collect();
            d.sort_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// Indices kept by statistical outlier removal.
pub fn sor_keep(points: &[Point], k: usize, sigma_mult: f64) -> Vec<usize> {
    let m = mean_knn(points, k);
    let n = m.len() as f64;
    let mean = m.iter().sum::<f64>() / n;
    let std = (m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (0..points.len()).filter(|&i| m[i] <= mean + sigma_mult * std).collect()
}

/// All ten report values in table order: top-1, macro P/R/F1, weighted
/// P/R/F1, P@k, nDCG@k, hit ratio.
pub fn report(rankings: &[Vec<String>], truth: &[String], k: usize) -> [f64; 10] {
    let n = truth.len() as f64;
    let top1: Vec<&str> = rankings.iter().map(|r| r[0].as_str()).collect();
    let correct = top1.iter().zip(truth).filter(|(p, t)| **p == t.as_str()).count();

    let supported: BTreeSet<&str> = truth.iter().map(String::as_str).collect();
    let (mut macro_sum, mut weighted_sum) = ([0.0; 3], [0.0; 3]);
    for c in &supported {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut support = 0.0;
        for (p, t) in top1.iter().zip(truth) {
            let (p_is, t_is) = (p == c, t == c);
            if p_is && t_is {
                tp += 1.0;
            }
            if p_is && !t_is {
                fp += 1.0;
            }
            if t_is {
                support += 1.0;
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = tp / support;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        for (i, v) in [precision, recall, f1].into_iter().enumerate() {
            macro_sum[i] += v;
            weighted_sum[i] += support * v;
        }
    }
    let classes = supported.len() as f64;

    let (mut p_at_k, mut ndcg, mut hits) = (0.0, 0.0, 0.0);
    for (r, t) in rankings.iter().zip(truth) {
        if let Some(rank) = r.iter().take(k).position(|c| c == t).map(|i| i + 1) {
            p_at_k += 1.0 / k as f64;
            ndcg += 1.0 / ((rank + 1) as f64).log2();
            hits += 1.0;
        }
    }
    [
        correct as f64 / n,
        macro_sum[0] / classes,
        macro_sum[1] / classes,
        macro_sum[2] / classes,
        weighted_sum[0] / n,
        weighted_sum[1] / n,
        weighted_sum[2] / n,
        p_at_k / n,
        ndcg / n,
        hits / n,
    ]
}

/// Random evaluation fixture: rankings with repeats allowed, truth labels,
/// and a class list that may include unused classes.
pub fn random_fixture(rng: &mut impl Rng) -> (Vec<Vec<String>>, Vec<String>, Vec<String>) {
    let n_classes = rng.random_range(1..=10);
    let classes: Vec<String> = (0..n_classes).map(|i| format!("k{i}")).collect();
    let n_regions = rng.random_range(1..=50);
    let mut rankings = Vec::with_capacity(n_regions);
    let mut truth = Vec::with_capacity(n_regions);
    for _ in 0..n_regions {
        let len = rng.random_range(1..=8);
        rankings.push((0..len).map(|_| classes.choose(rng).unwrap().clone()).collect());
        truth.push(classes.choose(rng).unwrap().clone());
    }
    (rankings, truth, classes)
}
