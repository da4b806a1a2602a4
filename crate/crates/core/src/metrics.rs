//! Evaluation of similarity scores and partitions against gold labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledPair, Partition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub pair: LabeledPair,
    pub score: f64,
}

/// Mann-Whitney ROC-AUC with ties credited one half, via average ranks.
pub fn roc_auc(pairs: &[ScoredPair]) -> Result<f64> {
    if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
        return Err(Error::Metric(format!("non-finite score for pair ({}, {})", p.pair.a, p.pair.b)));
    }
    let n_pos = pairs.iter().filter(|p| p.pair.label.is_similar()).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("ROC-AUC needs both positive and negative pairs".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].score.total_cmp(&pairs[b].score));

    // Ranks are 1-based; tied runs share their mean rank, kept doubled to
    // stay integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pairs[order[j]].score == pairs[order[i]].score {
            j += 1;
        }
        let doubled_mean = (i + 1 + j) as u128;
        let positives_in_run = order[i..j]
            .iter()
            .filter(|&&k| pairs[k].pair.label.is_similar())
            .count() as u128;
        doubled_rank_sum += doubled_mean * positives_in_run;
        i = j;
    }
    let p = n_pos as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Contingency counts between two partitions of the same constructs.
struct Contingency {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    cells: BTreeMap<(usize, usize), usize>,
}

impl Contingency {
    fn new(a: &Partition, b: &Partition) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::Metric(format!(
                "partitions cover {} and {} constructs",
                a.n(),
                b.n()
            )));
        }
        let mut cells = BTreeMap::new();
        for (&la, &lb) in a.labels().iter().zip(b.labels()) {
            *cells.entry((la, lb)).or_insert(0) += 1;
        }
        Ok(Contingency {
            n: a.n(),
            rows: a.sizes(),
            cols: b.sizes(),
            cells,
        })
    }
}

fn entropy(sizes: &[usize], n: usize) -> f64 {
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// ln(i!) for i in 0..=n.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Expected mutual information under the hypergeometric permutation model.
fn expected_mutual_information(rows: &[usize], cols: &[usize], n: usize) -> f64 {
    let lf = ln_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in rows {
        for &b in cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let fixed = lf[a] + lf[b] + lf[n - a] + lf[n - b] - lf[n];
            for nij in lo..=hi {
                let log_p = fixed - lf[nij] - lf[a - nij] - lf[b - nij] - lf[n + nij - a - b];
                let term = nij as f64 / nf * (nf * nij as f64 / (a as f64 * b as f64)).ln();
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with the arithmetic-mean normalizer.
pub fn ami(p: &Partition, gold: &Partition) -> Result<f64> {
    let t = Contingency::new(p, gold)?;
    if p.labels() == gold.labels() && t.n > 0 {
        return Ok(1.0);
    }
    let h_p = entropy(&t.rows, t.n);
    let h_g = entropy(&t.cols, t.n);
    if h_p == 0.0 && h_g == 0.0 {
        return Ok(1.0);
    }
    let nf = t.n as f64;
    let mi: f64 = t
        .cells
        .iter()
        .map(|(&(i, j), &nij)| {
            let nij_f = nij as f64;
            nij_f / nf * (nf * nij_f / (t.rows[i] as f64 * t.cols[j] as f64)).ln()
        })
        .sum();
    let emi = expected_mutual_information(&t.rows, &t.cols, t.n);
    let denominator = 0.5 * (h_p + h_g) - emi;
    let numerator = mi - emi;
    if denominator == 0.0 {
        return Ok(if numerator == 0.0 { 0.0 } else { 1.0 });
    }
    Ok(numerator / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn choose2(k: usize) -> u64 {
    (k as u64) * (k as u64).saturating_sub(1) / 2
}

/// Precision, recall and F1 of same-cluster predictions over all pairs.
pub fn pairwise_f1(p: &Partition, gold: &Partition) -> Result<PairwiseScores> {
    let t = Contingency::new(p, gold)?;
    let tp: u64 = t.cells.values().map(|&c| choose2(c)).sum();
    let predicted: u64 = t.rows.iter().map(|&c| choose2(c)).sum();
    let actual: u64 = t.cols.iter().map(|&c| choose2(c)).sum();
    let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
    let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
    let f1 = if predicted == 0 || actual == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (predicted + actual) as f64
    };
    Ok(PairwiseScores { precision, recall, f1 })
}

/// F1 from counts as `2TP / (2TP + FP + FN)`, 0 when undefined.
pub fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdF1 {
    pub tau: f64,
    pub f1: f64,
}

/// The threshold (among the distinct scores, predicting `score >= tau`)
/// that maximizes F1; ties go to the larger threshold.
pub fn best_threshold_f1(pairs: &[ScoredPair]) -> Result<ThresholdF1> {
    let total_pos = pairs.iter().filter(|p| p.pair.label.is_similar()).count() as u64;
    if total_pos == 0 {
        return Err(Error::Metric("threshold F1 needs at least one positive pair".into()));
    }
    if pairs.iter().any(|p| !p.score.is_finite()) {
        return Err(Error::Metric("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[b].score.total_cmp(&pairs[a].score));
    let mut best = ThresholdF1 { tau: f64::NAN, f1: -1.0 };
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    // Descending scan: the first threshold reaching a given F1 is the largest.
    while i < order.len() {
        let tau = pairs[order[i]].score;
        while i < order.len() && pairs[order[i]].score == tau {
            if pairs[order[i]].pair.label.is_similar() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let f1 = f1_from_counts(tp, fp, total_pos - tp);
        if f1 > best.f1 {
            best = ThresholdF1 { tau, f1 };
        }
    }
    Ok(best)
}

/// Evaluation report written by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub roc_auc: f64,
    pub ami: f64,
    pub pairwise: PairwiseScores,
    pub baseline: ThresholdF1,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PairLabel;

    fn scored(score: f64, positive: bool) -> ScoredPair {
        ScoredPair {
            pair: LabeledPair {
                a: 0,
                b: 1,
                label: if positive { PairLabel::Similar } else { PairLabel::Dissimilar },
            },
            score,
        }
    }

    #[test]
    fn auc_examples() {
        let perfect = [scored(0.9, true), scored(0.8, true), scored(0.2, false), scored(0.1, false)];
        assert_eq!(roc_auc(&perfect).unwrap(), 1.0);
        let ties = [scored(0.5, true), scored(0.5, false), scored(0.5, true), scored(0.5, false)];
        assert_eq!(roc_auc(&ties).unwrap(), 0.5);
        assert!(roc_auc(&[scored(0.1, true), scored(0.3, true)]).is_err());
    }

    #[test]
    fn ami_identical_and_degenerate() {
        let p = Partition::from_labels(&[0, 0, 1, 1, 2, 2]);
        assert_eq!(ami(&p, &p).unwrap(), 1.0);
        let relabeled = Partition::from_labels(&[7, 7, 3, 3, 1, 1]);
        assert_eq!(ami(&relabeled, &p).unwrap(), 1.0);
        let one = Partition::single_cluster(6);
        assert_eq!(ami(&one, &p).unwrap(), 0.0);
        assert_eq!(ami(&one, &Partition::single_cluster(6)).unwrap(), 1.0);
        assert!(ami(&one, &Partition::single_cluster(5)).is_err());
    }

    #[test]
    fn pairwise_examples() {
        let p = Partition::from_labels(&["a", "a", "b", "b"]);
        let gold = Partition::from_labels(&["x", "x", "x", "y"]);
        let s = pairwise_f1(&p, &gold).unwrap();
        assert_eq!(s.precision, 0.5);
        assert!((s.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 0.4).abs() < 1e-15);

        assert_eq!(
            pairwise_f1(&gold, &gold).unwrap(),
            PairwiseScores { precision: 1.0, recall: 1.0, f1: 1.0 }
        );
        let s = pairwise_f1(&Partition::singletons(4), &gold).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn threshold_examples() {
        let separated = [scored(0.9, true), scored(0.7, true), scored(0.3, false), scored(0.1, false)];
        let best = best_threshold_f1(&separated).unwrap();
        assert_eq!(best, ThresholdF1 { tau: 0.7, f1: 1.0 });
        let all_pos = [scored(0.4, true), scored(0.2, true), scored(0.6, true)];
        assert_eq!(best_threshold_f1(&all_pos).unwrap(), ThresholdF1 { tau: 0.2, f1: 1.0 });
        assert!(best_threshold_f1(&[scored(0.4, false)]).is_err());
    }
}
