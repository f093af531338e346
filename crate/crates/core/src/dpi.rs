//! The data plagiarism index and the membership-inference attack built on
//! it.
//!
//! For a target point `x` with `k` nearest pooled neighbours, the index is
//! `#synthetic / #reference` among those neighbours. Values above 1 mean
//! the generator put more mass next to `x` than an independent sample from
//! the same distribution did.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::AttackScores;
use crate::neighbors::{Metric, NeighborSet, PooledIndex};
use crate::stats::{median, quantile_sorted};
use crate::tabular::EncodedMatrix;
use crate::{Error, Result};

/// Neighbourhood composition of one target point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpiScore {
    pub count_synthetic: usize,
    pub count_reference: usize,
}

impl DpiScore {
    pub fn from_neighbors(ns: &NeighborSet) -> Self {
        DpiScore {
            count_synthetic: ns.count_synthetic,
            count_reference: ns.count_reference,
        }
    }

    pub fn k(&self) -> usize {
        self.count_synthetic + self.count_reference
    }

    /// Synthetic-to-reference ratio; `+inf` when no reference point is in
    /// the neighbourhood.
    pub fn ratio(&self) -> f64 {
        match (self.count_synthetic, self.count_reference) {
            (0, 0) => 0.0,
            (_, 0) => f64::INFINITY,
            (s, r) => s as f64 / r as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Median of the test scores (midpoint for even counts).
    MedianOfTestScores,
    /// Fixed threshold on the ratio scale.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpiConfig {
    pub k: usize,
    pub metric: Metric,
    pub threshold_rule: ThresholdRule,
}

impl Default for DpiConfig {
    fn default() -> Self {
        DpiConfig {
            k: 20,
            metric: Metric::L2,
            threshold_rule: ThresholdRule::MedianOfTestScores,
        }
    }
}

impl DpiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if let ThresholdRule::Fixed(c) = self.threshold_rule {
            if c.is_nan() {
                return Err(Error::invalid("fixed threshold is NaN"));
            }
        }
        Ok(())
    }
}

pub fn dpi_score(index: &PooledIndex, x: &[f64], config: &DpiConfig) -> Result<DpiScore> {
    config.validate()?;
    Ok(DpiScore::from_neighbors(&index.knn(x, config.k)?))
}

/// Scores for every row of `test_points`, in row order.
pub fn dpi_scores(index: &PooledIndex, test_points: &EncodedMatrix, config: &DpiConfig) -> Result<Vec<DpiScore>> {
    config.validate()?;
    Ok(index
        .knn_batch(test_points, config.k)?
        .iter()
        .map(DpiScore::from_neighbors)
        .collect())
}

/// Convert a ratio threshold into the equivalent threshold on
/// `count_synthetic` at fixed `k`: `s / (k - s) > c  <=>  s > c k / (1 + c)`.
pub fn ratio_threshold_to_count(c: f64, k: usize) -> f64 {
    if c.is_infinite() && c > 0.0 {
        return k as f64;
    }
    if c < 0.0 {
        return -1.0;
    }
    c * k as f64 / (1.0 + c)
}

/// Output of the plagiarism-index attack.
#[derive(Clone, Debug, PartialEq)]
pub struct DpiAttack {
    pub neighborhoods: Vec<DpiScore>,
    /// Threshold on the `count_synthetic` scale.
    pub threshold: f64,
    pub decisions: Vec<bool>,
}

impl DpiAttack {
    /// Continuous ranking score per test point (`count_synthetic`), which
    /// orders points exactly as the ratio does at fixed `k`.
    pub fn scores(&self) -> Vec<f64> {
        self.neighborhoods.iter().map(|s| s.count_synthetic as f64).collect()
    }

    pub fn into_attack_scores(self, labels: Vec<bool>) -> Result<AttackScores> {
        AttackScores::new("dpi", self.scores(), labels)
    }
}

/// Flag `x` as a member when its neighbourhood is more synthetic-heavy than
/// the threshold.
pub fn dpi_attack(index: &PooledIndex, test_points: &EncodedMatrix, config: &DpiConfig) -> Result<DpiAttack> {
    if test_points.is_empty() {
        return Err(Error::EmptyInput("no test points to attack".into()));
    }
    let neighborhoods = dpi_scores(index, test_points, config)?;
    let counts: Vec<f64> = neighborhoods.iter().map(|s| s.count_synthetic as f64).collect();
    let threshold = match config.threshold_rule {
        ThresholdRule::MedianOfTestScores => median(&counts).expect("non-empty"),
        ThresholdRule::Fixed(c) => ratio_threshold_to_count(c, config.k),
    };
    let decisions = counts.iter().map(|&s| s > threshold).collect();
    Ok(DpiAttack {
        neighborhoods,
        threshold,
        decisions,
    })
}

/// Neighbourhood occupation probabilities of the reference and synthetic
/// samples, and the probability that a synthetic indicator strictly
/// exceeds an independent reference indicator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub p_ref: f64,
    pub p_syn: f64,
    pub delta: f64,
}

impl DeltaEstimate {
    pub fn from_counts(score: &DpiScore, n_ref_total: usize, n_syn_total: usize) -> Result<Self> {
        if n_ref_total == 0 || n_syn_total == 0 {
            return Err(Error::invalid("sample totals must be at least 1"));
        }
        if score.count_reference > n_ref_total || score.count_synthetic > n_syn_total {
            return Err(Error::invalid("neighbourhood counts exceed sample totals"));
        }
        let p_ref = score.count_reference as f64 / n_ref_total as f64;
        let p_syn = score.count_synthetic as f64 / n_syn_total as f64;
        Ok(DeltaEstimate {
            p_ref,
            p_syn,
            delta: p_syn * (1.0 - p_ref),
        })
    }
}

pub fn delta_estimate(
    index: &PooledIndex,
    x: &[f64],
    config: &DpiConfig,
    n_ref_total: usize,
    n_syn_total: usize,
) -> Result<DeltaEstimate> {
    DeltaEstimate::from_counts(&dpi_score(index, x, config)?, n_ref_total, n_syn_total)
}

/// Δ for every test row.
pub fn delta_estimates(scores: &[DpiScore], n_ref_total: usize, n_syn_total: usize) -> Result<Vec<DeltaEstimate>> {
    scores
        .par_iter()
        .map(|s| DeltaEstimate::from_counts(s, n_ref_total, n_syn_total))
        .collect()
}

/// Row ids whose `count_synthetic` reaches the top `percentile` percent
/// (linear-interpolation quantile, ties at the cut-off included), ordered by
/// score descending then id ascending.
pub fn top_copied(scores: &[(usize, DpiScore)], percentile: f64) -> Result<Vec<usize>> {
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::invalid(format!(
            "percentile must lie in (0, 100), got {percentile}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to rank".into()));
    }
    let mut sorted: Vec<f64> = scores.iter().map(|(_, s)| s.count_synthetic as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let cutoff = quantile_sorted(&sorted, 1.0 - percentile / 100.0);
    let mut hits: Vec<(usize, usize)> = scores
        .iter()
        .filter(|(_, s)| s.count_synthetic as f64 >= cutoff)
        .map(|(id, s)| (*id, s.count_synthetic))
        .collect();
    hits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(hits.into_iter().map(|(id, _)| id).collect())
}
