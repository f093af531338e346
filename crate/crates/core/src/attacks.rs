//! Baseline membership-inference attacks, AUCROC and score correlation.
//!
//! Every attack maps test points to real scores where larger means "more
//! likely a training member".

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logistic::{LogisticModel, TrainConfig};
use crate::neighbors::{Backend, Metric, SearchIndex};
use crate::stats::{median, pearson};
use crate::tabular::{EncodedMatrix, TabularDataset, Value};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Dpi,
    GanLeaks,
    GanLeaksCalibrated,
    Mc,
    LoganCalibrated,
    Dcr,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::Dpi,
        AttackKind::GanLeaks,
        AttackKind::GanLeaksCalibrated,
        AttackKind::Mc,
        AttackKind::LoganCalibrated,
        AttackKind::Dcr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Dpi => "dpi",
            AttackKind::GanLeaks => "gan_leaks",
            AttackKind::GanLeaksCalibrated => "gan_leaks_cal",
            AttackKind::Mc => "mc",
            AttackKind::LoganCalibrated => "logan_cal",
            AttackKind::Dcr => "dcr",
        }
    }

    /// Whether the attacker needs the reference sample.
    pub fn is_calibrated(self) -> bool {
        !matches!(self, AttackKind::GanLeaks | AttackKind::Mc)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        AttackKind::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown attack '{s}' (expected one of {})",
                AttackKind::ALL.map(|a| a.name()).join(", ")
            ))
        })
    }
}

/// Per-test-point scores, optionally paired with membership labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackScores {
    pub attack_name: String,
    pub scores: Vec<f64>,
    /// `true` = member. Empty until [`with_labels`](Self::with_labels).
    pub labels: Vec<bool>,
}

impl AttackScores {
    pub fn new(name: impl Into<String>, scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("attack produced a NaN score"));
        }
        let out = AttackScores {
            attack_name: name.into(),
            scores,
            labels: Vec::new(),
        };
        if labels.is_empty() {
            Ok(out)
        } else {
            out.with_labels(labels)
        }
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.scores.len() {
            return Err(Error::Dimension {
                expected: self.scores.len(),
                actual: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    pub n_members: usize,
    pub n_nonmembers: usize,
}

/// Exact tie-corrected AUCROC: `P(member > nonmember) + P(equal) / 2`,
/// computed from mid-ranks in `O(n log n)`.
pub fn auc_roc(scores: &AttackScores) -> Result<AucResult> {
    if scores.labels.len() != scores.scores.len() {
        return Err(Error::invalid("scores carry no aligned membership labels"));
    }
    let n_members = scores.labels.iter().filter(|&&l| l).count();
    let n_nonmembers = scores.labels.len() - n_members;
    if n_members == 0 || n_nonmembers == 0 {
        return Err(Error::invalid("AUCROC needs at least one member and one nonmember"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores.scores[a].total_cmp(&scores.scores[b]));
    // sum of doubled mid-ranks over members keeps everything integral
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores.scores[order[j]] == scores.scores[order[i]] {
            j += 1;
        }
        let doubled_mid = (i + 1 + j) as u64;
        let members_in_group = order[i..j].iter().filter(|&&o| scores.labels[o]).count() as u64;
        doubled_rank_sum += doubled_mid * members_in_group;
        i = j;
    }
    let n1 = n_members as u64;
    let doubled_u = doubled_rank_sum - n1 * (n1 + 1);
    Ok(AucResult {
        auc: doubled_u as f64 / (2 * n1 * n_nonmembers as u64) as f64,
        n_members,
        n_nonmembers,
    })
}

fn nonempty(m: &EncodedMatrix, what: &str) -> Result<()> {
    if m.is_empty() {
        Err(Error::EmptyInput(format!("{what} set is empty")))
    } else {
        Ok(())
    }
}

fn nearest_distances(index: &SearchIndex, test: &EncodedMatrix) -> Result<Vec<f64>> {
    (0..test.nrows())
        .into_par_iter()
        .map(|i| index.nearest_distance(test.row(i)))
        .collect()
}

/// Negated distance to the closest synthetic record.
pub fn gan_leaks(synthetic: &EncodedMatrix, test: &EncodedMatrix, metric: Metric) -> Result<AttackScores> {
    nonempty(synthetic, "synthetic")?;
    let index = SearchIndex::build(synthetic.clone(), metric, Backend::Accelerated);
    gan_leaks_with_index(&index, test)
}

pub fn gan_leaks_with_index(synthetic: &SearchIndex, test: &EncodedMatrix) -> Result<AttackScores> {
    if synthetic.is_empty() {
        return Err(Error::EmptyInput("synthetic set is empty".into()));
    }
    let scores = nearest_distances(synthetic, test)?.into_iter().map(|d| -d).collect();
    AttackScores::new(AttackKind::GanLeaks.name(), scores, Vec::new())
}

/// Distance to the closest reference record minus distance to the
/// closest synthetic record.
pub fn gan_leaks_calibrated(
    synthetic: &EncodedMatrix,
    reference: &EncodedMatrix,
    test: &EncodedMatrix,
    metric: Metric,
) -> Result<AttackScores> {
    nonempty(synthetic, "synthetic")?;
    nonempty(reference, "reference")?;
    let syn = SearchIndex::build(synthetic.clone(), metric, Backend::Accelerated);
    let refi = SearchIndex::build(reference.clone(), metric, Backend::Accelerated);
    gan_leaks_calibrated_with_index(&syn, &refi, test)
}

pub fn gan_leaks_calibrated_with_index(
    synthetic: &SearchIndex,
    reference: &SearchIndex,
    test: &EncodedMatrix,
) -> Result<AttackScores> {
    if synthetic.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput(
            "synthetic and reference sets must be non-empty".into(),
        ));
    }
    let ds = nearest_distances(synthetic, test)?;
    let dr = nearest_distances(reference, test)?;
    let scores = dr.iter().zip(&ds).map(|(r, s)| r - s).collect();
    AttackScores::new(AttackKind::GanLeaksCalibrated.name(), scores, Vec::new())
}

/// Distance-to-closest-record framing of [`gan_leaks_calibrated`]; scores
/// are identical, only the name differs.
pub fn dcr_attack(
    synthetic: &EncodedMatrix,
    reference: &EncodedMatrix,
    test: &EncodedMatrix,
    metric: Metric,
) -> Result<AttackScores> {
    let mut s = gan_leaks_calibrated(synthetic, reference, test, metric)?;
    s.attack_name = AttackKind::Dcr.name().into();
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusRule {
    /// Median over test points of the distance to the nearest synthetic
    /// record.
    MedianPairwise,
    Fixed(f64),
}

/// Resolve the neighbourhood radius used by [`mc_attack`].
pub fn mc_radius(synthetic: &SearchIndex, test: &EncodedMatrix, rule: RadiusRule) -> Result<f64> {
    match rule {
        RadiusRule::Fixed(r) if r > 0.0 && r.is_finite() => Ok(r),
        RadiusRule::Fixed(r) => Err(Error::invalid(format!("radius must be positive, got {r}"))),
        RadiusRule::MedianPairwise => {
            nonempty(test, "test")?;
            Ok(median(&nearest_distances(synthetic, test)?).expect("non-empty"))
        }
    }
}

/// Number of synthetic records within the radius of each test point.
pub fn mc_attack(
    synthetic: &EncodedMatrix,
    test: &EncodedMatrix,
    metric: Metric,
    rule: RadiusRule,
) -> Result<AttackScores> {
    nonempty(synthetic, "synthetic")?;
    let index = SearchIndex::build(synthetic.clone(), metric, Backend::Accelerated);
    let r = mc_radius(&index, test, rule)?;
    mc_attack_with_radius(&index, test, r)
}

pub fn mc_attack_with_radius(synthetic: &SearchIndex, test: &EncodedMatrix, radius: f64) -> Result<AttackScores> {
    if synthetic.is_empty() {
        return Err(Error::EmptyInput("synthetic set is empty".into()));
    }
    let scores = (0..test.nrows())
        .into_par_iter()
        .map(|i| synthetic.count_within(test.row(i), radius).map(|c| c as f64))
        .collect::<Result<Vec<_>>>()?;
    AttackScores::new(AttackKind::Mc.name(), scores, Vec::new())
}

/// Probability of "synthetic" under a logistic classifier trained to
/// separate synthetic (1) from reference (0) records.
pub fn logan_calibrated(
    synthetic: &EncodedMatrix,
    reference: &EncodedMatrix,
    test: &EncodedMatrix,
    config: &TrainConfig,
) -> Result<AttackScores> {
    nonempty(synthetic, "synthetic")?;
    nonempty(reference, "reference")?;
    let x = EncodedMatrix::vstack(&[synthetic, reference])?;
    let y: Vec<bool> = (0..x.nrows()).map(|i| i < synthetic.nrows()).collect();
    let model = LogisticModel::fit(&x, &y, config)?;
    AttackScores::new(
        AttackKind::LoganCalibrated.name(),
        model.predict_proba(test)?,
        Vec::new(),
    )
}

#[derive(Hash, PartialEq, Eq)]
enum CellKey<'a> {
    Num(u64),
    Cat(&'a str),
}

fn row_key(row: &[Value]) -> Vec<CellKey<'_>> {
    row.iter()
        .map(|v| match v {
            // +0.0 and -0.0 compare equal
            Value::Numeric(x) => CellKey::Num(if *x == 0.0 { 0 } else { x.to_bits() }),
            Value::Categorical(s) => CellKey::Cat(s),
        })
        .collect()
}

/// Fraction of synthetic rows that exactly equal at least one training row.
pub fn identical_match_share(train: &TabularDataset, synthetic: &TabularDataset) -> Result<f64> {
    train.check_same_schema(synthetic)?;
    let seen: HashSet<Vec<CellKey<'_>>> = train.rows().iter().map(|r| row_key(r)).collect();
    let hits = synthetic.rows().iter().filter(|r| seen.contains(&row_key(r))).count();
    Ok(hits as f64 / synthetic.len() as f64)
}

/// Sample Pearson correlation between two attacks' scores on the same
/// test points.
pub fn score_correlation(a: &AttackScores, b: &AttackScores) -> Result<f64> {
    pearson(&a.scores, &b.scores)
}
