//! Utility metrics for synthetic data: kernel MMD, per-column Wasserstein
//! distances and a train-on-synthetic / test-on-holdout probe.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{auc_roc, AttackScores};
use crate::logistic::{LogisticModel, TrainConfig};
use crate::neighbors::Metric;
use crate::tabular::{ColumnKind, EncodedMatrix, Encoder, TabularDataset, Value};
use crate::{Error, Result};

/// Largest pooled sample used for the median bandwidth heuristic.
pub const MEDIAN_SUBSAMPLE_CAP: usize = 2000;
const SUBSAMPLE_SEED: u64 = 0x6d6d_645f_6277;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdEstimate {
    /// Unbiased squared-MMD estimate; may be slightly negative.
    pub value: f64,
    pub bandwidth: f64,
}

// Kernel values lie in [0, 1]; summing them as fixed-point integers makes
// the totals independent of summation order.
const FIXED_SCALE: f64 = (1u64 << 62) as f64;

fn fixed(k: f64) -> i128 {
    (k * FIXED_SCALE).round() as i128
}

fn kernel_sum(a: &EncodedMatrix, b: &EncodedMatrix, inv_two_sigma_sq: f64, skip_diagonal: bool) -> i128 {
    (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let u = a.row(i);
            let mut acc = 0i128;
            for (j, v) in b.rows().enumerate() {
                if skip_diagonal && i == j {
                    continue;
                }
                acc += fixed((-Metric::L2.key(u, v) * inv_two_sigma_sq).exp());
            }
            acc
        })
        .sum()
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Median pairwise L2 distance over the pooled sample. The pool is put in
/// canonical order before subsampling so the result does not depend on
/// which argument came first.
pub fn median_heuristic_bandwidth(a: &EncodedMatrix, b: &EncodedMatrix) -> Result<f64> {
    let mut pooled: Vec<&[f64]> = a.rows().chain(b.rows()).collect();
    pooled.sort_by(|x, y| lexicographic(x, y));
    if pooled.len() > MEDIAN_SUBSAMPLE_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        let mut keep = rand::seq::index::sample(&mut rng, pooled.len(), MEDIAN_SUBSAMPLE_CAP).into_vec();
        keep.sort_unstable();
        pooled = keep.into_iter().map(|i| pooled[i]).collect();
    }
    let n = pooled.len();
    if n < 2 {
        return Err(Error::invalid("bandwidth heuristic needs at least two points"));
    }
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pooled = &pooled;
            (i + 1..n).map(move |j| Metric::L2.distance(pooled[i], pooled[j]))
        })
        .collect();
    let mid = dists.len() / 2;
    let (_, &mut upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median > 0.0 {
        return Ok(median);
    }
    // more than half the pairs coincide: fall back to the mean distance,
    // then to unit bandwidth for a fully degenerate sample
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    Ok(if mean > 0.0 { mean } else { 1.0 })
}

pub fn mmd_rbf_estimate(a: &EncodedMatrix, b: &EncodedMatrix, rule: BandwidthRule) -> Result<MmdEstimate> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            actual: b.ncols(),
        });
    }
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::invalid("unbiased MMD needs at least two rows in each sample"));
    }
    let sigma = match rule {
        BandwidthRule::Fixed(s) if s > 0.0 && s.is_finite() => s,
        BandwidthRule::Fixed(s) => return Err(Error::invalid(format!("bandwidth must be positive, got {s}"))),
        BandwidthRule::MedianHeuristic => median_heuristic_bandwidth(a, b)?,
    };
    let g = 1.0 / (2.0 * sigma * sigma);
    let (m, n) = (a.nrows() as f64, b.nrows() as f64);
    let kaa = kernel_sum(a, a, g, true) as f64 / FIXED_SCALE / (m * (m - 1.0));
    let kbb = kernel_sum(b, b, g, true) as f64 / FIXED_SCALE / (n * (n - 1.0));
    let kab = kernel_sum(a, b, g, false) as f64 / FIXED_SCALE / (m * n);
    Ok(MmdEstimate {
        value: kaa + kbb - 2.0 * kab,
        bandwidth: sigma,
    })
}

/// Unbiased squared MMD with a Gaussian kernel.
pub fn mmd_rbf(a: &EncodedMatrix, b: &EncodedMatrix, rule: BandwidthRule) -> Result<f64> {
    Ok(mmd_rbf_estimate(a, b, rule)?.value)
}

/// Exact Wasserstein-1 distance between two empirical distributions on
/// the line: the integral of `|F_a - F_b|`. Equal sizes reduce to the mean
/// gap between sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("Wasserstein distance of an empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / a.len() as f64);
    }
    let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
    all.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = 0.0;
    for w in all.windows(2) {
        let x = w[0];
        while ia < a.len() && a[ia] <= x {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= x {
            ib += 1;
        }
        let gap = w[1] - x;
        if gap > 0.0 {
            // |F_a - F_b| scaled by na * nb stays an integer
            let diff = (ia as u64 * nb).abs_diff(ib as u64 * na);
            total += diff as f64 * gap;
        }
    }
    Ok(total / (na * nb) as f64)
}

/// Total variation distance between category frequency vectors.
pub fn total_variation(a: &[&str], b: &[&str]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("total variation of an empty sample".into()));
    }
    let mut labels: Vec<&str> = Vec::new();
    for &l in a.iter().chain(b) {
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let count = |xs: &[&str]| -> Vec<usize> { labels.iter().map(|l| xs.iter().filter(|x| *x == l).count()).collect() };
    let (ca, cb) = (count(a), count(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(0.5
        * ca.iter()
            .zip(&cb)
            .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
            .sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDistance {
    pub column: String,
    pub kind: ColumnKind,
    /// Wasserstein-1 for numeric columns, total variation for categorical.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistances {
    pub columns: Vec<ColumnDistance>,
    pub mean: f64,
}

/// Per-column marginal distances on raw values and their unweighted mean.
pub fn marginal_wasserstein(a: &TabularDataset, b: &TabularDataset) -> Result<MarginalDistances> {
    a.check_same_schema(b)?;
    let mut columns = Vec::with_capacity(a.schema().len());
    for (j, col) in a.schema().iter().enumerate() {
        let value = match col.kind() {
            ColumnKind::Numeric => {
                let xs = numeric_column(a, j);
                let ys = numeric_column(b, j);
                wasserstein_1d(&xs, &ys)?
            }
            ColumnKind::Categorical => {
                let xs = categorical_column(a, j);
                let ys = categorical_column(b, j);
                total_variation(&xs, &ys)?
            }
        };
        columns.push(ColumnDistance {
            column: col.name().to_string(),
            kind: col.kind(),
            value,
        });
    }
    let mean = if columns.is_empty() {
        0.0
    } else {
        columns.iter().map(|c| c.value).sum::<f64>() / columns.len() as f64
    };
    Ok(MarginalDistances { columns, mean })
}

fn numeric_column(d: &TabularDataset, j: usize) -> Vec<f64> {
    d.rows()
        .iter()
        .map(|r| match r[j] {
            Value::Numeric(x) => x,
            Value::Categorical(_) => unreachable!("validated dataset"),
        })
        .collect()
}

fn categorical_column(d: &TabularDataset, j: usize) -> Vec<&str> {
    d.rows()
        .iter()
        .map(|r| match &r[j] {
            Value::Categorical(s) => s.as_str(),
            Value::Numeric(_) => unreachable!("validated dataset"),
        })
        .collect()
}

/// Fit the logistic probe on synthetic features → label and report its
/// AUCROC on the holdout set. The positive class is the lexicographically
/// larger of the two labels.
pub fn utility_probe(synthetic: &TabularDataset, holdout: &TabularDataset, label_column: &str) -> Result<f64> {
    synthetic.check_same_schema(holdout)?;
    let j = synthetic.column_index(label_column).ok_or_else(|| Error::Schema {
        column: label_column.to_string(),
        message: "label column not found".into(),
    })?;
    if synthetic.schema()[j].kind() != ColumnKind::Categorical {
        return Err(Error::Schema {
            column: label_column.to_string(),
            message: "label column must be categorical".into(),
        });
    }
    let ys = categorical_column(synthetic, j);
    let yh = categorical_column(holdout, j);
    let mut labels: Vec<&str> = ys.iter().chain(&yh).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let binary = labels.len() == 2 && labels.iter().all(|l| ys.contains(l) && yh.contains(l));
    if !binary {
        return Err(Error::Schema {
            column: label_column.to_string(),
            message: format!("label must take exactly two values present in both datasets, found {labels:?}"),
        });
    }
    let positive = labels[1];
    let syn_x = synthetic.without_column(j)?;
    let hold_x = holdout.without_column(j)?;
    let encoder = Encoder::fit(&[&syn_x, &hold_x])?;
    let xs = encoder.encode(&syn_x)?;
    let xh = encoder.encode(&hold_x)?;
    let model = LogisticModel::fit(
        &xs,
        &ys.iter().map(|l| *l == positive).collect::<Vec<_>>(),
        &TrainConfig::default(),
    )?;
    let scores = AttackScores::new(
        "utility_probe",
        model.predict_proba(&xh)?,
        yh.iter().map(|l| *l == positive).collect(),
    )?;
    Ok(auc_roc(&scores)?.auc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Squared MMD clamped at 0 for display.
    pub mmd: f64,
    pub mmd_raw: f64,
    pub mmd_bandwidth: f64,
    pub wasserstein_mean: f64,
    pub wasserstein_columns: Vec<ColumnDistance>,
    pub utility_auc: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ColumnSchema;
    use crate::Role;

    fn m(xs: &[f64]) -> EncodedMatrix {
        EncodedMatrix::from_scalars(xs, Role::Unlabeled).unwrap()
    }

    #[test]
    fn mmd_identical_sample_nonpositive() {
        let a = m(&[0.0, 0.3, 1.0, 2.5, -1.0]);
        assert!(mmd_rbf(&a, &a, BandwidthRule::MedianHeuristic).unwrap() <= 1e-9);
    }

    #[test]
    fn mmd_point_masses() {
        // kernel sums on constant samples: 1 + 1 - 2 exp(-50)
        let expected = 2.0 - 2.0 * (-50.0f64).exp();
        let v = mmd_rbf(&m(&[0.0; 10]), &m(&[10.0; 10]), BandwidthRule::Fixed(1.0)).unwrap();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn mmd_errors() {
        assert!(mmd_rbf(&m(&[0.0]), &m(&[1.0, 2.0]), BandwidthRule::Fixed(1.0)).is_err());
        assert!(mmd_rbf(&m(&[0.0, 1.0]), &m(&[1.0, 2.0]), BandwidthRule::Fixed(0.0)).is_err());
    }

    #[test]
    fn mmd_symmetric() {
        let a = m(&[0.0, 0.3, 1.0, 2.5, -1.0, 7.0]);
        let b = m(&[0.1, 0.2, 4.0]);
        let x = mmd_rbf_estimate(&a, &b, BandwidthRule::MedianHeuristic).unwrap();
        let y = mmd_rbf_estimate(&b, &a, BandwidthRule::MedianHeuristic).unwrap();
        assert_eq!(x.value.to_bits(), y.value.to_bits());
        assert_eq!(x.bandwidth, y.bandwidth);
    }

    #[test]
    fn degenerate_bandwidth_falls_back() {
        assert_eq!(median_heuristic_bandwidth(&m(&[1.0; 4]), &m(&[1.0; 4])).unwrap(), 1.0);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        // unequal sizes: {0} vs {0, 1} -> half the mass moves by 1
        assert_eq!(wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn tv_example() {
        assert_eq!(total_variation(&["a", "b"], &["a", "a"]).unwrap(), 0.5);
        assert_eq!(total_variation(&["a"], &["b"]).unwrap(), 1.0);
    }

    fn dataset(nums: &[f64], cats: &[&str]) -> TabularDataset {
        let mut labels: Vec<String> = Vec::new();
        for c in cats {
            if !labels.iter().any(|l| l == c) {
                labels.push(c.to_string());
            }
        }
        TabularDataset::new(
            vec![
                ColumnSchema::numeric("x"),
                ColumnSchema::categorical("y", labels).unwrap(),
            ],
            nums.iter()
                .zip(cats)
                .map(|(x, c)| vec![Value::Numeric(*x), Value::Categorical(c.to_string())])
                .collect(),
            Role::Unlabeled,
        )
        .unwrap()
    }

    #[test]
    fn marginal_examples() {
        let a = dataset(&[0.0, 0.0], &["p", "q"]);
        let b = dataset(&[1.0, 1.0], &["p", "p"]);
        let r = marginal_wasserstein(&a, &b).unwrap();
        assert_eq!(r.columns[0].value, 1.0);
        assert_eq!(r.columns[1].value, 0.5);
        assert_eq!(r.columns[1].kind, ColumnKind::Categorical);
        assert_eq!(r.mean, 0.75);
        let same = marginal_wasserstein(&a, &a).unwrap();
        assert_eq!(same.mean, 0.0);
    }

    #[test]
    fn probe_separable_and_inverted() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 - 19.5).collect();
        let ys: Vec<&str> = xs.iter().map(|&x| if x > 0.0 { "hi" } else { "lo" }).collect();
        let inverted: Vec<&str> = xs.iter().map(|&x| if x > 0.0 { "lo" } else { "hi" }).collect();
        let d = dataset(&xs, &ys);
        assert!(utility_probe(&d, &d, "y").unwrap() > 0.99);
        let bad = dataset(&xs, &inverted);
        assert!(utility_probe(&bad, &d, "y").unwrap() < 0.5);
    }

    #[test]
    fn probe_rejects_non_binary() {
        let d = dataset(&[1.0, 2.0, 3.0], &["a", "b", "c"]);
        assert!(utility_probe(&d, &d, "y").is_err());
        assert!(utility_probe(&d, &d, "x").is_err());
        assert!(utility_probe(&d, &d, "nope").is_err());
    }
}
