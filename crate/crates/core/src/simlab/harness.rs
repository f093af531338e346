use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, GeneratorKind, OracleDistribution, SimulatedGenerator};
use crate::attacks::{
    auc_roc, gan_leaks_calibrated_with_index, gan_leaks_with_index, identical_match_share, logan_calibrated,
    mc_attack_with_radius, mc_radius, AttackKind, AttackScores, AucResult, RadiusRule,
};
use crate::dp_bound::{epsilon_lower_bound, operating_point_with, BetaReading};
use crate::dpi::{delta_estimates, dpi_attack, top_copied, DpiConfig, DpiScore};
use crate::error::ResultExt;
use crate::logistic::TrainConfig;
use crate::neighbors::{Backend, Metric, PooledIndex, SearchIndex};
use crate::projection::pca_2d;
use crate::quality::{marginal_wasserstein, mmd_rbf_estimate, utility_probe, BandwidthRule, QualityReport};
use crate::report::{
    AttackSummary, AuditReport, ColumnDistanceSummary, CorrelationSummary, DeltaSummary, DpiSummary, EpsilonReport,
    EpsilonVariant, Provenance, QualitySummary, TopCopiedRecord,
};
use crate::stats::{derive_seed, median, MeanSd};
use crate::tabular::{three_way_split, EncodedMatrix, Encoder, Role, TabularDataset};
use crate::{Error, Result};

/// Everything one audit run needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub dpi: DpiConfig,
    pub attacks: Vec<AttackKind>,
    /// Top percentile of training rows exported as "most copied".
    pub percentile: f64,
    pub label_column: Option<String>,
    pub mc_radius: RadiusRule,
    pub logistic: TrainConfig,
    pub mmd_bandwidth: BandwidthRule,
    pub backend: Backend,
    /// Compute a 2-D PCA projection of the training rows.
    pub projection: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            dpi: DpiConfig::default(),
            attacks: AttackKind::ALL.to_vec(),
            percentile: 1.0,
            label_column: None,
            mc_radius: RadiusRule::MedianPairwise,
            logistic: TrainConfig::default(),
            mmd_bandwidth: BandwidthRule::MedianHeuristic,
            backend: Backend::Accelerated,
            projection: false,
        }
    }
}

/// The four parties of an audit.
#[derive(Clone, Debug)]
pub struct AuditInputs {
    pub train: TabularDataset,
    pub holdout: TabularDataset,
    pub reference: TabularDataset,
    pub synthetic: TabularDataset,
}

impl AuditInputs {
    /// Tags each dataset with its role and checks the schemas agree.
    pub fn new(
        train: TabularDataset,
        holdout: TabularDataset,
        reference: TabularDataset,
        synthetic: TabularDataset,
    ) -> Result<Self> {
        for (name, d) in [
            ("holdout", &holdout),
            ("reference", &reference),
            ("synthetic", &synthetic),
        ] {
            train.check_same_schema(d).context(|| format!("train vs {name}"))?;
        }
        Ok(AuditInputs {
            train: train.with_role(Role::Train),
            holdout: holdout.with_role(Role::Holdout),
            reference: reference.with_role(Role::Reference),
            synthetic: synthetic.with_role(Role::Synthetic),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackOutcome {
    pub kind: AttackKind,
    pub scores: Vec<f64>,
    pub auc: AucResult,
    pub threshold: f64,
    pub beta_fnr: EpsilonEstimate,
    pub beta_fpr: EpsilonEstimate,
}

/// Raw output of one audit run.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationResult {
    /// Membership per test row: training rows first, then holdout rows.
    pub labels: Vec<bool>,
    pub attacks: Vec<AttackOutcome>,
    pub dpi_scores: Vec<DpiScore>,
    pub dpi_threshold: f64,
    pub top_copied: Vec<TopCopiedRecord>,
    pub column_names: Vec<String>,
    /// (min, median, max) of Δ over members.
    pub delta: (f64, f64, f64),
    pub quality: QualityReport,
    pub identical_match_share: f64,
    pub correlations: Vec<(AttackKind, AttackKind, Option<f64>)>,
    pub mc_radius: Option<f64>,
    pub projection: Option<Vec<[f64; 2]>>,
}

impl ReplicationResult {
    pub fn attack(&self, kind: AttackKind) -> Option<&AttackOutcome> {
        self.attacks.iter().find(|a| a.kind == kind)
    }

    pub fn n_members(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Encoded audit data with the search structures every attack shares.
pub(crate) struct AttackContext {
    pub test: EncodedMatrix,
    pub synthetic: EncodedMatrix,
    pub reference: EncodedMatrix,
    pub pooled: PooledIndex,
    pub syn_index: SearchIndex,
    pub ref_index: SearchIndex,
}

pub(crate) struct EncodedInputs {
    pub train: EncodedMatrix,
    pub holdout: EncodedMatrix,
    pub reference: EncodedMatrix,
    pub synthetic: EncodedMatrix,
}

impl EncodedInputs {
    pub fn new(inputs: &AuditInputs) -> Result<Self> {
        let encoder = Encoder::fit(&[&inputs.train, &inputs.holdout, &inputs.reference, &inputs.synthetic])?;
        Ok(EncodedInputs {
            train: encoder.encode(&inputs.train)?,
            holdout: encoder.encode(&inputs.holdout)?,
            reference: encoder.encode(&inputs.reference)?,
            synthetic: encoder.encode(&inputs.synthetic)?,
        })
    }

    pub fn labels(&self) -> Vec<bool> {
        let mut labels = vec![true; self.train.nrows()];
        labels.resize(self.train.nrows() + self.holdout.nrows(), false);
        labels
    }
}

impl AttackContext {
    pub fn new(enc: &EncodedInputs, metric: Metric, backend: Backend) -> Result<Self> {
        Ok(AttackContext {
            test: EncodedMatrix::vstack(&[&enc.train, &enc.holdout])?,
            pooled: PooledIndex::build(&enc.reference, &enc.synthetic, metric, backend)?,
            syn_index: SearchIndex::build(enc.synthetic.clone(), metric, backend),
            ref_index: SearchIndex::build(enc.reference.clone(), metric, backend),
            synthetic: enc.synthetic.clone(),
            reference: enc.reference.clone(),
        })
    }

    /// Scores of a non-DPI attack plus the MC radius when relevant.
    pub fn baseline_scores(&self, kind: AttackKind, config: &AuditConfig) -> Result<(AttackScores, Option<f64>)> {
        Ok(match kind {
            AttackKind::Dpi => unreachable!("DPI is scored through the pooled index"),
            AttackKind::GanLeaks => (gan_leaks_with_index(&self.syn_index, &self.test)?, None),
            AttackKind::GanLeaksCalibrated | AttackKind::Dcr => {
                let mut s = gan_leaks_calibrated_with_index(&self.syn_index, &self.ref_index, &self.test)?;
                s.attack_name = kind.name().to_string();
                (s, None)
            }
            AttackKind::Mc => {
                let r = mc_radius(&self.syn_index, &self.test, config.mc_radius)?;
                (mc_attack_with_radius(&self.syn_index, &self.test, r)?, Some(r))
            }
            AttackKind::LoganCalibrated => (
                logan_calibrated(&self.synthetic, &self.reference, &self.test, &config.logistic)?,
                None,
            ),
        })
    }
}

fn epsilon_estimate(scores: &AttackScores, threshold: f64, reading: BetaReading) -> Result<EpsilonEstimate> {
    let op = operating_point_with(scores, threshold, reading)?;
    Ok(EpsilonEstimate {
        alpha: op.point.alpha(),
        beta: op.point.beta(),
        epsilon: epsilon_lower_bound(&op.point),
        clipped: op.clipped,
    })
}

pub(crate) fn evaluate(kind: AttackKind, scores: AttackScores, threshold: f64) -> Result<AttackOutcome> {
    let auc = auc_roc(&scores)?;
    Ok(AttackOutcome {
        kind,
        auc,
        threshold,
        beta_fnr: epsilon_estimate(&scores, threshold, BetaReading::FalseNegativeRate)?,
        beta_fpr: epsilon_estimate(&scores, threshold, BetaReading::FalsePositiveRate)?,
        scores: scores.scores,
    })
}

/// Run the full audit pipeline once: encode, score every attack on
/// train ∪ holdout, and collect DPI, Δ, quality and ε statistics.
pub fn run_audit(inputs: &AuditInputs, config: &AuditConfig) -> Result<ReplicationResult> {
    config.dpi.validate()?;
    let enc = EncodedInputs::new(inputs).context(|| "encoding audit inputs".into())?;
    let labels = enc.labels();
    let ctx = AttackContext::new(&enc, config.dpi.metric, config.backend)?;
    let n_train = inputs.train.len();

    let dpi = dpi_attack(&ctx.pooled, &ctx.test, &config.dpi).context(|| "DPI attack".into())?;
    let dpi_scores = dpi.neighborhoods.clone();
    let dpi_threshold = dpi.threshold;

    let mut attacks = Vec::with_capacity(config.attacks.len());
    let mut mc_r = None;
    for &kind in &config.attacks {
        let outcome = if kind == AttackKind::Dpi {
            let scores = AttackScores::new(kind.name(), dpi.scores(), labels.clone())?;
            evaluate(kind, scores, dpi_threshold)?
        } else {
            let (scores, r) = ctx.baseline_scores(kind, config).context(|| format!("attack {kind}"))?;
            mc_r = mc_r.or(r);
            let scores = scores.with_labels(labels.clone())?;
            let threshold = median(&scores.scores).expect("non-empty test set");
            evaluate(kind, scores, threshold)?
        };
        attacks.push(outcome);
    }

    let mut correlations = Vec::new();
    for i in 0..attacks.len() {
        for j in i + 1..attacks.len() {
            let r = crate::stats::pearson(&attacks[i].scores, &attacks[j].scores).ok();
            correlations.push((attacks[i].kind, attacks[j].kind, r));
        }
    }

    let member_scores: Vec<(usize, DpiScore)> = dpi_scores[..n_train].iter().copied().enumerate().collect();
    let top = top_copied(&member_scores, config.percentile)?;
    let top_copied = top
        .into_iter()
        .map(|row| TopCopiedRecord {
            train_row: row,
            count_synthetic: dpi_scores[row].count_synthetic,
            values: inputs.train.rows()[row].clone(),
        })
        .collect();

    let deltas: Vec<f64> = delta_estimates(&dpi_scores[..n_train], inputs.reference.len(), inputs.synthetic.len())?
        .into_iter()
        .map(|d| d.delta)
        .collect();
    let delta = (
        deltas.iter().copied().fold(f64::INFINITY, f64::min),
        median(&deltas).expect("training set is non-empty"),
        deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );

    let quality = quality_report(inputs, &enc, config).context(|| "quality metrics".into())?;
    let projection = if config.projection {
        Some(pca_2d(&enc.train)?)
    } else {
        None
    };

    Ok(ReplicationResult {
        labels,
        attacks,
        dpi_scores,
        dpi_threshold,
        top_copied,
        column_names: inputs.train.schema().iter().map(|c| c.name().to_string()).collect(),
        delta,
        quality,
        identical_match_share: identical_match_share(&inputs.train, &inputs.synthetic)?,
        correlations,
        mc_radius: mc_r,
        projection,
    })
}

fn quality_report(inputs: &AuditInputs, enc: &EncodedInputs, config: &AuditConfig) -> Result<QualityReport> {
    let (mmd_raw, bandwidth) = if enc.train.nrows() >= 2 && enc.synthetic.nrows() >= 2 {
        let m = mmd_rbf_estimate(&enc.train, &enc.synthetic, config.mmd_bandwidth)?;
        (m.value, m.bandwidth)
    } else {
        return Err(Error::invalid("MMD needs at least two training and two synthetic rows"));
    };
    let marginals = marginal_wasserstein(&inputs.train, &inputs.synthetic)?;
    let utility_auc = match &config.label_column {
        Some(label) => Some(utility_probe(&inputs.synthetic, &inputs.holdout, label)?),
        None => None,
    };
    Ok(QualityReport {
        mmd: mmd_raw.max(0.0),
        mmd_raw,
        mmd_bandwidth: bandwidth,
        wasserstein_mean: marginals.mean,
        wasserstein_columns: marginals.columns,
        utility_auc,
    })
}

/// Oracle plus generator: the recipe for one simulated audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub oracle: OracleDistribution,
    pub generator: GeneratorKind,
}

/// Draw `3 n` rows from the oracle, split them three ways and let the
/// generator produce `n` synthetic rows from the training part.
pub fn simulate_inputs(scenario: &Scenario, n: usize, seed: u64) -> Result<AuditInputs> {
    if n == 0 {
        return Err(Error::invalid("per-set size must be at least 1"));
    }
    let pool = scenario.oracle.sample(3 * n, derive_seed(seed, 0))?;
    let (train, holdout, reference) = three_way_split(&pool, derive_seed(seed, 1))?;
    let gen = SimulatedGenerator {
        kind: scenario.generator,
        seed: derive_seed(seed, 2),
    };
    let synthetic = generate(&gen, &train, &scenario.oracle, n)?;
    AuditInputs::new(train, holdout, reference, synthetic)
}

/// Independent simulated audits. Replication `r` uses seed
/// `derive_seed(seed, r)`; results come back in replication order.
pub fn run_simulation(
    scenario: &Scenario,
    n: usize,
    config: &AuditConfig,
    replications: usize,
    seed: u64,
) -> Result<Vec<(u64, ReplicationResult)>> {
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed, r as u64);
            let inputs = simulate_inputs(scenario, n, s)?;
            run_audit(&inputs, config)
                .map(|res| (s, res))
                .context(|| format!("replication {r}"))
        })
        .collect()
}

/// Grid and protocol of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub k_grid: Vec<usize>,
    pub metrics: Vec<Metric>,
    pub attacks: Vec<AttackKind>,
    pub seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            sizes: vec![250, 500, 1000, 2000],
            replications: 5,
            k_grid: vec![5, 10, 20, 30],
            metrics: vec![Metric::L1, Metric::L2],
            attacks: vec![AttackKind::Dpi],
            seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.k_grid.is_empty() || self.metrics.is_empty() || self.attacks.is_empty() {
            return Err(Error::invalid("experiment grids must be non-empty"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.k_grid.contains(&0) {
            return Err(Error::invalid("k must be at least 1"));
        }
        let k_max = *self.k_grid.iter().max().expect("non-empty");
        if let Some(s) = self.sizes.iter().find(|&&s| s < 3 * k_max) {
            return Err(Error::invalid(format!("size {s} is below 3 * k_max = {}", 3 * k_max)));
        }
        Ok(())
    }
}

fn epsilon_variant(results: &[&EpsilonEstimate]) -> EpsilonVariant {
    let col = |f: fn(&EpsilonEstimate) -> f64| MeanSd::of(&results.iter().map(|e| f(e)).collect::<Vec<_>>());
    EpsilonVariant {
        alpha: col(|e| e.alpha),
        beta: col(|e| e.beta),
        epsilon_raw: col(|e| e.epsilon),
        epsilon_display: col(|e| e.epsilon.max(0.0)),
        clipped: results.iter().any(|e| e.clipped),
    }
}

fn pooled_ratio(scores: &[DpiScore]) -> f64 {
    let syn: usize = scores.iter().map(|s| s.count_synthetic).sum();
    let refc: usize = scores.iter().map(|s| s.count_reference).sum();
    if refc == 0 {
        f64::INFINITY
    } else {
        syn as f64 / refc as f64
    }
}

fn finite_mean_sd(values: &[f64]) -> Option<MeanSd> {
    values.iter().all(|v| v.is_finite()).then(|| MeanSd::of(values))
}

/// Fold replications into a report: means and sample standard deviations
/// across replications, histograms summed, top-copied records taken from
/// the first replication.
pub fn aggregate(results: &[ReplicationResult], config: &AuditConfig, provenance: Provenance) -> Result<AuditReport> {
    let first = results
        .first()
        .ok_or_else(|| Error::EmptyInput("no replications to aggregate".into()))?;
    let stat = |f: &dyn Fn(&ReplicationResult) -> f64| MeanSd::of(&results.iter().map(f).collect::<Vec<_>>());

    let attacks = first
        .attacks
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let per: Vec<&AttackOutcome> = results.iter().map(|r| &r.attacks[i]).collect();
            let aucs: Vec<f64> = per.iter().map(|o| o.auc.auc).collect();
            AttackSummary {
                name: a.kind.name().to_string(),
                auc: MeanSd::of(&aucs),
                auc_per_replication: aucs,
                threshold: MeanSd::of(&per.iter().map(|o| o.threshold).collect::<Vec<_>>()),
                epsilon: EpsilonReport {
                    beta_false_negative_rate: epsilon_variant(&per.iter().map(|o| &o.beta_fnr).collect::<Vec<_>>()),
                    beta_false_positive_rate: epsilon_variant(&per.iter().map(|o| &o.beta_fpr).collect::<Vec<_>>()),
                },
            }
        })
        .collect();

    let correlations = first
        .correlations
        .iter()
        .enumerate()
        .map(|(i, (a, b, _))| {
            let vals: Option<Vec<f64>> = results.iter().map(|r| r.correlations[i].2).collect();
            CorrelationSummary {
                a: a.name().to_string(),
                b: b.name().to_string(),
                pearson: vals.map(|v| MeanSd::of(&v)),
            }
        })
        .collect();

    let k = config.dpi.k;
    let mut histogram_members = vec![0u64; k + 1];
    let mut histogram_nonmembers = vec![0u64; k + 1];
    let mut member_means = Vec::new();
    let mut nonmember_means = Vec::new();
    let mut member_ratios = Vec::new();
    let mut nonmember_ratios = Vec::new();
    for r in results {
        let (mut mem, mut non) = (Vec::new(), Vec::new());
        for (s, &l) in r.dpi_scores.iter().zip(&r.labels) {
            if l {
                histogram_members[s.count_synthetic] += 1;
                mem.push(*s);
            } else {
                histogram_nonmembers[s.count_synthetic] += 1;
                non.push(*s);
            }
        }
        let mean = |v: &[DpiScore]| v.iter().map(|s| s.count_synthetic as f64).sum::<f64>() / v.len().max(1) as f64;
        member_means.push(mean(&mem));
        nonmember_means.push(mean(&non));
        member_ratios.push(pooled_ratio(&mem));
        nonmember_ratios.push(pooled_ratio(&non));
    }

    let dpi = DpiSummary {
        k,
        metric: config.dpi.metric.to_string(),
        threshold: stat(&|r| r.dpi_threshold),
        histogram_members,
        histogram_nonmembers,
        member_mean_count: MeanSd::of(&member_means),
        nonmember_mean_count: MeanSd::of(&nonmember_means),
        member_pooled_ratio: finite_mean_sd(&member_ratios),
        nonmember_pooled_ratio: finite_mean_sd(&nonmember_ratios),
        top_percentile: config.percentile,
        top_copied_replication: 0,
        top_copied_columns: first.column_names.clone(),
        top_copied: first.top_copied.clone(),
    };

    let quality = QualitySummary {
        mmd: stat(&|r| r.quality.mmd),
        mmd_raw: stat(&|r| r.quality.mmd_raw),
        mmd_bandwidth: stat(&|r| r.quality.mmd_bandwidth),
        wasserstein_mean: stat(&|r| r.quality.wasserstein_mean),
        wasserstein_columns: first
            .quality
            .wasserstein_columns
            .iter()
            .enumerate()
            .map(|(j, c)| ColumnDistanceSummary {
                column: c.column.clone(),
                kind: c.kind,
                value: stat(&|r| r.quality.wasserstein_columns[j].value),
            })
            .collect(),
        utility_auc: results
            .iter()
            .map(|r| r.quality.utility_auc)
            .collect::<Option<Vec<f64>>>()
            .map(|v| MeanSd::of(&v)),
    };

    Ok(AuditReport {
        provenance,
        replications: results.len(),
        n_members: first.n_members(),
        n_nonmembers: first.labels.len() - first.n_members(),
        attacks,
        correlations,
        dpi,
        delta: DeltaSummary {
            min: stat(&|r| r.delta.0),
            median: stat(&|r| r.delta.1),
            max: stat(&|r| r.delta.2),
        },
        quality,
        identical_match_share: stat(&|r| r.identical_match_share),
        mc_radius: results
            .iter()
            .map(|r| r.mc_radius)
            .collect::<Option<Vec<f64>>>()
            .map(|v| MeanSd::of(&v)),
    })
}
