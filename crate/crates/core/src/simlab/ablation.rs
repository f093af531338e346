use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::harness::{evaluate, AttackContext, EncodedInputs};
use super::{simulate_inputs, AuditConfig, AuditInputs, ExperimentPlan, Scenario};
use crate::attacks::{AttackKind, AttackScores};
use crate::dpi::{dpi_attack, DpiConfig, ThresholdRule};
use crate::error::ResultExt;
use crate::neighbors::{Backend, Metric};
use crate::stats::{derive_seed, median, MeanSd};
use crate::tabular::TabularDataset;
use crate::{Error, Result};

/// Where ablation data comes from.
#[derive(Clone, Debug)]
pub enum AblationSource {
    /// Fresh simulated data per replication.
    Oracle(Scenario),
    /// Fixed audit files, subsampled without replacement to each size.
    Files(AuditInputs),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationCell {
    pub size: usize,
    pub k: usize,
    pub metric: Metric,
    pub attack: AttackKind,
    pub auc: MeanSd,
}

fn subsample(d: &TabularDataset, size: usize, seed: u64, what: &str) -> Result<TabularDataset> {
    if d.len() < size {
        return Err(Error::invalid(format!(
            "{what} set has {} rows, fewer than the requested size {size}",
            d.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, d.len(), size).into_vec();
    idx.sort_unstable();
    d.select(&idx, d.role())
}

fn replication_inputs(source: &AblationSource, size: usize, seed: u64) -> Result<AuditInputs> {
    match source {
        AblationSource::Oracle(s) => simulate_inputs(s, size, seed),
        AblationSource::Files(f) => AuditInputs::new(
            subsample(&f.train, size, derive_seed(seed, 0), "train")?,
            subsample(&f.holdout, size, derive_seed(seed, 1), "holdout")?,
            subsample(&f.reference, size, derive_seed(seed, 2), "reference")?,
            subsample(&f.synthetic, size, derive_seed(seed, 3), "synthetic")?,
        ),
    }
}

type CellKey = (usize, usize, usize, usize);
/// (k, metric, attack) indices to AUC for one replication.
type Grid = BTreeMap<(usize, usize, usize), f64>;

/// AUC for every (k, metric, attack) on one replication's data.
fn replication_grid(inputs: &AuditInputs, plan: &ExperimentPlan, config: &AuditConfig) -> Result<Grid> {
    let enc = EncodedInputs::new(inputs)?;
    let labels = enc.labels();
    let mut out = BTreeMap::new();
    for (mi, &metric) in plan.metrics.iter().enumerate() {
        let ctx = AttackContext::new(&enc, metric, Backend::Accelerated)?;
        for (ai, &kind) in plan.attacks.iter().enumerate() {
            if kind == AttackKind::Dpi {
                for (ki, &k) in plan.k_grid.iter().enumerate() {
                    let cfg = DpiConfig {
                        k,
                        metric,
                        threshold_rule: ThresholdRule::MedianOfTestScores,
                    };
                    let att = dpi_attack(&ctx.pooled, &ctx.test, &cfg)?;
                    let threshold = att.threshold;
                    let scores = AttackScores::new(kind.name(), att.scores(), labels.clone())?;
                    out.insert((ki, mi, ai), evaluate(kind, scores, threshold)?.auc.auc);
                }
            } else {
                // k only affects DPI; other attacks repeat across the k axis
                let (scores, _) = ctx.baseline_scores(kind, config)?;
                let scores = scores.with_labels(labels.clone())?;
                let threshold = median(&scores.scores).expect("non-empty");
                let auc = evaluate(kind, scores, threshold)?.auc.auc;
                for ki in 0..plan.k_grid.len() {
                    out.insert((ki, mi, ai), auc);
                }
            }
        }
    }
    Ok(out)
}

/// Full factorial sizes × k × metric × attack, each cell the mean and
/// standard deviation of AUCROC over replications. Cells come back in
/// that nesting order.
pub fn run_ablation(source: &AblationSource, plan: &ExperimentPlan, config: &AuditConfig) -> Result<Vec<AblationCell>> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.sizes.len())
        .flat_map(|si| (0..plan.replications).map(move |r| (si, r)))
        .collect();
    let grids: Vec<((usize, usize), Grid)> = jobs
        .par_iter()
        .map(|&(si, r)| {
            let size = plan.sizes[si];
            let seed = derive_seed(derive_seed(plan.seed, size as u64), r as u64);
            let inputs = replication_inputs(source, size, seed)?;
            replication_grid(&inputs, plan, config)
                .map(|g| ((si, r), g))
                .context(|| format!("size {size}, replication {r}"))
        })
        .collect::<Result<_>>()?;

    let mut values: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for ((si, _), grid) in &grids {
        for (&(ki, mi, ai), &auc) in grid {
            values.entry((*si, ki, mi, ai)).or_default().push(auc);
        }
    }
    let mut cells = Vec::with_capacity(values.len());
    for (si, &size) in plan.sizes.iter().enumerate() {
        for (ki, &k) in plan.k_grid.iter().enumerate() {
            for (mi, &metric) in plan.metrics.iter().enumerate() {
                for (ai, &attack) in plan.attacks.iter().enumerate() {
                    cells.push(AblationCell {
                        size,
                        k,
                        metric,
                        attack,
                        auc: MeanSd::of(&values[&(si, ki, mi, ai)]),
                    });
                }
            }
        }
    }
    Ok(cells)
}
