use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::OracleDistribution;
use crate::stats::mean_and_population_sd;
use crate::tabular::{ColumnKind, Role, TabularDataset, Value};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GeneratorKind {
    /// Samples the oracle and never looks at the training data.
    Perfect,
    /// Emits noisy copies of training rows with probability
    /// `copy_fraction`, oracle draws otherwise.
    Copier { noise_scale: f64, copy_fraction: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedGenerator {
    pub kind: GeneratorKind,
    pub seed: u64,
}

impl GeneratorKind {
    pub fn validate(&self) -> Result<()> {
        if let GeneratorKind::Copier {
            noise_scale,
            copy_fraction,
        } = *self
        {
            if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
                return Err(Error::invalid(format!("noise scale must be >= 0, got {noise_scale}")));
            }
            if !(0.0..=1.0).contains(&copy_fraction) {
                return Err(Error::invalid(format!(
                    "copy fraction must lie in [0, 1], got {copy_fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Produce `n` synthetic rows.
///
/// A copied row keeps every field of a uniformly chosen training row, adds
/// Gaussian noise with standard deviation `noise_scale * sd` to each
/// numeric field (`sd` measured on the training column) and, with
/// probability `min(noise_scale, 1)`, replaces each categorical field by a
/// draw from the training marginal.
pub fn generate(
    gen: &SimulatedGenerator,
    train: &TabularDataset,
    dist: &OracleDistribution,
    n: usize,
) -> Result<TabularDataset> {
    gen.kind.validate()?;
    match gen.kind {
        GeneratorKind::Perfect => Ok(dist.sample(n, gen.seed)?.with_role(Role::Synthetic)),
        GeneratorKind::Copier {
            noise_scale,
            copy_fraction,
        } => {
            if train.is_empty() {
                return Err(Error::EmptyInput("copier needs training rows".into()));
            }
            if n == 0 {
                return Err(Error::invalid("sample size must be at least 1"));
            }
            let schema = train.schema();
            let sds: Vec<f64> = (0..schema.len())
                .map(|j| match schema[j].kind() {
                    ColumnKind::Numeric => {
                        let col: Vec<f64> = train
                            .rows()
                            .iter()
                            .map(|r| match r[j] {
                                Value::Numeric(x) => x,
                                Value::Categorical(_) => unreachable!("validated dataset"),
                            })
                            .collect();
                        mean_and_population_sd(&col).1
                    }
                    ColumnKind::Categorical => 0.0,
                })
                .collect();
            let resample_p = noise_scale.min(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                if copy_fraction > 0.0 && rng.random::<f64>() < copy_fraction {
                    let src = &train.rows()[rng.random_range(0..train.len())];
                    let mut row = src.clone();
                    for (j, v) in row.iter_mut().enumerate() {
                        match v {
                            Value::Numeric(x) => {
                                if noise_scale > 0.0 {
                                    let z: f64 = rng.sample(StandardNormal);
                                    *x += noise_scale * sds[j] * z;
                                }
                            }
                            Value::Categorical(_) => {
                                if resample_p > 0.0 && rng.random::<f64>() < resample_p {
                                    let donor = &train.rows()[rng.random_range(0..train.len())];
                                    *v = donor[j].clone();
                                }
                            }
                        }
                    }
                    rows.push(row);
                } else {
                    rows.push(dist.draw_row(&mut rng));
                }
            }
            TabularDataset::new(schema.to_vec(), rows, Role::Synthetic)
                .map_err(|e| e.context("oracle rows do not match the training schema"))
        }
    }
}
