//! Deterministic L2-regularised logistic regression trained by full-batch
//! gradient descent from a zero initialisation.

use serde::{Deserialize, Serialize};

use crate::tabular::EncodedMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Penalty on the weights; the intercept is not penalised.
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 500,
            learning_rate: 0.1,
            l2_penalty: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn fit(x: &EncodedMatrix, y: &[bool], config: &TrainConfig) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::EmptyInput("no training rows".into()));
        }
        let n = x.nrows() as f64;
        let d = x.ncols();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut grad = vec![0.0; d];
        for iteration in 0..config.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            let mut loss = 0.0;
            for (row, &label) in x.rows().zip(y) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let t = if label { 1.0 } else { 0.0 };
                let r = sigmoid(z) - t;
                loss += softplus(z) - t * z;
                grad_b += r;
                for (g, a) in grad.iter_mut().zip(row) {
                    *g += r * a;
                }
            }
            loss = loss / n + 0.5 * config.l2_penalty * w.iter().map(|v| v * v).sum::<f64>();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { iteration });
            }
            for (wj, g) in w.iter_mut().zip(&grad) {
                *wj -= config.learning_rate * (g / n + config.l2_penalty * *wj);
            }
            b -= config.learning_rate * grad_b / n;
            if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { iteration });
            }
        }
        Ok(LogisticModel {
            weights: w,
            intercept: b,
        })
    }

    pub fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                actual: x.ncols(),
            });
        }
        Ok(x.rows()
            .map(|row| sigmoid(self.intercept + row.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>()))
            .collect())
    }
}
