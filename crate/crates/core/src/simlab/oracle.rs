use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::tabular::{ColumnSchema, Role, TabularDataset, Value};
use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal covariance.
    pub variance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
}

/// Stand-in for the unknown data distribution: a diagonal Gaussian mixture
/// over the numeric columns and independent categorical columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDistribution {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub numeric_columns: Vec<String>,
    #[serde(default, rename = "component")]
    pub components: Vec<GaussianComponent>,
    #[serde(default)]
    pub categorical: Vec<CategoricalSpec>,
}

// Mirror of the config layout with source spans, for error locations.
#[derive(Deserialize)]
struct RawOracle {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    numeric_columns: Vec<String>,
    #[serde(default)]
    component: Vec<toml::Spanned<GaussianComponent>>,
    #[serde(default)]
    categorical: Vec<toml::Spanned<CategoricalSpec>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl OracleDistribution {
    /// Single isotropic Gaussian with `dims` numeric columns.
    pub fn standard_gaussian(dims: usize) -> Self {
        OracleDistribution {
            seed: 0,
            numeric_columns: Vec::new(),
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: vec![0.0; dims],
                variance: vec![1.0; dims],
            }],
            categorical: Vec::new(),
        }
    }

    /// Parse the TOML oracle format:
    ///
    /// ```toml
    /// seed = 7
    /// numeric_columns = ["x0", "x1"]   # optional
    ///
    /// [[component]]
    /// weight = 0.5
    /// mean = [0.0, 0.0]
    /// variance = [1.0, 1.0]
    ///
    /// [[categorical]]
    /// name = "colour"
    /// labels = ["red", "blue"]
    /// probabilities = [0.25, 0.75]
    /// ```
    ///
    /// Syntax and validation errors carry the offending line.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawOracle = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        let mut spans = Vec::new();
        let components = raw
            .component
            .into_iter()
            .map(|s| {
                spans.push(line_of(text, s.span().start));
                s.into_inner()
            })
            .collect();
        let mut cat_spans = Vec::new();
        let categorical = raw
            .categorical
            .into_iter()
            .map(|s| {
                cat_spans.push(line_of(text, s.span().start));
                s.into_inner()
            })
            .collect();
        let dist = OracleDistribution {
            seed: raw.seed,
            numeric_columns: raw.numeric_columns,
            components,
            categorical,
        };
        dist.validate_with_lines(&spans, &cat_spans)?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_lines(&[], &[])
    }

    fn validate_with_lines(&self, comp_lines: &[usize], cat_lines: &[usize]) -> Result<()> {
        let err = |line: Option<usize>, message: String| Error::Config { line, message };
        let dims = self.dims();
        if dims == 0 && self.categorical.is_empty() {
            return Err(err(None, "distribution defines no columns".into()));
        }
        if !self.components.is_empty() {
            let total: f64 = self.components.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(err(
                    comp_lines.first().copied(),
                    format!("component weights sum to {total}, expected 1"),
                ));
            }
        }
        if !self.numeric_columns.is_empty() && self.numeric_columns.len() != dims {
            return Err(err(
                None,
                format!(
                    "{} numeric column names for {dims}-dimensional components",
                    self.numeric_columns.len()
                ),
            ));
        }
        for (i, c) in self.components.iter().enumerate() {
            let line = comp_lines.get(i).copied();
            if c.weight.is_nan() || c.weight < 0.0 {
                return Err(err(line, format!("component {i}: negative weight")));
            }
            if c.mean.len() != dims || c.variance.len() != dims {
                return Err(err(
                    line,
                    format!("component {i}: mean and variance must both have {dims} entries"),
                ));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(err(line, format!("component {i}: non-finite mean")));
            }
            if c.variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(err(line, format!("component {i}: variances must be positive")));
            }
        }
        let mut names: Vec<&str> = self.numeric_names_ref();
        for (i, c) in self.categorical.iter().enumerate() {
            let line = cat_lines.get(i).copied();
            if c.labels.is_empty() || c.labels.len() != c.probabilities.len() {
                return Err(err(
                    line,
                    format!(
                        "categorical '{}': labels and probabilities must be non-empty and equal length",
                        c.name
                    ),
                ));
            }
            if c.probabilities.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(err(line, format!("categorical '{}': negative probability", c.name)));
            }
            let total: f64 = c.probabilities.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(err(
                    line,
                    format!("categorical '{}': probabilities sum to {total}, expected 1", c.name),
                ));
            }
            ColumnSchema::categorical(c.name.clone(), c.labels.clone()).map_err(|e| err(line, e.to_string()))?;
            names.push(&c.name);
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(err(None, format!("duplicate column name '{}'", w[0])));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    fn numeric_names_ref(&self) -> Vec<&str> {
        // generated names are owned elsewhere; only explicit ones matter for duplicates
        self.numeric_columns.iter().map(String::as_str).collect()
    }

    pub fn numeric_names(&self) -> Vec<String> {
        if self.numeric_columns.is_empty() {
            (0..self.dims()).map(|j| format!("x{j}")).collect()
        } else {
            self.numeric_columns.clone()
        }
    }

    pub fn schema(&self) -> Result<Vec<ColumnSchema>> {
        let mut schema: Vec<ColumnSchema> = self.numeric_names().into_iter().map(ColumnSchema::numeric).collect();
        for c in &self.categorical {
            schema.push(ColumnSchema::categorical(c.name.clone(), c.labels.clone())?);
        }
        Ok(schema)
    }

    /// One row drawn from the distribution.
    pub fn draw_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Value> {
        let mut row = Vec::with_capacity(self.dims() + self.categorical.len());
        if !self.components.is_empty() {
            let c = &self.components[pick(rng, self.components.iter().map(|c| c.weight))];
            for (m, v) in c.mean.iter().zip(&c.variance) {
                let z: f64 = rng.sample(StandardNormal);
                row.push(Value::Numeric(m + v.sqrt() * z));
            }
        }
        for c in &self.categorical {
            let k = pick(rng, c.probabilities.iter().copied());
            row.push(Value::Categorical(c.labels[k].clone()));
        }
        row
    }

    /// `n` i.i.d. rows, deterministic per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<TabularDataset> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n).map(|_| self.draw_row(&mut rng)).collect();
        TabularDataset::new(self.schema()?, rows, Role::Unlabeled)
    }
}

/// Index drawn proportionally to `weights`.
fn pick<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        if w > 0.0 {
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
