//! Mixed-type tables: loading, schema inference, splitting and encoding
//! into a shared metric space.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::mean_and_population_sd;
use crate::{Error, Result};

/// Lower clamp applied to fitted standard deviations.
pub const MIN_SD: f64 = 1e-12;

/// Human-readable summary of how [`Encoder`] prepares features.
pub const ENCODER_POLICY: &str = "numeric columns z-scored (population sd, floored at 1e-12); \
categorical columns one-hot over the union of labels in first-appearance order; \
fitted once on train, holdout, reference and synthetic together";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    name: String,
    kind: ColumnKind,
    categories: Vec<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        }
    }

    /// Fails on duplicate labels.
    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Result<Self> {
        let name = name.into();
        let mut seen = std::collections::HashSet::new();
        for c in &categories {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema {
                    column: name,
                    message: format!("duplicate category label '{c}'"),
                });
            }
        }
        Ok(ColumnSchema {
            name,
            kind: ColumnKind::Categorical,
            categories,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    /// Ordered category labels; empty for numeric columns.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Numeric(f64),
    Categorical(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Numeric(x) => write!(f, "{x}"),
            Value::Categorical(s) => f.write_str(s),
        }
    }
}

/// Which party of the audit a dataset (or an encoded row) belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Holdout,
    Reference,
    Synthetic,
    Unlabeled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Value>>,
    role: Role,
}

impl TabularDataset {
    /// Validates every row against the schema.
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<Vec<Value>>, role: Role) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::invalid(format!(
                    "row {r} has {} values, schema has {} columns",
                    row.len(),
                    schema.len()
                )));
            }
            for (col, v) in schema.iter().zip(row) {
                match (col.kind, v) {
                    (ColumnKind::Numeric, Value::Numeric(x)) if x.is_finite() => {}
                    (ColumnKind::Numeric, _) => {
                        return Err(Error::Schema {
                            column: col.name.clone(),
                            message: format!("row {r}: expected a finite number, got '{v}'"),
                        })
                    }
                    (ColumnKind::Categorical, Value::Categorical(s)) if col.categories.iter().any(|c| c == s) => {}
                    (ColumnKind::Categorical, _) => {
                        return Err(Error::Schema {
                            column: col.name.clone(),
                            message: format!("row {r}: value '{v}' is not a declared category"),
                        })
                    }
                }
            }
        }
        Ok(TabularDataset { schema, rows, role })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Rows at `indices`, in that order, keeping the schema.
    pub fn select(&self, indices: &[usize], role: Role) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        TabularDataset::new(self.schema.clone(), rows, role)
    }

    /// Drops one column.
    pub fn without_column(&self, index: usize) -> Result<Self> {
        let mut schema = self.schema.clone();
        schema.remove(index);
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.remove(index);
                r
            })
            .collect();
        TabularDataset::new(schema, rows, self.role)
    }

    /// Error naming the first column whose name or kind differs.
    pub fn check_same_schema(&self, other: &TabularDataset) -> Result<()> {
        check_schemas(&self.schema, &other.schema)
    }
}

fn check_schemas(a: &[ColumnSchema], b: &[ColumnSchema]) -> Result<()> {
    for i in 0..a.len().max(b.len()) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if x.name == y.name && x.kind == y.kind => {}
            (Some(x), Some(y)) if x.name != y.name => {
                return Err(Error::Schema {
                    column: x.name.clone(),
                    message: format!("column {i} is named '{}' in the other dataset", y.name),
                })
            }
            (Some(x), Some(y)) => {
                return Err(Error::Schema {
                    column: x.name.clone(),
                    message: format!("kind {:?} vs {:?}", x.kind, y.kind),
                })
            }
            (Some(x), None) | (None, Some(x)) => {
                return Err(Error::Schema {
                    column: x.name.clone(),
                    message: "column missing from the other dataset".into(),
                })
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}

/// Header plus string fields, before any typing.
#[derive(Clone, Debug)]
pub struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// 1-based file line of each data row.
    lines: Vec<u64>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyInput("CSV input is empty".into()));
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(Error::Csv {
                    line,
                    column: None,
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            if let Some((i, _)) = record.iter().enumerate().find(|(_, f)| f.is_empty()) {
                return Err(Error::Csv {
                    line,
                    column: Some(header[i].clone()),
                    message: "missing value".into(),
                });
            }
            rows.push(record.iter().map(str::to_owned).collect());
            lines.push(line);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput("CSV input has a header but no rows".into()));
        }
        Ok(RawTable { header, rows, lines })
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Types the fields against `schema`. Category lists are rebuilt from
    /// the labels this table actually contains.
    pub fn into_dataset(self, schema: &[(String, ColumnKind)]) -> Result<TabularDataset> {
        if schema.len() != self.header.len() {
            return Err(Error::Schema {
                column: self.header.first().cloned().unwrap_or_default(),
                message: format!("schema has {} columns, file has {}", schema.len(), self.header.len()),
            });
        }
        for ((name, _), h) in schema.iter().zip(&self.header) {
            if name != h {
                return Err(Error::Schema {
                    column: h.clone(),
                    message: format!("expected column '{name}'"),
                });
            }
        }
        let mut categories: Vec<Vec<String>> = vec![Vec::new(); schema.len()];
        let mut seen: Vec<HashMap<String, ()>> = vec![HashMap::new(); schema.len()];
        let mut rows = Vec::with_capacity(self.rows.len());
        for (fields, line) in self.rows.into_iter().zip(self.lines) {
            let mut row = Vec::with_capacity(fields.len());
            for (j, field) in fields.into_iter().enumerate() {
                let (name, kind) = &schema[j];
                match kind {
                    ColumnKind::Numeric => match parse_finite(&field) {
                        Some(x) => row.push(Value::Numeric(x)),
                        None => {
                            return Err(Error::Csv {
                                line,
                                column: Some(name.clone()),
                                message: format!("cannot parse '{field}' as a finite number"),
                            })
                        }
                    },
                    ColumnKind::Categorical => {
                        if seen[j].insert(field.clone(), ()).is_none() {
                            categories[j].push(field.clone());
                        }
                        row.push(Value::Categorical(field));
                    }
                }
            }
            rows.push(row);
        }
        let schema = schema
            .iter()
            .zip(categories)
            .map(|((name, kind), cats)| match kind {
                ColumnKind::Numeric => Ok(ColumnSchema::numeric(name.clone())),
                ColumnKind::Categorical => ColumnSchema::categorical(name.clone(), cats),
            })
            .collect::<Result<Vec<_>>>()?;
        TabularDataset::new(schema, rows, Role::Unlabeled)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Csv {
        line,
        column: None,
        message: e.to_string(),
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// A column is numeric iff every value in every table parses as a finite
/// real. All tables must share the same header.
pub fn infer_schema(tables: &[&RawTable]) -> Result<Vec<(String, ColumnKind)>> {
    let first = tables
        .first()
        .ok_or_else(|| Error::EmptyInput("no tables to infer a schema from".into()))?;
    for t in &tables[1..] {
        if t.header != first.header {
            let col = first
                .header
                .iter()
                .zip(&t.header)
                .find(|(a, b)| a != b)
                .map(|(a, _)| a.clone())
                .unwrap_or_else(|| first.header.last().cloned().unwrap_or_default());
            return Err(Error::Schema {
                column: col,
                message: "headers differ between input files".into(),
            });
        }
    }
    Ok(first
        .header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let numeric = tables
                .iter()
                .all(|t| t.rows.iter().all(|r| parse_finite(&r[j]).is_some()));
            let kind = if numeric {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            };
            (name.clone(), kind)
        })
        .collect())
}

/// Load one CSV file. Without a hint the schema is inferred from this file
/// alone; the result has role [`Role::Unlabeled`].
pub fn load_csv(path: &Path, schema_hint: Option<&[(String, ColumnKind)]>) -> Result<TabularDataset> {
    let raw = RawTable::read(path)?;
    let schema = match schema_hint {
        Some(h) => h.to_vec(),
        None => infer_schema(&[&raw])?,
    };
    raw.into_dataset(&schema)
        .map_err(|e| e.context(path.display().to_string()))
}

/// Load several CSV files that must share one schema, inferring column
/// kinds jointly so a column is typed the same way in every file.
pub fn load_csv_group(paths: &[&Path]) -> Result<Vec<TabularDataset>> {
    let raws = paths.iter().map(|p| RawTable::read(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&RawTable> = raws.iter().collect();
    let schema = infer_schema(&refs)?;
    raws.into_iter()
        .zip(paths)
        .map(|(raw, p)| {
            raw.into_dataset(&schema)
                .map_err(|e| e.context(p.display().to_string()))
        })
        .collect()
}

/// Seeded equal three-way split into (train, holdout, reference). Sizes are
/// `n/3`, `n/3` and the remainder.
pub fn three_way_split(data: &TabularDataset, seed: u64) -> Result<(TabularDataset, TabularDataset, TabularDataset)> {
    let n = data.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "three-way split needs at least 3 rows, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let third = n / 3;
    Ok((
        data.select(&perm[..third], Role::Train)?,
        data.select(&perm[third..2 * third], Role::Holdout)?,
        data.select(&perm[2 * third..], Role::Reference)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
enum EncodedKind {
    Numeric { mean: f64, sd: f64 },
    Categorical { categories: Vec<String> },
}

/// Fitted per-column transformation: z-scores for numeric columns,
/// unweighted one-hot blocks for categorical columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    names: Vec<String>,
    columns: Vec<EncodedKind>,
    lookups: Vec<HashMap<String, usize>>,
    fitted_on: String,
}

/// Where an encoded dimension comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EncodedColumn {
    pub column: usize,
    pub name: String,
    pub category: Option<String>,
}

impl Encoder {
    /// Fit on the concatenation of `pool`. Statistics use the population
    /// standard deviation; categories are the union of observed labels in
    /// order of first appearance.
    pub fn fit(pool: &[&TabularDataset]) -> Result<Self> {
        let first = pool
            .first()
            .ok_or_else(|| Error::EmptyInput("encoder pool is empty".into()))?;
        for d in &pool[1..] {
            first.check_same_schema(d)?;
        }
        let mut columns = Vec::with_capacity(first.schema.len());
        let mut lookups = Vec::with_capacity(first.schema.len());
        for (j, col) in first.schema.iter().enumerate() {
            match col.kind {
                ColumnKind::Numeric => {
                    let values: Vec<f64> = pool
                        .iter()
                        .flat_map(|d| d.rows.iter())
                        .map(|r| match r[j] {
                            Value::Numeric(x) => x,
                            Value::Categorical(_) => unreachable!("validated dataset"),
                        })
                        .collect();
                    let (mean, sd) = mean_and_population_sd(&values);
                    columns.push(EncodedKind::Numeric {
                        mean,
                        sd: sd.max(MIN_SD),
                    });
                    lookups.push(HashMap::new());
                }
                ColumnKind::Categorical => {
                    let mut categories = Vec::new();
                    let mut lookup = HashMap::new();
                    for row in pool.iter().flat_map(|d| d.rows.iter()) {
                        if let Value::Categorical(s) = &row[j] {
                            if !lookup.contains_key(s) {
                                lookup.insert(s.clone(), categories.len());
                                categories.push(s.clone());
                            }
                        }
                    }
                    columns.push(EncodedKind::Categorical { categories });
                    lookups.push(lookup);
                }
            }
        }
        let fitted_on = pool
            .iter()
            .map(|d| format!("{:?}({})", d.role, d.len()).to_lowercase())
            .collect::<Vec<_>>()
            .join(" + ");
        Ok(Encoder {
            names: first.schema.iter().map(|c| c.name.clone()).collect(),
            columns,
            lookups,
            fitted_on,
        })
    }

    /// Encoded dimension: numeric columns plus all category counts.
    pub fn dim(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                EncodedKind::Numeric { .. } => 1,
                EncodedKind::Categorical { categories } => categories.len(),
            })
            .sum()
    }

    pub fn fitted_on(&self) -> &str {
        &self.fitted_on
    }

    /// `(mean, sd)` of a numeric column, `None` for categorical ones.
    pub fn numeric_stats(&self, column: usize) -> Option<(f64, f64)> {
        match self.columns.get(column)? {
            EncodedKind::Numeric { mean, sd } => Some((*mean, *sd)),
            EncodedKind::Categorical { .. } => None,
        }
    }

    pub fn categories(&self, column: usize) -> Option<&[String]> {
        match self.columns.get(column)? {
            EncodedKind::Numeric { .. } => None,
            EncodedKind::Categorical { categories } => Some(categories),
        }
    }

    pub fn column_map(&self) -> Vec<EncodedColumn> {
        let mut out = Vec::with_capacity(self.dim());
        for (j, (name, col)) in self.names.iter().zip(&self.columns).enumerate() {
            match col {
                EncodedKind::Numeric { .. } => out.push(EncodedColumn {
                    column: j,
                    name: name.clone(),
                    category: None,
                }),
                EncodedKind::Categorical { categories } => out.extend(categories.iter().map(|c| EncodedColumn {
                    column: j,
                    name: name.clone(),
                    category: Some(c.clone()),
                })),
            }
        }
        out
    }

    pub fn encode(&self, data: &TabularDataset) -> Result<EncodedMatrix> {
        if data.schema.len() != self.names.len() || data.schema.iter().zip(&self.names).any(|(c, n)| &c.name != n) {
            let col = data
                .schema
                .iter()
                .zip(&self.names)
                .find(|(c, n)| &c.name != *n)
                .map(|(c, _)| c.name.clone())
                .unwrap_or_default();
            return Err(Error::Schema {
                column: col,
                message: "dataset does not match the encoder's schema".into(),
            });
        }
        let d = self.dim();
        let mut values = vec![0.0; data.len() * d];
        for (i, row) in data.rows.iter().enumerate() {
            let out = &mut values[i * d..(i + 1) * d];
            let mut offset = 0;
            for (j, (col, v)) in self.columns.iter().zip(row).enumerate() {
                match (col, v) {
                    (EncodedKind::Numeric { mean, sd }, Value::Numeric(x)) => {
                        out[offset] = (x - mean) / sd;
                        offset += 1;
                    }
                    (EncodedKind::Categorical { categories }, Value::Categorical(s)) => {
                        let k = *self.lookups[j].get(s).ok_or_else(|| Error::UnseenCategory {
                            row: i,
                            column: self.names[j].clone(),
                            value: s.clone(),
                        })?;
                        out[offset + k] = 1.0;
                        offset += categories.len();
                    }
                    _ => {
                        return Err(Error::Schema {
                            column: self.names[j].clone(),
                            message: "column kind differs from the encoder's".into(),
                        })
                    }
                }
            }
        }
        Ok(EncodedMatrix {
            nrows: data.len(),
            ncols: d,
            values,
            sources: vec![data.role; data.len()],
            column_map: self.column_map(),
        })
    }
}

/// Dense row-major matrix of encoded records.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
    sources: Vec<Role>,
    column_map: Vec<EncodedColumn>,
}

impl EncodedMatrix {
    /// Build from explicit rows, all tagged `role`. Rows must be non-ragged
    /// and finite. An empty row list needs the dimension from `ncols`.
    pub fn from_rows(rows: &[Vec<f64>], ncols: usize, role: Role) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Dimension {
                    expected: ncols,
                    actual: r.len(),
                });
            }
            if let Some(x) = r.iter().find(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("row {i} contains non-finite value {x}")));
            }
            values.extend_from_slice(r);
        }
        Ok(EncodedMatrix {
            nrows: rows.len(),
            ncols,
            values,
            sources: vec![role; rows.len()],
            column_map: (0..ncols)
                .map(|j| EncodedColumn {
                    column: j,
                    name: format!("x{j}"),
                    category: None,
                })
                .collect(),
        })
    }

    /// Convenience for 1-D point sets.
    pub fn from_scalars(xs: &[f64], role: Role) -> Result<Self> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Self::from_rows(&rows, 1, role)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.nrows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.nrows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sources(&self) -> &[Role] {
        &self.sources
    }

    pub fn column_map(&self) -> &[EncodedColumn] {
        &self.column_map
    }

    /// Stack matrices of equal width, keeping each row's source tag.
    pub fn vstack(parts: &[&EncodedMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::EmptyInput("nothing to stack".into()))?;
        let mut out = EncodedMatrix {
            nrows: 0,
            ncols: first.ncols,
            values: Vec::new(),
            sources: Vec::new(),
            column_map: first.column_map.clone(),
        };
        for p in parts {
            if p.ncols != out.ncols {
                return Err(Error::Dimension {
                    expected: out.ncols,
                    actual: p.ncols,
                });
            }
            out.values.extend_from_slice(&p.values);
            out.sources.extend_from_slice(&p.sources);
            out.nrows += p.nrows;
        }
        Ok(out)
    }

    /// Rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.ncols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        EncodedMatrix {
            nrows: indices.len(),
            ncols: self.ncols,
            values,
            sources: indices.iter().map(|&i| self.sources[i]).collect(),
            column_map: self.column_map.clone(),
        }
    }

    /// Every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}
