//! Audit report types and their canonical JSON form.
//!
//! Canonical JSON means sorted object keys, floats rounded to six
//! significant digits and pretty printing, so identical inputs and seeds
//! produce identical bytes and a parse/serialise cycle is the identity.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::stats::{round_sig6, MeanSd};
use crate::tabular::{ColumnKind, Value};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonVariant {
    pub alpha: MeanSd,
    pub beta: MeanSd,
    /// `ln max{α/(1-β), β/(1-α)}`, possibly negative.
    pub epsilon_raw: MeanSd,
    /// Raw bound clamped at 0 per replication.
    pub epsilon_display: MeanSd,
    /// True when clipping moved a rate in any replication.
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    /// β read as the false-negative rate among members.
    pub beta_false_negative_rate: EpsilonVariant,
    /// β read as the false-positive rate among nonmembers.
    pub beta_false_positive_rate: EpsilonVariant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub name: String,
    pub auc: MeanSd,
    pub auc_per_replication: Vec<f64>,
    /// Decision threshold (median of test scores) used for ε.
    pub threshold: MeanSd,
    pub epsilon: EpsilonReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub a: String,
    pub b: String,
    /// Absent when either score vector was constant in some replication.
    pub pearson: Option<MeanSd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopCopiedRecord {
    pub train_row: usize,
    pub count_synthetic: usize,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpiSummary {
    pub k: usize,
    pub metric: String,
    /// Threshold on the `count_synthetic` scale.
    pub threshold: MeanSd,
    /// Test points per `count_synthetic` value `0..=k`, summed over
    /// replications.
    pub histogram_members: Vec<u64>,
    pub histogram_nonmembers: Vec<u64>,
    pub member_mean_count: MeanSd,
    pub nonmember_mean_count: MeanSd,
    /// Σ synthetic / Σ reference over member neighbourhoods; absent when
    /// infinite.
    pub member_pooled_ratio: Option<MeanSd>,
    pub nonmember_pooled_ratio: Option<MeanSd>,
    pub top_percentile: f64,
    /// Replication the records below come from.
    pub top_copied_replication: usize,
    pub top_copied_columns: Vec<String>,
    pub top_copied: Vec<TopCopiedRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub min: MeanSd,
    pub median: MeanSd,
    pub max: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDistanceSummary {
    pub column: String,
    pub kind: ColumnKind,
    pub value: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub mmd: MeanSd,
    pub mmd_raw: MeanSd,
    pub mmd_bandwidth: MeanSd,
    pub wasserstein_mean: MeanSd,
    pub wasserstein_columns: Vec<ColumnDistanceSummary>,
    pub utility_auc: Option<MeanSd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub base_seed: Option<u64>,
    pub replication_seeds: Vec<u64>,
    /// Free-form description of every input (paths or simulation setup).
    pub inputs: serde_json::Map<String, Json>,
    pub config: Json,
    pub encoder_policy: String,
    pub notices: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub provenance: Provenance,
    pub replications: usize,
    pub n_members: usize,
    pub n_nonmembers: usize,
    pub attacks: Vec<AttackSummary>,
    pub correlations: Vec<CorrelationSummary>,
    pub dpi: DpiSummary,
    pub delta: DeltaSummary,
    pub quality: QualitySummary,
    pub identical_match_share: MeanSd,
    pub mc_radius: Option<MeanSd>,
}

impl AuditReport {
    pub fn attack(&self, name: &str) -> Option<&AttackSummary> {
        self.attacks.iter().find(|a| a.name == name)
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        let value =
            serde_json::to_value(self).map_err(|e| Error::invalid(format!("report serialisation failed: {e}")))?;
        canonical_json(&value)
    }
}

fn canonicalize(value: &mut Json) {
    match value {
        Json::Number(n) => {
            if n.is_f64() {
                let x = round_sig6(n.as_f64().expect("f64 number"));
                *value = serde_json::Number::from_f64(x).map_or(Json::Null, Json::Number);
            }
        }
        Json::Array(items) => items.iter_mut().for_each(canonicalize),
        Json::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Pretty-printed JSON with sorted keys and six-significant-digit floats.
pub fn canonical_json(value: &Json) -> Result<String> {
    let mut v = value.clone();
    canonicalize(&mut v);
    let mut s =
        serde_json::to_string_pretty(&v).map_err(|e| Error::invalid(format!("report serialisation failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Canonical text formatting for floats in CSV outputs.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{}", round_sig6(x))
    }
}
