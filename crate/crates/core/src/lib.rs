//! Auditing synthetic tabular data for data-copying.
//!
//! The central statistic is the data plagiarism index: for a target record,
//! take its `k` nearest neighbours in the pooled reference + synthetic
//! sample and compare how many came from each side. Records whose
//! neighbourhoods are synthetic-heavy are likely being reproduced by the
//! generator. The crate turns that statistic into a membership-inference
//! attack, runs it next to several baseline attacks, and reports privacy
//! risk together with utility metrics of the synthetic data.
//!
//! Module map:
//!
//! * [`tabular`]: CSV ingestion, schema inference, splitting, encoding.
//! * [`neighbors`]: L1/L2 metrics and exact k-NN (brute force and kd-tree).
//! * [`dpi`]: plagiarism index, the attack built on it, the Δ statistic.
//! * [`attacks`]: baseline attacks, AUCROC and score correlation.
//! * [`quality`]: MMD, marginal Wasserstein and the utility probe.
//! * [`dp_bound`]: ε lower bounds from attack operating points.
//! * [`simlab`]: simulated generators, the audit pipeline and ablations.
//! * [`report`]: serialisable audit reports with canonical JSON output.

pub mod attacks;
pub mod dp_bound;
pub mod dpi;
mod error;
pub mod logistic;
pub mod neighbors;
pub mod projection;
pub mod quality;
pub mod report;
pub mod simlab;
pub mod stats;
pub mod tabular;

pub use attacks::{AttackScores, AucResult};
pub use dpi::{DpiConfig, DpiScore, ThresholdRule};
pub use error::{Error, Result};
pub use neighbors::{Backend, Metric, NeighborSet, PooledIndex};
pub use report::AuditReport;
pub use tabular::{ColumnKind, ColumnSchema, EncodedMatrix, Encoder, Role, TabularDataset, Value};
