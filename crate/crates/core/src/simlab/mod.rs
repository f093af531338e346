//! Controlled simulations and the experiment harness.
//!
//! Real generative models are replaced by two simulated generators: one
//! that samples the true distribution and ignores its training data, and
//! one that emits noisy copies of training rows. Together they give a null
//! case and a controllable data-copying case for every attack.

mod ablation;
mod generator;
mod harness;
mod oracle;

pub use ablation::{run_ablation, AblationCell, AblationSource};
pub use generator::{generate, GeneratorKind, SimulatedGenerator};
pub use harness::{
    aggregate, run_audit, run_simulation, simulate_inputs, AttackOutcome, AuditConfig, AuditInputs, ExperimentPlan,
    ReplicationResult, Scenario,
};
pub use oracle::{CategoricalSpec, GaussianComponent, OracleDistribution};

/// Sample `n` rows; shorthand for [`OracleDistribution::sample`].
pub fn sample_oracle(dist: &OracleDistribution, n: usize, seed: u64) -> crate::Result<crate::TabularDataset> {
    dist.sample(n, seed)
}
