//! Fixtures shared by the benchmarks under `benches/`.

use dpi_audit::simlab::OracleDistribution;
use dpi_audit::{EncodedMatrix, Role, Value};

/// `n` standard-Gaussian rows in `d` dimensions.
pub fn gaussian(n: usize, d: usize, seed: u64) -> EncodedMatrix {
    let data = OracleDistribution::standard_gaussian(d)
        .sample(n, seed)
        .expect("valid oracle");
    let rows: Vec<Vec<f64>> = data
        .rows()
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| match v {
                    Value::Numeric(x) => *x,
                    Value::Categorical(_) => unreachable!("numeric oracle"),
                })
                .collect()
        })
        .collect();
    EncodedMatrix::from_rows(&rows, d, Role::Unlabeled).expect("rectangular rows")
}
