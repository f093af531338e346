use std::path::Path;

use dpi_audit::report::{format_float, TopCopiedRecord};
use dpi_audit::simlab::{AblationCell, ReplicationResult};
use dpi_audit::{AuditReport, Value};

use crate::error::{CliError, CliResult};

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Output {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn report_json(report: &AuditReport) -> CliResult<String> {
    report
        .to_canonical_json()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| CliError::Internal(format!("csv encoding: {e}"));
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(&row).map_err(internal)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Internal(format!("csv encoding: {e}")))
}

fn raw_value(v: &Value) -> String {
    match v {
        Value::Numeric(x) => x.to_string(),
        Value::Categorical(s) => s.clone(),
    }
}

/// One row per test point: training rows first, then holdout rows.
pub fn scores_csv(result: &ReplicationResult) -> CliResult<Vec<u8>> {
    let mut header = vec!["row_id".to_string(), "member".to_string()];
    header.extend(result.attacks.iter().map(|a| a.kind.name().to_string()));
    header.push("dpi_count_synthetic".into());
    let rows = (0..result.labels.len()).map(|i| {
        let mut row = vec![i.to_string(), u8::from(result.labels[i]).to_string()];
        row.extend(result.attacks.iter().map(|a| format_float(a.scores[i])));
        row.push(result.dpi_scores[i].count_synthetic.to_string());
        row
    });
    csv_bytes(&header, rows)
}

pub fn top_copied_csv(columns: &[String], records: &[TopCopiedRecord]) -> CliResult<Vec<u8>> {
    let mut header = vec!["train_row".to_string(), "count_synthetic".to_string()];
    header.extend(columns.iter().cloned());
    let rows = records.iter().map(|r| {
        let mut row = vec![r.train_row.to_string(), r.count_synthetic.to_string()];
        row.extend(r.values.iter().map(raw_value));
        row
    });
    csv_bytes(&header, rows)
}

pub fn projection_csv(coords: &[[f64; 2]], records: &[TopCopiedRecord]) -> CliResult<Vec<u8>> {
    let mut flagged = vec![false; coords.len()];
    for r in records {
        flagged[r.train_row] = true;
    }
    let header: Vec<String> = ["train_row", "pc1", "pc2", "top_copied"].map(String::from).to_vec();
    let rows = coords.iter().enumerate().map(|(i, c)| {
        vec![
            i.to_string(),
            format_float(c[0]),
            format_float(c[1]),
            u8::from(flagged[i]).to_string(),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn ablation_csv(cells: &[AblationCell]) -> CliResult<Vec<u8>> {
    let header: Vec<String> = ["size", "k", "metric", "attack", "auc_mean", "auc_sd"]
        .map(String::from)
        .to_vec();
    let rows = cells.iter().map(|c| {
        vec![
            c.size.to_string(),
            c.k.to_string(),
            c.metric.to_string(),
            c.attack.name().to_string(),
            format_float(c.auc.mean),
            format_float(c.auc.sd),
        ]
    });
    csv_bytes(&header, rows)
}
