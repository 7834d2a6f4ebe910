//! File formats shared by the library and the CLI: matrices keyed by
//! customer id, label assignments, dendrograms, transaction logs, and
//! fitted-model audit dumps.
//!
//! All floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces values bit-for-bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::cluster::Dendrogram;
use crate::drt::{ReducedEmbedding, ReducerModel};
use crate::linalg::Matrix;
use crate::profiling::{TransactionRecord, TRANSACTION_HEADER};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input at line {line}: {detail}")]
    Malformed { line: u64, detail: String },
    #[error("file has no data rows")]
    Empty,
}

fn malformed(line: u64, detail: impl Into<String>) -> IoError {
    IoError::Malformed {
        line,
        detail: detail.into(),
    }
}

/// Writes `customer_id,<columns...>` with one row per id.
pub fn write_matrix_csv(
    path: &Path,
    ids: &[String],
    columns: &[String],
    values: &Matrix,
) -> Result<(), IoError> {
    assert_eq!(ids.len(), values.rows(), "id count must match matrix rows");
    assert_eq!(
        columns.len(),
        values.cols(),
        "column names must match matrix width"
    );
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["customer_id".to_string()];
    header.extend_from_slice(columns);
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(columns.len() + 1);
    for (i, id) in ids.iter().enumerate() {
        row.clear();
        row.push(id.clone());
        row.extend(values.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix_csv`]: returns ids, column
/// names, and the values. Every entry must parse as a finite float.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Matrix), IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "customer_id" {
        return Err(malformed(
            1,
            format!(
                "expected header starting with customer_id and at least one value column, got '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, got {}", header.len(), record.len()),
            ));
        }
        ids.push(record[0].to_string());
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                malformed(
                    line,
                    format!("column '{}': not a number: '{field}'", columns[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(malformed(
                    line,
                    format!("column '{}': non-finite value '{field}'", columns[j]),
                ));
            }
            data.push(v);
        }
    }
    if ids.is_empty() {
        return Err(IoError::Empty);
    }
    let values = Matrix::from_vec(ids.len(), columns.len(), data)
        .expect("row/column bookkeeping is consistent by construction");
    Ok((ids, columns, values))
}

fn write_id_value_csv(
    path: &Path,
    value_column: &str,
    ids: &[String],
    values: &[usize],
) -> Result<(), IoError> {
    assert_eq!(ids.len(), values.len(), "id count must match value count");
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["customer_id", value_column])?;
    for (id, v) in ids.iter().zip(values) {
        w.write_record([id.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `customer_id,label` rows for a cluster assignment.
pub fn write_labels_csv(path: &Path, ids: &[String], labels: &[usize]) -> Result<(), IoError> {
    write_id_value_csv(path, "label", ids, labels)
}

/// Writes `customer_id,group` rows for synthetic ground truth.
pub fn write_groups_csv(path: &Path, ids: &[String], groups: &[usize]) -> Result<(), IoError> {
    write_id_value_csv(path, "group", ids, groups)
}

/// Reads a two-column id/integer file produced by [`write_labels_csv`] or
/// [`write_groups_csv`] (the value column may carry either name).
pub fn read_labels_csv(path: &Path) -> Result<(Vec<String>, Vec<usize>), IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "customer_id" {
        return Err(malformed(
            1,
            format!(
                "expected header 'customer_id,<label column>', got '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(malformed(
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        ids.push(record[0].to_string());
        let v: usize = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("not a label: '{}'", &record[1])))?;
        labels.push(v);
    }
    if ids.is_empty() {
        return Err(IoError::Empty);
    }
    Ok((ids, labels))
}

/// Writes one merge per line: `left,right,height,size`.
pub fn write_dendrogram_csv(path: &Path, dendrogram: &Dendrogram) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "left,right,height,size")?;
    for m in &dendrogram.merges {
        writeln!(w, "{},{},{},{}", m.left, m.right, m.height, m.size)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the transaction log in the exact shape `parse_transactions`
/// accepts. Timestamps are second-resolution UTC.
pub fn write_transactions_csv(path: &Path, records: &[TransactionRecord]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRANSACTION_HEADER)?;
    for r in records {
        w.write_record([
            r.customer_id.as_str(),
            &r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.txn_class.as_str(),
            r.direction.as_str(),
            &format!("{:.2}", r.amount),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix_block<W: Write>(w: &mut W, name: &str, m: &Matrix) -> Result<(), IoError> {
    writeln!(w, "matrix {name} {} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_vector_line<W: Write>(w: &mut W, name: &str, v: &[f64]) -> Result<(), IoError> {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    writeln!(w, "{name} = {}", parts.join(","))?;
    Ok(())
}

/// Audit dump of a fitted reducer: `key = value` lines plus labeled matrix
/// blocks. Write-only by design; the embedding CSV is the machine format.
pub fn write_model_text(path: &Path, embedding: &ReducedEmbedding) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method = {}", embedding.method.as_str())?;
    writeln!(w, "components = {}", embedding.values.cols())?;
    match &embedding.model {
        ReducerModel::Svd(m) => {
            write_vector_line(&mut w, "singular_values", &m.singular_values)?;
            write_matrix_block(&mut w, "components", &m.components)?;
        }
        ReducerModel::Kpca(m) => {
            writeln!(w, "sigma = {}", m.sigma)?;
            writeln!(w, "kernel_total_mean = {}", m.kernel_total_mean)?;
            write_vector_line(&mut w, "eigenvalues", &m.eigenvalues)?;
            write_vector_line(&mut w, "kernel_row_means", &m.kernel_row_means)?;
            write_matrix_block(&mut w, "alphas", &m.alphas)?;
            write_matrix_block(&mut w, "training_points", &m.training_points)?;
        }
        ReducerModel::Ica(m) => {
            writeln!(w, "iterations_used = {}", m.iterations_used)?;
            write_vector_line(&mut w, "means", &m.means)?;
            write_matrix_block(&mut w, "whitening", &m.whitening)?;
            write_matrix_block(&mut w, "demixing", &m.demixing)?;
            write_matrix_block(&mut w, "mixing", &m.mixing)?;
        }
        ReducerModel::Lpp(m) => {
            writeln!(w, "laplacian_objective = {}", m.laplacian_objective)?;
            writeln!(w, "graph_neighbors = {}", m.graph_neighbors)?;
            writeln!(w, "heat = {}", m.heat)?;
            write_matrix_block(&mut w, "projection", &m.projection)?;
        }
        ReducerModel::Identity => {
            writeln!(w, "identity = true")?;
        }
    }
    w.flush()?;
    Ok(())
}
