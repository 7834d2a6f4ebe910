//! Turns raw transaction logs into fixed-width yearly customer profiles.
//!
//! Every (transaction class, direction) pair contributes a five-measure block
//! `min, max, avg, cnt, sum` over the customer's transaction amounts for the
//! profiled year; customers with no activity in a block get an all-zero
//! block. Profiles are standardized column-wise (z-score, population standard
//! deviation) before any downstream reduction or clustering.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};
use thiserror::Error;

use crate::kv::{self, KvError};
use crate::linalg::Matrix;

/// Columns a standard-deviation this far below the column scale count as
/// constant and standardize to zero instead of amplifying rounding noise.
const CONSTANT_COLUMN_REL_TOL: f64 = 1e-12;

pub const TRANSACTION_HEADER: [&str; 5] = [
    "customer_id",
    "timestamp",
    "txn_class",
    "direction",
    "amount",
];

#[derive(Debug, Error)]
pub enum ProfilingError {
    #[error("failed to read transaction input: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed transaction input at row {row}: {detail}")]
    MalformedRow { row: u64, detail: String },
    #[error("bad header: expected {expected:?}, got {got:?}")]
    BadHeader { expected: String, got: String },
    #[error("negative amount at row {row}: {amount}")]
    NegativeAmount { row: u64, amount: f64 },
    #[error("unknown txn_class {class:?} at row {row}")]
    UnknownClassAtRow { row: u64, class: String },
    #[error("unknown txn_class {class:?}")]
    UnknownClass { class: String },
    #[error("bad {field} {value:?} at row {row}")]
    BadField {
        row: u64,
        field: &'static str,
        value: String,
    },
    #[error(
        "transaction for customer {customer:?} dated {timestamp} falls outside profile year {year}"
    )]
    OutsideYear {
        customer: String,
        timestamp: String,
        year: i32,
    },
    #[error("record for customer {customer:?} has invalid amount {amount}")]
    InvalidAmount { customer: String, amount: f64 },
    #[error("no transaction records and no customer roster: nothing to profile")]
    NothingToProfile,
    #[error("schema must list at least one transaction class")]
    EmptyClasses,
    #[error("schema class {class:?} is invalid: {reason}")]
    BadClass { class: String, reason: String },
    #[error("schema file: {0}")]
    SchemaKv(#[from] KvError),
    #[error("schema file is missing required key {key:?}")]
    SchemaMissingKey { key: &'static str },
    #[error("schema file has bad value for {key:?}: {value:?}")]
    SchemaBadValue { key: &'static str, value: String },
    #[error("cannot standardize an empty matrix")]
    EmptyMatrix,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
}

/// Direction of money movement relative to the profiled account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Credit,
    Debit,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Credit, Direction::Debit];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Credit => "credit",
            Direction::Debit => "debit",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s.eq_ignore_ascii_case("credit") {
            Ok(Direction::Credit)
        } else if s.eq_ignore_ascii_case("debit") {
            Ok(Direction::Debit)
        } else {
            Err(())
        }
    }
}

/// One parsed transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub customer_id: String,
    pub timestamp: DateTime<Utc>,
    pub txn_class: String,
    pub direction: Direction,
    pub amount: f64,
}

/// The profile layout: which transaction classes exist and which calendar
/// year is being profiled. Directions and measures are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSchema {
    classes: Vec<String>,
    year: i32,
}

/// Per-block aggregate measures, in feature order.
pub const MEASURES: [&str; 5] = ["min", "max", "avg", "cnt", "sum"];

impl ProfileSchema {
    pub fn new(classes: Vec<String>, year: i32) -> Result<Self, ProfilingError> {
        if classes.is_empty() {
            return Err(ProfilingError::EmptyClasses);
        }
        for (i, class) in classes.iter().enumerate() {
            if class.is_empty() {
                return Err(ProfilingError::BadClass {
                    class: class.clone(),
                    reason: "empty name".into(),
                });
            }
            if class.contains(',') || class.chars().any(char::is_whitespace) {
                return Err(ProfilingError::BadClass {
                    class: class.clone(),
                    reason: "must not contain commas or whitespace".into(),
                });
            }
            if classes[..i].contains(class) {
                return Err(ProfilingError::BadClass {
                    class: class.clone(),
                    reason: "duplicate".into(),
                });
            }
        }
        Ok(ProfileSchema { classes, year })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// Number of profile features: classes x directions x measures.
    pub fn n_features(&self) -> usize {
        self.classes.len() * Direction::ALL.len() * MEASURES.len()
    }

    /// Feature names in column order: classes outermost, then direction,
    /// then measure, e.g. `wire_credit_min`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_features());
        for class in &self.classes {
            for dir in Direction::ALL {
                for measure in MEASURES {
                    names.push(format!("{class}_{dir}_{measure}"));
                }
            }
        }
        names
    }

    /// Parses the plain-text `key = value` schema format:
    ///
    /// ```text
    /// classes = wire,cash,check
    /// directions = credit,debit   # optional, fixed anyway
    /// year = 2022
    /// ```
    pub fn from_kv_text(text: &str) -> Result<Self, ProfilingError> {
        let pairs = kv::parse_kv(text)?;
        let mut classes: Option<Vec<String>> = None;
        let mut year: Option<i32> = None;
        for (key, value) in &pairs {
            match key.as_str() {
                "classes" => classes = Some(kv::split_list(value)),
                "directions" => {
                    let dirs = kv::split_list(value);
                    if dirs != ["credit", "debit"] {
                        return Err(ProfilingError::SchemaBadValue {
                            key: "directions",
                            value: value.clone(),
                        });
                    }
                }
                "year" => {
                    year = Some(value.parse().map_err(|_| ProfilingError::SchemaBadValue {
                        key: "year",
                        value: value.clone(),
                    })?)
                }
                _ => {
                    return Err(ProfilingError::SchemaBadValue {
                        key: "unknown key",
                        value: key.clone(),
                    })
                }
            }
        }
        let classes = classes.ok_or(ProfilingError::SchemaMissingKey { key: "classes" })?;
        let year = year.ok_or(ProfilingError::SchemaMissingKey { key: "year" })?;
        ProfileSchema::new(classes, year)
    }

    pub fn from_file(path: &Path) -> Result<Self, ProfilingError> {
        let text = std::fs::read_to_string(path)?;
        ProfileSchema::from_kv_text(&text)
    }

    pub fn to_kv_text(&self) -> String {
        format!(
            "classes = {}\ndirections = credit,debit\nyear = {}\n",
            self.classes.join(","),
            self.year
        )
    }
}

impl Default for ProfileSchema {
    /// Eight transaction classes x two directions x five measures = 80
    /// features, profiling calendar year 2022.
    fn default() -> Self {
        let classes = [
            "wire", "cash", "check", "ach", "card", "atm", "fee", "transfer",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        ProfileSchema::new(classes, 2022).expect("default schema is valid")
    }
}

/// Customer rows (sorted by id), named feature columns, and the profile
/// values themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatrix {
    pub customer_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub values: Matrix,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    if let Ok(ndt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(Utc.from_utc_datetime(&ndt));
    }
    if let Ok(ndt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(Utc.from_utc_datetime(&ndt));
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0)?));
    }
    None
}

/// Parses the transaction CSV format
/// `customer_id,timestamp,txn_class,direction,amount` (ISO-8601 timestamps,
/// UTC assumed when no offset is given). Errors carry 1-based row numbers
/// counting the header as row 1. Transaction classes are validated against
/// `schema`; the profiled year is not enforced here, [`build_profiles`] does
/// that.
pub fn parse_transactions<R: Read>(
    reader: R,
    schema: &ProfileSchema,
) -> Result<Vec<TransactionRecord>, ProfilingError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| ProfilingError::MalformedRow {
            row: 1,
            detail: e.to_string(),
        })?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != TRANSACTION_HEADER {
        return Err(ProfilingError::BadHeader {
            expected: TRANSACTION_HEADER.join(","),
            got: got.join(","),
        });
    }

    let mut records = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let row = e
                .position()
                .map(|p| p.line())
                .unwrap_or(records.len() as u64 + 2);
            ProfilingError::MalformedRow {
                row,
                detail: e.to_string(),
            }
        })?;
        let row = record
            .position()
            .map(|p| p.line())
            .unwrap_or(records.len() as u64 + 2);
        if record.len() != 5 {
            return Err(ProfilingError::MalformedRow {
                row,
                detail: format!("expected 5 fields, got {}", record.len()),
            });
        }
        let customer_id = record[0].to_string();
        if customer_id.is_empty() {
            return Err(ProfilingError::BadField {
                row,
                field: "customer_id",
                value: String::new(),
            });
        }
        let timestamp = parse_timestamp(&record[1]).ok_or_else(|| ProfilingError::BadField {
            row,
            field: "timestamp",
            value: record[1].to_string(),
        })?;
        let txn_class = record[2].to_string();
        if schema.class_index(&txn_class).is_none() {
            return Err(ProfilingError::UnknownClassAtRow {
                row,
                class: txn_class,
            });
        }
        let direction = Direction::from_str(&record[3]).map_err(|_| ProfilingError::BadField {
            row,
            field: "direction",
            value: record[3].to_string(),
        })?;
        let amount: f64 = record[4].parse().map_err(|_| ProfilingError::BadField {
            row,
            field: "amount",
            value: record[4].to_string(),
        })?;
        if !amount.is_finite() {
            return Err(ProfilingError::BadField {
                row,
                field: "amount",
                value: record[4].to_string(),
            });
        }
        if amount < 0.0 {
            return Err(ProfilingError::NegativeAmount { row, amount });
        }
        records.push(TransactionRecord {
            customer_id,
            timestamp,
            txn_class,
            direction,
            amount,
        });
    }
    Ok(records)
}

/// Amounts are collected and folded in sorted order so the profile is
/// bit-identical under any permutation of the input records (float addition
/// is not associative).
#[derive(Clone, Default)]
struct BlockAgg {
    amounts: Vec<f64>,
}

impl BlockAgg {
    fn add(&mut self, amount: f64) {
        self.amounts.push(amount);
    }

    /// Five measures in column order; an untouched block is all zeros.
    fn measures(&mut self) -> [f64; 5] {
        if self.amounts.is_empty() {
            return [0.0; 5];
        }
        self.amounts.sort_by(f64::total_cmp);
        let cnt = self.amounts.len() as f64;
        let sum: f64 = self.amounts.iter().sum();
        [
            self.amounts[0],
            *self.amounts.last().unwrap(),
            sum / cnt,
            cnt,
            sum,
        ]
    }
}

/// Aggregates transactions into one profile row per customer, sorted
/// lexicographically by customer id.
///
/// Every record must fall in `schema`'s year and use a schema class. An
/// optional roster adds customers that may have no transactions at all (their
/// rows are all zeros); profiled customers are the union of roster ids and
/// ids seen in `records`.
pub fn build_profiles(
    records: &[TransactionRecord],
    schema: &ProfileSchema,
    roster: Option<&[String]>,
) -> Result<ProfileMatrix, ProfilingError> {
    let n_blocks = schema.classes().len() * Direction::ALL.len();
    let mut per_customer: BTreeMap<String, Vec<BlockAgg>> = BTreeMap::new();
    if let Some(roster) = roster {
        for id in roster {
            per_customer
                .entry(id.clone())
                .or_insert_with(|| vec![BlockAgg::default(); n_blocks]);
        }
    }
    for rec in records {
        if rec.timestamp.year() != schema.year() {
            return Err(ProfilingError::OutsideYear {
                customer: rec.customer_id.clone(),
                timestamp: rec.timestamp.to_rfc3339(),
                year: schema.year(),
            });
        }
        let class_idx =
            schema
                .class_index(&rec.txn_class)
                .ok_or_else(|| ProfilingError::UnknownClass {
                    class: rec.txn_class.clone(),
                })?;
        if !rec.amount.is_finite() || rec.amount < 0.0 {
            return Err(ProfilingError::InvalidAmount {
                customer: rec.customer_id.clone(),
                amount: rec.amount,
            });
        }
        let dir_idx = match rec.direction {
            Direction::Credit => 0,
            Direction::Debit => 1,
        };
        let block = class_idx * Direction::ALL.len() + dir_idx;
        per_customer
            .entry(rec.customer_id.clone())
            .or_insert_with(|| vec![BlockAgg::default(); n_blocks])[block]
            .add(rec.amount);
    }
    if per_customer.is_empty() {
        return Err(ProfilingError::NothingToProfile);
    }

    let n = per_customer.len();
    let d = schema.n_features();
    let mut customer_ids = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * d);
    for (id, mut blocks) in per_customer {
        customer_ids.push(id);
        for agg in &mut blocks {
            data.extend_from_slice(&agg.measures());
        }
    }
    let values = Matrix::from_vec(n, d, data).expect("profile dimensions are consistent");
    Ok(ProfileMatrix {
        customer_ids,
        feature_names: schema.feature_names(),
        values,
    })
}

/// Column-wise z-scoring of a raw matrix: subtract the column mean, divide by
/// the population standard deviation. Constant columns become all-zero
/// instead of dividing by (near-)zero. Returns the standardized matrix along
/// with the per-column means and raw standard deviations.
pub fn standardize_matrix(x: &Matrix) -> Result<(Matrix, Vec<f64>, Vec<f64>), ProfilingError> {
    let n = x.rows();
    let d = x.cols();
    if n == 0 || d == 0 {
        return Err(ProfilingError::EmptyMatrix);
    }
    if !x.is_finite() {
        return Err(ProfilingError::NonFinite);
    }
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let mut sum = 0.0;
        for i in 0..n {
            sum += x[(i, j)];
        }
        means[j] = sum / n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let dev = x[(i, j)] - means[j];
            var += dev * dev;
        }
        stds[j] = (var / n as f64).sqrt();
    }
    let mut out = Matrix::zeros(n, d);
    for j in 0..d {
        let scale = means[j].abs().max(1.0);
        if stds[j] <= CONSTANT_COLUMN_REL_TOL * scale {
            continue; // constant column: stays zero
        }
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - means[j]) / stds[j];
        }
    }
    Ok((out, means, stds))
}

/// [`standardize_matrix`] applied to a profile matrix's values.
pub fn standardize(x: &ProfileMatrix) -> Result<(Matrix, Vec<f64>, Vec<f64>), ProfilingError> {
    standardize_matrix(&x.values)
}
