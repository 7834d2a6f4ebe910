//! Internal cluster-validation indices: silhouette, Calinski-Harabasz, and
//! Davies-Bouldin, all over Euclidean distance.
//!
//! Degenerate geometry is reported instead of silently producing NaN:
//! singleton clusters score silhouette 0 and set a flag, zero within-cluster
//! scatter sends Calinski-Harabasz to `+inf` and Davies-Bouldin to exactly
//! 0.0 (both flagged), and coincident centroids make Davies-Bouldin undefined
//! (an error, downgraded to a flag by [`validate_all`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::cluster::ClusterAssignment;
use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("labels ({labels}) and observations ({rows}) disagree")]
    LengthMismatch { labels: usize, rows: usize },
    #[error("label {label} is out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("cluster {label} is empty")]
    EmptyCluster { label: usize },
    #[error("K must be at least 2, got {k}")]
    TooFewClusters { k: usize },
    #[error("K must be at most {max} for n = {n}, got {k}")]
    TooManyClusters { k: usize, n: usize, max: usize },
    #[error("clusters {a} and {b} have identical centroids; Davies-Bouldin is undefined")]
    DuplicateCentroids { a: usize, b: usize },
    #[error("input matrix is empty")]
    EmptyInput,
    #[error("input contains a non-finite entry")]
    NonFinite,
}

/// Degeneracies observed while scoring; carried alongside the scores rather
/// than poisoning them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DegeneracyFlag {
    /// Every per-cluster scatter is zero (all points sit on their centroid).
    DbZeroScatter,
    /// At least one cluster has a single member.
    SingletonPresent,
    /// Two clusters share a centroid; Davies-Bouldin is undefined.
    DuplicateCentroids,
}

impl DegeneracyFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            DegeneracyFlag::DbZeroScatter => "db_zero_scatter",
            DegeneracyFlag::SingletonPresent => "singleton_present",
            DegeneracyFlag::DuplicateCentroids => "duplicate_centroids",
        }
    }
}

impl fmt::Display for DegeneracyFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-point silhouette values and their mean.
#[derive(Debug, Clone)]
pub struct SilhouetteDetail {
    pub mean: f64,
    pub per_point: Vec<f64>,
    pub singleton_present: bool,
}

/// Calinski-Harabasz score with its between/within traces.
#[derive(Debug, Clone)]
pub struct ChDetail {
    /// `+inf` when `trace_w` is exactly zero.
    pub score: f64,
    pub trace_b: f64,
    pub trace_w: f64,
    pub zero_scatter: bool,
}

/// Davies-Bouldin score with per-cluster scatters.
#[derive(Debug, Clone)]
pub struct DbDetail {
    pub score: f64,
    /// Mean distance of each cluster's members to its centroid.
    pub scatters: Vec<f64>,
    pub zero_scatter: bool,
}

/// All three indices (or explicit absences) plus every observed degeneracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub silhouette: Option<f64>,
    /// May be `+inf` (zero within-cluster scatter).
    pub calinski_harabasz: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub flags: BTreeSet<DegeneracyFlag>,
    /// Why an absent index was skipped, keyed by index name.
    pub skipped: BTreeMap<&'static str, String>,
}

impl ValidationReport {
    /// Machine form: JSON numbers for finite scores, the string `"inf"` for
    /// +infinity (JSON has no infinity literal), `null` for skipped indices.
    pub fn to_json(&self) -> String {
        fn score(v: Option<f64>) -> String {
            match v {
                None => "null".to_string(),
                Some(x) if x.is_infinite() => "\"inf\"".to_string(),
                Some(x) => format!("{x}"),
            }
        }
        let flags: Vec<String> = self.flags.iter().map(|f| format!("\"{f}\"")).collect();
        let skipped: Vec<String> = self
            .skipped
            .iter()
            .map(|(k, v)| format!("\"{}\":\"{}\"", k, v.replace('"', "'")))
            .collect();
        format!(
            "{{\"silhouette\":{},\"calinski_harabasz\":{},\"davies_bouldin\":{},\"flags\":[{}],\"skipped\":{{{}}}}}",
            score(self.silhouette),
            score(self.calinski_harabasz),
            score(self.davies_bouldin),
            flags.join(","),
            skipped.join(",")
        )
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Structural label validation shared by all indices: length match, labels in
/// `0..k`, every cluster non-empty, finite input.
fn check_labels(x: &Matrix, assignment: &ClusterAssignment) -> Result<Vec<usize>, ValidateError> {
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(ValidateError::EmptyInput);
    }
    if !x.is_finite() {
        return Err(ValidateError::NonFinite);
    }
    if assignment.labels.len() != n {
        return Err(ValidateError::LengthMismatch {
            labels: assignment.labels.len(),
            rows: n,
        });
    }
    let k = assignment.k;
    let mut sizes = vec![0usize; k];
    for &label in &assignment.labels {
        if label >= k {
            return Err(ValidateError::LabelOutOfRange { label, k });
        }
        sizes[label] += 1;
    }
    for (label, &size) in sizes.iter().enumerate() {
        if size == 0 {
            return Err(ValidateError::EmptyCluster { label });
        }
    }
    Ok(sizes)
}

fn centroids(x: &Matrix, labels: &[usize], sizes: &[usize]) -> Matrix {
    let d = x.cols();
    let mut c = Matrix::zeros(sizes.len(), d);
    for (i, &label) in labels.iter().enumerate() {
        let row = x.row(i);
        for j in 0..d {
            c[(label, j)] += row[j];
        }
    }
    for (label, &size) in sizes.iter().enumerate() {
        for j in 0..d {
            c[(label, j)] /= size as f64;
        }
    }
    c
}

/// Mean silhouette `s(i) = (b(i) - a(i)) / max(a(i), b(i))` over all points.
///
/// `a(i)` is the mean distance to the point's own cluster (excluding itself),
/// `b(i)` the smallest mean distance to any other cluster. Singletons score 0
/// and set `singleton_present`; a point coincident with both its own and the
/// nearest foreign cluster (`max(a, b) = 0`) also scores 0. Requires
/// `2 <= K <= n - 1`.
pub fn silhouette(
    x: &Matrix,
    assignment: &ClusterAssignment,
) -> Result<SilhouetteDetail, ValidateError> {
    let sizes = check_labels(x, assignment)?;
    let n = x.rows();
    let k = assignment.k;
    if k < 2 {
        return Err(ValidateError::TooFewClusters { k });
    }
    if k > n - 1 {
        return Err(ValidateError::TooManyClusters { k, n, max: n - 1 });
    }
    let labels = &assignment.labels;
    let mut per_point = vec![0.0; n];
    let mut singleton_present = false;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] == 1 {
            singleton_present = true;
            continue; // s(i) = 0 by convention
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += euclidean(x.row(i), x.row(j));
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own {
                b = b.min(sums[c] / sizes[c] as f64);
            }
        }
        let denom = a.max(b);
        per_point[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteDetail {
        mean,
        per_point,
        singleton_present,
    })
}

/// Calinski-Harabasz: `(trace_b / trace_w) * (n - K) / (K - 1)`, where
/// `trace_w` sums squared distances to cluster centroids and `trace_b` the
/// size-weighted squared centroid-to-grand-mean distances. Zero `trace_w`
/// reports `+inf` with `zero_scatter` set. Requires `2 <= K <= n - 1`.
pub fn calinski_harabasz(
    x: &Matrix,
    assignment: &ClusterAssignment,
) -> Result<ChDetail, ValidateError> {
    let sizes = check_labels(x, assignment)?;
    let n = x.rows();
    let d = x.cols();
    let k = assignment.k;
    if k < 2 {
        return Err(ValidateError::TooFewClusters { k });
    }
    if k > n - 1 {
        return Err(ValidateError::TooManyClusters { k, n, max: n - 1 });
    }
    let means = centroids(x, &assignment.labels, &sizes);
    let mut grand = vec![0.0; d];
    for i in 0..n {
        for (g, v) in grand.iter_mut().zip(x.row(i)) {
            *g += v;
        }
    }
    for g in grand.iter_mut() {
        *g /= n as f64;
    }
    let mut trace_w = 0.0;
    for (i, &label) in assignment.labels.iter().enumerate() {
        let row = x.row(i);
        for j in 0..d {
            let dev = row[j] - means[(label, j)];
            trace_w += dev * dev;
        }
    }
    // Per-cluster terms are summed in value order, not label order, so the
    // score is bit-identical under any relabeling.
    let mut terms: Vec<f64> = sizes
        .iter()
        .enumerate()
        .map(|(label, &size)| {
            let mut t = 0.0;
            for j in 0..d {
                let dev = means[(label, j)] - grand[j];
                t += size as f64 * dev * dev;
            }
            t
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let trace_b: f64 = terms.iter().sum();
    let zero_scatter = trace_w == 0.0;
    let score = if zero_scatter {
        f64::INFINITY
    } else {
        (trace_b / trace_w) * ((n - k) as f64 / (k - 1) as f64)
    };
    Ok(ChDetail {
        score,
        trace_b,
        trace_w,
        zero_scatter,
    })
}

/// Davies-Bouldin: mean over clusters of `max_{j != i} (s_i + s_j) / d(c_i,
/// c_j)` with `s_i` the mean member-to-centroid distance. Exactly coincident
/// centroids make the ratio undefined and are an error; the score is exactly
/// 0.0 iff every scatter is zero (`zero_scatter`). Requires `2 <= K <= n`.
pub fn davies_bouldin(
    x: &Matrix,
    assignment: &ClusterAssignment,
) -> Result<DbDetail, ValidateError> {
    let sizes = check_labels(x, assignment)?;
    let n = x.rows();
    let k = assignment.k;
    if k < 2 {
        return Err(ValidateError::TooFewClusters { k });
    }
    if k > n {
        return Err(ValidateError::TooManyClusters { k, n, max: n });
    }
    let means = centroids(x, &assignment.labels, &sizes);
    let mut scatters = vec![0.0; k];
    for (i, &label) in assignment.labels.iter().enumerate() {
        scatters[label] += euclidean(x.row(i), means.row(label));
    }
    for (label, &size) in sizes.iter().enumerate() {
        scatters[label] /= size as f64;
    }
    let mut worsts = Vec::with_capacity(k);
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in 0..k {
            if a == b {
                continue;
            }
            let dist = euclidean(means.row(a), means.row(b));
            if dist == 0.0 {
                return Err(ValidateError::DuplicateCentroids {
                    a: a.min(b),
                    b: a.max(b),
                });
            }
            worst = worst.max((scatters[a] + scatters[b]) / dist);
        }
        worsts.push(worst);
    }
    // Summed in value order, not label order: see calinski_harabasz.
    worsts.sort_by(f64::total_cmp);
    let score = worsts.iter().sum::<f64>() / k as f64;
    let zero_scatter = scatters.iter().all(|s| *s == 0.0);
    Ok(DbDetail {
        score,
        scatters,
        zero_scatter,
    })
}

/// Runs all three indices, downgrading per-index precondition failures to a
/// recorded skip (and, for coincident centroids, a flag) instead of aborting.
/// Only structurally invalid labels are a hard error.
pub fn validate_all(
    x: &Matrix,
    assignment: &ClusterAssignment,
) -> Result<ValidationReport, ValidateError> {
    check_labels(x, assignment)?;
    let mut report = ValidationReport {
        silhouette: None,
        calinski_harabasz: None,
        davies_bouldin: None,
        flags: BTreeSet::new(),
        skipped: BTreeMap::new(),
    };
    match silhouette(x, assignment) {
        Ok(detail) => {
            report.silhouette = Some(detail.mean);
            if detail.singleton_present {
                report.flags.insert(DegeneracyFlag::SingletonPresent);
            }
        }
        Err(e) => {
            report.skipped.insert("silhouette", e.to_string());
        }
    }
    match calinski_harabasz(x, assignment) {
        Ok(detail) => {
            report.calinski_harabasz = Some(detail.score);
            if detail.zero_scatter {
                report.flags.insert(DegeneracyFlag::DbZeroScatter);
            }
        }
        Err(e) => {
            report.skipped.insert("calinski_harabasz", e.to_string());
        }
    }
    match davies_bouldin(x, assignment) {
        Ok(detail) => {
            report.davies_bouldin = Some(detail.score);
            if detail.zero_scatter {
                report.flags.insert(DegeneracyFlag::DbZeroScatter);
            }
        }
        Err(e) => {
            if matches!(e, ValidateError::DuplicateCentroids { .. }) {
                report.flags.insert(DegeneracyFlag::DuplicateCentroids);
            }
            report.skipped.insert("davies_bouldin", e.to_string());
        }
    }
    Ok(report)
}
