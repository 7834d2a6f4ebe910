//! Agglomerative hierarchical clustering over Euclidean inputs.
//!
//! The full merge tree is built bottom-up with the Lance-Williams recurrence
//! (single, complete, average, and Ward linkage). Everything is
//! deterministic: the globally closest pair merges first and distance ties
//! break on the lexicographically smallest `(left, right)` node-id pair.
//! Leaves are numbered `0..n-1`, internal nodes `n..2n-2` in merge order.
//!
//! A dendrogram is cut into `k` flat clusters by undoing the last `k - 1`
//! merges; labels `0..k-1` are assigned to clusters in ascending order of
//! their smallest leaf index, so equal partitions always get equal labels.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty input")]
    EmptyInput,
    #[error("input contains a non-finite entry")]
    NonFinite,
    #[error("cut requires 1 <= k <= {n} leaves, got k = {k}")]
    BadCutK { k: usize, n: usize },
    #[error("unknown linkage {0:?}; expected single, complete, average, or ward")]
    UnknownLinkage(String),
}

/// Cluster-distance update rule used by the Lance-Williams recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [
        Linkage::Single,
        Linkage::Complete,
        Linkage::Average,
        Linkage::Ward,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Linkage {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, ClusterError> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            other => Err(ClusterError::UnknownLinkage(other.to_string())),
        }
    }
}

/// One agglomeration step: nodes `left` and `right` joined at `height` into
/// a cluster of `size` leaves. `left` is always the operand containing the
/// smaller smallest-leaf index.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// The full merge tree for `n_leaves` observations (`n_leaves - 1` merges).
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

/// Flat cluster labels `0..k-1`, one per observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Builds the full dendrogram for the rows of `x`.
///
/// Base distances are Euclidean for every linkage; with Ward's sqrt-form
/// update the merge height between clusters A and B equals
/// `sqrt(2 |A| |B| / (|A| + |B|)) * ||mean(A) - mean(B)||`.
pub fn ahc_fit(x: &Matrix, linkage: Linkage) -> Result<Dendrogram, ClusterError> {
    let n = x.rows();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if !x.is_finite() {
        return Err(ClusterError::NonFinite);
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    if n == 1 {
        return Ok(Dendrogram {
            n_leaves: 1,
            linkage,
            merges,
        });
    }

    // Clusters live in fixed slots 0..n-1; a merge keeps the lower slot and
    // kills the higher one. Slot order therefore always equals
    // smallest-leaf-index order, which is what orients (left, right).
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(x.row(i), x.row(j));
            dist[i * n + j] = d;
        }
    }
    let mut alive = vec![true; n];
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];

    for step in 0..n - 1 {
        // Globally closest pair; ties on distance fall back to the smallest
        // (left, right) node-id pair.
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                let d = dist[i * n + j];
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        d < bd || (d == bd && (node_id[i], node_id[j]) < (node_id[bi], node_id[bj]))
                    }
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (d_ij, i, j) = best.expect("at least two clusters remain");
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        merges.push(Merge {
            left: node_id[i],
            right: node_id[j],
            height: d_ij,
            size: size[i] + size[j],
        });

        for k in 0..n {
            if !alive[k] || k == i || k == j {
                continue;
            }
            let d_ik = dist[i.min(k) * n + i.max(k)];
            let d_jk = dist[j.min(k) * n + j.max(k)];
            let nk = size[k] as f64;
            let updated = match linkage {
                Linkage::Single => d_ik.min(d_jk),
                Linkage::Complete => d_ik.max(d_jk),
                Linkage::Average => (ni * d_ik + nj * d_jk) / (ni + nj),
                Linkage::Ward => {
                    let t = ni + nj + nk;
                    let sq =
                        ((ni + nk) * d_ik * d_ik + (nj + nk) * d_jk * d_jk - nk * d_ij * d_ij) / t;
                    sq.max(0.0).sqrt()
                }
            };
            dist[i.min(k) * n + i.max(k)] = updated;
        }
        node_id[i] = n + step;
        size[i] += size[j];
        alive[j] = false;
    }

    Ok(Dendrogram {
        n_leaves: n,
        linkage,
        merges,
    })
}

/// Cuts the dendrogram into `k` clusters by undoing the last `k - 1` merges.
pub fn cut(d: &Dendrogram, k: usize) -> Result<ClusterAssignment, ClusterError> {
    let n = d.n_leaves;
    if k == 0 || k > n {
        return Err(ClusterError::BadCutK { k, n });
    }
    // Apply the first n - k merges; every node's root identifies its cluster.
    let mut parent: Vec<usize> = (0..n + d.merges.len()).collect();
    for (step, m) in d.merges.iter().take(n - k).enumerate() {
        parent[m.left] = n + step;
        parent[m.right] = n + step;
    }
    let root_of = |mut v: usize| {
        while parent[v] != v {
            v = parent[v];
        }
        v
    };
    let mut labels = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut label_of_root: Vec<(usize, usize)> = Vec::with_capacity(k);
    for (leaf, slot) in labels.iter_mut().enumerate() {
        let root = root_of(leaf);
        *slot = match label_of_root.iter().find(|(r, _)| *r == root) {
            Some((_, l)) => *l,
            None => {
                // Leaves are scanned in index order, so labels ascend with
                // each cluster's smallest leaf.
                let l = next;
                label_of_root.push((root, l));
                next += 1;
                l
            }
        };
    }
    debug_assert_eq!(next, k);
    Ok(ClusterAssignment { labels, k })
}
