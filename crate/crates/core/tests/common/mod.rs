//! Helpers shared by the integration suites: an adjusted Rand index, a
//! brute-force agglomerative clusterer, from-definition validation-index
//! oracles, and small data generators. Everything here is written straight
//! from definitions, independent of the library's internals, so agreement is
//! evidence rather than tautology.

#![allow(dead_code)]

use amlp_core::cluster::Linkage;
use amlp_core::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn comb2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let sum_cells: f64 = table.iter().flatten().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.iter().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.iter().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if max_index == expected {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}

/// One merge of the brute-force clusterer: (left node, right node, height,
/// merged size), node numbering identical to the library's.
pub type OracleMerge = (usize, usize, f64, usize);

fn oracle_cluster_distance(points: &[Vec<f64>], a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    match linkage {
        Linkage::Single => {
            let mut best = f64::INFINITY;
            for &i in a {
                for &j in b {
                    best = best.min(euclidean(&points[i], &points[j]));
                }
            }
            best
        }
        Linkage::Complete => {
            let mut worst = 0.0f64;
            for &i in a {
                for &j in b {
                    worst = worst.max(euclidean(&points[i], &points[j]));
                }
            }
            worst
        }
        Linkage::Average => {
            let mut sum = 0.0;
            for &i in a {
                for &j in b {
                    sum += euclidean(&points[i], &points[j]);
                }
            }
            sum / (a.len() as f64 * b.len() as f64)
        }
        Linkage::Ward => {
            let d = points[0].len();
            let centroid = |members: &[usize]| -> Vec<f64> {
                let mut c = vec![0.0; d];
                for &i in members {
                    for (cv, pv) in c.iter_mut().zip(&points[i]) {
                        *cv += pv;
                    }
                }
                for cv in c.iter_mut() {
                    *cv /= members.len() as f64;
                }
                c
            };
            let (na, nb) = (a.len() as f64, b.len() as f64);
            (2.0 * na * nb / (na + nb)).sqrt() * euclidean(&centroid(a), &centroid(b))
        }
    }
}

/// Brute-force agglomeration: every inter-cluster distance is recomputed
/// from the original points at every step (no recurrence). Ties break on the
/// lexicographically smallest node-id pair, clusters ordered by smallest
/// leaf.
pub fn ahc_oracle(points: &[Vec<f64>], linkage: Linkage) -> Vec<OracleMerge> {
    let n = points.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let d = oracle_cluster_distance(points, &clusters[a].1, &clusters[b].1, linkage);
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        d < bd
                            || (d == bd
                                && (clusters[a].0, clusters[b].0)
                                    < (clusters[bi].0, clusters[bj].0))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.expect("two clusters remain");
        let (right_id, right_members) = clusters.remove(b);
        let (left_id, left_members) = &mut clusters[a];
        merges.push((
            *left_id,
            right_id,
            d,
            left_members.len() + right_members.len(),
        ));
        left_members.extend(right_members);
        *left_id = n + step;
    }
    merges
}

pub mod oracle {
    //! Validation indices computed by the defining double loops.

    use super::euclidean;

    pub fn silhouette(x: &[Vec<f64>], labels: &[usize]) -> f64 {
        let n = x.len();
        let k = labels.iter().max().unwrap() + 1;
        let mut total = 0.0;
        for i in 0..n {
            let own = labels[i];
            let own_size = labels.iter().filter(|&&l| l == own).count();
            if own_size == 1 {
                continue;
            }
            let mean_to = |c: usize| -> f64 {
                let mut sum = 0.0;
                let mut count = 0usize;
                for j in 0..n {
                    if j != i && labels[j] == c {
                        sum += euclidean(&x[i], &x[j]);
                        count += 1;
                    }
                }
                sum / count as f64
            };
            let a = {
                let mut sum = 0.0;
                for j in 0..n {
                    if j != i && labels[j] == own {
                        sum += euclidean(&x[i], &x[j]);
                    }
                }
                sum / (own_size - 1) as f64
            };
            let b = (0..k)
                .filter(|&c| c != own && labels.contains(&c))
                .map(mean_to)
                .fold(f64::INFINITY, f64::min);
            if a.max(b) > 0.0 {
                total += (b - a) / a.max(b);
            }
        }
        total / n as f64
    }

    fn centroid(x: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
        let d = x[0].len();
        let mut c = vec![0.0; d];
        for &i in members {
            for (cv, pv) in c.iter_mut().zip(&x[i]) {
                *cv += pv;
            }
        }
        for cv in c.iter_mut() {
            *cv /= members.len() as f64;
        }
        c
    }

    pub fn calinski_harabasz(x: &[Vec<f64>], labels: &[usize]) -> f64 {
        let n = x.len();
        let k = labels.iter().max().unwrap() + 1;
        let grand = centroid(x, &(0..n).collect::<Vec<_>>());
        let mut trace_w = 0.0;
        let mut trace_b = 0.0;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let ctr = centroid(x, &members);
            for &i in &members {
                trace_w += euclidean(&x[i], &ctr).powi(2);
            }
            trace_b += members.len() as f64 * euclidean(&ctr, &grand).powi(2);
        }
        if trace_w == 0.0 {
            return f64::INFINITY;
        }
        (trace_b / trace_w) * ((n - k) as f64 / (k - 1) as f64)
    }

    pub fn davies_bouldin(x: &[Vec<f64>], labels: &[usize]) -> f64 {
        let n = x.len();
        let k = labels.iter().max().unwrap() + 1;
        let clusters: Vec<Vec<usize>> = (0..k)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect();
        let centroids: Vec<Vec<f64>> = clusters.iter().map(|m| centroid(x, m)).collect();
        let scatters: Vec<f64> = clusters
            .iter()
            .zip(&centroids)
            .map(|(members, ctr)| {
                members.iter().map(|&i| euclidean(&x[i], ctr)).sum::<f64>() / members.len() as f64
            })
            .collect();
        let mut total = 0.0;
        for a in 0..k {
            let mut worst = 0.0f64;
            for b in 0..k {
                if a != b {
                    let dist = euclidean(&centroids[a], &centroids[b]);
                    worst = worst.max((scatters[a] + scatters[b]) / dist);
                }
            }
            total += worst;
        }
        total / k as f64
    }
}

/// Two concentric rings with slight radial jitter; labels 0 (inner) and
/// 1 (outer).
pub fn concentric_circles(
    n_each: usize,
    r_inner: f64,
    r_outer: f64,
    jitter: f64,
    seed: u64,
) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_each);
    let mut labels = Vec::with_capacity(2 * n_each);
    for (label, radius) in [(0usize, r_inner), (1, r_outer)] {
        for i in 0..n_each {
            let theta = 2.0 * std::f64::consts::PI * (i as f64 / n_each as f64);
            let r = radius + jitter * rng.gen_range(-1.0..1.0);
            rows.push(vec![r * theta.cos(), r * theta.sin()]);
            labels.push(label);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

/// A seeded rigid motion plus uniform scaling: rotations in consecutive
/// coordinate planes, then `x -> scale * (R x + t)`.
pub fn rotate_translate_scale(x: &Matrix, seed: u64, scale: f64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.rows();
    let d = x.cols();
    let mut out = x.clone();
    for p in 0..d.saturating_sub(1) {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (s, c) = theta.sin_cos();
        for i in 0..n {
            let u = out[(i, p)];
            let v = out[(i, p + 1)];
            out[(i, p)] = c * u - s * v;
            out[(i, p + 1)] = s * u + c * v;
        }
    }
    let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
    for i in 0..n {
        for j in 0..d {
            out[(i, j)] = scale * (out[(i, j)] + shift[j]);
        }
    }
    out
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

/// Pearson correlation between two equal-length samples.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}
