//! Dimensionality-reduction transforms: SVD projection, RBF kernel PCA,
//! FastICA, and locality-preserving projections, all behind the single
//! [`reduce`] entry point, plus a pass-through baseline (`none`).
//!
//! Every reducer is a pure function of the input matrix and its config
//! (including the seed), so repeated runs are bit-identical and reducers can
//! be fitted concurrently on a shared input.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, Matrix, DEFAULT_EIG_TOL};

/// Singular values below this fraction of the largest are treated as zero
/// when counting usable variance directions (ICA whitening, LPP
/// pre-projection). The SVD is Gram-based, so rounding noise in a
/// rank-deficient input surfaces at sqrt(machine epsilon) relative scale;
/// the floor must sit above that.
pub const RANK_REL_TOL: f64 = 1e-7;
/// Centered-kernel eigenvalues below this fraction of the largest (floored
/// at the absolute value itself) do not count as positive in KPCA.
pub const KPCA_EIG_REL_TOL: f64 = 1e-12;
/// Rows sampled for the KPCA auto-sigma median heuristic.
const KPCA_SIGMA_SAMPLE: usize = 1000;
/// Relative ridge added to the LPP degree-weighted Gram before solving.
const LPP_RIDGE_REL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DrtError {
    #[error("input matrix is empty")]
    EmptyInput,
    #[error("input contains a non-finite entry")]
    NonFinite,
    #[error("component count must be at least 1")]
    ZeroComponents,
    #[error("requested {requested} components but {what} is {limit}")]
    TooManyComponents {
        requested: usize,
        what: &'static str,
        limit: usize,
    },
    #[error("requested {requested} components but the data has numerical rank {rank}; reduce the target or pre-project with svd")]
    RankDeficient { requested: usize, rank: usize },
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("heat parameter must be positive, got {0}")]
    BadHeat(f64),
    #[error("vector lengths disagree: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("kpca needs at least 2 samples, got {0}")]
    NotEnoughSamples(usize),
    #[error("centered kernel has no positive eigenvalues")]
    NoPositiveEigenvalues,
    #[error("centered kernel has only {available} positive eigenvalues, fewer than the requested {requested}")]
    NotEnoughPositiveEigenvalues { requested: usize, available: usize },
    #[error("ica tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("ica iteration budget must be at least 1")]
    ZeroIterations,
    #[error("fastica did not converge within {iterations} iterations (last delta {delta:.3e})")]
    NoConvergence { iterations: usize, delta: f64 },
    #[error("fastica decorrelation became singular at iteration {iteration}")]
    DecorrelationSingular { iteration: usize },
    #[error("lpp needs at least one neighbor")]
    ZeroNeighbors,
    #[error("lpp needs more samples than neighbors: {neighbors} neighbors with {n} samples")]
    TooFewSamplesForGraph { neighbors: usize, n: usize },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReducerMethod {
    Ica,
    Kpca,
    Svd,
    Lpp,
    /// Pass-through baseline: the embedding is the input itself.
    None,
}

impl ReducerMethod {
    pub const ALL: [ReducerMethod; 5] = [
        ReducerMethod::Ica,
        ReducerMethod::Kpca,
        ReducerMethod::Svd,
        ReducerMethod::Lpp,
        ReducerMethod::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReducerMethod::Ica => "ica",
            ReducerMethod::Kpca => "kpca",
            ReducerMethod::Svd => "svd",
            ReducerMethod::Lpp => "lpp",
            ReducerMethod::None => "none",
        }
    }

    /// Human-facing name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ReducerMethod::Ica => "ICA",
            ReducerMethod::Kpca => "KPCA",
            ReducerMethod::Svd => "SVD",
            ReducerMethod::Lpp => "LPP",
            ReducerMethod::None => "Original",
        }
    }
}

impl fmt::Display for ReducerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReducerMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ica" => Ok(ReducerMethod::Ica),
            "kpca" => Ok(ReducerMethod::Kpca),
            "svd" => Ok(ReducerMethod::Svd),
            "lpp" => Ok(ReducerMethod::Lpp),
            "none" | "original" => Ok(ReducerMethod::None),
            other => Err(format!(
                "unknown reducer '{other}' (expected ica, kpca, svd, lpp, or none)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcaContrast {
    /// `g(u) = tanh(u)`: the robust default.
    LogCosh,
    /// `g(u) = u^3`: the classical kurtosis contrast.
    Kurtosis,
}

impl IcaContrast {
    pub fn as_str(self) -> &'static str {
        match self {
            IcaContrast::LogCosh => "logcosh",
            IcaContrast::Kurtosis => "kurtosis",
        }
    }
}

impl fmt::Display for IcaContrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IcaContrast {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logcosh" => Ok(IcaContrast::LogCosh),
            "kurtosis" => Ok(IcaContrast::Kurtosis),
            other => Err(format!(
                "unknown ica contrast '{other}' (expected logcosh or kurtosis)"
            )),
        }
    }
}

/// Everything a reducer needs besides the data. Fields irrelevant to the
/// chosen method are ignored; `method = none` ignores all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducerConfig {
    pub method: ReducerMethod,
    pub k: usize,
    pub seed: u64,
    /// RBF width; `None` means the median-distance auto rule.
    pub kpca_sigma: Option<f64>,
    pub lpp_neighbors: usize,
    /// Heat-kernel scale; `None` means the mean squared neighbor distance.
    pub lpp_heat: Option<f64>,
    pub ica_contrast: IcaContrast,
    pub ica_tol: f64,
    pub ica_max_iter: usize,
}

impl ReducerConfig {
    pub fn new(method: ReducerMethod, k: usize) -> Self {
        ReducerConfig {
            method,
            k,
            seed: 0,
            kpca_sigma: None,
            lpp_neighbors: 10,
            lpp_heat: None,
            ica_contrast: IcaContrast::LogCosh,
            ica_tol: 1e-6,
            ica_max_iter: 500,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Method-specific fitted parameters kept for audit and export.
#[derive(Debug, Clone)]
pub enum ReducerModel {
    Svd(SvdModel),
    Kpca(KpcaModel),
    Ica(IcaModel),
    Lpp(LppModel),
    /// The `none` baseline fits nothing.
    Identity,
}

#[derive(Debug, Clone)]
pub struct SvdModel {
    /// Leading right singular vectors, `n_features x k`.
    pub components: Matrix,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KpcaModel {
    pub training_points: Matrix,
    pub sigma: f64,
    /// Eigenvectors of the centered kernel scaled by `1/sqrt(lambda)`, so a
    /// centered kernel row times a column reproduces that embedding column.
    pub alphas: Matrix,
    pub eigenvalues: Vec<f64>,
    pub kernel_row_means: Vec<f64>,
    pub kernel_total_mean: f64,
}

#[derive(Debug, Clone)]
pub struct IcaModel {
    /// Estimated mixing matrix `A`, `n_features x k`: centered data is
    /// approximately `A * sources` (exactly, within the whitened subspace).
    pub mixing: Matrix,
    /// The orthonormal contrast rotation, `k x k`; composed with `whitening`
    /// it forms the full demixing map from centered data to sources.
    pub demixing: Matrix,
    /// Whitening map, `k x n_features`.
    pub whitening: Matrix,
    /// Column means subtracted before whitening.
    pub means: Vec<f64>,
    pub iterations_used: usize,
}

#[derive(Debug, Clone)]
pub struct LppModel {
    /// Projection `W`, `n_features x k`, columns orthonormal under the
    /// degree-weighted Gram of the data.
    pub projection: Matrix,
    /// `tr(W^T X^T L X W)` at the solution; never negative.
    pub laplacian_objective: f64,
    pub graph_neighbors: usize,
    /// The heat scale actually used (resolved from the auto rule if unset).
    pub heat: f64,
}

/// A fitted reduction: the embedded coordinates plus the model that made
/// them.
#[derive(Debug, Clone)]
pub struct ReducedEmbedding {
    /// `n_samples x k` (or `n_samples x n_features` for `none`).
    pub values: Matrix,
    pub method: ReducerMethod,
    pub model: ReducerModel,
}

fn check_input(x: &Matrix) -> Result<(), DrtError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(DrtError::EmptyInput);
    }
    if !x.is_finite() {
        return Err(DrtError::NonFinite);
    }
    Ok(())
}

fn check_k(k: usize, what: &'static str, limit: usize) -> Result<(), DrtError> {
    if k == 0 {
        return Err(DrtError::ZeroComponents);
    }
    if k > limit {
        return Err(DrtError::TooManyComponents {
            requested: k,
            what,
            limit,
        });
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// RBF kernel `exp(-||x - y||^2 / (2 sigma^2))`; 1 at zero distance, strictly
/// decreasing in distance.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64, DrtError> {
    if x.len() != y.len() {
        return Err(DrtError::LengthMismatch(x.len(), y.len()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(DrtError::BadSigma(sigma));
    }
    Ok((-squared_distance(x, y) / (2.0 * sigma * sigma)).exp())
}

/// Projection onto the top-k right singular vectors: embedding `X V_k`.
pub fn reduce_svd(x: &Matrix, k: usize) -> Result<ReducedEmbedding, DrtError> {
    check_input(x)?;
    check_k(k, "the feature count", x.cols())?;
    let dec = linalg::svd(x)?;
    if k > dec.v.cols() {
        // Thin SVD of a wide matrix only yields min(n, d) directions.
        return Err(DrtError::TooManyComponents {
            requested: k,
            what: "the available singular directions",
            limit: dec.v.cols(),
        });
    }
    let d = x.cols();
    let mut components = Matrix::zeros(d, k);
    for i in 0..d {
        for j in 0..k {
            components[(i, j)] = dec.v[(i, j)];
        }
    }
    let values = x.matmul(&components);
    Ok(ReducedEmbedding {
        values,
        method: ReducerMethod::Svd,
        model: ReducerModel::Svd(SvdModel {
            components,
            singular_values: dec.sigma[..k].to_vec(),
        }),
    })
}

/// Median of pairwise squared distances over a seeded sample of rows, halved;
/// sigma is its square root. Falls back to 1.0 when the median is zero (all
/// sampled points coincide).
fn kpca_auto_sigma(x: &Matrix, seed: u64) -> f64 {
    let n = x.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<usize> = if n <= KPCA_SIGMA_SAMPLE {
        (0..n).collect()
    } else {
        let mut idx = rand::seq::index::sample(&mut rng, n, KPCA_SIGMA_SAMPLE).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut dists = Vec::with_capacity(sample.len() * (sample.len() - 1) / 2);
    for (a, &i) in sample.iter().enumerate() {
        for &j in &sample[a + 1..] {
            dists.push(squared_distance(x.row(i), x.row(j)));
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    let sigma_sq = median / 2.0;
    if sigma_sq > 0.0 {
        sigma_sq.sqrt()
    } else {
        1.0
    }
}

/// Kernel PCA with the RBF kernel: double-center the `n x n` kernel, keep the
/// top-k positive eigenpairs, and scale eigenvectors by `sqrt(lambda)`.
pub fn reduce_kpca(
    x: &Matrix,
    k: usize,
    sigma: Option<f64>,
    seed: u64,
) -> Result<ReducedEmbedding, DrtError> {
    check_input(x)?;
    let n = x.rows();
    if n < 2 {
        return Err(DrtError::NotEnoughSamples(n));
    }
    check_k(k, "the sample count", n)?;
    let sigma = match sigma {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => return Err(DrtError::BadSigma(s)),
        None => kpca_auto_sigma(x, seed),
    };
    let denom = 2.0 * sigma * sigma;
    let mut kernel = Matrix::zeros(n, n);
    for i in 0..n {
        kernel[(i, i)] = 1.0;
        for j in i + 1..n {
            let v = (-squared_distance(x.row(i), x.row(j)) / denom).exp();
            kernel[(i, j)] = v;
            kernel[(j, i)] = v;
        }
    }
    let row_means: Vec<f64> = (0..n)
        .map(|i| kernel.row(i).iter().sum::<f64>() / n as f64)
        .collect();
    let total_mean = row_means.iter().sum::<f64>() / n as f64;
    // K <- K - 1K - K1 + 1K1, kept exactly symmetric.
    let mut centered = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel[(i, j)] - row_means[i] - row_means[j] + total_mean;
            centered[(i, j)] = v;
            centered[(j, i)] = v;
        }
    }
    let eig = linalg::sym_eigen(&centered, DEFAULT_EIG_TOL)?;
    let floor = KPCA_EIG_REL_TOL * eig.values.first().copied().unwrap_or(0.0).max(1.0);
    let available = eig.values.iter().take_while(|&&v| v > floor).count();
    if available == 0 {
        return Err(DrtError::NoPositiveEigenvalues);
    }
    if available < k {
        return Err(DrtError::NotEnoughPositiveEigenvalues {
            requested: k,
            available,
        });
    }
    let mut values = Matrix::zeros(n, k);
    let mut alphas = Matrix::zeros(n, k);
    for j in 0..k {
        let scale = eig.values[j].sqrt();
        for i in 0..n {
            values[(i, j)] = scale * eig.vectors[(i, j)];
            alphas[(i, j)] = eig.vectors[(i, j)] / scale;
        }
    }
    Ok(ReducedEmbedding {
        values,
        method: ReducerMethod::Kpca,
        model: ReducerModel::Kpca(KpcaModel {
            training_points: x.clone(),
            sigma,
            alphas,
            eigenvalues: eig.values[..k].to_vec(),
            kernel_row_means: row_means,
            kernel_total_mean: total_mean,
        }),
    })
}

fn column_means(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| x.col(j).iter().sum::<f64>() / n)
        .collect()
}

fn center_columns(x: &Matrix, means: &[f64]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for (v, m) in row.iter_mut().zip(means) {
            *v -= m;
        }
    }
    out
}

/// `(W W^T)^{-1/2} W`: rescales `W` so its rows are exactly orthonormal.
fn symmetric_decorrelation(w: &Matrix, iteration: usize) -> Result<Matrix, DrtError> {
    let k = w.rows();
    let product = w.matmul(&w.transpose());
    let mut c = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = 0.5 * (product[(i, j)] + product[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = linalg::sym_eigen(&c, DEFAULT_EIG_TOL)?;
    let max = eig.values[0];
    // `positive` is false for NaN too, which must also take the error path.
    let positive = max > 0.0;
    if !positive || eig.values[k - 1] <= 1e-12 * max {
        return Err(DrtError::DecorrelationSingular { iteration });
    }
    // C^{-1/2} = Q diag(lambda^{-1/2}) Q^T.
    let mut inv_half = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut s = 0.0;
            for t in 0..k {
                s += eig.vectors[(a, t)] * eig.vectors[(b, t)] / eig.values[t].sqrt();
            }
            inv_half[(a, b)] = s;
            inv_half[(b, a)] = s;
        }
    }
    Ok(inv_half.matmul(w))
}

fn excess_kurtosis(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let m2 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if m2 == 0.0 {
        return 0.0;
    }
    let m4 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// FastICA with PCA whitening to `k` dimensions and symmetric decorrelation.
///
/// Components are returned in descending order of the embedding columns'
/// excess-kurtosis magnitude, each signed so the largest-magnitude entry of
/// its full demixing row (rotation composed with whitening) is positive.
pub fn reduce_ica(x: &Matrix, k: usize, cfg: &ReducerConfig) -> Result<ReducedEmbedding, DrtError> {
    check_input(x)?;
    check_k(k, "the feature count", x.cols())?;
    if !(cfg.ica_tol.is_finite() && cfg.ica_tol > 0.0) {
        return Err(DrtError::BadTolerance(cfg.ica_tol));
    }
    if cfg.ica_max_iter == 0 {
        return Err(DrtError::ZeroIterations);
    }
    let n = x.rows();
    let d = x.cols();
    if n <= d {
        log::warn!("fastica fitted on {n} samples with {d} features; estimates may be unstable");
    }
    let means = column_means(x);
    let centered = center_columns(x, &means);
    let dec = linalg::svd(&centered)?;
    let rank_floor = RANK_REL_TOL * dec.sigma.first().copied().unwrap_or(0.0);
    let rank = dec
        .sigma
        .iter()
        .take_while(|&&s| s > rank_floor && s > 0.0)
        .count();
    if k > rank {
        return Err(DrtError::RankDeficient { requested: k, rank });
    }
    // Whitening K = diag(sqrt(n)/sigma_i) V_k^T gives Z = Xc K^T with
    // population covariance exactly the identity.
    let sqrt_n = (n as f64).sqrt();
    let mut whitening = Matrix::zeros(k, d);
    for i in 0..k {
        let scale = sqrt_n / dec.sigma[i];
        for j in 0..d {
            whitening[(i, j)] = scale * dec.v[(j, i)];
        }
    }
    let z = centered.matmul(&whitening.transpose());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            // Box-Muller keeps the dependency surface small; any continuous
            // full-rank init works.
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            init[(i, j)] = (-2.0 * u1.ln()).sqrt() * u2.cos();
        }
    }
    let mut w = symmetric_decorrelation(&init, 0)?;

    let mut iterations_used = cfg.ica_max_iter;
    let mut delta = f64::INFINITY;
    let mut converged = false;
    for iter in 0..cfg.ica_max_iter {
        // One fixed-point step: W+ = E[g(WZ^T) Z]/n - diag(E[g']) W.
        let s = z.matmul(&w.transpose());
        let mut g = Matrix::zeros(n, k);
        let mut g_der_mean = vec![0.0; k];
        for i in 0..n {
            for j in 0..k {
                let (gv, gd) = match cfg.ica_contrast {
                    IcaContrast::LogCosh => {
                        let t = s[(i, j)].tanh();
                        (t, 1.0 - t * t)
                    }
                    IcaContrast::Kurtosis => {
                        let u = s[(i, j)];
                        (u * u * u, 3.0 * u * u)
                    }
                };
                g[(i, j)] = gv;
                g_der_mean[j] += gd;
            }
        }
        for v in g_der_mean.iter_mut() {
            *v /= n as f64;
        }
        let mut w_plus = g.transpose().matmul(&z);
        for i in 0..k {
            for j in 0..k {
                w_plus[(i, j)] = w_plus[(i, j)] / n as f64 - g_der_mean[i] * w[(i, j)];
            }
        }
        let w_new = symmetric_decorrelation(&w_plus, iter + 1)?;
        delta = (0..k)
            .map(|i| {
                let dot: f64 = (0..k).map(|j| w_new[(i, j)] * w[(i, j)]).sum();
                (1.0 - dot.abs()).abs()
            })
            .fold(0.0, f64::max);
        w = w_new;
        if delta < cfg.ica_tol {
            iterations_used = iter + 1;
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(DrtError::NoConvergence {
            iterations: cfg.ica_max_iter,
            delta,
        });
    }

    let mut values = z.matmul(&w.transpose());
    // Deterministic presentation: order by |excess kurtosis| descending,
    // then fix signs through the full demixing rows.
    let kurt: Vec<f64> = (0..k).map(|j| excess_kurtosis(&values.col(j))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| kurt[b].abs().total_cmp(&kurt[a].abs()).then(a.cmp(&b)));
    let mut rotation = Matrix::zeros(k, k);
    for (new_row, &old_row) in order.iter().enumerate() {
        for j in 0..k {
            rotation[(new_row, j)] = w[(old_row, j)];
        }
    }
    let full_demixing = rotation.matmul(&whitening);
    let mut flips = vec![1.0; k];
    for (i, flip) in flips.iter_mut().enumerate() {
        let row = full_demixing.row(i);
        let mut best = 0usize;
        for j in 1..d {
            if row[j].abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            *flip = -1.0;
        }
    }
    for i in 0..k {
        if flips[i] < 0.0 {
            for j in 0..k {
                rotation[(i, j)] = -rotation[(i, j)];
            }
        }
    }
    let mut reordered = Matrix::zeros(n, k);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            reordered[(i, new_col)] = flips[new_col] * values[(i, old_col)];
        }
    }
    values = reordered;
    // Mixing A = V_k diag(sigma/sqrt(n)) R^T maps sources back to centered
    // data within the whitened subspace.
    let mut dewhiten = Matrix::zeros(d, k);
    for j in 0..k {
        let scale = dec.sigma[j] / sqrt_n;
        for i in 0..d {
            dewhiten[(i, j)] = dec.v[(i, j)] * scale;
        }
    }
    let mixing = dewhiten.matmul(&rotation.transpose());
    Ok(ReducedEmbedding {
        values,
        method: ReducerMethod::Ica,
        model: ReducerModel::Ica(IcaModel {
            mixing,
            demixing: rotation,
            whitening,
            means,
            iterations_used,
        }),
    })
}

/// Locality-preserving projection: minimize `tr(W^T X^T L X W)` subject to
/// `W^T X^T D X W = I` over a heat-weighted symmetric k-NN graph.
///
/// The data is first projected onto its numerical-rank subspace so the
/// degree-weighted Gram is invertible; asking for more components than that
/// rank is an error.
pub fn reduce_lpp(x: &Matrix, k: usize, cfg: &ReducerConfig) -> Result<ReducedEmbedding, DrtError> {
    check_input(x)?;
    check_k(k, "the feature count", x.cols())?;
    if cfg.lpp_neighbors == 0 {
        return Err(DrtError::ZeroNeighbors);
    }
    if let Some(h) = cfg.lpp_heat {
        if !(h.is_finite() && h > 0.0) {
            return Err(DrtError::BadHeat(h));
        }
    }
    let n = x.rows();
    let neighbors = cfg.lpp_neighbors;
    if n <= neighbors {
        return Err(DrtError::TooFewSamplesForGraph { neighbors, n });
    }

    // Directed k-NN lists; ties broken by index so the graph is reproducible.
    let mut knn: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (squared_distance(x.row(i), x.row(j)), j))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        knn.push(dists[..neighbors].iter().map(|&(d, j)| (j, d)).collect());
    }
    let heat = match cfg.lpp_heat {
        Some(h) => h,
        None => {
            let total: f64 = knn.iter().flatten().map(|&(_, d)| d).sum();
            let mean = total / (n * neighbors) as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    // Symmetric union graph with heat-kernel weights.
    let mut affinity = Matrix::zeros(n, n);
    for (i, list) in knn.iter().enumerate() {
        for &(j, d) in list {
            let wgt = (-d / heat).exp();
            affinity[(i, j)] = wgt;
            affinity[(j, i)] = wgt;
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| affinity.row(i).iter().sum()).collect();

    // Project onto the data's numerical-rank subspace before solving.
    let dec = linalg::svd(x)?;
    let rank_floor = RANK_REL_TOL * dec.sigma.first().copied().unwrap_or(0.0);
    let rank = dec
        .sigma
        .iter()
        .take_while(|&&s| s > rank_floor && s > 0.0)
        .count();
    if k > rank {
        return Err(DrtError::RankDeficient { requested: k, rank });
    }
    let d_feat = x.cols();
    let mut basis = Matrix::zeros(d_feat, rank);
    for i in 0..d_feat {
        for j in 0..rank {
            basis[(i, j)] = dec.v[(i, j)];
        }
    }
    let y = x.matmul(&basis);

    // M = Y^T L Y = Y^T D Y - Y^T A Y, assembled symmetrically.
    let mut weighted = Matrix::zeros(n, rank);
    for i in 0..n {
        for j in 0..rank {
            weighted[(i, j)] = degrees[i] * y[(i, j)];
        }
    }
    let b_gram = symmetrize(&y.transpose().matmul(&weighted));
    let a_gram = symmetrize(&y.transpose().matmul(&affinity.matmul(&y)));
    let mut m_gram = Matrix::zeros(rank, rank);
    for i in 0..rank {
        for j in 0..rank {
            m_gram[(i, j)] = b_gram[(i, j)] - a_gram[(i, j)];
        }
    }
    let trace_b: f64 = (0..rank).map(|i| b_gram[(i, i)]).sum();
    let ridge = LPP_RIDGE_REL * trace_b / rank as f64;
    let mut b_reg = b_gram;
    for i in 0..rank {
        b_reg[(i, i)] += ridge;
    }
    let pd_floor = (1e-12 * trace_b / rank as f64).max(f64::MIN_POSITIVE);
    let eig = linalg::gen_sym_eigen(&m_gram, &b_reg, pd_floor)?;

    let mut w_low = Matrix::zeros(rank, k);
    for i in 0..rank {
        for j in 0..k {
            w_low[(i, j)] = eig.vectors[(i, j)];
        }
    }
    let projection = basis.matmul(&w_low);
    let values = y.matmul(&w_low);
    let objective_raw = {
        let mw = m_gram.matmul(&w_low);
        let mut total = 0.0;
        for j in 0..k {
            for i in 0..rank {
                total += w_low[(i, j)] * mw[(i, j)];
            }
        }
        total
    };
    Ok(ReducedEmbedding {
        values,
        method: ReducerMethod::Lpp,
        model: ReducerModel::Lpp(LppModel {
            projection,
            laplacian_objective: objective_raw.max(0.0),
            graph_neighbors: neighbors,
            heat,
        }),
    })
}

fn symmetrize(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Dispatches to the configured reducer; `none` returns the input unchanged.
pub fn reduce(x: &Matrix, cfg: &ReducerConfig) -> Result<ReducedEmbedding, DrtError> {
    match cfg.method {
        ReducerMethod::None => {
            check_input(x)?;
            Ok(ReducedEmbedding {
                values: x.clone(),
                method: ReducerMethod::None,
                model: ReducerModel::Identity,
            })
        }
        ReducerMethod::Svd => reduce_svd(x, cfg.k),
        ReducerMethod::Kpca => reduce_kpca(x, cfg.k, cfg.kpca_sigma, cfg.seed),
        ReducerMethod::Ica => reduce_ica(x, cfg.k, cfg),
        ReducerMethod::Lpp => reduce_lpp(x, cfg.k, cfg),
    }
}
