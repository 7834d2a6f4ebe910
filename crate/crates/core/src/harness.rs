//! The experiment grid (reducer x component count x segment count) and the
//! seeded synthetic transaction generator that stands in for confidential
//! bank data.
//!
//! Grid cells are independent: each reducer fit is computed once, clustered
//! once, and cut at every segment count. Cells that fail (degenerate kernel,
//! impossible cut) become `ERR` rows instead of aborting the run, and the
//! result list is assembled in canonical order no matter how many worker
//! threads executed the fits.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{Duration as ChronoDuration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use thiserror::Error;

use crate::cluster::{ahc_fit, cut, Linkage};
use crate::drt::{reduce, IcaContrast, ReducerConfig, ReducerMethod};
use crate::kv;
use crate::linalg::Matrix;
use crate::profiling::{self, ProfileMatrix, ProfileSchema, TransactionRecord};
use crate::validate::{validate_all, DegeneracyFlag, ValidationReport};

/// Customer ids are zero-padded so lexicographic order equals generation
/// order; six digits bounds the generator.
const MAX_SYNTH_CUSTOMERS: usize = 999_999;
/// Upper clamp on per-block Poisson rates so extreme group offsets cannot
/// explode the transaction count.
const MAX_BLOCK_RATE: f64 = 25.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("synthetic spec invalid: {0}")]
    BadSynthSpec(String),
    #[error("grid config invalid: {0}")]
    BadGridConfig(String),
    #[error("component count {0} exceeds the {1} available features")]
    ComponentsExceedFeatures(usize, usize),
    #[error("summary component count {0} is not in the grid")]
    FilterNotInGrid(usize),
    #[error("no results to report")]
    EmptyResults,
    #[error(transparent)]
    Profiling(#[from] profiling::ProfilingError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameters of the synthetic customer population.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_customers: usize,
    pub schema: ProfileSchema,
    pub n_behavior_groups: usize,
    /// Spread of per-group offsets on log transaction rates and log amount
    /// scales; larger means more separable groups.
    pub group_separation: f64,
    /// Within-group jitter on each customer's log rates, and the log-normal
    /// shape of individual amounts.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Mirrors the reference population: 4099 customers over the default
    /// 80-feature schema.
    fn default() -> Self {
        SynthSpec {
            n_customers: 4099,
            schema: ProfileSchema::default(),
            n_behavior_groups: 3,
            group_separation: 4.0,
            noise_scale: 0.25,
            seed: 7,
        }
    }
}

impl SynthSpec {
    /// Small population for fast test runs; same structure as the default.
    pub fn ci_preset() -> Self {
        SynthSpec {
            n_customers: 500,
            ..SynthSpec::default()
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::BadSynthSpec(msg));
        if self.n_customers == 0 {
            return bad("n_customers must be at least 1".into());
        }
        if self.n_customers > MAX_SYNTH_CUSTOMERS {
            return bad(format!("n_customers must be at most {MAX_SYNTH_CUSTOMERS}"));
        }
        if self.n_behavior_groups == 0 || self.n_behavior_groups > self.n_customers {
            return bad(format!(
                "n_behavior_groups must be in 1..={}, got {}",
                self.n_customers, self.n_behavior_groups
            ));
        }
        if !(self.group_separation.is_finite() && self.group_separation > 0.0) {
            return bad(format!(
                "group_separation must be positive, got {}",
                self.group_separation
            ));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad(format!(
                "noise_scale must be positive, got {}",
                self.noise_scale
            ));
        }
        Ok(())
    }
}

/// The id of the `i`-th synthetic customer. Zero-padded so sorting ids
/// reproduces generation order (and thus aligns with the truth vector).
pub fn synth_customer_id(i: usize) -> String {
    format!("C{i:06}")
}

/// Generates a transaction log whose per-customer profiles separate into
/// `n_behavior_groups` latent groups, plus the ground-truth group of each
/// customer (indexed in customer-id order).
///
/// Deterministic given a `SynthSpec`: every draw comes from one seeded
/// stream in a fixed iteration order. Every customer emits at least one
/// transaction so the profile row set is exactly the customer set.
pub fn synth_dataset(
    spec: &SynthSpec,
) -> Result<(Vec<TransactionRecord>, Vec<usize>), HarnessError> {
    spec.validate()?;
    let classes = spec.schema.classes();
    let n_blocks = classes.len() * 2;
    let year = spec.schema.year();
    let year_start = Utc
        .with_ymd_and_hms(year, 1, 1, 0, 0, 0)
        .single()
        .ok_or_else(|| HarnessError::BadSynthSpec(format!("invalid schema year {year}")))?;
    let year_end = Utc
        .with_ymd_and_hms(year + 1, 1, 1, 0, 0, 0)
        .single()
        .ok_or_else(|| HarnessError::BadSynthSpec(format!("invalid schema year {year}")))?;
    let year_seconds = (year_end - year_start).num_seconds();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");

    // Population-wide baseline per block, then one offset per group x block.
    let base_log_rate: Vec<f64> = (0..n_blocks)
        .map(|_| rng.gen_range(0.8f64.ln()..4.0f64.ln()))
        .collect();
    let base_log_amount: Vec<f64> = (0..n_blocks)
        .map(|_| rng.gen_range(50.0f64.ln()..1500.0f64.ln()))
        .collect();
    let half = spec.group_separation * 0.5;
    let mut rate_offset = vec![vec![0.0; n_blocks]; spec.n_behavior_groups];
    let mut amount_offset = vec![vec![0.0; n_blocks]; spec.n_behavior_groups];
    for g in 0..spec.n_behavior_groups {
        for b in 0..n_blocks {
            rate_offset[g][b] = rng.gen_range(-half..half);
            amount_offset[g][b] = rng.gen_range(-half..half);
        }
    }
    let amount_sigma = spec.noise_scale.max(0.05);

    let mut records = Vec::new();
    let mut truth = Vec::with_capacity(spec.n_customers);
    for i in 0..spec.n_customers {
        let id = synth_customer_id(i);
        let group = i % spec.n_behavior_groups;
        truth.push(group);
        let before = records.len();
        for b in 0..n_blocks {
            let class = &classes[b / 2];
            let direction = profiling::Direction::ALL[b % 2];
            let log_rate = base_log_rate[b]
                + rate_offset[group][b]
                + spec.noise_scale * normal.sample(&mut rng);
            let rate = log_rate.exp().min(MAX_BLOCK_RATE);
            let count = Poisson::new(rate)
                .expect("clamped rate is positive and finite")
                .sample(&mut rng) as usize;
            let mu = base_log_amount[b] + amount_offset[group][b];
            let amounts = LogNormal::new(mu, amount_sigma).expect("finite parameters");
            for _ in 0..count {
                let amount = ((amounts.sample(&mut rng) * 100.0).round() / 100.0).max(0.01);
                let offset = rng.gen_range(0..year_seconds);
                records.push(TransactionRecord {
                    customer_id: id.clone(),
                    timestamp: year_start + ChronoDuration::seconds(offset),
                    txn_class: class.clone(),
                    direction,
                    amount,
                });
            }
        }
        if records.len() == before {
            // Quiet customer: force one transaction so the profile exists.
            let amounts =
                LogNormal::new(base_log_amount[0] + amount_offset[group][0], amount_sigma)
                    .expect("finite parameters");
            let amount = ((amounts.sample(&mut rng) * 100.0).round() / 100.0).max(0.01);
            let offset = rng.gen_range(0..year_seconds);
            records.push(TransactionRecord {
                customer_id: id,
                timestamp: year_start + ChronoDuration::seconds(offset),
                txn_class: classes[0].clone(),
                direction: profiling::Direction::Credit,
                amount,
            });
        }
    }
    Ok((records, truth))
}

/// The full experiment grid: which reducers, at which component counts, cut
/// into which segment counts, plus the shared tuning knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub component_counts: Vec<usize>,
    pub segment_counts: Vec<usize>,
    pub methods: Vec<ReducerMethod>,
    /// Adds one `Original` row (no reduction) per segment count.
    pub include_baseline: bool,
    pub linkage: Linkage,
    pub master_seed: u64,
    pub kpca_sigma: Option<f64>,
    pub lpp_neighbors: usize,
    pub lpp_heat: Option<f64>,
    pub ica_contrast: IcaContrast,
    pub ica_tol: f64,
    pub ica_max_iter: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            component_counts: vec![2, 10, 20, 40],
            segment_counts: vec![3, 5, 7, 9],
            methods: vec![
                ReducerMethod::Ica,
                ReducerMethod::Kpca,
                ReducerMethod::Svd,
                ReducerMethod::Lpp,
            ],
            include_baseline: true,
            linkage: Linkage::Ward,
            master_seed: 7,
            kpca_sigma: None,
            lpp_neighbors: 10,
            lpp_heat: None,
            ica_contrast: IcaContrast::LogCosh,
            ica_tol: 1e-6,
            ica_max_iter: 500,
        }
    }
}

fn check_ascending(name: &str, values: &[usize]) -> Result<(), HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::BadGridConfig(format!(
            "{name} must not be empty"
        )));
    }
    if values.contains(&0) {
        return Err(HarnessError::BadGridConfig(format!(
            "{name} must be positive"
        )));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::BadGridConfig(format!(
            "{name} must be unique and sorted ascending"
        )));
    }
    Ok(())
}

impl GridConfig {
    pub fn validate(&self, n_features: usize) -> Result<(), HarnessError> {
        check_ascending("component counts", &self.component_counts)?;
        check_ascending("segment counts", &self.segment_counts)?;
        if self.methods.is_empty() {
            return Err(HarnessError::BadGridConfig(
                "methods must not be empty".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for &m in &self.methods {
            if m == ReducerMethod::None {
                return Err(HarnessError::BadGridConfig(
                    "the baseline is driven by include_baseline, not the methods list".into(),
                ));
            }
            if !seen.insert(m) {
                return Err(HarnessError::BadGridConfig(format!("duplicate method {m}")));
            }
        }
        if let Some(&largest) = self.component_counts.last() {
            if largest > n_features {
                return Err(HarnessError::ComponentsExceedFeatures(largest, n_features));
            }
        }
        if !(self.ica_tol.is_finite() && self.ica_tol > 0.0) {
            return Err(HarnessError::BadGridConfig(format!(
                "ica_tol must be positive, got {}",
                self.ica_tol
            )));
        }
        if self.ica_max_iter == 0 {
            return Err(HarnessError::BadGridConfig(
                "ica_max_iter must be at least 1".into(),
            ));
        }
        if self.lpp_neighbors == 0 {
            return Err(HarnessError::BadGridConfig(
                "lpp_neighbors must be at least 1".into(),
            ));
        }
        for (name, v) in [("kpca_sigma", self.kpca_sigma), ("lpp_heat", self.lpp_heat)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(HarnessError::BadGridConfig(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses the plain-text `key = value` grid configuration. Every key is
    /// optional; unknown keys are rejected. List values are comma-separated;
    /// `kpca_sigma` and `lpp_heat` accept `auto`.
    pub fn from_kv_text(text: &str) -> Result<Self, HarnessError> {
        let pairs = kv::parse_kv(text).map_err(|e| HarnessError::BadGridConfig(e.to_string()))?;
        let mut cfg = GridConfig::default();
        let bad = |key: &str, value: &str, what: &str| {
            HarnessError::BadGridConfig(format!("key '{key}': expected {what}, got '{value}'"))
        };
        for (key, value) in pairs {
            match key.as_str() {
                "components" => {
                    cfg.component_counts = parse_usize_list(&key, &value)?;
                }
                "segments" => {
                    cfg.segment_counts = parse_usize_list(&key, &value)?;
                }
                "methods" => {
                    cfg.methods = kv::split_list(&value)
                        .iter()
                        .map(|s| s.parse::<ReducerMethod>())
                        .collect::<Result<_, _>>()
                        .map_err(HarnessError::BadGridConfig)?;
                }
                "include_baseline" => {
                    cfg.include_baseline = match value.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return Err(bad(&key, &value, "true or false")),
                    };
                }
                "linkage" => {
                    cfg.linkage = value.parse().map_err(|e: crate::cluster::ClusterError| {
                        HarnessError::BadGridConfig(e.to_string())
                    })?;
                }
                "master_seed" => {
                    cfg.master_seed = value
                        .parse()
                        .map_err(|_| bad(&key, &value, "an unsigned integer"))?;
                }
                "kpca_sigma" => {
                    cfg.kpca_sigma = parse_auto_f64(&key, &value)?;
                }
                "lpp_heat" => {
                    cfg.lpp_heat = parse_auto_f64(&key, &value)?;
                }
                "lpp_neighbors" => {
                    cfg.lpp_neighbors = value
                        .parse()
                        .map_err(|_| bad(&key, &value, "a positive integer"))?;
                }
                "ica_contrast" => {
                    cfg.ica_contrast = value.parse().map_err(HarnessError::BadGridConfig)?;
                }
                "ica_tol" => {
                    cfg.ica_tol = value.parse().map_err(|_| bad(&key, &value, "a number"))?;
                }
                "ica_max_iter" => {
                    cfg.ica_max_iter = value
                        .parse()
                        .map_err(|_| bad(&key, &value, "a positive integer"))?;
                }
                _ => {
                    return Err(HarnessError::BadGridConfig(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(cfg)
    }
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>, HarnessError> {
    kv::split_list(value)
        .iter()
        .map(|s| {
            s.parse::<usize>().map_err(|_| {
                HarnessError::BadGridConfig(format!("key '{key}': not a count: '{s}'"))
            })
        })
        .collect()
}

fn parse_auto_f64(key: &str, value: &str) -> Result<Option<f64>, HarnessError> {
    if value == "auto" {
        return Ok(None);
    }
    value.parse::<f64>().map(Some).map_err(|_| {
        HarnessError::BadGridConfig(format!(
            "key '{key}': expected a number or 'auto', got '{value}'"
        ))
    })
}

/// What a cell produced: a score report, or the reason it could not.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Report(ValidationReport),
    Error(String),
}

/// One row of the grid: a (method, components, segments) triple with its
/// outcome. `wall_time` is informational only and never serialized, so
/// reports stay byte-identical across runs.
#[derive(Debug, Clone)]
pub struct GridCellResult {
    pub method: ReducerMethod,
    pub components: usize,
    pub segments: usize,
    pub outcome: CellOutcome,
    pub wall_time: Duration,
    /// The seed the reducer fit actually used (shared across this method's
    /// segment counts).
    pub seed: u64,
}

/// FNV-1a over the master seed and the cell coordinates. Segment counts are
/// deliberately excluded: the fit is shared across cuts, so its seed must be
/// too.
fn fit_seed(master: u64, method: ReducerMethod, components: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&master.to_le_bytes());
    eat(method.as_str().as_bytes());
    eat(&(components as u64).to_le_bytes());
    h
}

struct FitUnit {
    method: ReducerMethod,
    components: usize,
    seed: u64,
}

struct UnitOutput {
    fit_time: Duration,
    /// One entry per configured segment count, in config order.
    cells: Vec<(CellOutcome, Duration)>,
}

fn run_unit(z: &Matrix, unit: &FitUnit, cfg: &GridConfig) -> UnitOutput {
    let started = Instant::now();
    let rcfg = ReducerConfig {
        method: unit.method,
        k: unit.components,
        seed: unit.seed,
        kpca_sigma: cfg.kpca_sigma,
        lpp_neighbors: cfg.lpp_neighbors,
        lpp_heat: cfg.lpp_heat,
        ica_contrast: cfg.ica_contrast,
        ica_tol: cfg.ica_tol,
        ica_max_iter: cfg.ica_max_iter,
    };
    let all_error = |msg: String, fit_time: Duration| UnitOutput {
        fit_time,
        cells: cfg
            .segment_counts
            .iter()
            .map(|_| (CellOutcome::Error(msg.clone()), Duration::ZERO))
            .collect(),
    };
    let embedding = match reduce(z, &rcfg) {
        Ok(e) => e,
        Err(e) => return all_error(e.to_string(), started.elapsed()),
    };
    let dendrogram = match ahc_fit(&embedding.values, cfg.linkage) {
        Ok(d) => d,
        Err(e) => return all_error(e.to_string(), started.elapsed()),
    };
    let fit_time = started.elapsed();
    let cells = cfg
        .segment_counts
        .iter()
        .map(|&segments| {
            let cell_start = Instant::now();
            let outcome = cut(&dendrogram, segments)
                .map_err(|e| e.to_string())
                .and_then(|assignment| {
                    validate_all(&embedding.values, &assignment).map_err(|e| e.to_string())
                })
                .map_or_else(CellOutcome::Error, CellOutcome::Report);
            (outcome, cell_start.elapsed())
        })
        .collect();
    UnitOutput { fit_time, cells }
}

/// Runs the grid with one worker per available core.
pub fn run_grid(x: &ProfileMatrix, cfg: &GridConfig) -> Result<Vec<GridCellResult>, HarnessError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_grid_with_workers(x, cfg, workers)
}

/// Runs the grid on exactly `workers` threads (0 means one per core).
///
/// Results are identical for every worker count: each fit unit consumes only
/// its own derived seed, and the output list is assembled in canonical
/// (segments, method, components) order with the baseline row last per
/// segment.
pub fn run_grid_with_workers(
    x: &ProfileMatrix,
    cfg: &GridConfig,
    workers: usize,
) -> Result<Vec<GridCellResult>, HarnessError> {
    let n_features = x.values.cols();
    cfg.validate(n_features)?;
    let (z, _, _) = profiling::standardize(x)?;

    let mut units = Vec::new();
    for &method in &cfg.methods {
        for &k in &cfg.component_counts {
            units.push(FitUnit {
                method,
                components: k,
                seed: fit_seed(cfg.master_seed, method, k),
            });
        }
    }
    if cfg.include_baseline {
        units.push(FitUnit {
            method: ReducerMethod::None,
            components: n_features,
            seed: fit_seed(cfg.master_seed, ReducerMethod::None, n_features),
        });
    }

    let workers = if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    }
    .min(units.len())
    .max(1);

    let outputs: Mutex<Vec<Option<UnitOutput>>> =
        Mutex::new((0..units.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= units.len() {
                    break;
                }
                let out = run_unit(&z, &units[i], cfg);
                outputs.lock().expect("worker panicked holding the lock")[i] = Some(out);
            });
        }
    });
    let outputs = outputs.into_inner().expect("all workers joined");

    let mut results = Vec::with_capacity(cfg.segment_counts.len() * units.len());
    for (seg_index, &segments) in cfg.segment_counts.iter().enumerate() {
        for (unit, output) in units.iter().zip(&outputs) {
            let output = output.as_ref().expect("every unit was executed");
            let (outcome, cell_time) = &output.cells[seg_index];
            results.push(GridCellResult {
                method: unit.method,
                components: unit.components,
                segments,
                outcome: outcome.clone(),
                wall_time: output.fit_time + *cell_time,
                seed: unit.seed,
            });
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "both" => Ok(ReportFormat::Both),
            other => Err(format!(
                "unknown format '{other}' (expected csv, markdown, or both)"
            )),
        }
    }
}

fn machine_score(report: &ValidationReport, index: &'static str, value: Option<f64>) -> String {
    match value {
        Some(v) if v.is_infinite() => "inf".to_string(),
        Some(v) => format!("{v}"),
        None => match report.skipped.get(index) {
            Some(reason) => format!("ERR({reason})"),
            None => "ERR(not computed)".to_string(),
        },
    }
}

fn human_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else if v.abs() >= 1e7 {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

fn human_score(
    report: &ValidationReport,
    index: &'static str,
    value: Option<f64>,
    marker: &str,
) -> String {
    match value {
        Some(v) => format!("{}{marker}", human_value(v)),
        None => match report.skipped.get(index) {
            Some(reason) => format!("ERR({reason})"),
            None => "ERR(not computed)".to_string(),
        },
    }
}

/// Rows of one segment table in presentation order: component counts
/// outermost, methods within, baseline last.
fn presentation_rows(results: &[GridCellResult], segments: usize) -> Vec<&GridCellResult> {
    let in_segment: Vec<&GridCellResult> =
        results.iter().filter(|r| r.segments == segments).collect();
    let mut components: Vec<usize> = in_segment
        .iter()
        .filter(|r| r.method != ReducerMethod::None)
        .map(|r| r.components)
        .collect();
    components.sort_unstable();
    components.dedup();
    let mut methods: Vec<ReducerMethod> = Vec::new();
    for r in &in_segment {
        if r.method != ReducerMethod::None && !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let mut rows = Vec::with_capacity(in_segment.len());
    for &k in &components {
        for &m in &methods {
            if let Some(row) = in_segment
                .iter()
                .find(|r| r.method == m && r.components == k)
            {
                rows.push(*row);
            }
        }
    }
    rows.extend(
        in_segment
            .iter()
            .filter(|r| r.method == ReducerMethod::None),
    );
    rows
}

fn segment_counts_of(results: &[GridCellResult]) -> Vec<usize> {
    let mut segments: Vec<usize> = results.iter().map(|r| r.segments).collect();
    segments.sort_unstable();
    segments.dedup();
    segments
}

/// Writes the grid reports into `dir` and returns the paths written.
///
/// Machine form: one `report_<segments>.csv` per segment count with
/// full-precision scores. Human form: `report.md` with one table per segment
/// count, scores rounded to four decimals, degeneracy flags marked.
pub fn emit_report(
    results: &[GridCellResult],
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    fs::create_dir_all(dir)?;
    let segments = segment_counts_of(results);
    let mut written = Vec::new();
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        for &s in &segments {
            let path = dir.join(format!("report_{s}.csv"));
            let mut out = String::new();
            out.push_str("drt,components,silhouette,calinski_harabasz,davies_bouldin,flags\n");
            for row in presentation_rows(results, s) {
                out.push_str(&csv_row(row));
            }
            fs::write(&path, out)?;
            written.push(path);
        }
    }
    if matches!(format, ReportFormat::Markdown | ReportFormat::Both) {
        let path = dir.join("report.md");
        fs::write(&path, markdown_report(results, &segments))?;
        written.push(path);
    }
    Ok(written)
}

fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn csv_row(row: &GridCellResult) -> String {
    let (sil, ch, db, flags) = match &row.outcome {
        CellOutcome::Report(report) => (
            machine_score(report, "silhouette", report.silhouette),
            machine_score(report, "calinski_harabasz", report.calinski_harabasz),
            machine_score(report, "davies_bouldin", report.davies_bouldin),
            report
                .flags
                .iter()
                .map(|f| f.as_str())
                .collect::<Vec<_>>()
                .join(";"),
        ),
        CellOutcome::Error(reason) => {
            let err = format!("ERR({reason})");
            (err.clone(), err.clone(), err, String::new())
        }
    };
    format!(
        "{},{},{},{},{},{}\n",
        row.method.as_str(),
        row.components,
        csv_field(&sil),
        csv_field(&ch),
        csv_field(&db),
        csv_field(&flags),
    )
}

fn markdown_report(results: &[GridCellResult], segments: &[usize]) -> String {
    let mut out = String::from("# Clustering verification grid\n");
    let mut used_scatter_marker = false;
    let mut used_singleton_marker = false;
    for &s in segments {
        out.push_str(&format!("\n## Configuration: {s} segments\n\n"));
        out.push_str("| DRT | Components | Silhouette | Calinski-Harabasz | Davies-Bouldin |\n");
        out.push_str("| --- | ---: | ---: | ---: | ---: |\n");
        for row in presentation_rows(results, s) {
            let (sil, ch, db) = match &row.outcome {
                CellOutcome::Report(report) => {
                    let sil_marker = if report.flags.contains(&DegeneracyFlag::SingletonPresent) {
                        used_singleton_marker = true;
                        "&dagger;"
                    } else {
                        ""
                    };
                    let db_marker = if report.flags.contains(&DegeneracyFlag::DbZeroScatter) {
                        used_scatter_marker = true;
                        "\\*"
                    } else {
                        ""
                    };
                    (
                        human_score(report, "silhouette", report.silhouette, sil_marker),
                        human_score(report, "calinski_harabasz", report.calinski_harabasz, ""),
                        human_score(report, "davies_bouldin", report.davies_bouldin, db_marker),
                    )
                }
                CellOutcome::Error(reason) => {
                    let err = format!("ERR({reason})");
                    (err.clone(), err.clone(), err)
                }
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                row.method.label(),
                row.components,
                sil,
                ch,
                db,
            ));
        }
    }
    if used_scatter_marker {
        out.push_str(
            "\n\\* zero within-cluster scatter: every point coincides with its centroid.\n",
        );
    }
    if used_singleton_marker {
        out.push_str(
            "\n&dagger; at least one singleton cluster (scored 0 in the silhouette mean).\n",
        );
    }
    out
}

/// Long-form cross-tab of all three scores per (method, segment count) at a
/// fixed component count, as CSV text for external plotting.
pub fn summarize(
    results: &[GridCellResult],
    components_filter: usize,
) -> Result<String, HarnessError> {
    let matching: Vec<&GridCellResult> = results
        .iter()
        .filter(|r| r.components == components_filter)
        .collect();
    if matching.is_empty() {
        return Err(HarnessError::FilterNotInGrid(components_filter));
    }
    let mut out = String::from("method,segments,silhouette,calinski_harabasz,davies_bouldin\n");
    for row in matching {
        let (sil, ch, db) = match &row.outcome {
            CellOutcome::Report(report) => (
                machine_score(report, "silhouette", report.silhouette),
                machine_score(report, "calinski_harabasz", report.calinski_harabasz),
                machine_score(report, "davies_bouldin", report.davies_bouldin),
            ),
            CellOutcome::Error(reason) => {
                let err = format!("ERR({reason})");
                (err.clone(), err.clone(), err)
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.method.as_str(),
            row.segments,
            csv_field(&sil),
            csv_field(&ch),
            csv_field(&db),
        ));
    }
    Ok(out)
}
