//! `amlp` - command-line front end for the segmentation pipeline.
//!
//! Each subcommand is a thin wrapper over one library stage: parse, profile,
//! reduce, cluster, validate, grid, synth. No numerical logic lives here.
//! Identical invocations write identical files; every subcommand finishes
//! with one deterministic summary line on stdout. Domain failures exit
//! nonzero with a message naming the module that rejected the input.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use amlp_core::cluster::{ahc_fit, cut, ClusterAssignment, Linkage};
use amlp_core::drt::{reduce, IcaContrast, ReducerConfig, ReducerMethod};
use amlp_core::harness::{
    emit_report, run_grid_with_workers, summarize, synth_customer_id, synth_dataset, GridConfig,
    ReportFormat, SynthSpec,
};
use amlp_core::io;
use amlp_core::profiling::{
    build_profiles, parse_transactions, standardize, ProfileMatrix, ProfileSchema,
};
use amlp_core::validate::validate_all;

#[derive(Parser)]
#[command(
    name = "amlp",
    version,
    about = "Segment bank customers from transaction logs: yearly profiles, \
             dimensionality reduction, hierarchical clustering, validation indices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a transaction log and report what it contains.
    Ingest {
        /// Transaction CSV (customer_id,timestamp,txn_class,direction,amount).
        #[arg(long)]
        input: PathBuf,
        /// Profiling year (default schema year).
        #[arg(long)]
        year: Option<i32>,
    },
    /// Build the yearly per-customer profile matrix from a transaction log.
    Profile {
        #[arg(long)]
        input: PathBuf,
        /// Profile matrix CSV to write.
        #[arg(long)]
        output: PathBuf,
        /// Profiling year (default schema year).
        #[arg(long)]
        year: Option<i32>,
    },
    /// Standardize a profile matrix and fit one dimensionality reducer.
    Reduce {
        /// Profile matrix CSV (as written by `profile`).
        #[arg(long)]
        input: PathBuf,
        /// Embedding CSV to write.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "svd")]
        method: ReducerMethod,
        /// Embedding dimension (ignored by method `none`).
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// RBF width for kpca; omit for the median-distance rule.
        #[arg(long)]
        kpca_sigma: Option<f64>,
        #[arg(long, default_value_t = 10)]
        lpp_neighbors: usize,
        /// Heat-kernel scale for lpp; omit for the mean-distance rule.
        #[arg(long)]
        lpp_heat: Option<f64>,
        #[arg(long, default_value = "logcosh")]
        ica_contrast: IcaContrast,
        #[arg(long, default_value_t = 1e-6)]
        ica_tol: f64,
        #[arg(long, default_value_t = 500)]
        ica_max_iter: usize,
        /// Optional plain-text dump of the fitted model for audit.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Cluster an embedding with agglomerative hierarchical clustering.
    Cluster {
        /// Embedding CSV (as written by `reduce`).
        #[arg(long)]
        input: PathBuf,
        /// Number of segments to cut the dendrogram into.
        #[arg(long)]
        segments: usize,
        #[arg(long, default_value = "ward")]
        linkage: Linkage,
        /// Labels CSV to write (customer_id,label).
        #[arg(long)]
        labels_out: PathBuf,
        /// Optional merge-sequence CSV (left,right,height,size).
        #[arg(long)]
        dendrogram_out: Option<PathBuf>,
    },
    /// Score a segmentation with silhouette, CH, and DB indices.
    Validate {
        /// Embedding CSV the labels refer to.
        #[arg(long)]
        input: PathBuf,
        /// Labels CSV (customer_id,label); mutually exclusive with --k.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Cluster the input into K segments first, then score.
        #[arg(long)]
        k: Option<usize>,
        /// Linkage used when --k is given.
        #[arg(long, default_value = "ward")]
        linkage: Linkage,
        /// Also write the score record to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the reducer x components x segments grid and emit report tables.
    Grid {
        /// Profile matrix CSV (as written by `profile`).
        #[arg(long)]
        input: PathBuf,
        /// Key-value config file; flags below override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for report files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value = "both")]
        format: ReportFormat,
        /// Component count for summary_c<k>.csv (default: smallest in grid).
        #[arg(long)]
        summary_components: Option<usize>,
        #[command(flatten)]
        overrides: GridOverrides,
    },
    /// Generate a synthetic transaction log with ground-truth groups.
    Synth {
        #[arg(long, default_value_t = 4099)]
        customers: usize,
        /// Number of latent behavior groups.
        #[arg(long, default_value_t = 3)]
        groups: usize,
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.25)]
        noise: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Transaction CSV to write.
        #[arg(long, default_value = "transactions.csv")]
        output: PathBuf,
        /// Ground-truth group CSV to write.
        #[arg(long, default_value = "groups.csv")]
        truth_out: PathBuf,
    },
}

/// Grid settings that override the config file, which overrides defaults.
#[derive(Args)]
struct GridOverrides {
    /// Comma-separated component counts, e.g. 2,10,20,40.
    #[arg(long)]
    components: Option<String>,
    /// Comma-separated segment counts, e.g. 3,5,7,9.
    #[arg(long)]
    segments: Option<String>,
    /// Comma-separated reducer methods, e.g. ica,kpca,svd,lpp.
    #[arg(long)]
    methods: Option<String>,
    /// Whether to append the no-reduction baseline row per segment count.
    #[arg(long)]
    include_baseline: Option<bool>,
    #[arg(long)]
    linkage: Option<Linkage>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    kpca_sigma: Option<f64>,
    #[arg(long)]
    lpp_neighbors: Option<usize>,
    #[arg(long)]
    lpp_heat: Option<f64>,
    #[arg(long)]
    ica_contrast: Option<IcaContrast>,
    #[arg(long)]
    ica_tol: Option<f64>,
    #[arg(long)]
    ica_max_iter: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, year } => cmd_ingest(&input, year),
        Command::Profile {
            input,
            output,
            year,
        } => cmd_profile(&input, &output, year),
        Command::Reduce {
            input,
            output,
            method,
            components,
            seed,
            kpca_sigma,
            lpp_neighbors,
            lpp_heat,
            ica_contrast,
            ica_tol,
            ica_max_iter,
            model_out,
        } => {
            let cfg = ReducerConfig {
                method,
                k: components,
                seed,
                kpca_sigma,
                lpp_neighbors,
                lpp_heat,
                ica_contrast,
                ica_tol,
                ica_max_iter,
            };
            cmd_reduce(&input, &output, &cfg, model_out.as_deref())
        }
        Command::Cluster {
            input,
            segments,
            linkage,
            labels_out,
            dendrogram_out,
        } => cmd_cluster(
            &input,
            segments,
            linkage,
            &labels_out,
            dendrogram_out.as_deref(),
        ),
        Command::Validate {
            input,
            labels,
            k,
            linkage,
            output,
        } => cmd_validate(&input, labels.as_deref(), k, linkage, output.as_deref()),
        Command::Grid {
            input,
            config,
            out_dir,
            format,
            summary_components,
            overrides,
        } => cmd_grid(
            &input,
            config.as_deref(),
            &out_dir,
            format,
            summary_components,
            &overrides,
        ),
        Command::Synth {
            customers,
            groups,
            separation,
            noise,
            seed,
            output,
            truth_out,
        } => cmd_synth(
            customers, groups, separation, noise, seed, &output, &truth_out,
        ),
    }
}

fn schema_for(year: Option<i32>) -> Result<ProfileSchema> {
    match year {
        None => Ok(ProfileSchema::default()),
        Some(y) => {
            let classes = ProfileSchema::default().classes().to_vec();
            ProfileSchema::new(classes, y).map_err(|e| anyhow!("profiling: {e}"))
        }
    }
}

fn read_profiles(path: &Path) -> Result<ProfileMatrix> {
    let (customer_ids, feature_names, values) =
        io::read_matrix_csv(path).map_err(|e| anyhow!("io: {e}"))?;
    Ok(ProfileMatrix {
        customer_ids,
        feature_names,
        values,
    })
}

fn cmd_ingest(input: &Path, year: Option<i32>) -> Result<()> {
    let schema = schema_for(year)?;
    let file = fs::File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    let records = parse_transactions(file, &schema).map_err(|e| anyhow!("profiling: {e}"))?;
    let customers: BTreeSet<&str> = records.iter().map(|r| r.customer_id.as_str()).collect();
    let classes: BTreeSet<&str> = records.iter().map(|r| r.txn_class.as_str()).collect();
    let total: f64 = records.iter().map(|r| r.amount).sum();
    println!(
        "ingest: {} records, {} customers, {} transaction classes in use, total amount {:.2}",
        records.len(),
        customers.len(),
        classes.len(),
        total,
    );
    Ok(())
}

fn cmd_profile(input: &Path, output: &Path, year: Option<i32>) -> Result<()> {
    let schema = schema_for(year)?;
    let file = fs::File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    let records = parse_transactions(file, &schema).map_err(|e| anyhow!("profiling: {e}"))?;
    let profiles =
        build_profiles(&records, &schema, None).map_err(|e| anyhow!("profiling: {e}"))?;
    io::write_matrix_csv(
        output,
        &profiles.customer_ids,
        &profiles.feature_names,
        &profiles.values,
    )
    .map_err(|e| anyhow!("io: {e}"))?;
    println!(
        "profile: {} customers x {} features -> {}",
        profiles.values.rows(),
        profiles.values.cols(),
        output.display(),
    );
    Ok(())
}

fn cmd_reduce(
    input: &Path,
    output: &Path,
    cfg: &ReducerConfig,
    model_out: Option<&Path>,
) -> Result<()> {
    let profiles = read_profiles(input)?;
    let (z, _, _) = standardize(&profiles).map_err(|e| anyhow!("profiling: {e}"))?;
    log::debug!("standardized {} x {}", z.rows(), z.cols());
    let embedding = reduce(&z, cfg).map_err(|e| anyhow!("drt: {e}"))?;
    let columns: Vec<String> = (1..=embedding.values.cols())
        .map(|i| format!("c{i}"))
        .collect();
    io::write_matrix_csv(output, &profiles.customer_ids, &columns, &embedding.values)
        .map_err(|e| anyhow!("io: {e}"))?;
    if let Some(path) = model_out {
        io::write_model_text(path, &embedding).map_err(|e| anyhow!("io: {e}"))?;
    }
    println!(
        "reduce: {} mapped {} x {} to {} components -> {}",
        cfg.method,
        z.rows(),
        z.cols(),
        embedding.values.cols(),
        output.display(),
    );
    Ok(())
}

fn cmd_cluster(
    input: &Path,
    segments: usize,
    linkage: Linkage,
    labels_out: &Path,
    dendrogram_out: Option<&Path>,
) -> Result<()> {
    let (ids, _, values) = io::read_matrix_csv(input).map_err(|e| anyhow!("io: {e}"))?;
    let dendrogram = ahc_fit(&values, linkage).map_err(|e| anyhow!("cluster: {e}"))?;
    let assignment = cut(&dendrogram, segments).map_err(|e| anyhow!("cluster: {e}"))?;
    io::write_labels_csv(labels_out, &ids, &assignment.labels).map_err(|e| anyhow!("io: {e}"))?;
    if let Some(path) = dendrogram_out {
        io::write_dendrogram_csv(path, &dendrogram).map_err(|e| anyhow!("io: {e}"))?;
    }
    println!(
        "cluster: {} linkage cut {} samples into {} segments -> {}",
        linkage,
        values.rows(),
        assignment.k,
        labels_out.display(),
    );
    Ok(())
}

fn cmd_validate(
    input: &Path,
    labels: Option<&Path>,
    k: Option<usize>,
    linkage: Linkage,
    output: Option<&Path>,
) -> Result<()> {
    let (ids, _, values) = io::read_matrix_csv(input).map_err(|e| anyhow!("io: {e}"))?;
    let assignment = match (labels, k) {
        (Some(path), None) => {
            let (label_ids, labels) = io::read_labels_csv(path).map_err(|e| anyhow!("io: {e}"))?;
            if label_ids != ids {
                bail!("validate: label rows do not match the input matrix rows");
            }
            let k = labels.iter().max().map_or(0, |&m| m + 1);
            ClusterAssignment { labels, k }
        }
        (None, Some(k)) => {
            if k < 2 {
                bail!("validate: K must be at least 2, got {k}");
            }
            let dendrogram = ahc_fit(&values, linkage).map_err(|e| anyhow!("cluster: {e}"))?;
            cut(&dendrogram, k).map_err(|e| anyhow!("cluster: {e}"))?
        }
        _ => bail!("validate: provide exactly one of --labels or --k"),
    };
    let report = validate_all(&values, &assignment).map_err(|e| anyhow!("validate: {e}"))?;
    let record = report.to_json();
    if let Some(path) = output {
        fs::write(path, format!("{record}\n"))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!("{record}");
    Ok(())
}

/// Worker count for the grid: AMLP_THREADS if set (0 means one per core).
fn workers_from_env() -> Result<usize> {
    match std::env::var("AMLP_THREADS") {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| anyhow!("AMLP_THREADS must be an unsigned integer, got '{raw}'")),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(anyhow!("AMLP_THREADS: {e}")),
    }
}

fn parse_count_list(what: &str, raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| anyhow!("{what}: not a count: '{}'", s.trim()))
        })
        .collect()
}

fn grid_config(config: Option<&Path>, overrides: &GridOverrides) -> Result<GridConfig> {
    let mut cfg = match config {
        None => GridConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            GridConfig::from_kv_text(&text).map_err(|e| anyhow!("harness: {e}"))?
        }
    };
    if let Some(raw) = &overrides.components {
        cfg.component_counts = parse_count_list("--components", raw)?;
    }
    if let Some(raw) = &overrides.segments {
        cfg.segment_counts = parse_count_list("--segments", raw)?;
    }
    if let Some(raw) = &overrides.methods {
        cfg.methods = raw
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| anyhow!("--methods: {e}")))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = overrides.include_baseline {
        cfg.include_baseline = v;
    }
    if let Some(v) = overrides.linkage {
        cfg.linkage = v;
    }
    if let Some(v) = overrides.master_seed {
        cfg.master_seed = v;
    }
    if let Some(v) = overrides.kpca_sigma {
        cfg.kpca_sigma = Some(v);
    }
    if let Some(v) = overrides.lpp_neighbors {
        cfg.lpp_neighbors = v;
    }
    if let Some(v) = overrides.lpp_heat {
        cfg.lpp_heat = Some(v);
    }
    if let Some(v) = overrides.ica_contrast {
        cfg.ica_contrast = v;
    }
    if let Some(v) = overrides.ica_tol {
        cfg.ica_tol = v;
    }
    if let Some(v) = overrides.ica_max_iter {
        cfg.ica_max_iter = v;
    }
    Ok(cfg)
}

fn cmd_grid(
    input: &Path,
    config: Option<&Path>,
    out_dir: &Path,
    format: ReportFormat,
    summary_components: Option<usize>,
    overrides: &GridOverrides,
) -> Result<()> {
    let profiles = read_profiles(input)?;
    let cfg = grid_config(config, overrides)?;
    let workers = workers_from_env()?;
    log::debug!("running grid with {workers} workers (0 = auto)");
    let results =
        run_grid_with_workers(&profiles, &cfg, workers).map_err(|e| anyhow!("harness: {e}"))?;
    let error_cells = results
        .iter()
        .filter(|r| matches!(r.outcome, amlp_core::harness::CellOutcome::Error(_)))
        .count();
    let mut paths = emit_report(&results, format, out_dir).map_err(|e| anyhow!("harness: {e}"))?;
    let filter = summary_components.unwrap_or_else(|| cfg.component_counts[0]);
    let summary = summarize(&results, filter).map_err(|e| anyhow!("harness: {e}"))?;
    let summary_path = out_dir.join(format!("summary_c{filter}.csv"));
    fs::write(&summary_path, summary)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;
    paths.push(summary_path);
    let names: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    println!(
        "grid: {} rows, {} error cells, wrote {}",
        results.len(),
        error_cells,
        names.join(" "),
    );
    Ok(())
}

fn cmd_synth(
    customers: usize,
    groups: usize,
    separation: f64,
    noise: f64,
    seed: u64,
    output: &Path,
    truth_out: &Path,
) -> Result<()> {
    let spec = SynthSpec {
        n_customers: customers,
        schema: ProfileSchema::default(),
        n_behavior_groups: groups,
        group_separation: separation,
        noise_scale: noise,
        seed,
    };
    let (records, truth) = synth_dataset(&spec).map_err(|e| anyhow!("harness: {e}"))?;
    io::write_transactions_csv(output, &records).map_err(|e| anyhow!("io: {e}"))?;
    let ids: Vec<String> = (0..customers).map(synth_customer_id).collect();
    io::write_groups_csv(truth_out, &ids, &truth).map_err(|e| anyhow!("io: {e}"))?;
    println!(
        "synth: {} customers in {} groups, {} transactions -> {} + {}",
        customers,
        groups,
        records.len(),
        output.display(),
        truth_out.display(),
    );
    Ok(())
}
