//! Acceptance gate for the whole pipeline. Each criterion is one test with
//! pinned tolerances and (where stated) a wall-clock budget; every test ends
//! by printing a single PASS line describing what was established. Oracles
//! live in `common` and are written from definitions, independent of the
//! library code under test.

mod common;

use std::time::Instant;

use amlp_core::cluster::{ahc_fit, cut, ClusterAssignment, Linkage};
use amlp_core::drt::{reduce, ReducerConfig, ReducerMethod, ReducerModel};
use amlp_core::harness::{
    emit_report, run_grid, synth_dataset, GridConfig, ReportFormat, SynthSpec,
};
use amlp_core::linalg::{svd, Matrix};
use amlp_core::profiling::{build_profiles, standardize};
use amlp_core::validate::{
    calinski_harabasz, davies_bouldin, silhouette, validate_all, DegeneracyFlag,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assignment(labels: &[usize]) -> ClusterAssignment {
    ClusterAssignment {
        labels: labels.to_vec(),
        k: labels.iter().max().unwrap() + 1,
    }
}

/// Random blob instance: K seeded centers, points jittered around them,
/// every cluster non-empty.
fn random_instance(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    max_d: usize,
) -> (Matrix, Vec<Vec<f64>>, Vec<usize>) {
    let k = rng.gen_range(2..=5usize);
    let n = rng.gen_range((k + 1).max(6)..=max_n);
    let d = rng.gen_range(1..=max_d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = if i < k { i } else { rng.gen_range(0..k) };
        labels.push(c);
        rows.push(
            (0..d)
                .map(|_| c as f64 * 4.0 + rng.gen_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        );
    }
    let x = Matrix::from_rows(&rows).unwrap();
    (x, rows, labels)
}

#[test]
fn criterion_01_indices_match_independent_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut checked = 0usize;
    for _ in 0..200 {
        let (x, rows, labels) = random_instance(&mut rng, 50, 10);
        let a = assignment(&labels);
        let sil = silhouette(&x, &a).unwrap().mean;
        let ch = calinski_harabasz(&x, &a).unwrap().score;
        let db = davies_bouldin(&x, &a).unwrap().score;
        let sil_o = common::oracle::silhouette(&rows, &labels);
        let ch_o = common::oracle::calinski_harabasz(&rows, &labels);
        let db_o = common::oracle::davies_bouldin(&rows, &labels);
        assert!(
            (sil - sil_o).abs() <= 1e-9,
            "silhouette {sil} vs oracle {sil_o}"
        );
        assert!(
            (ch - ch_o).abs() <= 1e-9 * ch_o.abs().max(1.0),
            "calinski-harabasz {ch} vs oracle {ch_o}"
        );
        assert!(
            (db - db_o).abs() <= 1e-9,
            "davies-bouldin {db} vs oracle {db_o}"
        );
        checked += 1;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "took {elapsed:.2?}, budget 10s"
    );
    println!(
        "PASS criterion 01 (index oracle suite): {checked} instances within 1e-9 in {elapsed:.2?}"
    );
}

#[test]
fn criterion_02_hand_derived_values() {
    let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 10.0, 11.0]).unwrap();
    let a = assignment(&[0, 0, 1, 1]);
    let sil = silhouette(&x, &a).unwrap().mean;
    let ch = calinski_harabasz(&x, &a).unwrap().score;
    let db = davies_bouldin(&x, &a).unwrap().score;
    assert!((sil - 0.899749).abs() <= 1e-6, "silhouette {sil}");
    assert!((ch - 200.0).abs() <= 1e-9, "calinski-harabasz {ch}");
    assert!((db - 0.1).abs() <= 1e-12, "davies-bouldin {db}");
    println!(
        "PASS criterion 02 (hand-derived values): sil {sil:.6}, ch {ch}, db {db} on {{0,1}} u {{10,11}}"
    );
}

#[test]
fn criterion_03_ahc_matches_brute_force() {
    let started = Instant::now();
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let n = rng.gen_range(2..=8usize);
        let d = rng.gen_range(1..=3usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        for linkage in Linkage::ALL {
            let fitted = ahc_fit(&x, linkage).unwrap();
            let expected = common::ahc_oracle(&rows, linkage);
            assert_eq!(fitted.merges.len(), expected.len());
            for (m, (left, right, height, size)) in fitted.merges.iter().zip(&expected) {
                assert_eq!(
                    (m.left, m.right, m.size),
                    (*left, *right, *size),
                    "{linkage} merge tree diverged (seed {seed})"
                );
                assert!(
                    (m.height - height).abs() <= 1e-9 * height.abs().max(1.0),
                    "{linkage} height {} vs oracle {height} (seed {seed})",
                    m.height
                );
            }
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:.2?}, budget 5s");
    println!(
        "PASS criterion 03 (agglomeration oracle): {checked} merge sequences reproduced in {elapsed:.2?}"
    );
}

#[test]
fn criterion_04_svd_reconstruction_and_truncation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4001);
    let x = common::random_matrix(&mut rng, 20, 10);
    let dec = svd(&x).unwrap();
    let norm = x.frobenius_norm();
    let r = dec.sigma.len();
    // Full reconstruction from the factored form.
    let rebuild = |keep: usize| -> Matrix {
        let mut scaled = dec.u.clone();
        for j in 0..r {
            let s = if j < keep { dec.sigma[j] } else { 0.0 };
            for i in 0..scaled.rows() {
                scaled[(i, j)] *= s;
            }
        }
        scaled.matmul(&dec.v.transpose())
    };
    let full = rebuild(r);
    let mut recon_err = 0.0f64;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            recon_err += (full[(i, j)] - x[(i, j)]).powi(2);
        }
    }
    let recon_rel = recon_err.sqrt() / norm;
    assert!(
        recon_rel < 1e-8,
        "reconstruction relative error {recon_rel}"
    );
    // Truncating to k keeps exactly the tail energy.
    for k in 0..=r {
        let xk = rebuild(k);
        let mut err = 0.0f64;
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                err += (xk[(i, j)] - x[(i, j)]).powi(2);
            }
        }
        let tail: f64 = dec.sigma[k..].iter().map(|s| s * s).sum();
        assert!(
            (err.sqrt() - tail.sqrt()).abs() <= 1e-7 * norm,
            "rank-{k} error {} vs tail {}",
            err.sqrt(),
            tail.sqrt()
        );
    }
    println!(
        "PASS criterion 04 (svd properties): reconstruction {recon_rel:.2e}, truncation identity held for k = 0..={r}"
    );
}

#[test]
fn criterion_05_ica_recovers_rotated_sources() {
    let started = Instant::now();
    let n = 2000;
    let (sin30, cos30) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
    let lim = 3f64.sqrt();
    let mut successes = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let s1: Vec<f64> = (0..n).map(|_| rng.gen_range(-lim..lim)).collect();
        let s2: Vec<f64> = (0..n).map(|_| rng.gen_range(-lim..lim)).collect();
        let mut data = Vec::with_capacity(n * 2);
        for i in 0..n {
            data.push(cos30 * s1[i] - sin30 * s2[i]);
            data.push(sin30 * s1[i] + cos30 * s2[i]);
        }
        let x = Matrix::from_vec(n, 2, data).unwrap();
        let cfg = ReducerConfig::new(ReducerMethod::Ica, 2).with_seed(seed);
        let Ok(emb) = reduce(&x, &cfg) else { continue };
        let e0 = emb.values.col(0);
        let e1 = emb.values.col(1);
        let c = [
            common::correlation(&e0, &s1).abs(),
            common::correlation(&e0, &s2).abs(),
            common::correlation(&e1, &s1).abs(),
            common::correlation(&e1, &s2).abs(),
        ];
        // Each component must claim a distinct source.
        if (c[0] >= 0.95 && c[3] >= 0.95) || (c[1] >= 0.95 && c[2] >= 0.95) {
            successes += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        successes >= 95,
        "only {successes}/100 seeds recovered both sources"
    );
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "took {elapsed:.2?}, budget 30s"
    );
    println!(
        "PASS criterion 05 (ica recovery): {successes}/100 seeds recovered both sources in {elapsed:.2?}"
    );
}

#[test]
fn criterion_06_kpca_separates_circles_where_svd_cannot() {
    let started = Instant::now();
    // The rings must be well separated for the median-heuristic sigma to put
    // the radial contrast ahead of the rings' angular harmonics at k = 2.
    let (x, truth) = common::concentric_circles(100, 0.3, 3.0, 0.05, 6001);
    let cluster_with = |method: ReducerMethod| -> f64 {
        let cfg = ReducerConfig::new(method, 2).with_seed(61);
        let emb = reduce(&x, &cfg).unwrap();
        let labels = cut(&ahc_fit(&emb.values, Linkage::Ward).unwrap(), 2)
            .unwrap()
            .labels;
        common::ari(&labels, &truth)
    };
    let kpca_ari = cluster_with(ReducerMethod::Kpca);
    let svd_ari = cluster_with(ReducerMethod::Svd);
    let elapsed = started.elapsed();
    assert!(kpca_ari >= 0.99, "kpca ari {kpca_ari}");
    assert!(svd_ari <= 0.6, "svd ari {svd_ari} unexpectedly high");
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "took {elapsed:.2?}, budget 10s"
    );
    println!(
        "PASS criterion 06 (kernel advantage): kpca ari {kpca_ari:.3} vs svd ari {svd_ari:.3} in {elapsed:.2?}"
    );
}

#[test]
fn criterion_07_lpp_no_rival_projection_scores_lower() {
    let n = 200;
    let d = 10;
    let k = 2;
    let neighbors = 10;
    let mut rivals_beaten = 0usize;
    for data_seed in [7001u64, 7002, 7003] {
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        let x = common::random_matrix(&mut rng, n, d);
        let cfg = ReducerConfig::new(ReducerMethod::Lpp, k);
        let emb = reduce(&x, &cfg).unwrap();
        let model = match &emb.model {
            ReducerModel::Lpp(m) => m,
            other => panic!("expected an lpp model, got {other:?}"),
        };
        // Rebuild the graph from its documented rules: directed k-NN with
        // index tie-breaks, heat = mean squared neighbor distance, symmetric
        // union of heat-kernel weights.
        let sqdist = |i: usize, j: usize| -> f64 {
            x.row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let mut knn: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut dists: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sqdist(i, j), j))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            knn.push(dists[..neighbors].iter().map(|&(dd, j)| (j, dd)).collect());
        }
        let heat: f64 =
            knn.iter().flatten().map(|&(_, dd)| dd).sum::<f64>() / (n * neighbors) as f64;
        assert!(
            (heat - model.heat).abs() <= 1e-9 * heat.max(1.0),
            "heat rule drifted: {heat} vs {}",
            model.heat
        );
        let mut aff = vec![vec![0.0f64; n]; n];
        for (i, list) in knn.iter().enumerate() {
            for &(j, dd) in list {
                let w = (-dd / heat).exp();
                aff[i][j] = w;
                aff[j][i] = w;
            }
        }
        let degrees: Vec<f64> = aff.iter().map(|row| row.iter().sum()).collect();
        // tr(W^T X^T L X W) = 1/2 sum_ij a_ij ||p_i - p_j||^2 with P = X W.
        let objective = |w: &Matrix| -> f64 {
            let p = x.matmul(w);
            let mut total = 0.0;
            for (i, row) in aff.iter().enumerate() {
                for (j, &wgt) in row.iter().enumerate() {
                    if wgt > 0.0 {
                        total += wgt
                            * p.row(i)
                                .iter()
                                .zip(p.row(j))
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>();
                    }
                }
            }
            total / 2.0
        };
        let fitted = objective(&model.projection);
        assert!(
            (fitted - model.laplacian_objective).abs() <= 1e-6 * fitted.max(1e-12),
            "objective bookkeeping drifted: {fitted} vs {}",
            model.laplacian_objective
        );
        // Rivals must be feasible: B-orthonormal under B = X^T D X.
        let mut b = Matrix::zeros(d, d);
        for a in 0..d {
            for c in a..d {
                let mut s = 0.0;
                for i in 0..n {
                    s += degrees[i] * x[(i, a)] * x[(i, c)];
                }
                b[(a, c)] = s;
                b[(c, a)] = s;
            }
        }
        let b_dot = |u: &[f64], v: &[f64]| -> f64 {
            let mut s = 0.0;
            for a in 0..d {
                for c in 0..d {
                    s += u[a] * b[(a, c)] * v[c];
                }
            }
            s
        };
        for _ in 0..100 {
            let raw = common::random_matrix(&mut rng, d, k);
            let mut cols: Vec<Vec<f64>> = (0..k).map(|c| raw.col(c)).collect();
            for c in 0..k {
                for prev in 0..c {
                    let coef = b_dot(&cols[c], &cols[prev]);
                    let prev_col = cols[prev].clone();
                    for (v, p) in cols[c].iter_mut().zip(&prev_col) {
                        *v -= coef * p;
                    }
                }
                let nrm = b_dot(&cols[c], &cols[c]).sqrt();
                assert!(nrm > 1e-8, "degenerate rival draw");
                for v in cols[c].iter_mut() {
                    *v /= nrm;
                }
            }
            let mut rival = Matrix::zeros(d, k);
            for (c, col) in cols.iter().enumerate() {
                for (row_idx, &v) in col.iter().enumerate() {
                    rival[(row_idx, c)] = v;
                }
            }
            let rival_score = objective(&rival);
            assert!(
                fitted <= rival_score * (1.0 + 1e-6) + 1e-9,
                "rival beat the fitted projection: {rival_score} < {fitted} (seed {data_seed})"
            );
            rivals_beaten += 1;
        }
    }
    println!(
        "PASS criterion 07 (lpp optimality): fitted objective at or below all {rivals_beaten} feasible rivals"
    );
}

#[test]
fn criterion_08_default_grid_structure_and_reproducibility() {
    let started = Instant::now();
    let spec = SynthSpec::ci_preset();
    let (records, _) = synth_dataset(&spec).unwrap();
    let profiles = build_profiles(&records, &spec.schema, None).unwrap();
    assert_eq!(profiles.values.rows(), 500);
    assert_eq!(profiles.values.cols(), 80);
    let cfg = GridConfig::default();
    let first = run_grid(&profiles, &cfg).unwrap();
    let second = run_grid(&profiles, &cfg).unwrap();
    assert_eq!(first.len(), 68, "4 segment counts x 17 rows");
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(
            (a.segments, a.method, a.components),
            (b.segments, b.method, b.components)
        );
        assert_eq!(a.outcome, b.outcome, "cell scores changed between runs");
    }
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let paths_a = emit_report(&first, ReportFormat::Both, dir_a.path()).unwrap();
    let paths_b = emit_report(&second, ReportFormat::Both, dir_b.path()).unwrap();
    assert_eq!(paths_a.len(), 5, "four csv tables plus report.md");
    for (pa, pb) in paths_a.iter().zip(&paths_b) {
        assert_eq!(
            std::fs::read(pa).unwrap(),
            std::fs::read(pb).unwrap(),
            "{} differs between identical runs",
            pa.display()
        );
    }
    for segments in [3, 5, 7, 9] {
        let table =
            std::fs::read_to_string(dir_a.path().join(format!("report_{segments}.csv"))).unwrap();
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "drt,components,silhouette,calinski_harabasz,davies_bouldin,flags"
        );
        assert_eq!(table.lines().count(), 18, "header plus 17 rows");
        let last = table.lines().last().unwrap();
        assert!(
            last.starts_with("none,80,"),
            "baseline row last, got: {last}"
        );
    }
    let md = std::fs::read_to_string(dir_a.path().join("report.md")).unwrap();
    assert_eq!(md.matches("## Configuration:").count(), 4);
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "took {elapsed:.2?}, budget 5min"
    );
    println!(
        "PASS criterion 08 (grid structure): 4 tables x 17 rows byte-identical across runs in {elapsed:.2?}"
    );
}

#[test]
fn criterion_09_coincident_clusters_flag_zero_scatter() {
    let x = Matrix::from_vec(4, 2, vec![0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0]).unwrap();
    let a = assignment(&[0, 0, 1, 1]);
    let detail = davies_bouldin(&x, &a).unwrap();
    assert_eq!(detail.score, 0.0);
    assert!(detail.zero_scatter);
    let report = validate_all(&x, &a).unwrap();
    assert_eq!(report.davies_bouldin, Some(0.0));
    assert!(report.flags.contains(&DegeneracyFlag::DbZeroScatter));
    assert!(report.to_json().contains("db_zero_scatter"));
    println!(
        "PASS criterion 09 (degenerate davies-bouldin): 0.0 reported with db_zero_scatter flag"
    );
}

#[test]
fn criterion_10_synthetic_groups_recovered_end_to_end() {
    let started = Instant::now();
    // Full-scale default population; the baseline grid cell (no reduction,
    // ward, K = 3) must recover the planted groups.
    let spec = SynthSpec::default();
    let (records, truth) = synth_dataset(&spec).unwrap();
    let profiles = build_profiles(&records, &spec.schema, None).unwrap();
    let (z, _, _) = standardize(&profiles).unwrap();
    let cfg = ReducerConfig::new(ReducerMethod::None, z.cols());
    let emb = reduce(&z, &cfg).unwrap();
    let labels = cut(&ahc_fit(&emb.values, Linkage::Ward).unwrap(), 3)
        .unwrap()
        .labels;
    let score = common::ari(&labels, &truth);
    let elapsed = started.elapsed();
    assert!(score >= 0.9, "ari {score} below 0.9");
    println!(
        "PASS criterion 10 (end-to-end recovery): ari {score:.4} on {} customers in {elapsed:.2?}",
        spec.n_customers
    );
}

#[test]
fn criterion_11_indices_invariant_under_rigid_motion_and_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11001);
    let mut checked = 0usize;
    for trial in 0..20u64 {
        let (x, _, labels) = random_instance(&mut rng, 40, 6);
        let a = assignment(&labels);
        let base = validate_all(&x, &a).unwrap();
        let (sil, ch, db) = (
            base.silhouette.unwrap(),
            base.calinski_harabasz.unwrap(),
            base.davies_bouldin.unwrap(),
        );
        // Rotate, translate, and scale the coordinates.
        let scale = rng.gen_range(0.2..5.0);
        let moved = common::rotate_translate_scale(&x, 11100 + trial, scale);
        let report = validate_all(&moved, &a).unwrap();
        assert!(
            (report.silhouette.unwrap() - sil).abs() <= 1e-9,
            "silhouette moved: {} vs {sil}",
            report.silhouette.unwrap()
        );
        assert!(
            (report.calinski_harabasz.unwrap() - ch).abs() <= 1e-9 * ch.abs().max(1.0),
            "calinski-harabasz moved: {} vs {ch}",
            report.calinski_harabasz.unwrap()
        );
        assert!(
            (report.davies_bouldin.unwrap() - db).abs() <= 1e-9,
            "davies-bouldin moved: {} vs {db}",
            report.davies_bouldin.unwrap()
        );
        // Renaming the clusters changes nothing at all.
        let k = a.k;
        let renamed: Vec<usize> = labels.iter().map(|&c| (c + 1) % k).collect();
        let renamed_report = validate_all(&x, &assignment(&renamed)).unwrap();
        assert_eq!(base.silhouette, renamed_report.silhouette);
        assert_eq!(base.calinski_harabasz, renamed_report.calinski_harabasz);
        assert_eq!(base.davies_bouldin, renamed_report.davies_bouldin);
        checked += 1;
    }
    println!(
        "PASS criterion 11 (invariance suite): {checked} instances stable under motion, scaling, and relabeling"
    );
}
