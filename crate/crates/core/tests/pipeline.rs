//! End-to-end run at CI scale: generate transactions, profile, standardize,
//! reduce, cluster, score, and check that the planted grouping is recovered.

mod common;

use amlp_core::cluster::{ahc_fit, cut, Linkage};
use amlp_core::drt::{reduce, ReducerConfig, ReducerMethod};
use amlp_core::harness::{synth_dataset, SynthSpec};
use amlp_core::profiling::{build_profiles, standardize};
use amlp_core::validate::validate_all;

#[test]
fn ci_scale_synthetic_groups_are_recovered() {
    let spec = SynthSpec::ci_preset();
    let (records, truth) = synth_dataset(&spec).unwrap();
    let profiles = build_profiles(&records, &spec.schema, None).unwrap();
    assert_eq!(profiles.customer_ids.len(), spec.n_customers);
    assert_eq!(profiles.values.cols(), 80);
    let (z, _, _) = standardize(&profiles).unwrap();

    // Straight profile-space clustering: the planted groups are separable
    // without any reduction.
    let dendrogram = ahc_fit(&z, Linkage::Ward).unwrap();
    let assignment = cut(&dendrogram, spec.n_behavior_groups).unwrap();
    let ari = common::ari(&assignment.labels, &truth);
    assert!(ari >= 0.95, "profile-space ari {ari}");

    let report = validate_all(&z, &assignment).unwrap();
    let sil = report.silhouette.unwrap();
    assert!(sil > 0.2, "silhouette {sil} unexpectedly weak");

    // The same recovery must survive a 10-component SVD reduction.
    let cfg = ReducerConfig::new(ReducerMethod::Svd, 10).with_seed(11);
    let embedding = reduce(&z, &cfg).unwrap();
    let reduced = cut(
        &ahc_fit(&embedding.values, Linkage::Ward).unwrap(),
        spec.n_behavior_groups,
    )
    .unwrap();
    let reduced_ari = common::ari(&reduced.labels, &truth);
    assert!(reduced_ari >= 0.95, "svd-space ari {reduced_ari}");
}
