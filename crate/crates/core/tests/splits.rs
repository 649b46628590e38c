mod common;

use common::oracles::{check_cv, check_loco, dataset};
use mdmt::data::TaskDataset;
use mdmt::evaluation::{loco_split, stratified_kfold};
use proptest::prelude::*;

/// Labels drawn so every class has at least `min_per_class` samples.
fn arb_dataset(min_per_class: usize) -> impl Strategy<Value = TaskDataset> {
    (50usize..=500, 2usize..=6, 2usize..=4).prop_flat_map(move |(n, n_centers, classes)| {
        (
            proptest::collection::vec(0..classes, n),
            proptest::collection::vec(0..n_centers, n),
            Just(n_centers),
            Just(classes),
        )
            .prop_map(move |(mut labels, mut centers, n_centers, classes)| {
                for (i, l) in labels.iter_mut().take(classes * min_per_class).enumerate() {
                    *l = i % classes;
                }
                for (i, c) in centers.iter_mut().take(n_centers).enumerate() {
                    *c = i;
                }
                dataset(&labels, &centers, classes)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn stratified_cv_invariants(d in arb_dataset(5), seed in any::<u64>()) {
        let plan = stratified_kfold(&d, 5, seed).unwrap();
        check_cv(&d, &plan, 5);
        prop_assert_eq!(&plan, &stratified_kfold(&d, 5, seed).unwrap());
    }

    #[test]
    fn loco_invariants(d in arb_dataset(1), seed in any::<u64>()) {
        let plan = loco_split(&d, seed).unwrap();
        check_loco(&d, &plan);
    }
}

#[test]
fn too_few_samples_in_a_class_is_rejected() {
    let d = dataset(&[0, 0, 0, 0, 0, 1, 1, 1], &[0; 8], 2);
    assert!(matches!(stratified_kfold(&d, 5, 0), Err(mdmt::Error::Validation(_))));
}

#[test]
fn single_center_cannot_be_left_out() {
    let d = dataset(&[0, 1, 0, 1], &[0; 4], 2);
    assert!(loco_split(&d, 0).is_err());
}
