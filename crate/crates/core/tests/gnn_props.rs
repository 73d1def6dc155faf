mod common;

use common::{
    batch_of, dense_forward, gradient_check, max_abs_diff, random_params, random_permutation, random_subgraph, rng,
    spectrum_stats,
};
use i2bgnn::gnn::{forward, normalize, BatchedGraphs, GraphInput, InputOptions, Variant, WeightTransform};
use i2bgnn::sparse::CsrMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

fn no_dropout(batch: &BatchedGraphs, params: &i2bgnn::gnn::ModelParams) -> Array2<f64> {
    forward::<ChaCha8Rng>(batch, params, 0.0, None).unwrap().probs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_spectrum_is_bounded(m in 1usize..=64, density in 0.0f64..0.5, seed in any::<u64>(), raw in any::<bool>()) {
        let a = common::random_symmetric(&mut rng(seed), m, density);
        let t = if raw { WeightTransform::Raw } else { WeightTransform::Log1p };
        let n = normalize(&a, t).unwrap();
        let (asym, min_entry, lo, hi) = spectrum_stats(&n.a_hat);
        prop_assert!(asym <= 1e-12);
        prop_assert!(min_entry >= 0.0);
        prop_assert!(lo >= -1.0 - 1e-9 && hi <= 1.0 + 1e-9);
        // the top eigenvalue of D^-1/2 (A+I) D^-1/2 is exactly 1
        prop_assert!((hi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_forward_matches_dense_reference(m in 1usize..=12, f in 1usize..=5, h in 1usize..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let sg = random_subgraph(&mut r, m, f, 0.4);
        let params = random_params(&mut r, f, h);
        let input = GraphInput::prepare(&sg, &InputOptions { variant: Variant::Volume, ..Default::default() }).unwrap();
        let z = no_dropout(&batch_of(&[input]), &params);
        let oracle = dense_forward(&sg.volume.to_dense(), &sg.features.to_dense(), &params, true);
        for k in 0..2 {
            prop_assert!((z[[0, k]] - oracle[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn node_permutation_leaves_output_unchanged(m in 1usize..=20, seed in any::<u64>()) {
        let mut r = rng(seed);
        let sg = random_subgraph(&mut r, m, 4, 0.3);
        let params = random_params(&mut r, 4, 6);
        let perm = random_permutation(&mut r, m);
        let opts = InputOptions::default();
        let z = no_dropout(&batch_of(&[GraphInput::prepare(&sg, &opts).unwrap()]), &params);
        let zp = no_dropout(&batch_of(&[GraphInput::prepare(&sg.permuted(&perm), &opts).unwrap()]), &params);
        prop_assert!(max_abs_diff(&z, &zp) < 1e-12);
    }

    #[test]
    fn batched_forward_equals_separate_forwards(sizes in prop::collection::vec(1usize..=10, 1..=6), seed in any::<u64>()) {
        let mut r = rng(seed);
        let inputs: Vec<GraphInput> = sizes
            .iter()
            .map(|&m| GraphInput::prepare(&random_subgraph(&mut r, m, 3, 0.4), &InputOptions::default()).unwrap())
            .collect();
        let params = random_params(&mut r, 3, 4);
        let together = no_dropout(&batch_of(&inputs), &params);
        for (g, input) in inputs.iter().enumerate() {
            let alone = no_dropout(&batch_of(std::slice::from_ref(input)), &params);
            for k in 0..2 {
                prop_assert!((together[[g, k]] - alone[[0, k]]).abs() < 1e-10);
            }
        }
        prop_assert_eq!(batch_of(&inputs).segment_ids().len(), sizes.iter().sum::<usize>());
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut done = 0;
    let mut seed = 0;
    while done < 40 {
        let dropout = if done % 2 == 0 { 0.0 } else { 0.3 };
        if let Some(check) = gradient_check(seed, dropout, 1e-5) {
            assert!(check.max_rel_error < 1e-4, "seed {seed}: relative error {}", check.max_rel_error);
            done += 1;
        }
        seed += 1;
    }
}

#[test]
fn isolated_center_is_handled() {
    let sg = random_subgraph(&mut rng(1), 1, 3, 0.0);
    let input = GraphInput::prepare(&sg, &InputOptions::default()).unwrap();
    assert_eq!(input.adjacency.to_dense()[[0, 0]], 1.0);
    let params = random_params(&mut rng(2), 3, 4);
    let z = no_dropout(&batch_of(&[input]), &params);
    assert!((z.row(0).sum() - 1.0).abs() < 1e-15);
}

#[test]
fn dropout_is_inverted_in_expectation() {
    // mean of the mask over many draws approaches 1
    let sg = random_subgraph(&mut rng(3), 8, 3, 0.5);
    let input = GraphInput::prepare(&sg, &InputOptions::default()).unwrap();
    let batch = batch_of(&[input]);
    let params = random_params(&mut rng(4), 3, 16);
    let mut r = rng(5);
    let mut total = 0.0;
    let mut count = 0.0;
    for _ in 0..200 {
        let t = forward(&batch, &params, 0.3, Some(&mut r)).unwrap();
        let m = t.mask1.unwrap();
        total += m.sum();
        count += m.len() as f64;
    }
    assert!((total / count - 1.0).abs() < 0.02);
}

#[test]
fn asymmetric_adjacency_is_rejected() {
    let a = CsrMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap();
    assert!(normalize(&a, WeightTransform::Raw).is_err());
}
