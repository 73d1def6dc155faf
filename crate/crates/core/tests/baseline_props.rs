mod common;

use common::{components, heat_trace_by_expm, random_permutation, random_unweighted, rng};
use i2bgnn::baselines::{
    fgsd_signature, harmonic_distances, heat_trace, laplacian_pseudoinverse, laplacian_spectrum, netlsd_signature,
    FgsdConfig, KnnModel, NetlsdConfig,
};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn heat_trace_limits(m in 1usize..=30, density in 0.0f64..0.4, seed in any::<u64>()) {
        let sg = random_unweighted(&mut rng(seed), m, density);
        let spectrum = laplacian_spectrum(&sg);
        // h(t) = m − t·tr(L) + O(t²) and tr(L) ≤ m, so the small-t limit holds relative to m
        prop_assert!((heat_trace(&spectrum, 1e-6) / m as f64 - 1.0).abs() < 1e-5);
        prop_assert!((heat_trace(&spectrum, 1e6) - components(&sg.volume) as f64).abs() < 1e-6);
    }

    #[test]
    fn heat_trace_matches_matrix_exponential(m in 1usize..=20, density in 0.0f64..0.5, seed in any::<u64>(), t in 0.01f64..10.0) {
        let sg = random_unweighted(&mut rng(seed), m, density);
        let spectrum = laplacian_spectrum(&sg);
        prop_assert!((heat_trace(&spectrum, t) - heat_trace_by_expm(&sg, t)).abs() < 1e-9 * m as f64);
    }

    #[test]
    fn signatures_ignore_node_order(m in 1usize..=25, density in 0.05f64..0.5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let sg = random_unweighted(&mut r, m, density);
        let perm = random_permutation(&mut r, m);
        let sp = sg.permuted(&perm);
        let n = NetlsdConfig::default();
        let a = netlsd_signature(&sg, &n).unwrap().values;
        let b = netlsd_signature(&sp, &n).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let mut da = harmonic_distances(&sg);
        let mut db = harmonic_distances(&sp);
        da.sort_by(f64::total_cmp);
        db.sort_by(f64::total_cmp);
        for (x, y) in da.iter().zip(&db) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pseudoinverse_satisfies_penrose_identity(m in 1usize..=20, density in 0.0f64..0.5, seed in any::<u64>()) {
        let sg = random_unweighted(&mut rng(seed), m, density);
        let pinv = laplacian_pseudoinverse(&sg);
        let a = i2bgnn::baselines::binarized_adjacency(&sg);
        let l = i2bgnn::baselines::normalized_laplacian(&a);
        let lpl = &l * &pinv * &l;
        prop_assert!((lpl - &l).amax() < 1e-8);
    }

    #[test]
    fn knn_matches_exhaustive_vote(n in 5usize..40, dim in 1usize..4, k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let mut r = rng(seed);
        // integer coordinates make distance ties common
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(0..4) as f64).collect()).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let model = KnnModel::fit(pts.clone(), labels.clone(), k).unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..dim).map(|_| r.random_range(0..4) as f64).collect();
            let mut order: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let ones = order[..k].iter().filter(|&&(_, i)| labels[i] == 1).count();
            let expected = u8::from(2 * ones > k);
            prop_assert_eq!(model.predict(&q).unwrap(), expected);
        }
    }
}

#[test]
fn fgsd_histogram_counts_every_pair() {
    let sg = random_unweighted(&mut rng(11), 12, 0.3);
    let cfg = FgsdConfig::calibrated(128, [&sg]);
    let sig = fgsd_signature(&sg, &cfg).unwrap();
    assert_eq!(sig.values.iter().sum::<f64>(), 66.0);
}
