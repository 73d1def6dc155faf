mod common;

use std::collections::BTreeMap;

use common::{build_graph, random_rows, rng, Row};
use i2bgnn::graph::{graph_from_bytes, graph_to_bytes, TransactionGraph};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn edge_map(g: &TransactionGraph) -> BTreeMap<(String, String), (f64, u64)> {
    g.entries()
        .map(|(src, e)| {
            (
                (g.name(src).to_string(), g.name(e.neighbor).to_string()),
                (e.volume, e.frequency),
            )
        })
        .collect()
}

fn rows_strategy() -> impl Strategy<Value = Vec<Row>> {
    (2usize..30, 1usize..120, any::<u64>()).prop_map(|(n, m, seed)| random_rows(&mut rng(seed), n, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aggregation_ignores_row_order(rows in rows_strategy(), seed in any::<u64>()) {
        prop_assume!(rows.iter().any(|r| r.0 != r.1));
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng(seed));
        let a = build_graph(&rows);
        let b = build_graph(&shuffled);
        prop_assert_eq!(edge_map(&a), edge_map(&b));
        let mut na = a.names().to_vec();
        let mut nb = b.names().to_vec();
        na.sort();
        nb.sort();
        prop_assert_eq!(na, nb);
    }

    #[test]
    fn one_entry_per_pair_and_no_self_loops(rows in rows_strategy()) {
        prop_assume!(rows.iter().any(|r| r.0 != r.1));
        let g = build_graph(&rows);
        let mut pairs = std::collections::BTreeSet::new();
        for (src, e) in g.entries() {
            prop_assert_ne!(src, e.neighbor);
            prop_assert!(e.frequency >= 1 && e.volume >= 0.0);
            prop_assert!(pairs.insert((src, e.neighbor)));
        }
    }

    #[test]
    fn out_frequency_counts_raw_rows(rows in rows_strategy()) {
        prop_assume!(rows.iter().any(|r| r.0 != r.1));
        let g = build_graph(&rows);
        let mut expected: BTreeMap<&str, u64> = BTreeMap::new();
        for (s, d, _, c) in &rows {
            if s != d {
                *expected.entry(s).or_default() += c;
            }
        }
        for id in g.accounts() {
            let total: u64 = g.out_edges(id).map(|e| e.frequency).sum();
            prop_assert_eq!(total, expected.get(g.name(id)).copied().unwrap_or(0));
        }
    }

    #[test]
    fn handles_are_a_bijection_in_first_appearance_order(rows in rows_strategy()) {
        prop_assume!(rows.iter().any(|r| r.0 != r.1));
        let g = build_graph(&rows);
        let mut first = Vec::new();
        for (s, d, _, _) in &rows {
            for x in [s, d] {
                if !first.contains(x) {
                    first.push(x.clone());
                }
            }
        }
        prop_assert_eq!(g.names(), &first[..]);
        for id in g.accounts() {
            prop_assert_eq!(g.id(g.name(id)), Some(id));
        }
    }

    #[test]
    fn persistence_round_trip_is_identity(rows in rows_strategy()) {
        prop_assume!(rows.iter().any(|r| r.0 != r.1));
        let g = build_graph(&rows);
        let bytes = graph_to_bytes(&g);
        let back = graph_from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(graph_to_bytes(&back), bytes.clone());
        prop_assert_eq!(graph_to_bytes(&build_graph(&rows)), bytes);
    }
}
