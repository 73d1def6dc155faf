//! Top-volume ego-subgraph extraction.
//!
//! Around a target account we keep at most `max_neighbors` partners, ranked by
//! the volume exchanged in both directions, and optionally repeat that from
//! each selected partner. The subgraph is induced: every aggregated edge whose
//! endpoints were both selected is kept.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_features, is_system_account, FeatureSchema};
use crate::graph::{AccountId, CallTable, TransactionGraph};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub hops: u8,
    pub max_neighbors: usize,
    /// Stop expansion at EOSIO system accounts.
    pub eosio: bool,
    pub symmetrize: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            hops: 2,
            max_neighbors: 10,
            eosio: false,
            symmetrize: true,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.hops) {
            return Err(Error::Config(format!("hops must be 1 or 2, got {}", self.hops)));
        }
        if self.max_neighbors == 0 {
            return Err(Error::Config("max_neighbors must be at least 1".into()));
        }
        Ok(())
    }

    /// Largest node count an extraction can produce.
    pub fn max_nodes(&self) -> usize {
        let n = self.max_neighbors;
        match self.hops {
            1 => 1 + n,
            _ => 1 + n + n * n,
        }
    }

    fn stops_at(&self, name: &str) -> bool {
        self.eosio && is_system_account(name)
    }
}

/// One labeled ego-network. Node 0 is always the center.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub center: usize,
    pub nodes: Vec<String>,
    /// Volume-weighted adjacency.
    pub volume: CsrMatrix,
    /// Frequency-weighted adjacency; same sparsity pattern as `volume`.
    pub frequency: CsrMatrix,
    /// `m × f` node features; `m × 0` until featurized.
    pub features: CsrMatrix,
    pub label: Option<u8>,
    /// The center had no neighbors at all.
    pub isolated: bool,
}

impl Subgraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn center_name(&self) -> &str {
        &self.nodes[self.center]
    }

    /// Reorders nodes so that node `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Subgraph {
        let mut nodes = vec![String::new(); self.nodes.len()];
        for (i, name) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = name.clone();
        }
        Subgraph {
            center: perm[self.center],
            nodes,
            volume: self.volume.permute_symmetric(perm),
            frequency: self.frequency.permute_symmetric(perm),
            features: self.features.permute_rows(perm),
            label: self.label,
            isolated: self.isolated,
        }
    }
}

/// Neighbors of `account` ranked by two-way volume, descending, ties by
/// ascending handle, truncated to `max_neighbors`.
pub fn rank_neighbors(graph: &TransactionGraph, account: AccountId, max_neighbors: usize) -> Result<Vec<AccountId>> {
    if !graph.contains(account) {
        return Err(Error::UnknownAccount(account.to_string()));
    }
    let mut ranked = graph.neighbor_volumes(account);
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(max_neighbors).map(|(id, _)| id).collect())
}

/// Extracts the unfeatured, unlabeled subgraph around `account`.
pub fn extract_subgraph(graph: &TransactionGraph, account: AccountId, config: &SamplingConfig) -> Result<Subgraph> {
    config.validate()?;
    let first = rank_neighbors(graph, account, config.max_neighbors)?;

    let mut nodes = vec![account];
    let mut local: HashMap<AccountId, usize> = HashMap::from([(account, 0)]);
    let mut admit = |id: AccountId, nodes: &mut Vec<AccountId>| {
        local.entry(id).or_insert_with(|| {
            nodes.push(id);
            nodes.len() - 1
        });
    };
    for &v in &first {
        admit(v, &mut nodes);
    }
    if config.hops == 2 {
        for &v in &first {
            if config.stops_at(graph.name(v)) {
                continue;
            }
            for w in rank_neighbors(graph, v, config.max_neighbors)? {
                admit(w, &mut nodes);
            }
        }
    }

    let mut vol = Vec::new();
    let mut freq = Vec::new();
    for (i, &u) in nodes.iter().enumerate() {
        for e in graph.out_edges(u) {
            if let Some(&j) = local.get(&e.neighbor) {
                vol.push((i, j, e.volume));
                freq.push((i, j, e.frequency as f64));
            }
        }
    }
    let m = nodes.len();
    let mut volume = CsrMatrix::from_triplets(m, m, vol)?;
    let mut frequency = CsrMatrix::from_triplets(m, m, freq)?;
    if config.symmetrize {
        volume = volume.plus_transpose()?;
        frequency = frequency.plus_transpose()?;
    }
    Ok(Subgraph {
        center: 0,
        nodes: nodes.iter().map(|&id| graph.name(id).to_string()).collect(),
        volume,
        frequency,
        features: CsrMatrix::zeros(m, 0),
        label: None,
        isolated: first.is_empty(),
    })
}

/// One labeled subgraph per account, in input order. Runs on the rayon pool;
/// the result does not depend on the thread count.
pub fn extract_dataset(
    graph: &TransactionGraph,
    accounts: &[(AccountId, u8)],
    config: &SamplingConfig,
) -> Result<Vec<Subgraph>> {
    config.validate()?;
    accounts
        .par_iter()
        .map(|&(id, label)| {
            let mut sg = extract_subgraph(graph, id, config)?;
            sg.label = Some(label);
            Ok(sg)
        })
        .collect()
}

/// Fills the feature matrix of every subgraph.
pub fn featurize(subgraphs: &mut [Subgraph], calls: &CallTable, schema: &FeatureSchema) -> Result<()> {
    subgraphs.par_iter_mut().try_for_each(|sg| {
        sg.features = build_features(&sg.nodes, calls, schema)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn graph(rows: &[(&str, &str, f64, u64)]) -> TransactionGraph {
        let mut b = GraphBuilder::new();
        for &(s, d, v, c) in rows {
            b.add(s, d, v, c).unwrap();
        }
        b.finish().unwrap().0
    }

    fn names(g: &TransactionGraph, ids: &[AccountId]) -> Vec<String> {
        ids.iter().map(|&i| g.name(i).to_string()).collect()
    }

    #[test]
    fn ranking_takes_top_volume() {
        let g = graph(&[("x", "a", 5.0, 1), ("x", "b", 3.0, 1), ("c", "x", 1.0, 1)]);
        let r = rank_neighbors(&g, g.id("x").unwrap(), 2).unwrap();
        assert_eq!(names(&g, &r), ["a", "b"]);
    }

    #[test]
    fn ranking_ties_prefer_lower_handle() {
        let g = graph(&[("x", "a", 4.0, 1), ("x", "b", 4.0, 1)]);
        let r = rank_neighbors(&g, g.id("x").unwrap(), 1).unwrap();
        assert_eq!(names(&g, &r), ["a"]);
    }

    #[test]
    fn ranking_below_cap_returns_all() {
        let g = graph(&[("x", "a", 5.0, 1)]);
        let r = rank_neighbors(&g, g.id("x").unwrap(), 10).unwrap();
        assert_eq!(names(&g, &r), ["a"]);
    }

    #[test]
    fn ranking_sums_both_directions() {
        let g = graph(&[("x", "a", 3.0, 1), ("b", "x", 4.0, 1), ("a", "x", 2.0, 1)]);
        let r = rank_neighbors(&g, g.id("x").unwrap(), 1).unwrap();
        assert_eq!(names(&g, &r), ["a"]);
    }

    #[test]
    fn unknown_account_is_an_error() {
        let g = graph(&[("x", "a", 1.0, 1)]);
        assert!(rank_neighbors(&g, AccountId(99), 1).is_err());
    }

    #[test]
    fn star_one_hop() {
        let g = graph(&[("c", "a", 1.0, 1), ("c", "b", 2.0, 1), ("d", "c", 3.0, 2)]);
        let cfg = SamplingConfig {
            hops: 1,
            ..Default::default()
        };
        let sg = extract_subgraph(&g, g.id("c").unwrap(), &cfg).unwrap();
        assert_eq!(sg.num_nodes(), 4);
        assert_eq!(sg.center_name(), "c");
        assert_eq!(sg.volume.nnz(), 6);
        assert!(sg.volume.is_symmetric(0.0));
        assert!(!sg.isolated);
    }

    #[test]
    fn symmetrize_adds_transpose() {
        let g = graph(&[("A", "B", 3.0, 1), ("B", "A", 2.0, 4)]);
        let sg = extract_subgraph(&g, g.id("A").unwrap(), &SamplingConfig::default()).unwrap();
        assert_eq!(sg.volume.get(0, 1), 5.0);
        assert_eq!(sg.volume.get(1, 0), 5.0);
        assert_eq!(sg.frequency.get(0, 1), 5.0);
        let directed = SamplingConfig {
            symmetrize: false,
            ..Default::default()
        };
        let sg = extract_subgraph(&g, g.id("A").unwrap(), &directed).unwrap();
        assert_eq!(sg.volume.get(0, 1), 3.0);
        assert_eq!(sg.volume.get(1, 0), 2.0);
    }

    #[test]
    fn induced_edges_between_neighbors_are_kept() {
        let g = graph(&[("c", "a", 1.0, 1), ("c", "b", 1.0, 1), ("a", "b", 7.0, 1)]);
        let cfg = SamplingConfig {
            hops: 1,
            ..Default::default()
        };
        let sg = extract_subgraph(&g, g.id("c").unwrap(), &cfg).unwrap();
        assert_eq!(sg.volume.get(1, 2), 7.0);
    }

    #[test]
    fn two_hop_expands_from_first_hop() {
        let g = graph(&[("c", "a", 1.0, 1), ("a", "x", 1.0, 1), ("x", "y", 1.0, 1)]);
        let sg = extract_subgraph(&g, g.id("c").unwrap(), &SamplingConfig::default()).unwrap();
        assert_eq!(sg.nodes, ["c", "a", "x"]);
    }

    #[test]
    fn stoplist_blocks_expansion_in_eosio_mode() {
        let g = graph(&[("c", "eosio.token", 5.0, 1), ("eosio.token", "z", 1.0, 1)]);
        let mut cfg = SamplingConfig {
            eosio: true,
            ..Default::default()
        };
        let sg = extract_subgraph(&g, g.id("c").unwrap(), &cfg).unwrap();
        assert_eq!(sg.nodes, ["c", "eosio.token"]);
        cfg.eosio = false;
        let sg = extract_subgraph(&g, g.id("c").unwrap(), &cfg).unwrap();
        assert_eq!(sg.nodes, ["c", "eosio.token", "z"]);
    }

    #[test]
    fn isolated_account_yields_single_node() {
        let g = graph(&[("a", "a", 1.0, 1), ("b", "c", 1.0, 1)]);
        let sg = extract_subgraph(&g, g.id("a").unwrap(), &SamplingConfig::default()).unwrap();
        assert_eq!(sg.num_nodes(), 1);
        assert!(sg.isolated);
        assert_eq!(sg.volume.nnz(), 0);
    }

    #[test]
    fn hop_bounds_are_validated() {
        let cfg = SamplingConfig {
            hops: 3,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert_eq!(SamplingConfig::default().max_nodes(), 111);
    }

    #[test]
    fn dataset_keeps_input_order_and_labels() {
        let g = graph(&[("a", "b", 1.0, 1), ("b", "c", 1.0, 1)]);
        let accounts = vec![(g.id("c").unwrap(), 1), (g.id("a").unwrap(), 0)];
        let ds = extract_dataset(&g, &accounts, &SamplingConfig::default()).unwrap();
        assert_eq!(ds[0].center_name(), "c");
        assert_eq!(ds[0].label, Some(1));
        assert_eq!(ds[1].center_name(), "a");
    }
}
