//! The immutable account transaction graph.
//!
//! Raw transactions are aggregated per ordered account pair into one entry that
//! carries the summed volume and the transaction count. Adjacency is kept in two
//! compressed indexes: outgoing (persisted) and incoming (rebuilt on load).

mod ingest;
mod persist;

use std::collections::HashMap;
use std::fmt;

pub use ingest::{
    ingest_calls, ingest_edges, ingest_labels, CallRecord, CallTable, GraphBuilder, IngestStats,
    LabelMapping, LabelTable,
};
pub use persist::{graph_from_bytes, graph_to_bytes, load_graph, save_graph, FORMAT_VERSION, MAGIC};

use crate::error::{Error, Result};
use crate::features::{classify_name, NameKind};

/// Dense account handle, assigned in first-appearance order during ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub u32);

impl AccountId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// One aggregated directed edge as seen from one endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub neighbor: AccountId,
    pub volume: f64,
    pub frequency: u64,
}

/// Compressed adjacency: for account `i`, entries `ptr[i]..ptr[i + 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
struct Adjacency {
    ptr: Vec<usize>,
    neighbor: Vec<u32>,
    volume: Vec<f64>,
    frequency: Vec<u64>,
}

impl Adjacency {
    fn from_sorted(n: usize, entries: &[(u32, u32, f64, u64)]) -> Self {
        let mut ptr = vec![0usize; n + 1];
        for &(src, ..) in entries {
            ptr[src as usize + 1] += 1;
        }
        for i in 0..n {
            ptr[i + 1] += ptr[i];
        }
        Self {
            ptr,
            neighbor: entries.iter().map(|e| e.1).collect(),
            volume: entries.iter().map(|e| e.2).collect(),
            frequency: entries.iter().map(|e| e.3).collect(),
        }
    }

    fn edges(&self, id: AccountId) -> impl ExactSizeIterator<Item = Edge> + '_ {
        let span = self.ptr[id.index()]..self.ptr[id.index() + 1];
        span.map(move |k| Edge {
            neighbor: AccountId(self.neighbor[k]),
            volume: self.volume[k],
            frequency: self.frequency[k],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionGraph {
    names: Vec<String>,
    index: HashMap<String, u32>,
    out: Adjacency,
    incoming: Adjacency,
    labels: Vec<Option<u8>>,
    label_order: Vec<AccountId>,
    kinds: Vec<NameKind>,
}

impl TransactionGraph {
    /// Assembles a graph from per-pair aggregated entries `(src, dst, volume, count)`.
    /// Entries must be unique per ordered pair and free of self-loops.
    fn from_parts(
        names: Vec<String>,
        mut entries: Vec<(u32, u32, f64, u64)>,
        labels: Vec<(AccountId, u8)>,
        kinds: Option<Vec<NameKind>>,
    ) -> Result<Self> {
        let n = names.len();
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate account name {name}")));
            }
        }
        for &(s, d, v, c) in &entries {
            if s as usize >= n || d as usize >= n {
                return Err(Error::Format("edge endpoint out of range".into()));
            }
            if s == d {
                return Err(Error::Format("self-loop entry".into()));
            }
            if !(v >= 0.0 && v.is_finite()) || c == 0 {
                return Err(Error::Format(format!("invalid weights on edge {s}->{d}")));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Format("duplicate aggregated edge".into()));
        }
        let out = Adjacency::from_sorted(n, &entries);
        let mut reversed: Vec<_> = entries.iter().map(|&(s, d, v, c)| (d, s, v, c)).collect();
        reversed.sort_by_key(|e| (e.0, e.1));
        let incoming = Adjacency::from_sorted(n, &reversed);

        let kinds = match kinds {
            Some(k) if k.len() == n => k,
            Some(_) => return Err(Error::Format("kind table length mismatch".into())),
            None => names.iter().map(|s| classify_name(s)).collect(),
        };
        let mut graph = Self {
            names,
            index,
            out,
            incoming,
            labels: vec![None; n],
            label_order: Vec::new(),
            kinds,
        };
        for (id, class) in labels {
            graph.set_label(id, class)?;
        }
        Ok(graph)
    }

    fn set_label(&mut self, id: AccountId, class: u8) -> Result<()> {
        if id.index() >= self.names.len() {
            return Err(Error::Format("label for unknown handle".into()));
        }
        if class > 1 {
            return Err(Error::Format(format!("class {class} outside {{0,1}}")));
        }
        match self.labels[id.index()] {
            Some(c) if c == class => Ok(()),
            Some(_) => Err(Error::ConflictingLabel(self.names[id.index()].clone())),
            None => {
                self.labels[id.index()] = Some(class);
                self.label_order.push(id);
                Ok(())
            }
        }
    }

    /// Attaches labels for every listed account present in the graph. Returns
    /// the graph and the names of listed accounts missing from it.
    pub fn with_labels(mut self, table: &LabelTable) -> Result<(Self, Vec<String>)> {
        let mut missing = Vec::new();
        for (name, class) in table.entries() {
            match self.id(name) {
                Some(id) => self.set_label(id, *class)?,
                None => missing.push(name.clone()),
            }
        }
        Ok((self, missing))
    }

    pub fn num_accounts(&self) -> usize {
        self.names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.out.neighbor.len()
    }

    pub fn id(&self, name: &str) -> Option<AccountId> {
        self.index.get(name).map(|&i| AccountId(i))
    }

    pub fn require(&self, name: &str) -> Result<AccountId> {
        self.id(name).ok_or_else(|| Error::UnknownAccount(name.to_string()))
    }

    pub fn name(&self, id: AccountId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn accounts(&self) -> impl ExactSizeIterator<Item = AccountId> {
        (0..self.names.len() as u32).map(AccountId)
    }

    pub fn contains(&self, id: AccountId) -> bool {
        id.index() < self.names.len()
    }

    /// Outgoing aggregated edges, sorted by neighbor handle.
    pub fn out_edges(&self, id: AccountId) -> impl ExactSizeIterator<Item = Edge> + '_ {
        self.out.edges(id)
    }

    /// Incoming aggregated edges, sorted by neighbor handle.
    pub fn in_edges(&self, id: AccountId) -> impl ExactSizeIterator<Item = Edge> + '_ {
        self.incoming.edges(id)
    }

    /// The aggregated entry for the ordered pair, if any.
    pub fn edge(&self, src: AccountId, dst: AccountId) -> Option<Edge> {
        let span = self.out.ptr[src.index()]..self.out.ptr[src.index() + 1];
        let nbrs = &self.out.neighbor[span.clone()];
        nbrs.binary_search(&dst.0).ok().map(|pos| {
            let k = span.start + pos;
            Edge {
                neighbor: dst,
                volume: self.out.volume[k],
                frequency: self.out.frequency[k],
            }
        })
    }

    /// Every account adjacent to `id` in either direction, with the volume
    /// summed over both directions, sorted by handle.
    pub fn neighbor_volumes(&self, id: AccountId) -> Vec<(AccountId, f64)> {
        let out: Vec<Edge> = self.out_edges(id).collect();
        let inc: Vec<Edge> = self.in_edges(id).collect();
        let mut merged = Vec::with_capacity(out.len() + inc.len());
        let (mut i, mut j) = (0, 0);
        while i < out.len() || j < inc.len() {
            match (out.get(i), inc.get(j)) {
                (Some(a), Some(b)) if a.neighbor == b.neighbor => {
                    merged.push((a.neighbor, a.volume + b.volume));
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a.neighbor < b.neighbor => {
                    merged.push((a.neighbor, a.volume));
                    i += 1;
                }
                (Some(a), None) => {
                    merged.push((a.neighbor, a.volume));
                    i += 1;
                }
                (_, Some(b)) => {
                    merged.push((b.neighbor, b.volume));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        merged
    }

    /// Number of distinct accounts adjacent in either direction.
    pub fn degree(&self, id: AccountId) -> usize {
        self.neighbor_volumes(id).len()
    }

    pub fn label(&self, id: AccountId) -> Option<u8> {
        self.labels[id.index()]
    }

    /// Labeled accounts in the order their labels were attached.
    pub fn labeled_accounts(&self) -> Vec<(AccountId, u8)> {
        self.label_order
            .iter()
            .map(|&id| (id, self.labels[id.index()].expect("ordered ids are labeled")))
            .collect()
    }

    pub fn kind(&self, id: AccountId) -> NameKind {
        self.kinds[id.index()]
    }

    /// All aggregated entries `(src, dst, volume, count)` in handle order.
    pub fn entries(&self) -> impl Iterator<Item = (AccountId, Edge)> + '_ {
        self.accounts().flat_map(move |id| self.out_edges(id).map(move |e| (id, e)))
    }
}
