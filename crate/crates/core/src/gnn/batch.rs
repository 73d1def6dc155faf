use serde::{Deserialize, Serialize};

use super::normalize::{normalize, WeightTransform};
use crate::error::{Error, Result};
use crate::sampler::Subgraph;
use crate::sparse::CsrMatrix;

/// Which adjacency feeds the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Variant {
    /// Transaction volume.
    #[serde(rename = "v")]
    Volume,
    /// Transaction frequency.
    #[serde(rename = "t")]
    #[default]
    Frequency,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Volume => "v",
            Variant::Frequency => "t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v" | "volume" => Ok(Variant::Volume),
            "t" | "frequency" | "freq" => Ok(Variant::Frequency),
            other => Err(Error::Config(format!("unknown variant {other:?}; expected v or t"))),
        }
    }
}

/// One subgraph ready for the model: normalized adjacency, features, label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub adjacency: CsrMatrix,
    pub features: CsrMatrix,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InputOptions {
    pub variant: Variant,
    pub weight_transform: WeightTransform,
    /// Scale each feature row to sum 1.
    pub row_normalize: bool,
}

impl GraphInput {
    pub fn prepare(subgraph: &Subgraph, options: &InputOptions) -> Result<Self> {
        let adjacency = match options.variant {
            Variant::Volume => &subgraph.volume,
            Variant::Frequency => &subgraph.frequency,
        };
        let label = subgraph
            .label
            .ok_or_else(|| Error::Invalid(format!("subgraph {} has no label", subgraph.center_name())))?;
        let mut features = subgraph.features.clone();
        if options.row_normalize {
            let sums = features.row_sums();
            features = CsrMatrix::from_triplets(
                features.rows(),
                features.cols(),
                features
                    .triplets()
                    .map(|(r, c, v)| (r, c, if sums[r] > 0.0 { v / sums[r] } else { v })),
            )?;
        }
        Ok(Self {
            adjacency: normalize(adjacency, options.weight_transform)?.a_hat,
            features,
            label,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }
}

/// Several graphs packed block-diagonally. Graph `b` owns node rows
/// `offsets[b]..offsets[b + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedGraphs {
    pub adjacency: CsrMatrix,
    pub features: CsrMatrix,
    pub offsets: Vec<usize>,
    pub labels: Vec<u8>,
}

impl BatchedGraphs {
    pub fn new(graphs: &[&GraphInput]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        offsets.push(0);
        for g in graphs {
            if g.num_nodes() == 0 {
                return Err(Error::Invalid("graph without nodes in batch".into()));
            }
            if g.features.rows() != g.num_nodes() {
                return Err(Error::Shape(format!(
                    "{} feature rows for {} nodes",
                    g.features.rows(),
                    g.num_nodes()
                )));
            }
            offsets.push(offsets.last().unwrap() + g.num_nodes());
        }
        let adjacency = CsrMatrix::block_diag(&graphs.iter().map(|g| &g.adjacency).collect::<Vec<_>>());
        let features = CsrMatrix::vstack(&graphs.iter().map(|g| &g.features).collect::<Vec<_>>())?;
        Ok(Self {
            adjacency,
            features,
            offsets,
            labels: graphs.iter().map(|g| g.label).collect(),
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Graph id of every node row.
    pub fn segment_ids(&self) -> Vec<usize> {
        self.offsets
            .windows(2)
            .enumerate()
            .flat_map(|(b, w)| std::iter::repeat_n(b, w[1] - w[0]))
            .collect()
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.num_nodes();
        let consistent = self.offsets.len() == self.labels.len() + 1
            && self.offsets.first() == Some(&0)
            && self.offsets.last() == Some(&n)
            && self.offsets.windows(2).all(|w| w[0] < w[1])
            && self.features.rows() == n;
        if !consistent {
            return Err(Error::Invalid("segment map inconsistent with batch".into()));
        }
        Ok(())
    }
}
