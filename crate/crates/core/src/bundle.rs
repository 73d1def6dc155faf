//! Subgraph bundle files: JSON lines, one header line followed by one record
//! per subgraph.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::sampler::{SamplingConfig, Subgraph};
use crate::sparse::CsrMatrix;

pub const BUNDLE_FORMAT: &str = "i2bgnn-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format: String,
    pub version: u32,
    pub sampling: SamplingConfig,
    pub schema: FeatureSchema,
    pub schema_hash: String,
    pub count: usize,
    /// Resolved run configuration, echoed for provenance.
    #[serde(default)]
    pub run_config: BTreeMap<String, String>,
}

impl BundleHeader {
    pub fn new(sampling: SamplingConfig, schema: FeatureSchema, count: usize) -> Self {
        Self {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            sampling,
            schema_hash: schema.hash(),
            schema,
            count,
            run_config: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: usize,
    center: String,
    nodes: Vec<String>,
    /// `(i, j, volume, frequency)`; upper triangle only when symmetric.
    edges: Vec<(usize, usize, f64, f64)>,
    /// Sparse rows as `(column, value)` pairs.
    features: Vec<Vec<(usize, f64)>>,
    label: Option<u8>,
    #[serde(default)]
    isolated: bool,
}

fn to_record(id: usize, sg: &Subgraph, symmetric: bool) -> Record {
    let edges = sg
        .volume
        .triplets()
        .filter(|&(i, j, _)| !symmetric || i <= j)
        .map(|(i, j, v)| (i, j, v, sg.frequency.get(i, j)))
        .collect();
    let features = (0..sg.features.rows()).map(|r| sg.features.row(r).collect()).collect();
    Record {
        id,
        center: sg.center_name().to_string(),
        nodes: sg.nodes.clone(),
        edges,
        features,
        label: sg.label,
        isolated: sg.isolated,
    }
}

fn from_record(rec: Record, header: &BundleHeader, line: u64) -> Result<Subgraph> {
    let bad = |msg: String| Error::Parse { line, msg };
    let m = rec.nodes.len();
    let center = rec
        .nodes
        .iter()
        .position(|n| *n == rec.center)
        .ok_or_else(|| bad(format!("center {} not among nodes", rec.center)))?;
    if rec.features.len() != m {
        return Err(bad(format!("{} feature rows for {m} nodes", rec.features.len())));
    }
    let mut vol = Vec::with_capacity(2 * rec.edges.len());
    let mut freq = Vec::with_capacity(2 * rec.edges.len());
    for &(i, j, v, f) in &rec.edges {
        vol.push((i, j, v));
        freq.push((i, j, f));
        if header.sampling.symmetrize && i != j {
            vol.push((j, i, v));
            freq.push((j, i, f));
        }
    }
    let f = header.schema.dimension();
    let feats = rec
        .features
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)));
    let shape = |e: Error| bad(e.to_string());
    Ok(Subgraph {
        center,
        nodes: rec.nodes,
        volume: CsrMatrix::from_triplets(m, m, vol).map_err(shape)?,
        frequency: CsrMatrix::from_triplets(m, m, freq).map_err(shape)?,
        features: CsrMatrix::from_triplets(m, f, feats).map_err(shape)?,
        label: rec.label,
        isolated: rec.isolated,
    })
}

pub fn write_bundle(path: impl AsRef<Path>, header: &BundleHeader, subgraphs: &[Subgraph]) -> Result<()> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = header.clone();
    header.count = subgraphs.len();
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(b"\n").map_err(io)?;
    for (id, sg) in subgraphs.iter().enumerate() {
        serde_json::to_writer(&mut w, &to_record(id, sg, header.sampling.symmetrize))
            .map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<(BundleHeader, Vec<Subgraph>)> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::io(path, e);
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty bundle".into()))?
        .map_err(io)?;
    let header: BundleHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
        line: 1,
        msg: format!("bundle header: {e}"),
    })?;
    if header.format != BUNDLE_FORMAT {
        return Err(Error::Format(format!("not a subgraph bundle: {}", header.format)));
    }
    if header.version != BUNDLE_VERSION {
        return Err(Error::Version {
            found: header.version as u16,
            expected: BUNDLE_VERSION as u16,
        });
    }
    if header.schema.hash() != header.schema_hash {
        return Err(Error::Schema("bundle header schema hash does not match its schema".into()));
    }
    let mut subgraphs = Vec::with_capacity(header.count);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = k as u64 + 2;
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        subgraphs.push(from_record(rec, &header, lineno)?);
    }
    if subgraphs.len() != header.count {
        return Err(Error::Format(format!(
            "header declares {} subgraphs, found {}",
            header.count,
            subgraphs.len()
        )));
    }
    Ok((header, subgraphs))
}
