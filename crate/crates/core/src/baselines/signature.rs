use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spectral::{binarized_adjacency, normalized_laplacian, symmetric_eigen};
use crate::error::{Error, Result};
use crate::sampler::Subgraph;

/// Eigenvalues below this are treated as zero in the pseudoinverse.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignatureMethod {
    Fgsd,
    Netlsd,
}

impl fmt::Display for SignatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignatureMethod::Fgsd => "fgsd",
            SignatureMethod::Netlsd => "netlsd",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignature {
    pub method: SignatureMethod,
    pub values: Vec<f64>,
}

/// Histogram of harmonic spectral distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgsdConfig {
    pub bins: usize,
    pub bin_width: f64,
}

impl FgsdConfig {
    /// Width chosen so the bins cover `[0, 2 · max node count]` of a training set.
    pub fn calibrated<'a>(bins: usize, training: impl IntoIterator<Item = &'a Subgraph>) -> Self {
        let m_max = training.into_iter().map(Subgraph::num_nodes).max().unwrap_or(1).max(1);
        Self {
            bins,
            bin_width: 2.0 * m_max as f64 / bins as f64,
        }
    }
}

/// `L⁺` of the normalized Laplacian of the binarized subgraph.
pub fn laplacian_pseudoinverse(subgraph: &Subgraph) -> DMatrix<f64> {
    let l = normalized_laplacian(&binarized_adjacency(subgraph));
    let m = l.nrows();
    let (vals, vecs) = symmetric_eigen(l);
    let mut pinv = DMatrix::zeros(m, m);
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda.abs() < PINV_CUTOFF {
            continue;
        }
        let v = vecs.column(k);
        pinv += (v * v.transpose()) / lambda;
    }
    pinv
}

/// Harmonic distances `S(x, y) = L⁺(x,x) + L⁺(y,y) − 2 L⁺(x,y)` for all pairs `x < y`.
pub fn harmonic_distances(subgraph: &Subgraph) -> Vec<f64> {
    let pinv = laplacian_pseudoinverse(subgraph);
    let m = pinv.nrows();
    let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for x in 0..m {
        for y in x + 1..m {
            out.push(pinv[(x, x)] + pinv[(y, y)] - 2.0 * pinv[(x, y)]);
        }
    }
    out
}

pub fn fgsd_signature(subgraph: &Subgraph, config: &FgsdConfig) -> Result<GraphSignature> {
    if subgraph.num_nodes() == 0 {
        return Err(Error::Invalid("signature of an empty graph".into()));
    }
    fgsd_histogram(&harmonic_distances(subgraph), config)
}

/// Histogram with `bins` bins of width `bin_width` from 0; the last bin is open-ended.
pub fn fgsd_histogram(distances: &[f64], config: &FgsdConfig) -> Result<GraphSignature> {
    if config.bins == 0 || !(config.bin_width > 0.0) {
        return Err(Error::Config("fgsd needs bins >= 1 and a positive bin width".into()));
    }
    let mut hist = vec![0.0; config.bins];
    for &s in distances {
        let bin = ((s.max(0.0) / config.bin_width).floor() as usize).min(config.bins - 1);
        hist[bin] += 1.0;
    }
    Ok(GraphSignature {
        method: SignatureMethod::Fgsd,
        values: hist,
    })
}

/// Heat-trace sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NetlsdConfig {
    pub timescales: Vec<f64>,
}

impl NetlsdConfig {
    /// `count` timescales log-spaced over `[lo, hi]`.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Self {
        let (a, b) = (lo.log10(), hi.log10());
        let timescales = match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect(),
        };
        Self { timescales }
    }
}

impl Default for NetlsdConfig {
    fn default() -> Self {
        Self::log_spaced(1e-2, 1e2, 128)
    }
}

/// Eigenvalues of the normalized Laplacian of the binarized subgraph.
pub fn laplacian_spectrum(subgraph: &Subgraph) -> Vec<f64> {
    let (vals, _) = symmetric_eigen(normalized_laplacian(&binarized_adjacency(subgraph)));
    vals.iter().copied().collect()
}

/// `h(t) = Σ_j exp(−t λ_j)`.
pub fn heat_trace(spectrum: &[f64], t: f64) -> f64 {
    spectrum.iter().map(|&l| (-t * l).exp()).sum()
}

pub fn netlsd_signature(subgraph: &Subgraph, config: &NetlsdConfig) -> Result<GraphSignature> {
    if subgraph.num_nodes() == 0 {
        return Err(Error::Invalid("signature of an empty graph".into()));
    }
    Ok(netlsd_from_spectrum(&laplacian_spectrum(subgraph), config))
}

pub fn netlsd_from_spectrum(spectrum: &[f64], config: &NetlsdConfig) -> GraphSignature {
    GraphSignature {
        method: SignatureMethod::Netlsd,
        values: config.timescales.iter().map(|&t| heat_trace(spectrum, t)).collect(),
    }
}

/// Writes `graph_id,v0..v{d-1},label` rows.
pub fn write_signatures<W: Write>(out: W, signatures: &[GraphSignature], labels: &[Option<u8>]) -> Result<()> {
    let dim = signatures.first().map_or(0, |s| s.values.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["graph_id".to_string()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    header.push("label".into());
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (id, (sig, label)) in signatures.iter().zip(labels).enumerate() {
        if sig.values.len() != dim {
            return Err(Error::Shape("signatures of mixed dimension".into()));
        }
        let mut row = vec![id.to_string()];
        row.extend(sig.values.iter().map(|v| v.to_string()));
        row.push(label.map_or_else(String::new, |l| l.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
