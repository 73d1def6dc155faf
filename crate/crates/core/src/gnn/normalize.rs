use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Transform applied to edge weights before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightTransform {
    /// `ln(1 + w)`; tames volumes spanning many orders of magnitude.
    #[default]
    Log1p,
    Raw,
}

impl WeightTransform {
    pub fn apply(self, w: f64) -> f64 {
        match self {
            WeightTransform::Log1p => w.ln_1p(),
            WeightTransform::Raw => w,
        }
    }
}

/// `Â = D̃^{-1/2} Ã D̃^{-1/2}` with `Ã = A + I`, alongside its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub a_hat: CsrMatrix,
    pub a_tilde: CsrMatrix,
    /// Diagonal of `D̃`.
    pub degree: Vec<f64>,
}

/// Symmetric normalization with self-connections.
///
/// `adjacency` must be square, symmetric, non-negative, finite and have an
/// empty diagonal.
pub fn normalize(adjacency: &CsrMatrix, transform: WeightTransform) -> Result<NormalizedAdjacency> {
    let m = adjacency.rows();
    if adjacency.cols() != m {
        return Err(Error::Shape(format!("adjacency is {}x{}", m, adjacency.cols())));
    }
    for (i, j, w) in adjacency.triplets() {
        if !w.is_finite() {
            return Err(Error::Invalid(format!("non-finite weight at ({i}, {j})")));
        }
        if w < 0.0 {
            return Err(Error::Invalid(format!("negative weight {w} at ({i}, {j})")));
        }
        if i == j && w != 0.0 {
            return Err(Error::Invalid(format!("non-zero diagonal at node {i}")));
        }
        if adjacency.get(j, i) != w {
            return Err(Error::Invalid(format!("adjacency is not symmetric at ({i}, {j})")));
        }
    }
    let self_loops = (0..m).map(|i| (i, i, 1.0));
    let weighted = adjacency
        .triplets()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, j, w)| (i, j, transform.apply(w)));
    let a_tilde = CsrMatrix::from_triplets(m, m, weighted.chain(self_loops))?;
    let degree = a_tilde.row_sums();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    // scale by the product taken in (min, max) index order so Â is exactly symmetric
    let a_hat = CsrMatrix::from_triplets(
        m,
        m,
        a_tilde.triplets().map(|(i, j, w)| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            (i, j, w * (inv_sqrt[lo] * inv_sqrt[hi]))
        }),
    )?;
    Ok(NormalizedAdjacency {
        a_hat,
        a_tilde,
        degree,
    })
}
