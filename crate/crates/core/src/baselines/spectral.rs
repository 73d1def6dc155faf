use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::sampler::Subgraph;

/// Unweighted symmetric adjacency: `1` wherever either direction has an edge.
pub fn binarized_adjacency(subgraph: &Subgraph) -> DMatrix<f64> {
    let m = subgraph.num_nodes();
    let mut a = DMatrix::zeros(m, m);
    for (i, j, _) in subgraph.volume.triplets() {
        if i != j {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    a
}

/// `L = I − D^{-1/2} A D^{-1/2}`; rows and columns of degree-zero nodes are all
/// zero, including the diagonal.
pub fn normalized_laplacian(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let m = adjacency.nrows();
    let degree: Vec<f64> = (0..m).map(|i| adjacency.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    DMatrix::from_fn(m, m, |i, j| {
        let diag = if i == j && degree[i] > 0.0 { 1.0 } else { 0.0 };
        diag - adjacency[(i, j)] * inv_sqrt[i] * inv_sqrt[j]
    })
}

/// Eigenvalues and eigenvectors of a symmetric matrix.
pub fn symmetric_eigen(matrix: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(matrix);
    (eig.eigenvalues, eig.eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_laplacian() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let l = normalized_laplacian(&a);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let (mut vals, _) = symmetric_eigen(l);
        vals.as_mut_slice().sort_by(f64::total_cmp);
        assert!(vals[0].abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_has_zero_row() {
        let l = normalized_laplacian(&DMatrix::zeros(2, 2));
        assert_eq!(l, DMatrix::zeros(2, 2));
    }
}
