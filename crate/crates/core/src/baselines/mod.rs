//! Spectral whole-graph signatures and a kNN classifier over them.

mod knn;
mod signature;
mod spectral;

pub use knn::KnnModel;
pub use signature::{
    fgsd_histogram, fgsd_signature, harmonic_distances, heat_trace, laplacian_pseudoinverse, laplacian_spectrum,
    netlsd_from_spectrum, netlsd_signature, write_signatures, FgsdConfig, GraphSignature, NetlsdConfig, SignatureMethod,
    PINV_CUTOFF,
};
pub use spectral::{binarized_adjacency, normalized_laplacian, symmetric_eigen};
