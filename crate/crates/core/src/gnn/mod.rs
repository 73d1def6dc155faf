//! The graph classification network: symmetric normalization, two graph
//! convolutions, max-pool readout and a softmax head, trained with Adam.

mod batch;
mod checkpoint;
mod model;
mod normalize;
mod optim;
mod train;

pub use batch::{BatchedGraphs, GraphInput, InputOptions, Variant};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use model::{
    argmax_class, cross_entropy, forward, gcn_layer, loss_and_backward, relu, ForwardTrace, Gradients,
    ModelParams, NUM_CLASSES,
};
pub use normalize::{normalize, NormalizedAdjacency, WeightTransform};
pub use optim::{Adam, AdamConfig};
pub use train::{mean_loss, predict, predict_proba, train, EpochRecord, TrainConfig, TrainOutcome};
