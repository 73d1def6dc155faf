//! Two graph-convolution layers, per-graph max pooling and a linear softmax
//! head, with a hand-written reverse pass:
//!
//! ```text
//! P1 = Â X W0        H1 = drop(ReLU(P1))
//! P2 = Â H1 W1       H2 = drop(ReLU(P2))
//! g  = segment-max(H2)
//! Z  = softmax(g W2 + b)
//! ```

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;

use super::batch::BatchedGraphs;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `f × h`
    pub w0: Array2<f64>,
    /// `h × h`
    pub w1: Array2<f64>,
    /// `h × classes`
    pub w2: Array2<f64>,
    pub b: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(input_dim: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w0: Array2::zeros((input_dim, hidden)),
            w1: Array2::zeros((hidden, hidden)),
            w2: Array2::zeros((hidden, classes)),
            b: Array1::zeros(classes),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
        }
        Self {
            w0: uniform(input_dim, hidden, rng),
            w1: uniform(hidden, hidden, rng),
            w2: uniform(hidden, classes, rng),
            b: Array1::zeros(classes),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w0.ncols()
    }

    pub fn classes(&self) -> usize {
        self.b.len()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        let ok = self.w1.dim() == (h, h) && self.w2.nrows() == h && self.w2.ncols() == self.b.len();
        if !ok {
            return Err(Error::Shape("inconsistent parameter shapes".into()));
        }
        let finite = self.w0.iter().chain(&self.w1).chain(&self.w2).chain(&self.b).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invalid("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.w0.len() + self.w1.len() + self.w2.len() + self.b.len()
    }
}

/// Gradients with the same layout as [`ModelParams`], plus optionally the
/// gradient with respect to the input features.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: ModelParams,
    pub input: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `X W0`
    pub xw0: Array2<f64>,
    /// Pre-activation of layer 1.
    pub p1: Array2<f64>,
    /// Activation of layer 1 after dropout.
    pub h1: Array2<f64>,
    pub mask1: Option<Array2<f64>>,
    pub p2: Array2<f64>,
    pub h2: Array2<f64>,
    pub mask2: Option<Array2<f64>>,
    /// `B × h` pooled graph representations.
    pub pooled: Array2<f64>,
    /// Node row that won the max for each (graph, feature).
    pub argmax: Array2<usize>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

/// `activation(Â H W)`.
pub fn gcn_layer(a_hat: &CsrMatrix, h: &Array2<f64>, w: &Array2<f64>, activation: fn(f64) -> f64) -> Result<Array2<f64>> {
    if a_hat.cols() != h.nrows() || h.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "Â {}x{}, H {}x{}, W {}x{}",
            a_hat.rows(),
            a_hat.cols(),
            h.nrows(),
            h.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(a_hat.mul_dense(&h.dot(w)).mapv(activation))
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn dropout_mask<R: Rng + ?Sized>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < keep { scale } else { 0.0 })
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Forward pass. Dropout is active only when `rng` is given and `dropout_rate > 0`.
pub fn forward<R: Rng + ?Sized>(
    batch: &BatchedGraphs,
    params: &ModelParams,
    dropout_rate: f64,
    rng: Option<&mut R>,
) -> Result<ForwardTrace> {
    batch.check()?;
    if batch.features.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} features, model expects {}",
            batch.features.cols(),
            params.input_dim()
        )));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Config(format!("dropout rate {dropout_rate} outside [0, 1)")));
    }
    let a = &batch.adjacency;
    let hidden = params.hidden();
    let n = batch.num_nodes();

    let (mask1, mask2) = match rng {
        Some(rng) if dropout_rate > 0.0 => {
            let m1 = dropout_mask((n, hidden), dropout_rate, rng);
            let m2 = dropout_mask((n, hidden), dropout_rate, rng);
            (Some(m1), Some(m2))
        }
        _ => (None, None),
    };

    let xw0 = batch.features.mul_dense(&params.w0);
    let p1 = a.mul_dense(&xw0);
    let mut h1 = p1.mapv(relu);
    if let Some(m) = &mask1 {
        h1 *= m;
    }
    let p2 = a.mul_dense(&h1.dot(&params.w1));
    let mut h2 = p2.mapv(relu);
    if let Some(m) = &mask2 {
        h2 *= m;
    }

    let graphs = batch.num_graphs();
    let mut pooled = Array2::zeros((graphs, hidden));
    let mut argmax = Array2::zeros((graphs, hidden));
    for (g, span) in batch.offsets.windows(2).enumerate() {
        for f in 0..hidden {
            let mut best = span[0];
            for node in span[0] + 1..span[1] {
                // strict comparison keeps the lowest index on ties
                if h2[[node, f]] > h2[[best, f]] {
                    best = node;
                }
            }
            pooled[[g, f]] = h2[[best, f]];
            argmax[[g, f]] = best;
        }
    }
    let logits = pooled.dot(&params.w2) + &params.b;
    let probs = softmax_rows(&logits);
    Ok(ForwardTrace {
        xw0,
        p1,
        h1,
        mask1,
        p2,
        h2,
        mask2,
        pooled,
        argmax,
        logits,
        probs,
    })
}

/// Mean cross-entropy of the batch.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[u8]) -> f64 {
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[y as usize]
        })
        .sum();
    total / labels.len() as f64
}

/// Loss and reverse pass for a trace produced by [`forward`] on `batch`.
pub fn loss_and_backward(
    trace: &ForwardTrace,
    batch: &BatchedGraphs,
    params: &ModelParams,
    want_input_grad: bool,
) -> Result<(f64, Gradients)> {
    let graphs = batch.num_graphs();
    if trace.logits.nrows() != graphs {
        return Err(Error::Shape("trace does not belong to this batch".into()));
    }
    if let Some(&y) = batch.labels.iter().find(|&&y| y as usize >= params.classes()) {
        return Err(Error::Invalid(format!("label {y} outside the model's classes")));
    }
    let loss = cross_entropy(&trace.logits, &batch.labels);
    if !loss.is_finite() {
        return Err(Error::Invalid(format!("non-finite loss {loss}")));
    }

    // softmax + cross-entropy
    let mut d_logits = trace.probs.clone();
    for (g, &y) in batch.labels.iter().enumerate() {
        d_logits[[g, y as usize]] -= 1.0;
    }
    d_logits /= graphs as f64;

    let d_w2 = trace.pooled.t().dot(&d_logits);
    let d_b = d_logits.sum_axis(Axis(0));
    let d_pooled = d_logits.dot(&params.w2.t());

    // max pooling routes each feature's gradient to its winning node
    let mut d_p2 = Array2::zeros(trace.h2.raw_dim());
    for ((g, f), &node) in trace.argmax.indexed_iter() {
        d_p2[[node, f]] += d_pooled[[g, f]];
    }
    if let Some(m) = &trace.mask2 {
        d_p2 *= m;
    }
    Zip::from(&mut d_p2).and(&trace.p2).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });

    let a = &batch.adjacency;
    let d_q2 = a.transpose_mul_dense(&d_p2);
    let d_w1 = trace.h1.t().dot(&d_q2);
    let mut d_p1 = d_q2.dot(&params.w1.t());
    if let Some(m) = &trace.mask1 {
        d_p1 *= m;
    }
    Zip::from(&mut d_p1).and(&trace.p1).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });

    let d_q1 = a.transpose_mul_dense(&d_p1);
    let d_w0 = batch.features.transpose_mul_dense(&d_q1);
    let input = want_input_grad.then(|| d_q1.dot(&params.w0.t()));

    Ok((
        loss,
        Gradients {
            params: ModelParams {
                w0: d_w0,
                w1: d_w1,
                w2: d_w2,
                b: d_b,
            },
            input,
        },
    ))
}

/// Class with the highest probability; ties go to the lower class id.
pub fn argmax_class(probs: &Array2<f64>) -> Vec<u8> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}
