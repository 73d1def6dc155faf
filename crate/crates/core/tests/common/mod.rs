//! Independent reference implementations and random instance builders.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use i2bgnn::gnn::{BatchedGraphs, GraphInput, ModelParams};
use i2bgnn::graph::{GraphBuilder, TransactionGraph};
use i2bgnn::sampler::{SamplingConfig, Subgraph};
use i2bgnn::sparse::CsrMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type Row = (String, String, f64, u64);

/// Random raw transaction rows over `n` names. Volumes come from a small
/// integer set so ranking ties are common; a share of names are system accounts.
pub fn random_rows<R: Rng>(rng: &mut R, n: usize, rows: usize) -> Vec<Row> {
    let name = |i: usize| {
        if i % 7 == 3 {
            format!("eosio.s{i}")
        } else {
            format!("acct{i}")
        }
    };
    (0..rows)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = if rng.random_bool(0.05) { a } else { rng.random_range(0..n) };
            let vol = rng.random_range(0..5) as f64;
            let cnt = rng.random_range(1..4);
            (name(a), name(b), vol, cnt)
        })
        .collect()
}

pub fn build_graph(rows: &[Row]) -> TransactionGraph {
    let mut b = GraphBuilder::new();
    for (s, d, v, c) in rows {
        b.add(s, d, *v, *c).unwrap();
    }
    b.finish().unwrap().0
}

/// Reference extraction straight from the raw rows.
pub struct Reference {
    pub nodes: BTreeSet<String>,
    /// Symmetrized weights keyed by the ordered name pair (both orders present).
    pub volume: BTreeMap<(String, String), f64>,
    pub frequency: BTreeMap<(String, String), f64>,
}

pub fn brute_force_extract(rows: &[Row], center: &str, cfg: &SamplingConfig) -> Reference {
    let mut order: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut agg: HashMap<(String, String), (f64, u64)> = HashMap::new();
    for (s, d, v, c) in rows {
        for x in [s, d] {
            if seen.insert(x.clone()) {
                order.push(x.clone());
            }
        }
        if s == d {
            continue;
        }
        let e = agg.entry((s.clone(), d.clone())).or_insert((0.0, 0));
        e.0 += v;
        e.1 += c;
    }
    let handle: HashMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let top = |x: &str| -> Vec<String> {
        let mut cand: Vec<(f64, usize, String)> = Vec::new();
        for y in &order {
            if y == x {
                continue;
            }
            let a = agg.get(&(x.to_string(), y.clone()));
            let b = agg.get(&(y.clone(), x.to_string()));
            if a.is_none() && b.is_none() {
                continue;
            }
            let w = a.map_or(0.0, |e| e.0) + b.map_or(0.0, |e| e.0);
            cand.push((w, handle[y.as_str()], y.clone()));
        }
        cand.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap().then(p.1.cmp(&q.1)));
        cand.into_iter().take(cfg.max_neighbors).map(|c| c.2).collect()
    };

    let mut nodes = BTreeSet::from([center.to_string()]);
    let first = top(center);
    nodes.extend(first.iter().cloned());
    if cfg.hops == 2 {
        for v in &first {
            let system = v.starts_with("eosio.") || v.starts_with("EOSIO.");
            if cfg.eosio && system {
                continue;
            }
            nodes.extend(top(v));
        }
    }

    let mut volume = BTreeMap::new();
    let mut frequency = BTreeMap::new();
    for ((s, d), (v, c)) in &agg {
        if nodes.contains(s) && nodes.contains(d) {
            for key in [(s.clone(), d.clone()), (d.clone(), s.clone())] {
                *volume.entry(key.clone()).or_insert(0.0) += v;
                *frequency.entry(key).or_insert(0.0) += *c as f64;
            }
        }
    }
    Reference {
        nodes,
        volume,
        frequency,
    }
}

/// Symmetric weighted subgraph with `m` nodes, `f` dense random features and a label.
pub fn random_subgraph<R: Rng>(rng: &mut R, m: usize, f: usize, density: f64) -> Subgraph {
    let mut trip = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.random_bool(density) {
                let w = rng.random_range(0.1..20.0);
                trip.push((i, j, w));
                trip.push((j, i, w));
            }
        }
    }
    let a = CsrMatrix::from_triplets(m, m, trip.clone()).unwrap();
    let freq = CsrMatrix::from_triplets(m, m, trip.iter().map(|&(i, j, w)| (i, j, w.ceil()))).unwrap();
    let feats: Vec<(usize, usize, f64)> = (0..m)
        .flat_map(|i| (0..f).map(move |c| (i, c)))
        .map(|(i, c)| (i, c, rng.random_range(-1.0..1.0)))
        .collect();
    Subgraph {
        center: 0,
        nodes: (0..m).map(|i| format!("n{i}")).collect(),
        volume: a,
        frequency: freq,
        features: CsrMatrix::from_triplets(m, f, feats).unwrap(),
        label: Some(rng.random_range(0..2)),
        isolated: false,
    }
}

pub fn random_params<R: Rng>(rng: &mut R, f: usize, h: usize) -> ModelParams {
    let mut p = ModelParams::zeros(f, h, 2);
    for w in [&mut p.w0, &mut p.w1, &mut p.w2] {
        w.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    p.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    p
}

pub fn random_permutation<R: Rng>(rng: &mut R, m: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(rng);
    p
}

pub fn batch_of(inputs: &[GraphInput]) -> BatchedGraphs {
    BatchedGraphs::new(&inputs.iter().collect::<Vec<_>>()).unwrap()
}

/// Dense reference of the whole forward pass (no dropout) for one graph,
/// with normalization computed from scratch.
pub fn dense_forward(adjacency: &Array2<f64>, x: &Array2<f64>, p: &ModelParams, log_weights: bool) -> Vec<f64> {
    let m = adjacency.nrows();
    let mut a = adjacency.mapv(|w| if log_weights { (1.0 + w).ln() } else { w });
    for i in 0..m {
        a[[i, i]] += 1.0;
    }
    let d: Vec<f64> = (0..m).map(|i| a.row(i).sum()).collect();
    let a_hat = Array2::from_shape_fn((m, m), |(i, j)| a[[i, j]] / (d[i] * d[j]).sqrt());
    let h1 = a_hat.dot(&x.dot(&p.w0)).mapv(|v| v.max(0.0));
    let h2 = a_hat.dot(&h1.dot(&p.w1)).mapv(|v| v.max(0.0));
    let pooled: Vec<f64> = (0..h2.ncols())
        .map(|c| h2.column(c).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let logits: Vec<f64> = (0..p.w2.ncols())
        .map(|k| pooled.iter().enumerate().map(|(c, v)| v * p.w2[[c, k]]).sum::<f64>() + p.b[k])
        .collect();
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let s: f64 = z.iter().sum();
    z.into_iter().map(|v| v / s).collect()
}

/// Number of connected components of a symmetric adjacency (union-find).
pub fn components(a: &CsrMatrix) -> usize {
    let n = a.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for (i, j, _) in a.triplets() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Sparse random symmetric graph for spectral checks.
pub fn random_symmetric<R: Rng>(rng: &mut R, m: usize, density: f64) -> CsrMatrix {
    random_subgraph(rng, m, 0, density).volume
}

/// Smallest distance of the instance from a non-differentiable point: ReLU
/// inputs near zero or near-tied max-pool winners.
fn kink_margin(trace: &i2bgnn::gnn::ForwardTrace, batch: &BatchedGraphs) -> f64 {
    let mut margin = f64::INFINITY;
    for v in trace.p1.iter().chain(trace.p2.iter()) {
        margin = margin.min(v.abs());
    }
    for span in batch.offsets.windows(2) {
        for f in 0..trace.h2.ncols() {
            let mut col: Vec<f64> = (span[0]..span[1]).map(|n| trace.h2[[n, f]]).collect();
            col.sort_by(|a, b| b.total_cmp(a));
            if col[0] > 0.0 && col.len() > 1 {
                margin = margin.min(col[0] - col[1]);
            }
        }
    }
    margin
}

pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Central finite differences over every parameter of a random instance
/// (graphs of up to 6 nodes, 4 features, hidden width 5, up to 3 graphs).
/// Returns `None` when the instance sits within 1e-3 of a kink.
pub fn gradient_check(seed: u64, dropout: f64, eps: f64) -> Option<GradientCheck> {
    use i2bgnn::gnn::{cross_entropy, forward, loss_and_backward, InputOptions};
    let mut r = rng(seed);
    let graphs = r.random_range(1..=3);
    let inputs: Vec<GraphInput> = (0..graphs)
        .map(|_| {
            let m = r.random_range(1..=6);
            let sg = random_subgraph(&mut r, m, 4, 0.5);
            GraphInput::prepare(&sg, &InputOptions::default()).unwrap()
        })
        .collect();
    let batch = batch_of(&inputs);
    let params = random_params(&mut r, 4, 5);
    let mask_seed = r.random::<u64>();
    let run = |p: &ModelParams| {
        let mut mr = rng(mask_seed);
        forward(&batch, p, dropout, Some(&mut mr)).unwrap()
    };
    let trace = run(&params);
    if kink_margin(&trace, &batch) < 1e-3 {
        return None;
    }
    let (_, grads) = loss_and_backward(&trace, &batch, &params, false).unwrap();
    let loss = |p: &ModelParams| cross_entropy(&run(p).logits, &batch.labels);

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut probe = |get: &dyn Fn(&mut ModelParams) -> &mut f64, analytic: f64| {
        let mut plus = params.clone();
        *get(&mut plus) += eps;
        let mut minus = params.clone();
        *get(&mut minus) -= eps;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-6);
        worst = worst.max(rel);
        checked += 1;
    };
    for ((i, j), &g) in grads.params.w0.indexed_iter() {
        probe(&move |p: &mut ModelParams| &mut p.w0[[i, j]], g);
    }
    for ((i, j), &g) in grads.params.w1.indexed_iter() {
        probe(&move |p: &mut ModelParams| &mut p.w1[[i, j]], g);
    }
    for ((i, j), &g) in grads.params.w2.indexed_iter() {
        probe(&move |p: &mut ModelParams| &mut p.w2[[i, j]], g);
    }
    for (i, &g) in grads.params.b.indexed_iter() {
        probe(&move |p: &mut ModelParams| &mut p.b[i], g);
    }
    Some(GradientCheck {
        max_rel_error: worst,
        checked,
    })
}

/// (asymmetry, smallest entry, smallest eigenvalue, largest eigenvalue).
pub fn spectrum_stats(a_hat: &CsrMatrix) -> (f64, f64, f64, f64) {
    let d = a_hat.to_dense();
    let m = d.nrows();
    let asym = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (d[[i, j]] - d[[j, i]]).abs())
        .fold(0.0, f64::max);
    let min_entry = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let eig = nalgebra::DMatrix::from_fn(m, m, |i, j| d[[i, j]]).symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (asym, min_entry, lo, hi)
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `tr(exp(−t L))` by nalgebra's matrix exponential, independent of the
/// eigendecomposition path.
pub fn heat_trace_by_expm(subgraph: &Subgraph, t: f64) -> f64 {
    let m = subgraph.num_nodes();
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (i, j, w) in subgraph.volume.triplets() {
        if i != j && w != 0.0 {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    let deg: Vec<f64> = (0..m).map(|i| a.row(i).sum()).collect();
    let l = nalgebra::DMatrix::from_fn(m, m, |i, j| {
        let d = if i == j && deg[i] > 0.0 { 1.0 } else { 0.0 };
        if deg[i] > 0.0 && deg[j] > 0.0 {
            d - a[(i, j)] / (deg[i] * deg[j]).sqrt()
        } else {
            d
        }
    });
    (l * -t).exp().trace()
}

/// Unweighted symmetric random subgraph that may be disconnected.
pub fn random_unweighted<R: Rng>(rng: &mut R, m: usize, density: f64) -> Subgraph {
    let mut sg = random_subgraph(rng, m, 0, density);
    sg.volume = sg.volume.map_values(|_| 1.0);
    sg.frequency = sg.volume.clone();
    sg
}
