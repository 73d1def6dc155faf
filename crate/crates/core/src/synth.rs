//! Seeded synthetic transaction graphs with two planted account classes.
//!
//! Class 1 ("bot-like") accounts fan out to many fresh, short-lived partner
//! accounts with small, frequent transfers and call a narrow set of contracts.
//! Class 0 ("normal-like") accounts trade with fewer, established accounts,
//! move heavy-tailed amounts, and call contracts broadly. `noise` pulls both
//! profiles linearly toward their midpoint; at `noise = 1` they coincide.
//!
//! These are synthetic constructs for desk-scale testing, not statistics of
//! any real chain.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::graph::{CallRecord, CallTable, GraphBuilder, LabelTable, TransactionGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_per_class: usize,
    pub noise: f64,
    /// Neighbor cap the data is meant to be sampled with; degrees scale with it.
    pub n_u_target: usize,
    pub vocab_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_per_class: 500,
            noise: 0.1,
            n_u_target: 10,
            vocab_size: 32,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::Config("per_class must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise {} outside [0, 1]", self.noise)));
        }
        if self.n_u_target == 0 {
            return Err(Error::Config("n_u_target must be at least 1".into()));
        }
        if self.vocab_size < 8 {
            return Err(Error::Config("vocab_size must be at least 8".into()));
        }
        Ok(())
    }
}

/// Behavioral parameters of one class, all blendable.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Profile {
    degree_lo: f64,
    degree_hi: f64,
    /// Share of partners that are fresh accounts rather than established ones.
    fresh_share: f64,
    freq_lo: f64,
    freq_hi: f64,
    log_volume_mu: f64,
    log_volume_sigma: f64,
    /// Share of edges that leave the target account.
    outgoing_share: f64,
    contracts_lo: f64,
    contracts_hi: f64,
    calls_lo: f64,
    calls_hi: f64,
    /// Share of calls aimed at the small "focus" contract set.
    focus_share: f64,
}

impl Profile {
    fn bot(n_u: f64) -> Self {
        Self {
            degree_lo: 2.4 * n_u,
            degree_hi: 4.8 * n_u,
            fresh_share: 0.9,
            freq_lo: 5.0,
            freq_hi: 30.0,
            log_volume_mu: -1.0,
            log_volume_sigma: 0.5,
            outgoing_share: 0.85,
            contracts_lo: 2.0,
            contracts_hi: 4.0,
            calls_lo: 20.0,
            calls_hi: 100.0,
            focus_share: 0.95,
        }
    }

    fn normal(n_u: f64) -> Self {
        Self {
            degree_lo: (0.4 * n_u).max(1.0),
            degree_hi: (1.2 * n_u).max(1.0),
            fresh_share: 0.1,
            freq_lo: 1.0,
            freq_hi: 3.0,
            log_volume_mu: 2.0,
            log_volume_sigma: 2.0,
            outgoing_share: 0.5,
            contracts_lo: 3.0,
            contracts_hi: 10.0,
            calls_lo: 1.0,
            calls_hi: 10.0,
            focus_share: 0.1,
        }
    }

    fn blend(self, other: Self, toward_other: f64) -> Self {
        let mix = |a: f64, b: f64| a + (b - a) * toward_other;
        Self {
            degree_lo: mix(self.degree_lo, other.degree_lo),
            degree_hi: mix(self.degree_hi, other.degree_hi),
            fresh_share: mix(self.fresh_share, other.fresh_share),
            freq_lo: mix(self.freq_lo, other.freq_lo),
            freq_hi: mix(self.freq_hi, other.freq_hi),
            log_volume_mu: mix(self.log_volume_mu, other.log_volume_mu),
            log_volume_sigma: mix(self.log_volume_sigma, other.log_volume_sigma),
            outgoing_share: mix(self.outgoing_share, other.outgoing_share),
            contracts_lo: mix(self.contracts_lo, other.contracts_lo),
            contracts_hi: mix(self.contracts_hi, other.contracts_hi),
            calls_lo: mix(self.calls_lo, other.calls_lo),
            calls_hi: mix(self.calls_hi, other.calls_hi),
            focus_share: mix(self.focus_share, other.focus_share),
        }
    }
}

fn int_between<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> usize {
    let lo = lo.round().max(1.0) as usize;
    let hi = (hi.round() as usize).max(lo);
    rng.random_range(lo..=hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub src: String,
    pub dst: String,
    pub volume: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub edges: Vec<EdgeRow>,
    pub labels: Vec<(String, u8)>,
    pub calls: Vec<CallRecord>,
    pub vocabulary: Vec<String>,
}

const FOCUS_CONTRACTS: usize = 4;

struct Generator {
    rng: ChaCha8Rng,
    names: Vec<String>,
    next_name: usize,
    edges: Vec<EdgeRow>,
    calls: Vec<CallRecord>,
    vocab_size: usize,
}

impl Generator {
    fn fresh(&mut self) -> String {
        let name = self.names[self.next_name].clone();
        self.next_name += 1;
        name
    }

    fn edge(&mut self, a: &str, b: &str, outgoing: bool, profile: &Profile, volume: &LogNormal<f64>) {
        let (src, dst) = if outgoing { (a, b) } else { (b, a) };
        let count = int_between(&mut self.rng, profile.freq_lo, profile.freq_hi) as u64;
        let v = volume.sample(&mut self.rng);
        self.edges.push(EdgeRow {
            src: src.to_string(),
            dst: dst.to_string(),
            volume: v,
            count,
        });
    }

    fn contract_calls(&mut self, account: &str, profile: &Profile) {
        let distinct = int_between(&mut self.rng, profile.contracts_lo, profile.contracts_hi);
        let mut chosen: Vec<usize> = Vec::with_capacity(distinct);
        for _ in 0..distinct {
            let c = if self.rng.random::<f64>() < profile.focus_share {
                self.rng.random_range(0..FOCUS_CONTRACTS)
            } else {
                self.rng.random_range(FOCUS_CONTRACTS..self.vocab_size)
            };
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        for c in chosen {
            let count = int_between(&mut self.rng, profile.calls_lo, profile.calls_hi) as u64;
            self.calls.push(CallRecord {
                caller: account.to_string(),
                contract: format!("contract{c:03}"),
                count,
            });
        }
    }
}

/// Generates edges, labels (exactly `n_per_class` per class) and contract calls.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_u = config.n_u_target as f64;
    let bot = Profile::bot(n_u);
    let normal = Profile::normal(n_u);
    let mid = bot.blend(normal, 0.5);
    let profiles = [normal.blend(mid, config.noise), bot.blend(mid, config.noise)];

    let targets = 2 * config.n_per_class;
    let established = (4 * targets).max(50);
    let max_degree = profiles.iter().map(|p| p.degree_hi.round() as usize).max().unwrap();
    let capacity = targets + established + targets * (max_degree + 1);
    let mut ids: Vec<usize> = (0..capacity).collect();
    ids.shuffle(&mut rng);
    let names = ids.into_iter().map(|i| format!("acct{i:07}")).collect();

    let mut g = Generator {
        rng,
        names,
        next_name: 0,
        edges: Vec::new(),
        calls: Vec::new(),
        vocab_size: config.vocab_size,
    };

    // established accounts form a sparse background economy
    let background = Profile {
        fresh_share: 0.0,
        outgoing_share: 0.5,
        ..normal
    };
    let bg_volume = LogNormal::new(1.5, 1.5).expect("valid lognormal");
    let pool: Vec<String> = (0..established).map(|_| g.fresh()).collect();
    for i in 0..established {
        let out = g.rng.random_range(1..=4);
        for _ in 0..out {
            let mut j = g.rng.random_range(0..established);
            if j == i {
                j = (j + 1) % established;
            }
            let (a, b) = (pool[i].clone(), pool[j].clone());
            g.edge(&a, &b, true, &background, &bg_volume);
        }
        let a = pool[i].clone();
        g.contract_calls(&a, &background);
    }

    let mut classes: Vec<u8> = (0..targets).map(|i| (i % 2) as u8).collect();
    classes.shuffle(&mut g.rng);
    let mut labels = Vec::with_capacity(targets);
    for class in classes {
        let profile = profiles[class as usize];
        let volume = LogNormal::new(profile.log_volume_mu, profile.log_volume_sigma).expect("valid lognormal");
        let target = g.fresh();
        let degree = int_between(&mut g.rng, profile.degree_lo, profile.degree_hi);
        let fresh = (0..degree).filter(|_| g.rng.random::<f64>() < profile.fresh_share).count();
        let from_pool = (degree - fresh).min(established);
        let picks = index::sample(&mut g.rng, established, from_pool).into_vec();
        for p in picks {
            let partner = pool[p].clone();
            let outgoing = g.rng.random::<f64>() < profile.outgoing_share;
            g.edge(&target, &partner, outgoing, &profile, &volume);
        }
        for _ in 0..fresh {
            let leaf = g.fresh();
            let outgoing = g.rng.random::<f64>() < profile.outgoing_share;
            g.edge(&target, &leaf, outgoing, &profile, &volume);
            // some fresh accounts forward funds into the established pool
            if g.rng.random::<f64>() < 0.5 {
                let p = g.rng.random_range(0..established);
                let partner = pool[p].clone();
                g.edge(&leaf, &partner, true, &background, &bg_volume);
            }
        }
        g.contract_calls(&target, &profile);
        labels.push((target, class));
    }

    let mut edges = g.edges;
    edges.shuffle(&mut g.rng);
    Ok(SynthData {
        edges,
        labels,
        calls: g.calls,
        vocabulary: (0..config.vocab_size).map(|c| format!("contract{c:03}")).collect(),
    })
}

impl SynthData {
    /// Aggregated graph with labels attached.
    pub fn graph(&self) -> Result<TransactionGraph> {
        let mut b = GraphBuilder::new();
        for e in &self.edges {
            b.add(&e.src, &e.dst, e.volume, e.count).map_err(Error::Invalid)?;
        }
        let (graph, _) = b.finish()?;
        let (graph, missing) = graph.with_labels(&self.label_table()?)?;
        if !missing.is_empty() {
            return Err(Error::Invalid(format!("{} labeled accounts have no edges", missing.len())));
        }
        Ok(graph)
    }

    pub fn label_table(&self) -> Result<LabelTable> {
        let mut t = LabelTable::default();
        for (name, class) in &self.labels {
            t.insert(name, *class)?;
        }
        Ok(t)
    }

    /// Call table over the generator's full vocabulary.
    pub fn call_table(&self) -> CallTable {
        CallTable::with_vocabulary(self.vocabulary.clone(), &self.calls)
    }

    pub fn write_edges<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["src", "dst", "volume", "count"]).map_err(err)?;
        for e in &self.edges {
            w.write_record([&e.src, &e.dst, &e.volume.to_string(), &e.count.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_labels<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["account", "label"]).map_err(err)?;
        for (name, class) in &self.labels {
            w.write_record([name, &class.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_calls<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["account", "contract", "count"]).map_err(err)?;
        for c in &self.calls {
            w.write_record([&c.caller, &c.contract, &c.count.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }
}
