//! Run configuration: defaults, then a `key = value` file, then `I2B_*`
//! environment variables, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::baselines::NetlsdConfig;
use crate::error::{Error, Result};
use crate::features::{CountTransform, FeatureSchema};
use crate::gnn::{AdamConfig, InputOptions, TrainConfig, Variant, WeightTransform};
use crate::graph::LabelMapping;
use crate::harness::{ExperimentConfig, Method, SplitRatio};
use crate::sampler::SamplingConfig;
use crate::synth::SynthConfig;

pub const ENV_PREFIX: &str = "I2B_";

/// Every recognized key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "seed for generation, splits, init, shuffles and dropout"),
    ("per_class", "synthetic accounts per class"),
    ("noise", "synthetic class overlap in [0, 1]"),
    ("vocab_size", "synthetic contract vocabulary size"),
    ("top_c", "contracts kept in the feature vocabulary"),
    ("hops", "sampling depth, 1 or 2"),
    ("max_neighbors", "neighbors kept per expanded node"),
    ("eosio", "stop expansion at EOSIO system accounts"),
    ("symmetrize", "use A + A^T as the subgraph adjacency"),
    ("name_kind", "append the three-way account-name one-hot"),
    ("binary_features", "use 0/1 call indicators instead of ln(1 + count)"),
    ("variant", "adjacency fed to the network: v (volume) or t (frequency)"),
    ("hidden", "hidden width"),
    ("epochs", "training epochs"),
    ("batch", "graphs per mini-batch"),
    ("dropout", "dropout rate"),
    ("lr", "Adam learning rate"),
    ("weights", "edge weight transform before normalization: log1p or raw"),
    ("row_normalize", "scale feature rows to sum 1"),
    ("val_fraction", "share of the training side held out for model selection"),
    ("ratio", "train:test ratio, a:b or a fraction"),
    ("n_seeds", "resplit seeds averaged by experiments"),
    ("methods", "comma-separated experiment methods"),
    ("ratios", "comma-separated ratios for the sweep"),
    ("k", "neighbors for the kNN baselines"),
    ("bins", "FGSD histogram bins"),
    ("threads", "worker threads, 0 for all cores"),
    ("strict_determinism", "single worker thread"),
    ("label_map", "token=class pairs for the label file"),
    ("out_dir", "directory for produced artifacts"),
    ("edges", "edge CSV path"),
    ("labels", "label CSV path"),
    ("calls", "contract-call CSV path"),
    ("graph", "graph file path"),
    ("bundle", "subgraph bundle path"),
    ("checkpoint", "model checkpoint path"),
];

const PATH_KEYS: &[&str] = &["out_dir", "edges", "labels", "calls", "graph", "bundle", "checkpoint"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub per_class: usize,
    pub noise: f64,
    pub vocab_size: usize,
    pub top_c: usize,
    pub hops: u8,
    pub max_neighbors: usize,
    pub eosio: bool,
    pub symmetrize: bool,
    pub name_kind: bool,
    pub binary_features: bool,
    pub variant: Variant,
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weights: WeightTransform,
    pub row_normalize: bool,
    pub val_fraction: f64,
    pub ratio: SplitRatio,
    pub n_seeds: usize,
    pub methods: Vec<Method>,
    pub ratios: Vec<SplitRatio>,
    pub k: usize,
    pub bins: usize,
    pub threads: usize,
    pub strict_determinism: bool,
    pub label_map: String,
    pub out_dir: PathBuf,
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub calls: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let sampling = SamplingConfig::default();
        let synth = SynthConfig::default();
        Self {
            seed: synth.seed,
            per_class: synth.n_per_class,
            noise: synth.noise,
            vocab_size: synth.vocab_size,
            top_c: 14885,
            hops: sampling.hops,
            max_neighbors: sampling.max_neighbors,
            eosio: sampling.eosio,
            symmetrize: sampling.symmetrize,
            name_kind: true,
            binary_features: false,
            variant: Variant::Frequency,
            hidden: train.hidden,
            epochs: train.epochs,
            batch: train.batch_size,
            dropout: train.dropout,
            lr: train.adam.lr,
            weights: WeightTransform::Log1p,
            row_normalize: false,
            val_fraction: 0.1,
            ratio: "1:1".parse().expect("static ratio"),
            n_seeds: 3,
            methods: Method::ALL.to_vec(),
            ratios: SplitRatio::sweep_ratios(),
            k: 5,
            bins: 128,
            threads: 0,
            strict_determinism: false,
            label_map: "0=0,1=1".into(),
            out_dir: PathBuf::from("."),
            edges: None,
            labels: None,
            calls: None,
            graph: None,
            bundle: None,
            checkpoint: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad value {value:?} for {key}; expected true or false"))),
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let k = key.as_str();
        let v = value.trim();
        let path = || (!v.is_empty()).then(|| PathBuf::from(v));
        match k {
            "seed" => self.seed = parse(k, v)?,
            "per_class" => self.per_class = parse(k, v)?,
            "noise" => self.noise = parse(k, v)?,
            "vocab_size" => self.vocab_size = parse(k, v)?,
            "top_c" => self.top_c = parse(k, v)?,
            "hops" => {
                let hops: u8 = parse(k, v)?;
                if !(1..=2).contains(&hops) {
                    return Err(Error::Config(format!("hops must be 1 or 2, got {v}")));
                }
                self.hops = hops;
            }
            "max_neighbors" => self.max_neighbors = parse(k, v)?,
            "eosio" => self.eosio = parse_bool(k, v)?,
            "symmetrize" => self.symmetrize = parse_bool(k, v)?,
            "name_kind" => self.name_kind = parse_bool(k, v)?,
            "binary_features" => self.binary_features = parse_bool(k, v)?,
            "variant" => self.variant = Variant::parse(v)?,
            "hidden" => self.hidden = parse(k, v)?,
            "epochs" => self.epochs = parse(k, v)?,
            "batch" => self.batch = parse(k, v)?,
            "dropout" => self.dropout = parse(k, v)?,
            "lr" => self.lr = parse(k, v)?,
            "weights" => {
                self.weights = match v.to_ascii_lowercase().as_str() {
                    "log1p" => WeightTransform::Log1p,
                    "raw" => WeightTransform::Raw,
                    _ => return Err(Error::Config(format!("bad value {v:?} for weights; expected log1p or raw"))),
                }
            }
            "row_normalize" => self.row_normalize = parse_bool(k, v)?,
            "val_fraction" => self.val_fraction = parse(k, v)?,
            "ratio" => self.ratio = v.parse()?,
            "n_seeds" => self.n_seeds = parse(k, v)?,
            "methods" => self.methods = Method::parse_list(v)?,
            "ratios" => {
                self.ratios = v
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "k" => self.k = parse(k, v)?,
            "bins" => self.bins = parse(k, v)?,
            "threads" => self.threads = parse(k, v)?,
            "strict_determinism" => self.strict_determinism = parse_bool(k, v)?,
            "label_map" => {
                LabelMapping::parse(v)?;
                self.label_map = v.to_string();
            }
            "out_dir" => self.out_dir = path().unwrap_or_else(|| PathBuf::from(".")),
            "edges" => self.edges = path(),
            "labels" => self.labels = path(),
            "calls" => self.calls = path(),
            "graph" => self.graph = path(),
            "bundle" => self.bundle = path(),
            "checkpoint" => self.checkpoint = path(),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("config line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Applies `I2B_<KEY>` variables from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|key| (normalize_key(key), v)))
            .collect();
        found.sort();
        for (k, v) in found {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then the process environment, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        cfg.apply_env(std::env::vars())?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth().validate()?;
        self.sampling().validate()?;
        self.train_config().validate()?;
        if self.top_c == 0 {
            return Err(Error::Config("top_c must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} outside [0, 1)", self.val_fraction)));
        }
        if self.n_seeds == 0 || self.k == 0 || self.bins == 0 {
            return Err(Error::Config("n_seeds, k and bins must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if self.ratios.is_empty() {
            return Err(Error::Config("ratio list is empty".into()));
        }
        Ok(())
    }

    /// Current value of `key` in the same syntax `set` accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let p = |x: &Option<PathBuf>| x.as_ref().map_or_else(String::new, |p| p.display().to_string());
        let join = |items: Vec<String>| items.join(",");
        Some(match normalize_key(key).as_str() {
            "seed" => self.seed.to_string(),
            "per_class" => self.per_class.to_string(),
            "noise" => self.noise.to_string(),
            "vocab_size" => self.vocab_size.to_string(),
            "top_c" => self.top_c.to_string(),
            "hops" => self.hops.to_string(),
            "max_neighbors" => self.max_neighbors.to_string(),
            "eosio" => self.eosio.to_string(),
            "symmetrize" => self.symmetrize.to_string(),
            "name_kind" => self.name_kind.to_string(),
            "binary_features" => self.binary_features.to_string(),
            "variant" => self.variant.tag().to_string(),
            "hidden" => self.hidden.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch" => self.batch.to_string(),
            "dropout" => self.dropout.to_string(),
            "lr" => self.lr.to_string(),
            "weights" => match self.weights {
                WeightTransform::Log1p => "log1p".into(),
                WeightTransform::Raw => "raw".into(),
            },
            "row_normalize" => self.row_normalize.to_string(),
            "val_fraction" => self.val_fraction.to_string(),
            "ratio" => self.ratio.tag.clone(),
            "n_seeds" => self.n_seeds.to_string(),
            "methods" => join(self.methods.iter().map(|m| m.tag().to_string()).collect()),
            "ratios" => join(self.ratios.iter().map(|r| r.tag.clone()).collect()),
            "k" => self.k.to_string(),
            "bins" => self.bins.to_string(),
            "threads" => self.threads.to_string(),
            "strict_determinism" => self.strict_determinism.to_string(),
            "label_map" => self.label_map.clone(),
            "out_dir" => self.out_dir.display().to_string(),
            "edges" => p(&self.edges),
            "labels" => p(&self.labels),
            "calls" => p(&self.calls),
            "graph" => p(&self.graph),
            "bundle" => p(&self.bundle),
            "checkpoint" => p(&self.checkpoint),
            _ => return None,
        })
    }

    /// Every non-path setting; embedded in produced artifacts. Paths and the
    /// thread count are left out so relocated reruns produce identical bytes.
    pub fn provenance(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|(k, _)| *k)
            .filter(|k| !PATH_KEYS.contains(k) && *k != "threads")
            .map(|k| (k.to_string(), self.get(k).expect("listed key")))
            .collect()
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            n_per_class: self.per_class,
            noise: self.noise,
            n_u_target: self.max_neighbors,
            vocab_size: self.vocab_size,
        }
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            hops: self.hops,
            max_neighbors: self.max_neighbors,
            eosio: self.eosio,
            symmetrize: self.symmetrize,
        }
    }

    pub fn schema(&self, vocabulary: Vec<String>) -> Result<FeatureSchema> {
        let transform = if self.binary_features {
            CountTransform::Binary
        } else {
            CountTransform::Log1p
        };
        FeatureSchema::new(vocabulary, self.name_kind, transform)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            epochs: self.epochs,
            batch_size: self.batch,
            dropout: self.dropout,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            seed: self.seed,
        }
    }

    pub fn input_options(&self) -> InputOptions {
        InputOptions {
            variant: self.variant,
            weight_transform: self.weights,
            row_normalize: self.row_normalize,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            train: self.train_config(),
            input: self.input_options(),
            val_fraction: self.val_fraction,
            knn_k: self.k,
            fgsd_bins: self.bins,
            netlsd: NetlsdConfig::default(),
            n_seeds: self.n_seeds,
            base_seed: self.seed,
        }
    }

    pub fn label_mapping(&self) -> Result<LabelMapping> {
        LabelMapping::parse(&self.label_map)
    }

    /// Worker count for the thread pool.
    pub fn worker_threads(&self) -> usize {
        if self.strict_determinism {
            1
        } else {
            self.threads
        }
    }

    pub fn out_path(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn every_key_round_trips() {
        let cfg = RunConfig::default();
        for (k, _) in KEYS {
            let v = cfg.get(k).unwrap();
            let mut other = RunConfig::default();
            other.set(k, &v).unwrap();
            assert_eq!(other, cfg, "{k}");
        }
    }

    #[test]
    fn three_hops_rejected() {
        let err = RunConfig::default().set("hops", "3").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn file_then_env_then_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nepochs = 5\nhidden = 16 # trailing\n").unwrap();
        cfg.apply_env([("I2B_HIDDEN".to_string(), "32".to_string()), ("OTHER".into(), "x".into())])
            .unwrap();
        cfg.set("max-neighbors", "4").unwrap();
        assert_eq!((cfg.epochs, cfg.hidden, cfg.max_neighbors), (5, 32, 4));
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(RunConfig::default().apply_text("colour = red").is_err());
    }

    #[test]
    fn provenance_omits_paths() {
        let mut cfg = RunConfig::default();
        cfg.set("out_dir", "/tmp/a").unwrap();
        let p = cfg.provenance();
        assert!(!p.contains_key("out_dir") && p.contains_key("seed"));
    }
}
