use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::metrics::{evaluate, Metrics, MetricsReport};
use super::split::{make_splits, Split, SplitRatio};
use crate::baselines::{
    fgsd_histogram, harmonic_distances, laplacian_spectrum, netlsd_from_spectrum, FgsdConfig, KnnModel,
    NetlsdConfig,
};
use crate::error::{Error, Result};
use crate::gnn::{predict, train, GraphInput, InputOptions, TrainConfig, Variant};
use crate::sampler::Subgraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    GnnVolume,
    GnnFrequency,
    FgsdKnn,
    NetlsdKnn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::GnnVolume, Method::GnnFrequency, Method::FgsdKnn, Method::NetlsdKnn];

    pub fn tag(self) -> &'static str {
        match self {
            Method::GnnVolume => "i2bgnn-v",
            Method::GnnFrequency => "i2bgnn-t",
            Method::FgsdKnn => "fgsd+knn",
            Method::NetlsdKnn => "netlsd+knn",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::GnnVolume => Some(Variant::Volume),
            Method::GnnFrequency => Some(Variant::Frequency),
            _ => None,
        }
    }

    /// Comma-separated method list.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}; expected one of i2bgnn-v, i2bgnn-t, fgsd+knn, netlsd+knn")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Variant is taken from the method; the rest applies to both variants.
    pub input: InputOptions,
    pub val_fraction: f64,
    pub knn_k: usize,
    pub fgsd_bins: usize,
    pub netlsd: NetlsdConfig,
    pub n_seeds: usize,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            input: InputOptions::default(),
            val_fraction: 0.1,
            knn_k: 5,
            fgsd_bins: 128,
            netlsd: NetlsdConfig::default(),
            n_seeds: 3,
            base_seed: 0,
        }
    }
}

/// A labeled dataset with lazily built per-method inputs, shared across
/// splits so normalization and eigendecompositions happen once.
pub struct Experiment<'a> {
    dataset: &'a [Subgraph],
    labels: Vec<u8>,
    config: ExperimentConfig,
    inputs: BTreeMap<&'static str, Vec<GraphInput>>,
    distances: Option<Vec<Vec<f64>>>,
    netlsd: Option<Vec<Vec<f64>>>,
}

impl<'a> Experiment<'a> {
    pub fn new(dataset: &'a [Subgraph], config: ExperimentConfig) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Invalid("empty dataset".into()));
        }
        let labels = dataset
            .iter()
            .map(|sg| {
                sg.label
                    .ok_or_else(|| Error::Invalid(format!("subgraph {} has no label", sg.center_name())))
            })
            .collect::<Result<Vec<_>>>()?;
        config.train.validate()?;
        if !(0.0..1.0).contains(&config.val_fraction) {
            return Err(Error::Config(format!("validation fraction {} outside [0, 1)", config.val_fraction)));
        }
        Ok(Self {
            dataset,
            labels,
            config,
            inputs: BTreeMap::new(),
            distances: None,
            netlsd: None,
        })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn splits(&self, ratio: &SplitRatio) -> Result<Vec<Split>> {
        let mut splits = make_splits(&self.labels, ratio, self.config.n_seeds, self.config.base_seed)?;
        for s in &mut splits {
            s.carve_validation(&self.labels, self.config.val_fraction);
        }
        Ok(splits)
    }

    fn prepare(&mut self, method: Method) -> Result<()> {
        match method.variant() {
            Some(variant) => {
                if !self.inputs.contains_key(variant.tag()) {
                    let options = InputOptions {
                        variant,
                        ..self.config.input
                    };
                    let inputs = self
                        .dataset
                        .par_iter()
                        .map(|sg| GraphInput::prepare(sg, &options))
                        .collect::<Result<Vec<_>>>()?;
                    self.inputs.insert(variant.tag(), inputs);
                }
            }
            None if method == Method::FgsdKnn => {
                if self.distances.is_none() {
                    self.distances = Some(self.dataset.par_iter().map(harmonic_distances).collect());
                }
            }
            None => {
                if self.netlsd.is_none() {
                    let cfg = &self.config.netlsd;
                    self.netlsd = Some(
                        self.dataset
                            .par_iter()
                            .map(|sg| netlsd_from_spectrum(&laplacian_spectrum(sg), cfg).values)
                            .collect(),
                    );
                }
            }
        }
        Ok(())
    }

    /// Test-set metrics of `method` on one split.
    pub fn run_split(&self, method: Method, split: &Split) -> Result<Metrics> {
        let test_labels: Vec<u8> = split.test.iter().map(|&i| self.labels[i]).collect();
        let predictions = match method.variant() {
            Some(variant) => {
                let inputs = self
                    .inputs
                    .get(variant.tag())
                    .ok_or_else(|| Error::Invalid(format!("inputs for {method} not prepared")))?;
                let pick = |idx: &[usize]| idx.iter().map(|&i| inputs[i].clone()).collect::<Vec<_>>();
                let config = TrainConfig {
                    seed: split.seed,
                    ..self.config.train
                };
                let outcome = train(&pick(&split.train), &pick(&split.validation), &config)?;
                predict(&outcome.params, &pick(&split.test), config.batch_size)?
            }
            None => {
                // Validation graphs are folded back into training for the
                // non-parametric baselines.
                let train_idx: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
                let features: Box<dyn Fn(usize) -> Vec<f64> + Sync + '_> = if method == Method::FgsdKnn {
                    let distances = self
                        .distances
                        .as_ref()
                        .ok_or_else(|| Error::Invalid("fgsd distances not prepared".into()))?;
                    let fgsd =
                        FgsdConfig::calibrated(self.config.fgsd_bins, train_idx.iter().map(|&i| &self.dataset[i]));
                    fgsd_histogram(&[], &fgsd)?;
                    Box::new(move |i| {
                        fgsd_histogram(&distances[i], &fgsd)
                            .expect("config checked above")
                            .values
                    })
                } else {
                    let sigs = self
                        .netlsd
                        .as_ref()
                        .ok_or_else(|| Error::Invalid("netlsd signatures not prepared".into()))?;
                    Box::new(move |i| sigs[i].clone())
                };
                let points = train_idx.iter().map(|&i| features(i)).collect();
                let labels = train_idx.iter().map(|&i| self.labels[i]).collect();
                let model = KnnModel::fit(points, labels, self.config.knn_k)?;
                let queries: Vec<Vec<f64>> = split.test.iter().map(|&i| features(i)).collect();
                model.predict_all(&queries)?
            }
        };
        evaluate(&predictions, &test_labels)
    }

    /// Mean metrics of `method` over the seeded splits.
    pub fn run(&mut self, method: Method, splits: &[Split]) -> Result<MetricsReport> {
        self.prepare(method)?;
        let this = &*self;
        let per_seed = splits
            .par_iter()
            .map(|s| this.run_split(method, s))
            .collect::<Result<Vec<_>>>()?;
        log::info!("{method} at {}: mean f1 {:.4}", splits.first().map_or("", |s| &s.ratio), {
            MetricsReport::from_runs(per_seed.clone()).f1
        });
        Ok(MetricsReport::from_runs(per_seed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub ratio: String,
    pub report: MetricsReport,
}

/// Every method on the same seeded splits at one ratio.
pub fn run_comparison(
    dataset: &[Subgraph],
    methods: &[Method],
    ratio: &SplitRatio,
    config: &ExperimentConfig,
) -> Result<Vec<ComparisonRow>> {
    if methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    let mut exp = Experiment::new(dataset, config.clone())?;
    let splits = exp.splits(ratio)?;
    methods
        .iter()
        .map(|&method| {
            Ok(ComparisonRow {
                method,
                ratio: ratio.tag.clone(),
                report: exp.run(method, &splits)?,
            })
        })
        .collect()
}

/// One row per (ratio, method), ratios outermost.
pub fn run_split_sweep(
    dataset: &[Subgraph],
    ratios: &[SplitRatio],
    methods: &[Method],
    config: &ExperimentConfig,
) -> Result<Vec<ComparisonRow>> {
    if methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    if ratios.is_empty() {
        return Err(Error::Config("ratio list is empty".into()));
    }
    let mut exp = Experiment::new(dataset, config.clone())?;
    let mut rows = Vec::with_capacity(ratios.len() * methods.len());
    for ratio in ratios {
        let splits = exp.splits(ratio)?;
        for &method in methods {
            rows.push(ComparisonRow {
                method,
                ratio: ratio.tag.clone(),
                report: exp.run(method, &splits)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub hops: u8,
    pub method: Method,
    pub mean_nodes: f64,
    pub report: MetricsReport,
    /// Per-seed F1 at this depth minus at one hop, averaged.
    pub delta_f1: f64,
}

/// Runs each method on the same accounts sampled at every depth in `by_depth`
/// (pairs of hop count and dataset). The datasets must list the same accounts
/// in the same order so the seeded splits coincide.
pub fn run_depth_study(
    by_depth: &[(u8, Vec<Subgraph>)],
    methods: &[Method],
    ratio: &SplitRatio,
    config: &ExperimentConfig,
) -> Result<Vec<DepthRow>> {
    if methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    let Some((_, reference)) = by_depth.first() else {
        return Err(Error::Config("no depths to compare".into()));
    };
    for (hops, ds) in by_depth {
        let same = ds.len() == reference.len()
            && ds.iter().zip(reference).all(|(a, b)| a.center_name() == b.center_name() && a.label == b.label);
        if !same {
            return Err(Error::Invalid(format!("{hops}-hop dataset lists different accounts")));
        }
    }
    let mut rows: Vec<DepthRow> = Vec::new();
    let mut baseline: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for (hops, ds) in by_depth {
        let mut exp = Experiment::new(ds, config.clone())?;
        let splits = exp.splits(ratio)?;
        let mean_nodes = ds.iter().map(Subgraph::num_nodes).sum::<usize>() as f64 / ds.len() as f64;
        for &method in methods {
            let report = exp.run(method, &splits)?;
            let f1s: Vec<f64> = report.per_seed.iter().map(|m| m.f1).collect();
            let reference = baseline.entry(method).or_insert_with(|| f1s.clone());
            let delta_f1 = f1s.iter().zip(reference.iter()).map(|(a, b)| a - b).sum::<f64>() / f1s.len() as f64;
            rows.push(DepthRow {
                hops: *hops,
                method,
                mean_nodes,
                report,
                delta_f1,
            });
        }
    }
    Ok(rows)
}

fn provenance_lines<W: Write>(out: &mut W, provenance: &BTreeMap<String, String>) -> std::io::Result<()> {
    for (k, v) in provenance {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

fn fmt_metric(x: f64) -> String {
    format!("{x:.6}")
}

fn seed_columns(report: &MetricsReport, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| report.per_seed.get(i).map_or_else(String::new, |m| fmt_metric(m.f1)))
        .collect()
}

fn write_csv<W: Write>(
    mut out: W,
    provenance: &BTreeMap<String, String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    provenance_lines(&mut out, provenance).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

fn max_seeds<'r>(reports: impl Iterator<Item = &'r MetricsReport>) -> usize {
    reports.map(|r| r.per_seed.len()).max().unwrap_or(0)
}

/// `method,ratio,precision,recall,f1,f1_seed0..` rows after `# key = value`
/// provenance lines.
pub fn write_comparison_csv<W: Write>(
    out: W,
    rows: &[ComparisonRow],
    provenance: &BTreeMap<String, String>,
) -> Result<()> {
    let n = max_seeds(rows.iter().map(|r| &r.report));
    let mut header: Vec<String> = ["method", "ratio", "precision", "recall", "f1"].map(String::from).to_vec();
    header.extend((0..n).map(|i| format!("f1_seed{i}")));
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.method.tag().to_string(),
                r.ratio.clone(),
                fmt_metric(r.report.precision),
                fmt_metric(r.report.recall),
                fmt_metric(r.report.f1),
            ];
            row.extend(seed_columns(&r.report, n));
            row
        })
        .collect();
    write_csv(out, provenance, header, body)
}

pub fn write_depth_csv<W: Write>(out: W, rows: &[DepthRow], provenance: &BTreeMap<String, String>) -> Result<()> {
    let n = max_seeds(rows.iter().map(|r| &r.report));
    let mut header: Vec<String> = ["hops", "method", "mean_nodes", "precision", "recall", "f1", "delta_f1"]
        .map(String::from)
        .to_vec();
    header.extend((0..n).map(|i| format!("f1_seed{i}")));
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.hops.to_string(),
                r.method.tag().to_string(),
                format!("{:.3}", r.mean_nodes),
                fmt_metric(r.report.precision),
                fmt_metric(r.report.recall),
                fmt_metric(r.report.f1),
                fmt_metric(r.delta_f1),
            ];
            row.extend(seed_columns(&r.report, n));
            row
        })
        .collect();
    write_csv(out, provenance, header, body)
}

/// Fixed-width table for the terminal.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        cells
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&mut header.iter().copied());
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.tag().to_string(),
                r.ratio.clone(),
                format!("{:.4}", r.report.precision),
                format!("{:.4}", r.report.recall),
                format!("{:.4}", r.report.f1),
            ]
        })
        .collect();
    format_table(&["method", "ratio", "precision", "recall", "f1"], &body)
}

pub fn depth_table(rows: &[DepthRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.hops.to_string(),
                r.method.tag().to_string(),
                format!("{:.1}", r.mean_nodes),
                format!("{:.4}", r.report.precision),
                format!("{:.4}", r.report.recall),
                format!("{:.4}", r.report.f1),
                format!("{:+.4}", r.delta_f1),
            ]
        })
        .collect();
    format_table(&["hops", "method", "nodes", "precision", "recall", "f1", "delta_f1"], &body)
}
