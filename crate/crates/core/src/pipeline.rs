//! File-staged pipeline: each stage reads artifacts, writes artifacts and
//! returns a short summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baselines::{
    fgsd_signature, netlsd_signature, write_signatures, FgsdConfig, GraphSignature, NetlsdConfig,
};
use crate::bundle::{read_bundle, write_bundle, BundleHeader};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gnn::{predict, train as train_model, Checkpoint, GraphInput, InputOptions};
use crate::graph::{ingest_calls, ingest_edges, ingest_labels, load_graph, save_graph, CallTable, TransactionGraph};
use crate::harness::{
    comparison_table, depth_table, evaluate, run_comparison, run_depth_study, run_split_sweep, stratified_split,
    write_comparison_csv, write_depth_csv, Metrics, SplitRatio,
};
use crate::sampler::{extract_dataset, featurize, Subgraph};
use crate::synth::generate;

pub const GRAPH_FILE: &str = "graph.i2bg";
pub const BUNDLE_FILE: &str = "bundle.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("missing required --{flag}")))
}

fn graph_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_path(&cfg.graph, GRAPH_FILE)
}

fn bundle_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_path(&cfg.bundle, BUNDLE_FILE)
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_path(&cfg.checkpoint, CHECKPOINT_FILE)
}

/// Reads edges and optional labels into a graph file.
pub fn ingest(cfg: &RunConfig) -> Result<StageReport> {
    let edges = required(&cfg.edges, "edges")?;
    let (mut graph, stats) = ingest_edges(open(edges)?).map_err(|e| with_file(e, edges))?;
    let mut missing = Vec::new();
    if let Some(labels) = &cfg.labels {
        let table = ingest_labels(open(labels)?, &cfg.label_mapping()?).map_err(|e| with_file(e, labels))?;
        (graph, missing) = graph.with_labels(&table)?;
        if !missing.is_empty() {
            log::warn!("{} labeled accounts do not appear in the edge data", missing.len());
        }
    }
    let out = graph_path(cfg);
    save_graph(&graph, &out)?;
    Ok(StageReport {
        summary: format!(
            "ingested {} rows into {} accounts and {} edges ({} self-loops dropped, {} labeled, {} labels without edges)",
            stats.rows,
            graph.num_accounts(),
            graph.num_edges(),
            stats.dropped_self_loops,
            graph.labeled_accounts().len(),
            missing.len()
        ),
        artifacts: vec![out],
    })
}

fn with_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}

/// Writes a planted-pattern dataset as edge, label and call CSVs plus a graph file.
pub fn synth(cfg: &RunConfig) -> Result<StageReport> {
    let data = generate(&cfg.synth())?;
    let mut artifacts = Vec::new();
    for (name, which) in [("edges.csv", 0), ("labels.csv", 1), ("calls.csv", 2)] {
        let path = cfg.out_dir.join(name);
        let mut w = create(&path)?;
        match which {
            0 => data.write_edges(&mut w)?,
            1 => data.write_labels(&mut w)?,
            _ => data.write_calls(&mut w)?,
        }
        finish(w, &path)?;
        artifacts.push(path);
    }
    let graph = data.graph()?;
    let path = graph_path(cfg);
    save_graph(&graph, &path)?;
    artifacts.push(path);
    Ok(StageReport {
        summary: format!(
            "generated {} accounts, {} edges, {} labeled targets",
            graph.num_accounts(),
            graph.num_edges(),
            data.labels.len()
        ),
        artifacts,
    })
}

fn load_calls(cfg: &RunConfig) -> Result<CallTable> {
    let default = cfg.out_dir.join("calls.csv");
    let path = match &cfg.calls {
        Some(p) => p.clone(),
        None if default.exists() => default,
        None => {
            log::warn!("no contract-call file; call features are empty");
            return Ok(CallTable::with_vocabulary(Vec::new(), &[]));
        }
    };
    ingest_calls(open(&path)?, cfg.top_c).map_err(|e| with_file(e, &path))
}

fn labeled_dataset(graph: &TransactionGraph, calls: &CallTable, cfg: &RunConfig, hops: u8) -> Result<Vec<Subgraph>> {
    let accounts = graph.labeled_accounts();
    if accounts.is_empty() {
        return Err(Error::Invalid("graph has no labeled accounts".into()));
    }
    let sampling = crate::sampler::SamplingConfig {
        hops,
        ..cfg.sampling()
    };
    let mut dataset = extract_dataset(graph, &accounts, &sampling)?;
    featurize(&mut dataset, calls, &cfg.schema(calls.vocabulary().to_vec())?)?;
    Ok(dataset)
}

/// Samples one featurized subgraph per labeled account into a bundle.
pub fn extract(cfg: &RunConfig) -> Result<StageReport> {
    let graph = load_graph(graph_path(cfg))?;
    let calls = load_calls(cfg)?;
    let dataset = labeled_dataset(&graph, &calls, cfg, cfg.hops)?;
    let mut header = BundleHeader::new(cfg.sampling(), cfg.schema(calls.vocabulary().to_vec())?, dataset.len());
    header.run_config = cfg.provenance();
    let out = bundle_path(cfg);
    write_bundle(&out, &header, &dataset)?;
    let nodes: usize = dataset.iter().map(Subgraph::num_nodes).sum();
    let isolated = dataset.iter().filter(|s| s.isolated).count();
    Ok(StageReport {
        summary: format!(
            "extracted {} subgraphs, mean {:.2} nodes, {} isolated, feature dimension {}",
            dataset.len(),
            nodes as f64 / dataset.len() as f64,
            isolated,
            header.schema.dimension()
        ),
        artifacts: vec![out],
    })
}

fn labels_of(dataset: &[Subgraph]) -> Result<Vec<u8>> {
    dataset
        .iter()
        .map(|s| {
            s.label
                .ok_or_else(|| Error::Invalid(format!("subgraph {} has no label", s.center_name())))
        })
        .collect()
}

fn prepare(dataset: &[Subgraph], idx: &[usize], options: &InputOptions) -> Result<Vec<GraphInput>> {
    idx.iter().map(|&i| GraphInput::prepare(&dataset[i], options)).collect()
}

fn write_provenance<W: Write>(w: &mut W, provenance: &BTreeMap<String, String>) -> std::io::Result<()> {
    for (k, v) in provenance {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

fn write_metrics(path: &Path, rows: &[(&str, Metrics)], provenance: &BTreeMap<String, String>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write_provenance(&mut w, provenance).map_err(io)?;
    writeln!(w, "set,precision,recall,f1,tp,fp,fn,tn").map_err(io)?;
    for (set, m) in rows {
        writeln!(
            w,
            "{set},{:.6},{:.6},{:.6},{},{},{},{}",
            m.precision, m.recall, m.f1, m.true_positives, m.false_positives, m.false_negatives, m.true_negatives
        )
        .map_err(io)?;
    }
    finish(w, path)
}

/// Trains on one seeded split of the bundle; writes the checkpoint,
/// `metrics.csv` (validation and test) and `history.csv`.
pub fn train(cfg: &RunConfig) -> Result<StageReport> {
    let (header, dataset) = read_bundle(bundle_path(cfg))?;
    let labels = labels_of(&dataset)?;
    let mut split = stratified_split(&labels, &cfg.ratio, cfg.seed)?;
    split.carve_validation(&labels, cfg.val_fraction);
    let options = cfg.input_options();
    let train_set = prepare(&dataset, &split.train, &options)?;
    let val_set = prepare(&dataset, &split.validation, &options)?;
    let test_set = prepare(&dataset, &split.test, &options)?;
    let config = cfg.train_config();
    let outcome = train_model(&train_set, &val_set, &config)?;

    let score = |set: &[GraphInput]| -> Result<Metrics> {
        let truth: Vec<u8> = set.iter().map(|g| g.label).collect();
        evaluate(&predict(&outcome.params, set, config.batch_size)?, &truth)
    };
    let mut rows = vec![("test", score(&test_set)?)];
    if !val_set.is_empty() {
        rows.insert(0, ("validation", score(&val_set)?));
    }

    let provenance = cfg.provenance();
    let mut meta = provenance.clone();
    meta.insert("best_epoch".into(), outcome.best_epoch.to_string());
    let ckpt = Checkpoint {
        params: outcome.params.clone(),
        variant: options.variant,
        weight_transform: options.weight_transform,
        row_normalize: options.row_normalize,
        schema_hash: header.schema_hash.clone(),
        meta,
    };
    let ckpt_path = checkpoint_path(cfg);
    if let Some(dir) = ckpt_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    ckpt.save(&ckpt_path)?;

    let metrics_path = cfg.out_dir.join("metrics.csv");
    write_metrics(&metrics_path, &rows, &provenance)?;

    let history_path = cfg.out_dir.join("history.csv");
    let mut w = create(&history_path)?;
    let io = |e| Error::io(&history_path, e);
    write_provenance(&mut w, &provenance).map_err(io)?;
    writeln!(w, "epoch,train_loss,eval_loss,val_f1").map_err(io)?;
    writeln!(w, "0,,{},", outcome.initial_loss).map_err(io)?;
    for r in &outcome.history {
        writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, r.eval_loss, r.val_f1).map_err(io)?;
    }
    finish(w, &history_path)?;

    let test = rows.last().expect("test row").1;
    Ok(StageReport {
        summary: format!(
            "i2bgnn-{} trained on {} graphs, best epoch {}, test precision {:.4} recall {:.4} f1 {:.4}",
            options.variant.tag(),
            train_set.len(),
            outcome.best_epoch,
            test.precision,
            test.recall,
            test.f1
        ),
        artifacts: vec![ckpt_path, metrics_path, history_path],
    })
}

/// Scores a checkpoint on the test side of the split it was trained with.
pub fn eval(cfg: &RunConfig) -> Result<StageReport> {
    let ckpt = Checkpoint::load(checkpoint_path(cfg))?;
    let (header, dataset) = read_bundle(bundle_path(cfg))?;
    ckpt.require_schema(&header.schema_hash)?;
    let labels = labels_of(&dataset)?;

    let meta = |key: &str| ckpt.meta.get(key).cloned().or_else(|| cfg.get(key)).unwrap_or_default();
    let bad = |key: &str| Error::Format(format!("checkpoint meta {key} is malformed"));
    let seed: u64 = meta("seed").parse().map_err(|_| bad("seed"))?;
    let ratio: SplitRatio = meta("ratio").parse()?;
    let val_fraction: f64 = meta("val_fraction").parse().map_err(|_| bad("val_fraction"))?;
    let batch: usize = meta("batch").parse().map_err(|_| bad("batch"))?;
    let mut split = stratified_split(&labels, &ratio, seed)?;
    split.carve_validation(&labels, val_fraction);

    let options = InputOptions {
        variant: ckpt.variant,
        weight_transform: ckpt.weight_transform,
        row_normalize: ckpt.row_normalize,
    };
    let test_set = prepare(&dataset, &split.test, &options)?;
    let truth: Vec<u8> = test_set.iter().map(|g| g.label).collect();
    let metrics = evaluate(&predict(&ckpt.params, &test_set, batch.max(1))?, &truth)?;

    let mut provenance = ckpt.meta.clone();
    provenance.remove("best_epoch");
    let out = cfg.out_dir.join("eval.csv");
    write_metrics(&out, &[("test", metrics)], &provenance)?;
    Ok(StageReport {
        summary: format!(
            "i2bgnn-{} on {} test graphs: precision {:.4} recall {:.4} f1 {:.4}",
            ckpt.variant.tag(),
            test_set.len(),
            metrics.precision,
            metrics.recall,
            metrics.f1
        ),
        artifacts: vec![out],
    })
}

fn write_signature_file(path: &Path, signatures: &[GraphSignature], dataset: &[Subgraph]) -> Result<()> {
    let labels: Vec<Option<u8>> = dataset.iter().map(|s| s.label).collect();
    let mut w = create(path)?;
    write_signatures(&mut w, signatures, &labels)?;
    finish(w, path)
}

/// Signature files for both spectral baselines and the method comparison
/// at the configured ratio.
pub fn baseline(cfg: &RunConfig) -> Result<StageReport> {
    let (_, dataset) = read_bundle(bundle_path(cfg))?;
    let fgsd = FgsdConfig::calibrated(cfg.bins, dataset.iter());
    let netlsd = NetlsdConfig::default();
    let fgsd_sigs = dataset.iter().map(|s| fgsd_signature(s, &fgsd)).collect::<Result<Vec<_>>>()?;
    let netlsd_sigs = dataset.iter().map(|s| netlsd_signature(s, &netlsd)).collect::<Result<Vec<_>>>()?;
    let fgsd_path = cfg.out_dir.join("fgsd_signatures.csv");
    let netlsd_path = cfg.out_dir.join("netlsd_signatures.csv");
    write_signature_file(&fgsd_path, &fgsd_sigs, &dataset)?;
    write_signature_file(&netlsd_path, &netlsd_sigs, &dataset)?;

    let rows = run_comparison(&dataset, &cfg.methods, &cfg.ratio, &cfg.experiment())?;
    let out = cfg.out_dir.join("comparison.csv");
    let mut w = create(&out)?;
    write_comparison_csv(&mut w, &rows, &cfg.provenance())?;
    finish(w, &out)?;
    Ok(StageReport {
        summary: comparison_table(&rows),
        artifacts: vec![fgsd_path, netlsd_path, out],
    })
}

/// F1 per (ratio, method) over the configured ratios.
pub fn sweep(cfg: &RunConfig) -> Result<StageReport> {
    let (_, dataset) = read_bundle(bundle_path(cfg))?;
    let rows = run_split_sweep(&dataset, &cfg.ratios, &cfg.methods, &cfg.experiment())?;
    let out = cfg.out_dir.join("sweep.csv");
    let mut w = create(&out)?;
    write_comparison_csv(&mut w, &rows, &cfg.provenance())?;
    finish(w, &out)?;
    Ok(StageReport {
        summary: comparison_table(&rows),
        artifacts: vec![out],
    })
}

/// Samples the labeled accounts at one and two hops and compares the
/// configured methods on identical splits.
pub fn depth(cfg: &RunConfig) -> Result<StageReport> {
    let graph = load_graph(graph_path(cfg))?;
    let calls = load_calls(cfg)?;
    let by_depth = [1u8, 2]
        .into_iter()
        .map(|hops| Ok((hops, labeled_dataset(&graph, &calls, cfg, hops)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows = run_depth_study(&by_depth, &cfg.methods, &cfg.ratio, &cfg.experiment())?;
    let out = cfg.out_dir.join("depth.csv");
    let mut w = create(&out)?;
    let mut provenance = cfg.provenance();
    provenance.remove("hops");
    write_depth_csv(&mut w, &rows, &provenance)?;
    finish(w, &out)?;
    Ok(StageReport {
        summary: depth_table(&rows),
        artifacts: vec![out],
    })
}


/// Sizes the global worker pool; 0 keeps the default of one worker per core.
/// Only the first call in a process takes effect.
pub fn init_thread_pool(threads: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::debug!("thread pool already initialized: {e}");
    }
}
