use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use i2bgnn::config::{RunConfig, KEYS};
use i2bgnn::pipeline::{self, StageReport};
use i2bgnn::Error;

const BOOL_KEYS: &[&str] = &[
    "eosio",
    "symmetrize",
    "name_kind",
    "binary_features",
    "row_normalize",
    "strict_determinism",
];

const STAGES: &[(&str, &str)] = &[
    ("ingest", "build a graph file from edge and label CSVs"),
    ("synth", "generate a planted-pattern dataset and its graph file"),
    ("extract", "sample one featurized subgraph per labeled account"),
    ("train", "train the network on one seeded split"),
    ("eval", "score a checkpoint on its test split"),
    ("baseline", "write spectral signatures and compare methods"),
    ("sweep", "compare methods across train:test ratios"),
    ("depth", "compare one-hop and two-hop sampling"),
];

fn command() -> Command {
    let mut cmd = Command::new("i2bgnn")
        .about("Account identity inference on transaction graphs")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key = value file applied before environment and flags"),
        );
    for (key, help) in KEYS {
        let mut arg = Arg::new(*key)
            .long(key.replace('_', "-"))
            .global(true)
            .value_name("VALUE")
            .help(*help)
            .action(ArgAction::Set);
        if BOOL_KEYS.contains(key) {
            arg = arg.num_args(0..=1).default_missing_value("true");
        }
        cmd = cmd.arg(arg);
    }
    for (name, about) in STAGES {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn overrides(matches: &ArgMatches) -> Vec<(String, String)> {
    KEYS.iter()
        .filter_map(|(key, _)| matches.get_one::<String>(key).map(|v| (key.to_string(), v.clone())))
        .collect()
}

fn run(stage: &str, cfg: &RunConfig) -> Result<StageReport, Error> {
    match stage {
        "ingest" => pipeline::ingest(cfg),
        "synth" => pipeline::synth(cfg),
        "extract" => pipeline::extract(cfg),
        "train" => pipeline::train(cfg),
        "eval" => pipeline::eval(cfg),
        "baseline" => pipeline::baseline(cfg),
        "sweep" => pipeline::sweep(cfg),
        "depth" => pipeline::depth(cfg),
        other => Err(Error::Config(format!("unknown subcommand {other}"))),
    }
}

fn fail(kind: &str, msg: &str, code: u8) -> ExitCode {
    let msg = msg.replace(['\n', '\r'], " ");
    eprintln!("error kind={kind} msg={msg:?}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            return fail("usage", first.trim_start_matches("error: "), 2);
        }
    };
    let Some((stage, sub)) = matches.subcommand() else {
        return fail("usage", "missing subcommand", 2);
    };
    let file = sub
        .get_one::<String>("config")
        .or_else(|| matches.get_one::<String>("config"))
        .map(PathBuf::from);
    let mut flags = overrides(&matches);
    flags.extend(overrides(sub));
    let cfg = match RunConfig::resolve(file.as_deref(), &flags) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e.kind(), &e.to_string(), 2),
    };
    pipeline::init_thread_pool(cfg.worker_threads());
    match run(stage, &cfg) {
        Ok(report) => {
            print!("{}", report.summary);
            if !report.summary.ends_with('\n') {
                println!();
            }
            for path in &report.artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
