use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Read;

use log::warn;

use super::{AccountId, TransactionGraph};
use crate::error::{Error, Result};

/// Counters reported by edge ingest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: u64,
    pub dropped_self_loops: u64,
    pub aggregated_edges: usize,
}

/// Streaming accumulator for raw transaction rows.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    names: Vec<String>,
    index: HashMap<String, u32>,
    pairs: HashMap<(u32, u32), (f64, u64)>,
    stats: IngestStats,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn account(&mut self, name: &str) -> AccountId {
        if let Some(&i) = self.index.get(name) {
            return AccountId(i);
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        AccountId(i)
    }

    /// Adds one raw row. Self-loops register the account but are otherwise dropped.
    pub fn add(&mut self, src: &str, dst: &str, volume: f64, count: u64) -> Result<(), String> {
        if !(volume >= 0.0) || !volume.is_finite() {
            return Err(format!("volume must be finite and non-negative, got {volume}"));
        }
        if count == 0 {
            return Err("count must be at least 1".into());
        }
        let s = self.account(src);
        let d = self.account(dst);
        self.stats.rows += 1;
        if s == d {
            self.stats.dropped_self_loops += 1;
            return Ok(());
        }
        match self.pairs.entry((s.0, d.0)) {
            Entry::Occupied(mut e) => {
                let (v, c) = e.get_mut();
                *v += volume;
                *c += count;
            }
            Entry::Vacant(e) => {
                e.insert((volume, count));
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(TransactionGraph, IngestStats)> {
        if self.stats.rows == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut stats = self.stats;
        if stats.dropped_self_loops > 0 {
            warn!("dropped {} self-loop rows", stats.dropped_self_loops);
        }
        let entries: Vec<_> = self
            .pairs
            .into_iter()
            .map(|((s, d), (v, c))| (s, d, v, c))
            .collect();
        stats.aggregated_edges = entries.len();
        let graph = TransactionGraph::from_parts(self.names, entries, Vec::new(), None)?;
        Ok((graph, stats))
    }
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(true).flexible(true).trim(csv::Trim::All).comment(Some(b'#'));
    b
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<_> = headers.iter().take(expected.len()).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}, found {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn field<'a>(record: &'a csv::StringRecord, i: usize, what: &str) -> Result<&'a str> {
    match record.get(i) {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(Error::Parse {
            line: line_of(record),
            msg: format!("missing {what}"),
        }),
    }
}

fn parse_num<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let raw = field(record, i, what)?;
    raw.parse().map_err(|_| Error::Parse {
        line: line_of(record),
        msg: format!("cannot parse {what} {raw:?}"),
    })
}

/// Reads an edges file (`src,dst,volume,count[,timestamp]`) and aggregates it.
/// Timestamps are accepted and ignored.
pub fn ingest_edges<R: Read>(source: R) -> Result<(TransactionGraph, IngestStats)> {
    let mut rdr = reader_builder().from_reader(source);
    check_header(rdr.headers().map_err(csv_error)?, &["src", "dst", "volume", "count"])?;
    let mut builder = GraphBuilder::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let src = field(&record, 0, "src")?;
        let dst = field(&record, 1, "dst")?;
        let volume: f64 = parse_num(&record, 2, "volume")?;
        let count: u64 = parse_num(&record, 3, "count")?;
        builder.add(src, dst, volume, count).map_err(|msg| Error::Parse {
            line: line_of(&record),
            msg,
        })?;
    }
    builder.finish()
}

/// Declared mapping from label tokens to class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping(HashMap<String, u8>);

impl Default for LabelMapping {
    fn default() -> Self {
        Self(HashMap::from([("0".to_string(), 0), ("1".to_string(), 1)]))
    }
}

impl LabelMapping {
    /// Parses `token=class` pairs separated by commas, e.g. `phish=1,normal=0`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (token, class) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("label mapping entry {pair:?} needs token=class")))?;
            let class: u8 = class
                .trim()
                .parse()
                .ok()
                .filter(|c| *c <= 1)
                .ok_or_else(|| Error::Config(format!("label class in {pair:?} must be 0 or 1")))?;
            map.insert(token.trim().to_string(), class);
        }
        if map.is_empty() {
            return Err(Error::Config("empty label mapping".into()));
        }
        Ok(Self(map))
    }

    pub fn class_of(&self, token: &str) -> Option<u8> {
        self.0.get(token).copied()
    }
}

/// Labels in first-listed order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTable {
    entries: Vec<(String, u8)>,
    index: HashMap<String, usize>,
}

impl LabelTable {
    pub fn insert(&mut self, account: &str, class: u8) -> Result<()> {
        match self.index.get(account) {
            Some(&i) if self.entries[i].1 == class => Ok(()),
            Some(_) => Err(Error::ConflictingLabel(account.to_string())),
            None => {
                self.index.insert(account.to_string(), self.entries.len());
                self.entries.push((account.to_string(), class));
                Ok(())
            }
        }
    }

    pub fn get(&self, account: &str) -> Option<u8> {
        self.index.get(account).map(|&i| self.entries[i].1)
    }

    pub fn entries(&self) -> &[(String, u8)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads a labels file (`account,label`) through the declared token mapping.
pub fn ingest_labels<R: Read>(source: R, mapping: &LabelMapping) -> Result<LabelTable> {
    let mut rdr = reader_builder().from_reader(source);
    check_header(rdr.headers().map_err(csv_error)?, &["account", "label"])?;
    let mut table = LabelTable::default();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let account = field(&record, 0, "account")?;
        let token = field(&record, 1, "label")?;
        let class = mapping.class_of(token).ok_or_else(|| Error::UnknownClass {
            account: account.to_string(),
            token: token.to_string(),
        })?;
        table.insert(account, class)?;
    }
    Ok(table)
}

/// One aggregated (caller, contract) call count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub caller: String,
    pub contract: String,
    pub count: u64,
}

/// Contract vocabulary plus per-account call counts restricted to it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallTable {
    vocabulary: Vec<String>,
    calls: HashMap<String, Vec<(usize, u64)>>,
}

impl CallTable {
    /// Builds a table from aggregated records, keeping the `top_c` contracts by
    /// total call count (ties broken by first appearance).
    pub fn from_records(records: &[CallRecord], top_c: usize) -> Result<Self> {
        if top_c == 0 {
            return Err(Error::Config("top_c must be at least 1".into()));
        }
        let mut totals: Vec<(String, u64)> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for r in records {
            match slot.get(r.contract.as_str()) {
                Some(&i) => totals[i].1 += r.count,
                None => {
                    slot.insert(&r.contract, totals.len());
                    totals.push((r.contract.clone(), r.count));
                }
            }
        }
        // stable sort keeps first-appearance order among equal totals
        let mut ranked: Vec<usize> = (0..totals.len()).collect();
        ranked.sort_by(|&a, &b| totals[b].1.cmp(&totals[a].1));
        ranked.truncate(top_c);
        let vocabulary: Vec<String> = ranked.iter().map(|&i| totals[i].0.clone()).collect();
        Ok(Self::with_vocabulary(vocabulary, records))
    }

    /// Restricts records to a fixed vocabulary.
    pub fn with_vocabulary(vocabulary: Vec<String>, records: &[CallRecord]) -> Self {
        let position: HashMap<&str, usize> =
            vocabulary.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut calls: HashMap<String, Vec<(usize, u64)>> = HashMap::new();
        for r in records {
            if let Some(&c) = position.get(r.contract.as_str()) {
                let row = calls.entry(r.caller.clone()).or_default();
                match row.iter_mut().find(|(k, _)| *k == c) {
                    Some((_, n)) => *n += r.count,
                    None => row.push((c, r.count)),
                }
            }
        }
        for row in calls.values_mut() {
            row.sort_by_key(|&(c, _)| c);
        }
        Self { vocabulary, calls }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// `(contract index, count)` pairs for an account, sorted by index.
    pub fn calls_of(&self, account: &str) -> &[(usize, u64)] {
        self.calls.get(account).map_or(&[], Vec::as_slice)
    }

    /// Aggregated records restricted to the vocabulary, sorted by caller then contract.
    pub fn records(&self) -> Vec<CallRecord> {
        let mut callers: Vec<&String> = self.calls.keys().collect();
        callers.sort();
        callers
            .into_iter()
            .flat_map(|caller| {
                self.calls[caller].iter().map(move |&(c, count)| CallRecord {
                    caller: caller.clone(),
                    contract: self.vocabulary[c].clone(),
                    count,
                })
            })
            .collect()
    }
}

/// Reads a calls file (`account,contract,count`), aggregating duplicate pairs,
/// and keeps the `top_c` most-called contracts.
pub fn ingest_calls<R: Read>(source: R, top_c: usize) -> Result<CallTable> {
    let mut rdr = reader_builder().from_reader(source);
    check_header(rdr.headers().map_err(csv_error)?, &["account", "contract", "count"])?;
    let mut records: Vec<CallRecord> = Vec::new();
    let mut slot: HashMap<(String, String), usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let caller = field(&record, 0, "account")?.to_string();
        let contract = field(&record, 1, "contract")?.to_string();
        let count: u64 = parse_num(&record, 2, "count")?;
        if count == 0 {
            return Err(Error::Parse {
                line: line_of(&record),
                msg: "call count must be at least 1".into(),
            });
        }
        match slot.entry((caller.clone(), contract.clone())) {
            Entry::Occupied(e) => records[*e.get()].count += count,
            Entry::Vacant(e) => {
                e.insert(records.len());
                records.push(CallRecord {
                    caller,
                    contract,
                    count,
                });
            }
        }
    }
    CallTable::from_records(&records, top_c)
}
