//! Single-file binary persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "I2BG" | version: u16
//! accounts:  u64 byte length | u32 n | n × (u32 len, utf-8 bytes)
//! adjacency: u64 byte length | u32 n | u64 nnz | (n+1) × u64 ptr | nnz × u32 dst
//!            | nnz × f64 volume | nnz × u64 frequency
//! labels:    u64 byte length | u32 count | count × (u32 handle, u8 class)
//! kinds:     u64 byte length | n × u8
//! checksum:  u64, first 8 bytes of SHA-256 over everything before it
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{AccountId, TransactionGraph};
use crate::error::{Error, Result};
use crate::features::NameKind;

pub const MAGIC: &[u8; 4] = b"I2BG";
pub const FORMAT_VERSION: u16 = 1;

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

fn section(out: &mut Vec<u8>, body: Vec<u8>) {
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
}

pub fn graph_to_bytes(graph: &TransactionGraph) -> Vec<u8> {
    let n = graph.num_accounts();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    let mut body = Vec::new();
    body.extend_from_slice(&(n as u32).to_le_bytes());
    for name in graph.names() {
        body.extend_from_slice(&(name.len() as u32).to_le_bytes());
        body.extend_from_slice(name.as_bytes());
    }
    section(&mut out, body);

    let adj = &graph.out;
    let mut body = Vec::new();
    body.extend_from_slice(&(n as u32).to_le_bytes());
    body.extend_from_slice(&(adj.neighbor.len() as u64).to_le_bytes());
    for &p in &adj.ptr {
        body.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &d in &adj.neighbor {
        body.extend_from_slice(&d.to_le_bytes());
    }
    for &v in &adj.volume {
        body.extend_from_slice(&v.to_le_bytes());
    }
    for &f in &adj.frequency {
        body.extend_from_slice(&f.to_le_bytes());
    }
    section(&mut out, body);

    let labeled = graph.labeled_accounts();
    let mut body = Vec::new();
    body.extend_from_slice(&(labeled.len() as u32).to_le_bytes());
    for (id, class) in labeled {
        body.extend_from_slice(&id.0.to_le_bytes());
        body.push(class);
    }
    section(&mut out, body);

    section(&mut out, graph.kinds.iter().map(|k| k.code()).collect());

    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of section".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn section(&mut self) -> Result<Cursor<'a>> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::Format("section too large".into()))?;
        Ok(Cursor {
            bytes: self.take(len)?,
            pos: 0,
        })
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format("trailing bytes in section".into()));
        }
        Ok(())
    }
}

pub fn graph_from_bytes(bytes: &[u8]) -> Result<TransactionGraph> {
    let head = &bytes[..bytes.len().min(4)];
    if head != &MAGIC[..head.len()] {
        return Err(Error::Format("missing I2BG magic".into()));
    }
    // a prefix of a valid file is truncation, not a foreign format
    if bytes.len() < 6 {
        return Err(Error::Checksum);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 14 {
        return Err(Error::Checksum);
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 8);
    if checksum(payload) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::Checksum);
    }

    let mut cur = Cursor {
        bytes: payload,
        pos: 6,
    };

    let mut accounts = cur.section()?;
    let n = accounts.u32()? as usize;
    let mut names = Vec::with_capacity(n);
    for _ in 0..n {
        let len = accounts.u32()? as usize;
        let raw = accounts.take(len)?;
        names.push(
            String::from_utf8(raw.to_vec()).map_err(|_| Error::Format("account name is not utf-8".into()))?,
        );
    }
    accounts.finish()?;

    let mut adj = cur.section()?;
    if adj.u32()? as usize != n {
        return Err(Error::Format("adjacency size disagrees with account table".into()));
    }
    let nnz = adj.u64()? as usize;
    let ptr = (0..=n).map(|_| adj.u64().map(|p| p as usize)).collect::<Result<Vec<_>>>()?;
    let dst = (0..nnz).map(|_| adj.u32()).collect::<Result<Vec<_>>>()?;
    let volume = (0..nnz).map(|_| adj.f64()).collect::<Result<Vec<_>>>()?;
    let frequency = (0..nnz).map(|_| adj.u64()).collect::<Result<Vec<_>>>()?;
    adj.finish()?;
    if ptr[0] != 0 || ptr[n] != nnz || ptr.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Format("corrupt adjacency offsets".into()));
    }
    let mut entries = Vec::with_capacity(nnz);
    for src in 0..n {
        for k in ptr[src]..ptr[src + 1] {
            entries.push((src as u32, dst[k], volume[k], frequency[k]));
        }
    }

    let mut labels_sec = cur.section()?;
    let count = labels_sec.u32()? as usize;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let id = AccountId(labels_sec.u32()?);
        labels.push((id, labels_sec.u8()?));
    }
    labels_sec.finish()?;

    let mut kinds_sec = cur.section()?;
    let kinds = (0..n)
        .map(|_| {
            let code = kinds_sec.u8()?;
            NameKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown name kind {code}")))
        })
        .collect::<Result<Vec<_>>>()?;
    kinds_sec.finish()?;
    cur.finish()?;

    TransactionGraph::from_parts(names, entries, labels, Some(kinds))
}

pub fn save_graph(graph: &TransactionGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph_to_bytes(graph)).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<TransactionGraph> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    graph_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ingest_edges, ingest_labels, LabelMapping};

    fn sample() -> TransactionGraph {
        let text = "src,dst,volume,count\nA,B,5,1\nB,C,2.5,3\nC,A,0,1\nbob.x,A,1,1\nA,B,1,1\n";
        let (g, _) = ingest_edges(text.as_bytes()).unwrap();
        let labels =
            ingest_labels("account,label\nC,1\nA,0\n".as_bytes(), &LabelMapping::default()).unwrap();
        g.with_labels(&labels).unwrap().0
    }

    #[test]
    fn round_trip_is_identity() {
        let g = sample();
        let bytes = graph_to_bytes(&g);
        assert_eq!(&bytes[..4], MAGIC);
        let back = graph_from_bytes(&bytes).unwrap();
        assert_eq!(back, g);
        assert_eq!(graph_to_bytes(&back), bytes);
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let bytes = graph_to_bytes(&sample());
        for cut in [bytes.len() - 1, bytes.len() - 9, 20, 7, 3] {
            let err = graph_from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Checksum), "cut {cut}: {err}");
        }
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let mut bytes = graph_to_bytes(&sample());
        bytes[12] ^= 0x40;
        assert!(matches!(graph_from_bytes(&bytes), Err(Error::Checksum)));
    }

    #[test]
    fn unknown_version_is_reported() {
        let mut bytes = graph_to_bytes(&sample());
        bytes[4] = 9;
        assert!(matches!(
            graph_from_bytes(&bytes),
            Err(Error::Version { found: 9, .. })
        ));
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.i2bg");
        let g = sample();
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }
}
