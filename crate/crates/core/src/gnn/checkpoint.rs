//! Text checkpoints: a `key = value` header followed by hex-encoded,
//! row-major little-endian f64 tensors.
//!
//! ```text
//! i2bgnn-checkpoint 1
//! variant = t
//! schema_hash = 9f2c...
//! ...
//! tensor W0 32 128
//! <hex>
//! tensor W1 128 128
//! ...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::batch::Variant;
use super::model::ModelParams;
use super::normalize::WeightTransform;
use crate::error::{Error, Result};

const HEADER: &str = "i2bgnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub variant: Variant,
    pub weight_transform: WeightTransform,
    pub row_normalize: bool,
    pub schema_hash: String,
    /// Provenance entries (hyperparameters, seed, metrics).
    pub meta: BTreeMap<String, String>,
}

fn encode(values: impl Iterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    hex::encode(bytes)
}

fn decode(text: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = hex::decode(text.trim()).map_err(|e| Error::Format(format!("tensor payload: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Format(format!(
            "tensor payload holds {} values, expected {expected}",
            bytes.len() / 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!("{HEADER} {CHECKPOINT_VERSION}\n");
        let mut header = BTreeMap::new();
        header.insert("variant".to_string(), self.variant.tag().to_string());
        header.insert(
            "weight_transform".to_string(),
            match self.weight_transform {
                WeightTransform::Log1p => "log1p",
                WeightTransform::Raw => "raw",
            }
            .to_string(),
        );
        header.insert("row_normalize".to_string(), self.row_normalize.to_string());
        header.insert("schema_hash".to_string(), self.schema_hash.clone());
        header.insert("input_dim".to_string(), p.input_dim().to_string());
        header.insert("hidden".to_string(), p.hidden().to_string());
        header.insert("classes".to_string(), p.classes().to_string());
        for (k, v) in &header {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for (k, v) in &self.meta {
            out.push_str(&format!("meta.{k} = {v}\n"));
        }
        let tensors: [(&str, (usize, usize), Vec<f64>); 4] = [
            ("W0", p.w0.dim(), p.w0.iter().copied().collect()),
            ("W1", p.w1.dim(), p.w1.iter().copied().collect()),
            ("W2", p.w2.dim(), p.w2.iter().copied().collect()),
            ("b", (1, p.b.len()), p.b.to_vec()),
        ];
        for (name, (r, c), values) in tensors {
            out.push_str(&format!("tensor {name} {r} {c}\n{}\n", encode(values.into_iter())));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or_default();
        let version = first
            .strip_prefix(HEADER)
            .map(str::trim)
            .ok_or_else(|| Error::Format("not a checkpoint file".into()))?;
        let version: u32 = version
            .parse()
            .map_err(|_| Error::Format(format!("bad checkpoint version {version:?}")))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version as u16,
                expected: CHECKPOINT_VERSION as u16,
            });
        }
        let mut header = BTreeMap::new();
        let mut meta = BTreeMap::new();
        let mut tensors: BTreeMap<String, (usize, usize, Vec<f64>)> = BTreeMap::new();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("tensor ") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [name, r, c] = parts[..] else {
                    return Err(Error::Format(format!("bad tensor line {line:?}")));
                };
                let dims = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad dimension {s:?}")));
                let (r, c) = (dims(r)?, dims(c)?);
                let payload = lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("missing payload for {name}")))?;
                tensors.insert(name.to_string(), (r, c, decode(payload, r * c)?));
            } else {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
                let (k, v) = (k.trim().to_string(), v.trim().to_string());
                match k.strip_prefix("meta.") {
                    Some(m) => meta.insert(m.to_string(), v),
                    None => header.insert(k, v),
                };
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Format(format!("checkpoint header lacks {k}")))
        };
        let mut take = |name: &str| {
            tensors
                .remove(name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name}")))
        };
        let matrix = |(r, c, v): (usize, usize, Vec<f64>)| {
            Array2::from_shape_vec((r, c), v).map_err(|e| Error::Shape(e.to_string()))
        };
        let w0 = matrix(take("W0")?)?;
        let w1 = matrix(take("W1")?)?;
        let w2 = matrix(take("W2")?)?;
        let (_, _, b) = take("b")?;
        let params = ModelParams {
            w0,
            w1,
            w2,
            b: Array1::from(b),
        };
        params.check_shapes()?;
        let declared = |k: &str, actual: usize| -> Result<()> {
            if get(k)? != actual.to_string() {
                return Err(Error::Shape(format!("header {k} disagrees with tensor shapes")));
            }
            Ok(())
        };
        declared("input_dim", params.input_dim())?;
        declared("hidden", params.hidden())?;
        declared("classes", params.classes())?;
        let weight_transform = match get("weight_transform")? {
            "log1p" => WeightTransform::Log1p,
            "raw" => WeightTransform::Raw,
            other => return Err(Error::Format(format!("unknown weight transform {other:?}"))),
        };
        let row_normalize = get("row_normalize")?
            .parse()
            .map_err(|_| Error::Format("row_normalize must be true or false".into()))?;
        Ok(Self {
            params,
            variant: Variant::parse(get("variant")?)?,
            weight_transform,
            row_normalize,
            schema_hash: get("schema_hash")?.to_string(),
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Fails unless the checkpoint was trained on features with this schema hash.
    pub fn require_schema(&self, schema_hash: &str) -> Result<()> {
        if self.schema_hash != schema_hash {
            return Err(Error::Schema(format!(
                "checkpoint was trained on feature schema {} but the bundle has {}",
                self.schema_hash, schema_hash
            )));
        }
        Ok(())
    }
}
