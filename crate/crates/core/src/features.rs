//! Node feature construction: contract-calling counts, optionally followed by a
//! one-hot EOSIO account-name kind.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::CallTable;
use crate::sparse::CsrMatrix;

/// EOSIO account-name category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NameKind {
    /// Twelve characters, no '.'.
    General,
    /// Shorter than twelve characters, no '.'; issued through name auctions.
    Auction,
    /// Contains '.', i.e. a suffix account of an auctioned name.
    SubAccount,
}

impl NameKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            NameKind::General => 0,
            NameKind::Auction => 1,
            NameKind::SubAccount => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(NameKind::General),
            1 => Some(NameKind::Auction),
            2 => Some(NameKind::SubAccount),
            _ => None,
        }
    }

    /// Column offset inside the three-wide name-kind block.
    pub fn column(self) -> usize {
        self.code() as usize
    }
}

/// The '.' rule wins over length. Names longer than twelve characters cannot
/// occur on EOSIO and fall into `General`.
pub fn classify_name(name: &str) -> NameKind {
    if name.contains('.') {
        NameKind::SubAccount
    } else if name.chars().count() < 12 {
        NameKind::Auction
    } else {
        NameKind::General
    }
}

/// Stoplist predicate for EOSIO system accounts.
pub fn is_system_account(name: &str) -> bool {
    name.starts_with("EOSIO.") || name.starts_with("eosio.")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CountTransform {
    /// `ln(1 + count)`
    #[default]
    Log1p,
    /// 1 when any call exists.
    Binary,
}

impl CountTransform {
    pub fn apply(self, count: u64) -> f64 {
        match self {
            CountTransform::Log1p => (count as f64).ln_1p(),
            CountTransform::Binary => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub vocabulary: Vec<String>,
    pub use_name_kind: bool,
    pub transform: CountTransform,
}

impl FeatureSchema {
    pub fn new(vocabulary: Vec<String>, use_name_kind: bool, transform: CountTransform) -> Result<Self> {
        let schema = Self {
            vocabulary,
            use_name_kind,
            transform,
        };
        if schema.dimension() == 0 {
            return Err(Error::Schema("feature dimension must be positive".into()));
        }
        Ok(schema)
    }

    pub fn dimension(&self) -> usize {
        self.vocabulary.len() + if self.use_name_kind { 3 } else { 0 }
    }

    /// Stable fingerprint used to pair checkpoints with bundles.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(&Sha256::digest(&canonical)[..16])
    }
}

/// Builds the `m × f` feature matrix for the given node names.
pub fn build_features(nodes: &[String], calls: &CallTable, schema: &FeatureSchema) -> Result<CsrMatrix> {
    if calls.vocabulary() != schema.vocabulary.as_slice() {
        return Err(Error::Schema(format!(
            "call table has {} contracts but schema expects {}",
            calls.vocabulary().len(),
            schema.vocabulary.len()
        )));
    }
    let cc = schema.vocabulary.len();
    let mut triplets = Vec::new();
    for (row, name) in nodes.iter().enumerate() {
        for &(c, count) in calls.calls_of(name) {
            triplets.push((row, c, schema.transform.apply(count)));
        }
        if schema.use_name_kind {
            triplets.push((row, cc + classify_name(name).column(), 1.0));
        }
    }
    CsrMatrix::from_triplets(nodes.len(), schema.dimension(), triplets)
}
