use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train share of a train:test division, remembered with its original token.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRatio {
    pub train_fraction: f64,
    pub tag: String,
}

impl SplitRatio {
    pub fn fraction(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction {train_fraction} outside (0, 1)")));
        }
        Ok(Self {
            train_fraction,
            tag: train_fraction.to_string(),
        })
    }

    /// The divisions of the split-ratio sweep.
    pub fn sweep_ratios() -> Vec<SplitRatio> {
        ["1:9", "1:7", "1:5", "1:3", "1:1", "3:1"]
            .iter()
            .map(|t| t.parse().expect("static ratio tokens parse"))
            .collect()
    }
}

impl FromStr for SplitRatio {
    type Err = Error;

    /// Accepts `a:b` (train:test) or a plain fraction in (0, 1).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown ratio token {s:?}; use a:b or a fraction in (0, 1)"));
        if let Some((a, b)) = s.split_once(':') {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(bad());
            }
            Ok(Self {
                train_fraction: a / (a + b),
                tag: s.to_string(),
            })
        } else {
            let p: f64 = s.parse().map_err(|_| bad())?;
            let mut r = Self::fraction(p).map_err(|_| bad())?;
            r.tag = s.to_string();
            Ok(r)
        }
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag)
    }
}

/// Stratified train/test division of dataset indices, with an optional
/// validation slice carved out of the training side.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub ratio: String,
    pub seed: u64,
}

fn by_class(labels: &[u8], subset: impl IntoIterator<Item = usize>) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for i in subset {
        out[labels[i] as usize].push(i);
    }
    out
}

/// One stratified split. Each class contributes `round(p · n_class)` samples
/// to training and the rest to test; both sides must see both classes.
pub fn stratified_split(labels: &[u8], ratio: &SplitRatio, seed: u64) -> Result<Split> {
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Split(format!("label {bad} is not binary")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class(labels, 0..labels.len()).into_iter().enumerate() {
        let n = members.len();
        let k = (ratio.train_fraction * n as f64).round() as usize;
        if k == 0 || k == n {
            let side = if k == 0 { "training" } else { "test" };
            return Err(Error::Split(format!(
                "class {class} has {n} samples, leaving none on the {side} side at ratio {ratio}; \
                 use a less extreme ratio or more samples per class"
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        validation: Vec::new(),
        test,
        ratio: ratio.tag.clone(),
        seed,
    })
}

/// One split per seed `base_seed, base_seed + 1, ...`.
pub fn make_splits(labels: &[u8], ratio: &SplitRatio, n_seeds: usize, base_seed: u64) -> Result<Vec<Split>> {
    if n_seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    (0..n_seeds as u64)
        .map(|k| stratified_split(labels, ratio, base_seed.wrapping_add(k)))
        .collect()
}

impl Split {
    /// Moves a stratified `fraction` of the training side into `validation`,
    /// never emptying a class on the training side.
    pub fn carve_validation(&mut self, labels: &[u8], fraction: f64) {
        if fraction <= 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5E_ED0F_7A11);
        let mut keep = Vec::new();
        let mut validation = Vec::new();
        for mut members in by_class(labels, self.train.iter().copied()) {
            let n = members.len();
            let k = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
            members.shuffle(&mut rng);
            validation.extend_from_slice(&members[..k]);
            keep.extend_from_slice(&members[k..]);
        }
        keep.sort_unstable();
        validation.sort_unstable();
        self.train = keep;
        self.validation = validation;
    }
}
