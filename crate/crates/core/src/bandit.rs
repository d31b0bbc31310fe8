//! Target element selection.
//!
//! With probability ε a candidate is drawn uniformly; otherwise an
//! interested element is drawn with softmax weights over its Q value. After
//! the click the element is rewarded with the number of element keys on the
//! new page that the session has not seen before, and its Q value becomes
//! the running mean of its rewards.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::ElementKey;

pub const DEFAULT_EPSILON: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("no candidate elements to select from")]
    EmptyCandidates,
    #[error("interested element {0} is not a candidate")]
    NotSubset(ElementKey),
    #[error("epsilon {0} outside [0, 1]")]
    BadEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Explore,
    Exploit,
}

/// Interested elements and candidates of the current page, in page order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionContext {
    interested: Vec<ElementKey>,
    candidates: Vec<ElementKey>,
}

fn dedup(keys: impl IntoIterator<Item = ElementKey>) -> Vec<ElementKey> {
    let mut seen = BTreeSet::new();
    keys.into_iter().filter(|k| seen.insert(k.clone())).collect()
}

impl SelectionContext {
    pub fn new(
        interested: impl IntoIterator<Item = ElementKey>,
        candidates: impl IntoIterator<Item = ElementKey>,
    ) -> Result<Self, BanditError> {
        let interested = dedup(interested);
        let candidates = dedup(candidates);
        let set: BTreeSet<&ElementKey> = candidates.iter().collect();
        if let Some(k) = interested.iter().find(|k| !set.contains(k)) {
            return Err(BanditError::NotSubset(k.clone()));
        }
        Ok(SelectionContext {
            interested,
            candidates,
        })
    }

    pub fn interested(&self) -> &[ElementKey] {
        &self.interested
    }

    pub fn candidates(&self) -> &[ElementKey] {
        &self.candidates
    }
}

/// Per-session Q values and execution counts.
#[derive(Debug, Clone)]
pub struct BanditTables {
    q: BTreeMap<ElementKey, f64>,
    count: BTreeMap<ElementKey, u64>,
    epsilon: f64,
    rng_seed: u64,
    rng: ChaCha8Rng,
}

impl BanditTables {
    pub fn new(epsilon: f64, rng_seed: u64) -> Result<Self, BanditError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(BanditError::BadEpsilon(epsilon));
        }
        Ok(BanditTables {
            q: BTreeMap::new(),
            count: BTreeMap::new(),
            epsilon,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn q(&self, key: &ElementKey) -> f64 {
        self.q.get(key).copied().unwrap_or(0.0)
    }

    pub fn count(&self, key: &ElementKey) -> u64 {
        self.count.get(key).copied().unwrap_or(0)
    }

    /// Test hook: set a Q value directly.
    pub fn set_q(&mut self, key: ElementKey, value: f64) {
        self.q.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count.is_empty()
    }

    /// Softmax weights of `keys` by Q value.
    pub fn exploit_probabilities(&self, keys: &[ElementKey]) -> Vec<f64> {
        softmax(&keys.iter().map(|k| self.q(k)).collect::<Vec<_>>())
    }

    pub fn select_target(&mut self, ctx: &SelectionContext) -> Result<(ElementKey, Branch), BanditError> {
        if ctx.candidates.is_empty() {
            return Err(BanditError::EmptyCandidates);
        }
        let draw: f64 = self.rng.random();
        if draw < self.epsilon || ctx.interested.is_empty() {
            let i = self.rng.random_range(0..ctx.candidates.len());
            return Ok((ctx.candidates[i].clone(), Branch::Explore));
        }
        let weights = self.exploit_probabilities(&ctx.interested);
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (k, w) in ctx.interested.iter().zip(&weights) {
            acc += w;
            if u < acc {
                return Ok((k.clone(), Branch::Exploit));
            }
        }
        let last = ctx.interested.last().expect("interested is non-empty");
        Ok((last.clone(), Branch::Exploit))
    }

    /// Folds `reward` into the running mean of `target`.
    pub fn update(&mut self, target: &ElementKey, reward: u64) {
        let n = self.count(target) as f64;
        let q = self.q(target);
        self.q.insert(target.clone(), (q * n + reward as f64) / (n + 1.0));
        *self.count.entry(target.clone()).or_insert(0) += 1;
    }
}

/// Max-subtracted softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Number of keys on the page the session has not seen.
pub fn curiosity_reward(previous_seen: &BTreeSet<ElementKey>, current_page_keys: &BTreeSet<ElementKey>) -> u64 {
    current_page_keys.difference(previous_seen).count() as u64
}
