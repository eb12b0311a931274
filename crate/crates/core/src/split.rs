//! Event-level cross-validation splits and seeded sampling.
//!
//! Splits are made over events, never sentences or articles: every
//! augmented context is built inside one event, so an event-level partition
//! cannot leak a sentence from train into val or test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Corpus, EventId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Independent PRNG seed for one (fold, purpose) stream of a master seed.
pub fn derive_seed(master: u64, fold: usize, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((fold as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Train/val/test percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 80,
            val: 10,
            test: 10,
        }
    }
}

impl SplitRatios {
    pub fn new(train: u32, val: u32, test: u32) -> Result<Self> {
        if train + val + test != 100 {
            return Err(Error::InvalidRatios((train, val, test)));
        }
        Ok(SplitRatios { train, val, test })
    }

    /// Apportions `n` items by largest remainder; ties go to the earlier
    /// part (train, then val, then test).
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let parts = [self.train, self.val, self.test];
        let total: usize = parts.iter().map(|&p| p as usize).sum();
        let mut counts = [0usize; 3];
        let mut remainders = [0usize; 3];
        for i in 0..3 {
            let scaled = n * parts[i] as usize;
            counts[i] = scaled / total;
            remainders[i] = scaled % total;
        }
        let mut left = n - counts.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<EventId>,
    pub val: Vec<EventId>,
    pub test: Vec<EventId>,
}

impl Fold {
    pub fn split_of(&self, event: &EventId) -> Option<Split> {
        if self.train.contains(event) {
            Some(Split::Train)
        } else if self.val.contains(event) {
            Some(Split::Val)
        } else if self.test.contains(event) {
            Some(Split::Test)
        } else {
            None
        }
    }

    pub fn assignment(&self) -> BTreeMap<EventId, Split> {
        let mut out = BTreeMap::new();
        for (split, events) in [
            (Split::Train, &self.train),
            (Split::Val, &self.val),
            (Split::Test, &self.test),
        ] {
            for e in events {
                out.insert(e.clone(), split);
            }
        }
        out
    }

    pub fn events(&self, split: Split) -> &[EventId] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub k: usize,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn fold(&self, fold: usize) -> Result<&Fold> {
        self.folds
            .get(fold)
            .ok_or(Error::FoldOutOfRange { fold, k: self.k })
    }
}

/// Shuffles the events once with the seed, then rotates the shuffled list
/// by `fold * n / k` per fold and cuts it into test, val and train.
pub fn make_folds(corpus: &Corpus, k: usize, ratios: SplitRatios, seed: u64) -> Result<SplitPlan> {
    SplitRatios::new(ratios.train, ratios.val, ratios.test)?;
    if k < 2 {
        return Err(Error::Config(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    let mut events = corpus.event_ids();
    let n = events.len();
    if n < k {
        return Err(Error::TooFewEvents(format!("{n} events for {k} folds")));
    }
    let [n_train, n_val, n_test] = ratios.apportion(n);
    for (name, ratio, count) in [
        ("train", ratios.train, n_train),
        ("val", ratios.val, n_val),
        ("test", ratios.test, n_test),
    ] {
        if ratio > 0 && count == 0 {
            return Err(Error::TooFewEvents(format!(
                "{n} events give an empty {name} split ({n_train}/{n_val}/{n_test})"
            )));
        }
    }

    events.shuffle(&mut seeded_rng(derive_seed(seed, 0, "folds")));

    let folds = (0..k)
        .map(|f| {
            let offset = f * n / k;
            let rotated: Vec<EventId> = events[offset..]
                .iter()
                .chain(&events[..offset])
                .cloned()
                .collect();
            let mut test = rotated[..n_test].to_vec();
            let mut val = rotated[n_test..n_test + n_val].to_vec();
            let mut train = rotated[n_test + n_val..].to_vec();
            test.sort();
            val.sort();
            train.sort();
            Fold { train, val, test }
        })
        .collect();

    Ok(SplitPlan {
        k,
        seed,
        ratios,
        folds,
    })
}

/// Percentage in `0..=100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Percent(u32);

impl Percent {
    pub fn new(pct: u32) -> Option<Self> {
        (pct <= 100).then_some(Percent(pct))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// `ceil(n * pct / 100)`.
    pub fn of(self, n: usize) -> usize {
        (n * self.0 as usize).div_ceil(100)
    }
}

impl TryFrom<u32> for Percent {
    type Error = String;

    fn try_from(v: u32) -> std::result::Result<Self, String> {
        Percent::new(v).ok_or_else(|| format!("percentage {v} out of range"))
    }
}

impl From<Percent> for u32 {
    fn from(p: Percent) -> u32 {
        p.0
    }
}

/// Indices chosen by [`sample_fraction`], in ascending order.
///
/// One seeded permutation is drawn per (pool length, seed) and a prefix of
/// it is taken, so the selection at a smaller percentage is always a
/// subset of the selection at a larger one.
pub fn sample_indices(len: usize, pct: Percent, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut seeded_rng(seed));
    order.truncate(pct.of(len));
    order.sort_unstable();
    order
}

/// `ceil(|pool| * pct / 100)` items drawn uniformly without replacement,
/// returned in pool order.
pub fn sample_fraction<T: Clone>(pool: &[T], pct: Percent, seed: u64) -> Vec<T> {
    sample_indices(pool.len(), pct, seed)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

fn target_event_counts(
    corpus: &Corpus,
    targets: &BTreeSet<String>,
) -> BTreeMap<EventId, Vec<usize>> {
    let index: BTreeMap<&str, usize> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut out = BTreeMap::new();
    for event in corpus.events.values() {
        let mut counts = vec![0usize; targets.len()];
        for s in event.sentences() {
            let hit: BTreeSet<usize> = s
                .annotations
                .iter()
                .filter_map(|a| index.get(a.target.as_str()).copied())
                .collect();
            for i in hit {
                counts[i] += 1;
            }
        }
        out.insert(event.id.clone(), counts);
    }
    out
}

/// Largest absolute deviation of any target's share of the named-target
/// test sentences from the uniform share; infinite when the test set holds
/// none of them.
fn balance_deviation(
    test: &[EventId],
    counts: &BTreeMap<EventId, Vec<usize>>,
    m: usize,
) -> (f64, f64) {
    let mut totals = vec![0usize; m];
    for e in test {
        for (t, c) in totals.iter_mut().zip(&counts[e]) {
            *t += c;
        }
    }
    let sum: usize = totals.iter().sum();
    if sum == 0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let uniform = 1.0 / m as f64;
    let devs: Vec<f64> = totals
        .iter()
        .map(|&t| (t as f64 / sum as f64 - uniform).abs())
        .collect();
    let max = devs.iter().cloned().fold(0.0, f64::max);
    let ssq = devs.iter().map(|d| d * d).sum();
    (max, ssq)
}

/// Share of each named target among the named-target bias sentences of
/// the test events of `fold`.
pub fn test_target_shares(
    corpus: &Corpus,
    fold: &Fold,
    targets: &BTreeSet<String>,
) -> BTreeMap<String, f64> {
    let counts = target_event_counts(corpus, targets);
    let mut totals = vec![0usize; targets.len()];
    for e in &fold.test {
        if let Some(c) = counts.get(e) {
            for (t, v) in totals.iter_mut().zip(c) {
                *t += v;
            }
        }
    }
    let sum: usize = totals.iter().sum();
    targets
        .iter()
        .zip(totals)
        .map(|(t, c)| {
            (
                t.clone(),
                if sum == 0 { 0.0 } else { c as f64 / sum as f64 },
            )
        })
        .collect()
}

/// Reassigns the test events of one fold so that every named target's share
/// of the test set's named-target bias sentences lies within `tolerance` of
/// `1 / |targets|`.
///
/// Test events are swapped one at a time with train or val events (the
/// displaced event takes the incoming event's place), always taking the
/// swap that most reduces the worst deviation. Split sizes are unchanged.
pub fn target_balanced_test(
    corpus: &Corpus,
    plan: &SplitPlan,
    fold: usize,
    targets: &BTreeSet<String>,
    tolerance: f64,
) -> Result<SplitPlan> {
    let current = plan.fold(fold)?;
    if targets.is_empty() {
        return Err(Error::Config(
            "target balancing needs at least one target".into(),
        ));
    }
    let counts = target_event_counts(corpus, targets);
    for (i, target) in targets.iter().enumerate() {
        let events = counts.values().filter(|c| c[i] > 0).count();
        if events == 0 {
            return Err(Error::UnknownTarget(target.clone()));
        }
        if events < plan.k {
            return Err(Error::InfeasibleBalance(format!(
                "target `{target}` occurs in {events} events, fewer than k = {}",
                plan.k
            )));
        }
    }

    let m = targets.len();
    let mut test = current.test.clone();
    let mut others: Vec<(EventId, Split)> = current
        .train
        .iter()
        .map(|e| (e.clone(), Split::Train))
        .chain(current.val.iter().map(|e| (e.clone(), Split::Val)))
        .collect();
    let mut score = balance_deviation(&test, &counts, m);
    let max_steps = 4 * (test.len() + others.len());
    let mut steps = 0;
    while score.0 > tolerance + 1e-12 {
        steps += 1;
        let mut best: Option<((f64, f64), usize, usize)> = None;
        for ti in 0..test.len() {
            for (oi, (candidate, _)) in others.iter().enumerate() {
                let saved = std::mem::replace(&mut test[ti], candidate.clone());
                let s = balance_deviation(&test, &counts, m);
                test[ti] = saved;
                if best.as_ref().is_none_or(|(b, _, _)| s < *b) {
                    best = Some((s, ti, oi));
                }
            }
        }
        match best {
            Some((s, ti, oi)) if s < score && steps <= max_steps => {
                let incoming = others[oi].0.clone();
                others[oi].0 = std::mem::replace(&mut test[ti], incoming);
                score = s;
            }
            _ => {
                return Err(Error::InfeasibleBalance(format!(
                    "best reachable deviation {:.4} exceeds tolerance {tolerance}",
                    score.0
                )))
            }
        }
    }

    let mut new_fold = Fold {
        train: others
            .iter()
            .filter(|(_, s)| *s == Split::Train)
            .map(|(e, _)| e.clone())
            .collect(),
        val: others
            .iter()
            .filter(|(_, s)| *s == Split::Val)
            .map(|(e, _)| e.clone())
            .collect(),
        test,
    };
    new_fold.train.sort();
    new_fold.val.sort();
    new_fold.test.sort();
    let mut out = plan.clone();
    out.folds[fold] = new_fold;
    Ok(out)
}
