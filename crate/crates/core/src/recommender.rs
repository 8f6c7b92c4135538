//! Biased matrix factorization trained by SGD, random hyperparameter search
//! and top-n candidate generation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{split_folds, InteractionSet, ItemId, ScoreScale, UserId};
use crate::seed;

/// Items with scores for one user, in list order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub owner: UserId,
    entries: Vec<(ItemId, f64)>,
}

impl RankedList {
    /// Keeps `entries` in the given order.
    pub fn new(owner: UserId, entries: Vec<(ItemId, f64)>) -> Self {
        Self { owner, entries }
    }

    /// Sorts by descending score, ties by ascending item id.
    pub fn from_scores(owner: UserId, mut entries: Vec<(ItemId, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { owner, entries }
    }

    pub fn entries(&self) -> &[(ItemId, f64)] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `n` entries (all of them if shorter).
    pub fn head(&self, n: usize) -> RankedList {
        RankedList::new(self.owner, self.entries.iter().take(n).copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_factors: usize,
    pub n_epochs: usize,
    pub lr_all: f64,
    pub reg_all: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_factors: 100,
            n_epochs: 20,
            lr_all: 0.005,
            reg_all: 0.02,
        }
    }
}

impl HyperParams {
    /// Draws from the tuning ranges: factors and epochs uniform on 10..=150,
    /// learning rate uniform on [0.001, 0.01], regularization on [0.01, 0.1].
    pub fn sample(rng: &mut seed::Rng) -> Self {
        Self {
            n_factors: rng.random_range(10..=150),
            n_epochs: rng.random_range(10..=150),
            lr_all: rng.random_range(0.001..=0.01),
            reg_all: rng.random_range(0.01..=0.1),
        }
    }
}

const INIT_STD: f64 = 0.1;

/// `r̂(u, i) = μ + b_u + b_i + ⟨p_u, q_i⟩`, clamped to the training scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    pub global_mean: f64,
    pub scale: ScoreScale,
    pub n_factors: usize,
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
}

impl MfModel {
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    fn user_index(&self, user: UserId) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    fn item_index(&self, item: ItemId) -> Option<usize> {
        self.items.binary_search(&item).ok()
    }

    fn raw(&self, u: Option<usize>, i: Option<usize>) -> f64 {
        let k = self.n_factors;
        let mut est = self.global_mean;
        if let Some(u) = u {
            est += self.user_bias[u];
        }
        if let Some(i) = i {
            est += self.item_bias[i];
        }
        if let (Some(u), Some(i)) = (u, i) {
            est += dot(&self.user_factors[u * k..(u + 1) * k], &self.item_factors[i * k..(i + 1) * k]);
        }
        est
    }

    pub fn predict(&self, user: UserId, item: ItemId) -> f64 {
        self.scale
            .clamp(self.raw(self.user_index(user), self.item_index(item)))
    }

    /// Root mean squared error of clamped predictions over `set`.
    pub fn rmse(&self, set: &InteractionSet) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let sse: f64 = set
            .records()
            .iter()
            .map(|r| (self.predict(r.user, r.item) - r.score).powi(2))
            .sum();
        (sse / set.len() as f64).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn predict(model: &MfModel, user: UserId, item: ItemId) -> f64 {
    model.predict(user, item)
}

/// Trains the model, calling `on_epoch` with the model after each epoch.
pub fn train_mf_with(
    train: &InteractionSet,
    hp: &HyperParams,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &MfModel),
) -> Result<MfModel> {
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty interaction set".into()));
    }
    let users: Vec<UserId> = train.users().into_iter().collect();
    let items: Vec<ItemId> = train.items().into_iter().collect();
    let k = hp.n_factors;
    let mut rng = seed::rng(seed, &[]);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut model = MfModel {
        global_mean: train.records().iter().map(|r| r.score).sum::<f64>() / train.len() as f64,
        scale: train.scale(),
        n_factors: k,
        user_bias: vec![0.0; users.len()],
        item_bias: vec![0.0; items.len()],
        user_factors: (0..users.len() * k).map(|_| normal.sample(&mut rng)).collect(),
        item_factors: (0..items.len() * k).map(|_| normal.sample(&mut rng)).collect(),
        users,
        items,
    };
    let triples: Vec<(usize, usize, f64)> = train
        .records()
        .iter()
        .map(|r| {
            (
                model.user_index(r.user).unwrap(),
                model.item_index(r.item).unwrap(),
                r.score,
            )
        })
        .collect();
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let (lr, reg) = (hp.lr_all, hp.reg_all);

    for epoch in 0..hp.n_epochs {
        order.shuffle(&mut rng);
        for &t in &order {
            let (u, i, r) = triples[t];
            let err = r - model.raw(Some(u), Some(i));
            model.user_bias[u] += lr * (err - reg * model.user_bias[u]);
            model.item_bias[i] += lr * (err - reg * model.item_bias[i]);
            let pu = &mut model.user_factors[u * k..(u + 1) * k];
            let qi = &mut model.item_factors[i * k..(i + 1) * k];
            for (p, q) in pu.iter_mut().zip(qi.iter_mut()) {
                let (p0, q0) = (*p, *q);
                *p += lr * (err * q0 - reg * p0);
                *q += lr * (err * p0 - reg * q0);
            }
        }
        on_epoch(epoch, &model);
    }
    Ok(model)
}

pub fn train_mf(train: &InteractionSet, hp: &HyperParams, seed: u64) -> Result<MfModel> {
    train_mf_with(train, hp, seed, |_, _| {})
}

/// Top-`n` items from `universe` the user has not seen, by predicted score
/// (ties by ascending item id).
pub fn candidates(
    model: &MfModel,
    user: UserId,
    universe: &[ItemId],
    seen: &BTreeSet<ItemId>,
    n: usize,
) -> RankedList {
    let scored: Vec<(ItemId, f64)> = universe
        .iter()
        .filter(|i| !seen.contains(i))
        .map(|&i| (i, model.predict(user, i)))
        .collect();
    if scored.len() < n {
        log::warn!(
            "user {user}: only {} unseen items for a {n}-item candidate list",
            scored.len()
        );
    }
    let mut list = RankedList::from_scores(user, scored);
    list.entries.truncate(n);
    list
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub params: HyperParams,
    pub cv_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: HyperParams,
    pub trials: Vec<Trial>,
}

/// Samples `n_trials` configurations, scores each by `k`-fold CV RMSE on
/// `train` and returns the lowest (earliest trial wins ties).
pub fn random_search(
    train: &InteractionSet,
    n_trials: usize,
    k: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if n_trials == 0 {
        return Err(Error::InvalidInput("random search needs at least one trial".into()));
    }
    let mut rng = seed::rng(seed, &[0]);
    let samples: Vec<HyperParams> = (0..n_trials).map(|_| HyperParams::sample(&mut rng)).collect();
    let folds = split_folds(train, k, seed::derive(seed, &[1]))?;
    let splits: Vec<(InteractionSet, InteractionSet)> = (0..k).map(|f| folds.split(train, f)).collect();

    let trials = samples
        .par_iter()
        .enumerate()
        .map(|(t, hp)| {
            let mut total = 0.0;
            for (f, (tr, te)) in splits.iter().enumerate() {
                let model = train_mf(tr, hp, seed::derive(seed, &[2, t as u64, f as u64]))?;
                total += model.rmse(te);
            }
            Ok(Trial {
                params: *hp,
                cv_rmse: total / k as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = trials
        .iter()
        .fold(&trials[0], |best, t| if t.cv_rmse < best.cv_rmse { t } else { best })
        .params;
    Ok(SearchOutcome { best, trials })
}

const CHECKPOINT_MAGIC: &str = "# calibstruct mf-model v1";

/// Writes the model as a line-oriented text checkpoint:
///
/// ```text
/// # calibstruct mf-model v1
/// scale,<min>,<max>
/// global_mean,<value>
/// n_factors,<k>
/// user,<id>,<bias>,<f_1>,...,<f_k>
/// item,<id>,<bias>,<f_1>,...,<f_k>
/// ```
///
/// Floats use shortest round-trip notation, so reading back is exact.
pub fn write_checkpoint(model: &MfModel, path: impl AsRef<Path>) -> Result<()> {
    let k = model.n_factors;
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "scale,{},{}", model.scale.min, model.scale.max);
    let _ = writeln!(out, "global_mean,{}", model.global_mean);
    let _ = writeln!(out, "n_factors,{k}");
    let mut row = |tag: &str, id: u64, bias: f64, f: &[f64]| {
        let _ = write!(out, "{tag},{id},{bias}");
        for v in f {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    };
    for (u, &id) in model.users.iter().enumerate() {
        row("user", id, model.user_bias[u], &model.user_factors[u * k..(u + 1) * k]);
    }
    for (i, &id) in model.items.iter().enumerate() {
        row("item", id, model.item_bias[i], &model.item_factors[i * k..(i + 1) * k]);
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<MfModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, m: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: m.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == CHECKPOINT_MAGIC => {}
        _ => return Err(bad(1, "not an mf-model v1 checkpoint")),
    }
    let mut model = MfModel {
        global_mean: 0.0,
        scale: ScoreScale::FIVE,
        n_factors: 0,
        users: vec![],
        items: vec![],
        user_bias: vec![],
        item_bias: vec![],
        user_factors: vec![],
        item_factors: vec![],
    };
    for (n, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 1, "invalid number"));
        match f[0] {
            "scale" if f.len() == 3 => {
                model.scale = ScoreScale {
                    min: num(f[1])?,
                    max: num(f[2])?,
                }
            }
            "global_mean" if f.len() == 2 => model.global_mean = num(f[1])?,
            "n_factors" if f.len() == 2 => {
                model.n_factors = f[1].parse().map_err(|_| bad(n + 1, "invalid factor count"))?
            }
            tag @ ("user" | "item") if f.len() == 3 + model.n_factors => {
                let id: u64 = f[1].parse().map_err(|_| bad(n + 1, "invalid id"))?;
                let bias = num(f[2])?;
                let factors = f[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                let (ids, biases, fac) = if tag == "user" {
                    (&mut model.users, &mut model.user_bias, &mut model.user_factors)
                } else {
                    (&mut model.items, &mut model.item_bias, &mut model.item_factors)
                };
                if ids.last().is_some_and(|&last| last >= id) {
                    return Err(bad(n + 1, "ids must be strictly ascending"));
                }
                ids.push(id);
                biases.push(bias);
                fac.extend(factors);
            }
            _ => return Err(bad(n + 1, "unrecognized line")),
        }
    }
    Ok(model)
}
