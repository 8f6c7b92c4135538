//! Relevance and calibration scoring of lists and the greedy re-ranker that
//! trades them off.
//!
//! The re-ranker builds the final list one position at a time. At each step
//! it appends the candidate maximizing
//!
//! ```text
//! (1 - λ) · NDCG(L ∪ {c}) - λ · C(P, Q̃(L ∪ {c}))
//! ```
//!
//! where `C` is the configured divergence and `Q̃` the list distribution
//! blended with the user's preferences.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{genre_proportions, Denominator, GenreAccumulator, GenreDistribution};
use crate::error::{Error, Result};
use crate::ingest::{GenreCatalog, ItemId, UserId};
use crate::recommender::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    #[default]
    Emanon2,
    Kl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub lambda_grid: Vec<f64>,
    /// Weight of P in the blended list distribution.
    pub alpha: f64,
    pub list_size: usize,
    pub divergence: Divergence,
    /// Floor for zero minima (emanon2) and zero list mass (KL).
    pub epsilon: f64,
    /// Compare P against the blended Q̃ rather than raw Q.
    pub blend: bool,
    pub denominator: Denominator,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            lambda_grid: default_lambda_grid(),
            alpha: 0.01,
            list_size: 10,
            divergence: Divergence::Emanon2,
            epsilon: 1e-5,
            blend: true,
            denominator: Denominator::PerGenre,
        }
    }
}

/// 0.0, 0.1, ..., 1.0
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("lambda {l} outside [0, 1]")));
        }
        if self.list_size == 0 {
            return Err(Error::Config("list size must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// `Σ_g (p_g - q_g)² / min(p_g, q_g)²`, skipping genres where both are zero
/// and flooring the minimum at `epsilon`.
pub fn emanon2(p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, &b)| !(a == 0.0 && b == 0.0))
        .map(|(&a, &b)| {
            let m = a.min(b).max(epsilon);
            (a - b).powi(2) / (m * m)
        })
        .sum()
}

/// KL(p ‖ q) after normalizing both to unit mass. Zero `q` mass under
/// positive `p` is floored at `epsilon`.
pub fn kl_divergence(p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    let ps: f64 = p.iter().sum();
    let qs: f64 = q.iter().sum();
    if ps <= 0.0 {
        return 0.0;
    }
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| {
            let a = a / ps;
            let b = if qs > 0.0 { b / qs } else { 0.0 };
            a * (a / b.max(epsilon)).ln()
        })
        .sum()
}

pub fn divergence(kind: Divergence, p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    match kind {
        Divergence::Emanon2 => emanon2(p, q, epsilon),
        Divergence::Kl => kl_divergence(p, q, epsilon),
    }
}

fn gain(score: f64) -> f64 {
    score.exp2() - 1.0
}

fn discount(position: usize) -> f64 {
    // positions are 1-based
    ((position + 1) as f64).log2()
}

fn dcg(scores: impl IntoIterator<Item = f64>) -> f64 {
    scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| gain(s) / discount(i + 1))
        .sum()
}

/// NDCG of `scores` in list order, using the list's own items sorted by
/// score as the ideal ordering. An all-zero list scores 1.
pub fn ndcg_scores(scores: &[f64]) -> f64 {
    let mut ideal = scores.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal);
    if idcg == 0.0 {
        return 1.0;
    }
    dcg(scores.iter().copied()) / idcg
}

pub fn ndcg(list: &RankedList) -> f64 {
    ndcg_scores(&list.scores())
}

/// Scores lists (and one-item extensions of a prefix) for one user.
struct Scorer<'a> {
    pref: &'a [f64],
    cfg: &'a CalibrationConfig,
}

impl Scorer<'_> {
    fn calibration(&self, acc: &GenreAccumulator) -> f64 {
        let a = self.cfg.alpha;
        let q: Vec<f64> = (0..self.pref.len())
            .map(|g| {
                let qv = acc.value(g, self.cfg.denominator);
                if self.cfg.blend {
                    (1.0 - a) * qv + a * self.pref[g]
                } else {
                    qv
                }
            })
            .collect();
        divergence(self.cfg.divergence, self.pref, &q, self.cfg.epsilon)
    }

    fn objective(&self, acc: &GenreAccumulator, scores: &[f64], lambda: f64) -> f64 {
        let relevance = ndcg_scores(scores);
        if lambda == 0.0 {
            return relevance;
        }
        (1.0 - lambda) * relevance - lambda * self.calibration(acc)
    }
}

fn check_axis(p: &GenreDistribution, catalog: &GenreCatalog) -> Result<()> {
    if p.len() != catalog.genre_count() {
        return Err(Error::AxisMismatch {
            left: p.len(),
            right: catalog.genre_count(),
        });
    }
    Ok(())
}

/// Divergence between `p` and the (optionally blended) distribution of `list`.
pub fn calibration_error(
    list: &RankedList,
    p: &GenreDistribution,
    cfg: &CalibrationConfig,
    catalog: &GenreCatalog,
) -> Result<f64> {
    check_axis(p, catalog)?;
    let mut acc = GenreAccumulator::new(catalog.genre_count());
    for &(item, w) in list.entries() {
        acc.add(&genre_proportions(item, catalog)?, w);
    }
    Ok(Scorer { pref: p.values(), cfg }.calibration(&acc))
}

/// `(1 - λ) · ndcg(list) - λ · divergence(P, Q̃(list))`.
pub fn tradeoff_objective(
    list: &RankedList,
    p: &GenreDistribution,
    lambda: f64,
    cfg: &CalibrationConfig,
    catalog: &GenreCatalog,
) -> Result<f64> {
    check_axis(p, catalog)?;
    let mut acc = GenreAccumulator::new(catalog.genre_count());
    for &(item, w) in list.entries() {
        acc.add(&genre_proportions(item, catalog)?, w);
    }
    Ok(Scorer { pref: p.values(), cfg }.objective(&acc, &list.scores(), lambda))
}

/// Builds a `cfg.list_size` list from `candidates`, position by position,
/// appending the candidate that maximizes the trade-off objective of the
/// extended list. Ties go to the higher predicted score, then the lower id.
pub fn greedy_select(
    candidates: &RankedList,
    p: &GenreDistribution,
    lambda: f64,
    cfg: &CalibrationConfig,
    catalog: &GenreCatalog,
) -> Result<RankedList> {
    let n = cfg.list_size;
    if candidates.len() < n {
        return Err(Error::NotEnoughCandidates {
            have: candidates.len(),
            need: n,
        });
    }
    check_axis(p, catalog)?;
    let props: Vec<Vec<(usize, f64)>> = candidates
        .items()
        .map(|i| genre_proportions(i, catalog))
        .collect::<Result<_>>()?;
    let scorer = Scorer { pref: p.values(), cfg };

    let mut taken = vec![false; candidates.len()];
    let mut acc = GenreAccumulator::new(catalog.genre_count());
    let mut scores: Vec<f64> = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);

    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (c, &(item, score)) in candidates.entries().iter().enumerate() {
            if taken[c] {
                continue;
            }
            let mut trial = acc.clone();
            trial.add(&props[c], score);
            scores.push(score);
            let value = scorer.objective(&trial, &scores, lambda);
            scores.pop();
            let better = match best {
                None => true,
                Some((b, bv)) => {
                    let (bitem, bscore) = candidates.entries()[b];
                    value > bv
                        || (value == bv
                            && (score > bscore || (score == bscore && item < bitem)))
                }
            };
            if better {
                best = Some((c, value));
            }
        }
        let (c, _) = best.expect("enough candidates checked above");
        taken[c] = true;
        let (item, score) = candidates.entries()[c];
        acc.add(&props[c], score);
        scores.push(score);
        chosen.push((item, score));
    }
    Ok(RankedList::new(candidates.owner, chosen))
}

/// One calibrated list per grid value, in grid order. λ = 0 is the plain
/// top-N head of the candidates.
pub fn sweep_lambda(
    candidates: &RankedList,
    p: &GenreDistribution,
    cfg: &CalibrationConfig,
    catalog: &GenreCatalog,
) -> Result<Vec<(f64, RankedList)>> {
    if cfg.lambda_grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    cfg.lambda_grid
        .iter()
        .map(|&lambda| {
            let list = if lambda == 0.0 {
                if candidates.len() < cfg.list_size {
                    return Err(Error::NotEnoughCandidates {
                        have: candidates.len(),
                        need: cfg.list_size,
                    });
                }
                candidates.head(cfg.list_size)
            } else {
                greedy_select(candidates, p, lambda, cfg, catalog)?
            };
            Ok((lambda, list))
        })
        .collect()
}

/// Stage label of a list produced at trade-off weight `lambda`.
pub fn stage_label(lambda: f64) -> String {
    format!("C@{lambda:.1}")
}

/// Writes `user_id,lambda,rank,item_id,predicted_score` rows; ranks are 1-based.
pub fn write_calibrated_csv<'a>(
    path: impl AsRef<Path>,
    lists: impl IntoIterator<Item = (f64, &'a RankedList)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["user_id", "lambda", "rank", "item_id", "predicted_score"])?;
    for (lambda, list) in lists {
        for (rank, (item, score)) in list.entries().iter().enumerate() {
            w.write_record([
                list.owner.to_string(),
                format!("{lambda:.1}"),
                (rank + 1).to_string(),
                item.to_string(),
                score.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

#[derive(Debug, Deserialize)]
struct CalibratedRow {
    user_id: UserId,
    lambda: f64,
    rank: usize,
    item_id: ItemId,
    predicted_score: f64,
}

/// Inverse of [`write_calibrated_csv`], keyed by `(lambda label, user)`.
pub fn read_calibrated_csv(path: impl AsRef<Path>) -> Result<BTreeMap<(String, UserId), RankedList>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut rows: BTreeMap<(String, UserId), Vec<(usize, ItemId, f64)>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: CalibratedRow = row?;
        rows.entry((stage_label(row.lambda), row.user_id))
            .or_default()
            .push((row.rank, row.item_id, row.predicted_score));
    }
    Ok(rows
        .into_iter()
        .map(|((label, user), mut entries)| {
            entries.sort_by_key(|e| e.0);
            let list = RankedList::new(user, entries.into_iter().map(|(_, i, s)| (i, s)).collect());
            ((label, user), list)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{list_distribution, Stage};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn emanon2_examples() {
        assert_eq!(emanon2(&[0.3, 0.7], &[0.3, 0.7], 1e-5), 0.0);
        assert!(close(emanon2(&[0.5, 0.5], &[0.25, 0.75], 1e-5), 1.25, 1e-12));
        assert!(close(emanon2(&[1.0], &[0.0], 1e-5), 1e10, 1e-2));
        // mutual zeros are skipped
        assert_eq!(emanon2(&[0.0, 0.5], &[0.0, 0.5], 1e-5), 0.0);
    }

    #[test]
    fn kl_examples() {
        assert!(close(kl_divergence(&[0.2, 0.8], &[0.2, 0.8], 1e-5), 0.0, 1e-15));
        assert!(close(kl_divergence(&[1.0, 0.0], &[0.5, 0.5], 1e-5), std::f64::consts::LN_2, 1e-12));
        let expect = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!(close(kl_divergence(&[0.5, 0.5], &[0.75, 0.25], 1e-5), expect, 1e-12));
        assert!(close(expect, 0.1438, 1e-4));
        // unnormalized inputs are rescaled first
        assert!(close(kl_divergence(&[2.0, 2.0], &[3.0, 1.0], 1e-5), expect, 1e-12));
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_scores(&[5.0, 3.0, 3.0, 1.0]), 1.0);
        let dcg = 1.0 + 3.0 / 3f64.log2();
        let idcg = 3.0 + 1.0 / 3f64.log2();
        assert!(close(dcg, 2.8928, 1e-4));
        assert!(close(idcg, 3.6309, 1e-4));
        assert!(close(ndcg_scores(&[1.0, 2.0]), dcg / idcg, 1e-15));
        assert!(close(ndcg_scores(&[1.0, 2.0]), 0.7967, 1e-4));
        assert_eq!(ndcg_scores(&[0.0, 0.0]), 1.0);
    }

    fn toy() -> (GenreCatalog, GenreDistribution, RankedList) {
        let cat = GenreCatalog::from_names(BTreeMap::from([
            (1, vec!["A"]),
            (2, vec!["A"]),
            (3, vec!["A"]),
            (4, vec!["B"]),
            (5, vec!["B"]),
            (6, vec!["A", "B"]),
        ]));
        let p = GenreDistribution::new(1, Stage::Preference, vec![0.5, 0.5]);
        let cands = RankedList::from_scores(
            1,
            vec![(1, 4.9), (2, 4.8), (3, 4.7), (4, 3.0), (5, 2.9), (6, 2.0)],
        );
        (cat, p, cands)
    }

    #[test]
    fn objective_endpoints() {
        let (cat, p, cands) = toy();
        let cfg = CalibrationConfig::default();
        let list = cands.head(3);
        let rel = ndcg(&list);
        assert_eq!(tradeoff_objective(&list, &p, 0.0, &cfg, &cat).unwrap(), rel);
        let q = list_distribution(&list, Stage::Calibrated, &cat, Denominator::PerGenre).unwrap();
        let qt = crate::distribution::blend(&q, &p, cfg.alpha).unwrap();
        let div = emanon2(p.values(), qt.values(), cfg.epsilon);
        assert_eq!(tradeoff_objective(&list, &p, 1.0, &cfg, &cat).unwrap(), -div);
        assert_eq!(calibration_error(&list, &p, &cfg, &cat).unwrap(), div);
    }

    #[test]
    fn lambda_zero_is_candidate_head() {
        let (cat, p, cands) = toy();
        let cfg = CalibrationConfig {
            list_size: 3,
            ..Default::default()
        };
        assert_eq!(greedy_select(&cands, &p, 0.0, &cfg, &cat).unwrap(), cands.head(3));
    }

    #[test]
    fn lambda_one_covers_preferred_genres() {
        let (cat, _, cands) = toy();
        // A user who rated pure-A and pure-B movies alike.
        let p = GenreDistribution::new(1, Stage::Preference, vec![1.0, 1.0]);
        let cfg = CalibrationConfig {
            list_size: 2,
            ..Default::default()
        };
        let out = greedy_select(&cands, &p, 1.0, &cfg, &cat).unwrap();
        let covered: std::collections::BTreeSet<usize> = out
            .items()
            .flat_map(|i| cat.genres_of(i).unwrap().to_vec())
            .collect();
        assert_eq!(covered.len(), 2, "{out:?}");
        // The relevance head is all A.
        let head_err = calibration_error(&cands.head(2), &p, &cfg, &cat).unwrap();
        assert!(calibration_error(&out, &p, &cfg, &cat).unwrap() < head_err);
    }

    #[test]
    fn full_length_selection_is_a_permutation() {
        let (cat, p, cands) = toy();
        let cfg = CalibrationConfig {
            list_size: 6,
            ..Default::default()
        };
        let out = greedy_select(&cands, &p, 0.5, &cfg, &cat).unwrap();
        let mut items: Vec<_> = out.items().collect();
        items.sort();
        assert_eq!(items, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn too_few_candidates_is_an_error() {
        let (cat, p, cands) = toy();
        let cfg = CalibrationConfig::default();
        assert!(matches!(
            greedy_select(&cands, &p, 0.5, &cfg, &cat),
            Err(Error::NotEnoughCandidates { have: 6, need: 10 })
        ));
    }

    #[test]
    fn sweep_shapes() {
        let (cat, p, cands) = toy();
        let cfg = CalibrationConfig {
            list_size: 3,
            ..Default::default()
        };
        let all = sweep_lambda(&cands, &p, &cfg, &cat).unwrap();
        assert_eq!(all.len(), 11);
        assert_eq!(all[0].1, cands.head(3));
        let labels: Vec<_> = all.iter().map(|(l, _)| stage_label(*l)).collect();
        assert_eq!(labels.first().unwrap(), "C@0.0");
        assert_eq!(labels.last().unwrap(), "C@1.0");

        let only_zero = CalibrationConfig {
            lambda_grid: vec![0.0],
            ..cfg.clone()
        };
        assert_eq!(sweep_lambda(&cands, &p, &only_zero, &cat).unwrap(), vec![(0.0, cands.head(3))]);

        let empty = CalibrationConfig {
            lambda_grid: vec![],
            ..cfg
        };
        assert!(sweep_lambda(&cands, &p, &empty, &cat).is_err());
    }

    #[test]
    fn identical_single_genre_candidates_give_identical_lists() {
        let cat = GenreCatalog::from_names((1..=20).map(|i| (i, vec!["A"])).collect());
        let p = GenreDistribution::new(1, Stage::Preference, vec![1.0]);
        let cands = RankedList::from_scores(1, (1..=20).map(|i| (i, 5.0 - i as f64 * 0.1)).collect());
        let cfg = CalibrationConfig::default();
        let all = sweep_lambda(&cands, &p, &cfg, &cat).unwrap();
        assert!(all.iter().all(|(_, l)| *l == all[0].1));
    }

    #[test]
    fn calibrated_csv_round_trips() {
        let (_, _, cands) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lists.csv");
        let a = cands.head(3);
        write_calibrated_csv(&path, [(0.0, &a), (0.3, &cands)]).unwrap();
        let back = read_calibrated_csv(&path).unwrap();
        assert_eq!(back[&("C@0.0".to_string(), 1)], a);
        assert_eq!(back[&("C@0.3".to_string(), 1)], cands);
    }

    #[test]
    fn config_validation() {
        assert!(CalibrationConfig::default().validate().is_ok());
        let bad = CalibrationConfig {
            lambda_grid: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = CalibrationConfig {
            lambda_grid: vec![1.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
