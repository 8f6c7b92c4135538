//! Genre distributions of user preferences (P), recommendation lists (Q) and
//! their blend (Q̃), plus the user × genre matrices built from them.
//!
//! A distribution value for genre `g` is a weighted mean of `p(g|i)` over the
//! contributing items, where `p(g|i) = 1 / |genres(i)|` and the weights are
//! user scores (preferences) or predicted scores (lists). By default the
//! denominator sums only the weights of items that carry `g`; the values are
//! not renormalized and need not sum to one.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GenreCatalog, ItemId, UserId};
use crate::recommender::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preference,
    Candidate,
    Calibrated,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Preference => "preference",
            Stage::Candidate => "candidate",
            Stage::Calibrated => "calibrated",
        })
    }
}

/// Which weights form the denominator of a genre's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Only items carrying the genre.
    #[default]
    PerGenre,
    /// Every contributing item.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenreDistribution {
    pub owner: UserId,
    pub stage: Stage,
    values: Vec<f64>,
}

impl GenreDistribution {
    pub fn new(owner: UserId, stage: Stage, values: Vec<f64>) -> Self {
        Self {
            owner,
            stage,
            values,
        }
    }

    /// Values laid out on the catalog's genre axis.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, genre: usize) -> f64 {
        self.values.get(genre).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `p(g|i)` for each genre of `item`.
pub fn genre_proportions(item: ItemId, catalog: &GenreCatalog) -> Result<Vec<(usize, f64)>> {
    let genres = catalog.genres_of(item).ok_or(Error::UnknownItem(item))?;
    if genres.is_empty() {
        return Err(Error::GenrelessItem(item));
    }
    let share = 1.0 / genres.len() as f64;
    Ok(genres.iter().map(|&g| (g, share)).collect())
}

/// Running numerators and denominators of a weighted genre distribution.
///
/// Adding items one by one and calling [`GenreAccumulator::values`] yields
/// exactly the values a batch derivation over the same items in the same
/// order produces.
#[derive(Debug, Clone)]
pub struct GenreAccumulator {
    num: Vec<f64>,
    den: Vec<f64>,
    total: f64,
}

impl GenreAccumulator {
    pub fn new(width: usize) -> Self {
        Self {
            num: vec![0.0; width],
            den: vec![0.0; width],
            total: 0.0,
        }
    }

    pub fn add(&mut self, proportions: &[(usize, f64)], weight: f64) {
        for &(g, p) in proportions {
            self.num[g] += weight * p;
            self.den[g] += weight;
        }
        self.total += weight;
    }

    pub fn value(&self, genre: usize, mode: Denominator) -> f64 {
        let d = match mode {
            Denominator::PerGenre => self.den[genre],
            Denominator::Global => self.total,
        };
        if d > 0.0 {
            self.num[genre] / d
        } else {
            0.0
        }
    }

    pub fn values(&self, mode: Denominator) -> Vec<f64> {
        (0..self.num.len()).map(|g| self.value(g, mode)).collect()
    }
}

fn weighted(
    owner: UserId,
    stage: Stage,
    entries: impl IntoIterator<Item = (ItemId, f64)>,
    catalog: &GenreCatalog,
    mode: Denominator,
) -> Result<GenreDistribution> {
    let mut acc = GenreAccumulator::new(catalog.genre_count());
    for (item, w) in entries {
        acc.add(&genre_proportions(item, catalog)?, w);
    }
    Ok(GenreDistribution::new(owner, stage, acc.values(mode)))
}

/// P(g|u) from a user's `(item, score)` interactions.
pub fn preference_distribution(
    owner: UserId,
    user_items: &[(ItemId, f64)],
    catalog: &GenreCatalog,
    mode: Denominator,
) -> Result<GenreDistribution> {
    if user_items.is_empty() {
        return Err(Error::InvalidInput(format!("user {owner} has no interactions")));
    }
    weighted(owner, Stage::Preference, user_items.iter().copied(), catalog, mode)
}

/// Q(g|u) of a list, weighted by predicted scores.
pub fn list_distribution(
    list: &RankedList,
    stage: Stage,
    catalog: &GenreCatalog,
    mode: Denominator,
) -> Result<GenreDistribution> {
    if list.is_empty() {
        return Err(Error::InvalidInput(format!(
            "empty recommendation list for user {}",
            list.owner
        )));
    }
    if let Some(&(item, s)) = list.entries().iter().find(|(_, s)| *s < 0.0) {
        return Err(Error::InvalidInput(format!(
            "negative predicted score {s} for item {item}"
        )));
    }
    weighted(list.owner, stage, list.entries().iter().copied(), catalog, mode)
}

/// `(1 - alpha) * q + alpha * p`, genre by genre. Keeps `q`'s owner and stage.
pub fn blend(q: &GenreDistribution, p: &GenreDistribution, alpha: f64) -> Result<GenreDistribution> {
    if q.len() != p.len() {
        return Err(Error::AxisMismatch {
            left: q.len(),
            right: p.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    let values = q
        .values
        .iter()
        .zip(&p.values)
        .map(|(&qv, &pv)| (1.0 - alpha) * qv + alpha * pv)
        .collect();
    Ok(GenreDistribution::new(q.owner, q.stage, values))
}

/// One row per user (ascending id), one column per genre.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionMatrix {
    users: Vec<UserId>,
    genres: Vec<String>,
    data: Array2<f64>,
}

impl DistributionMatrix {
    pub fn from_parts(users: Vec<UserId>, genres: Vec<String>, data: Array2<f64>) -> Result<Self> {
        if data.nrows() != users.len() || data.ncols() != genres.len() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{} but has {} users and {} genres",
                data.nrows(),
                data.ncols(),
                users.len(),
                genres.len()
            )));
        }
        Ok(Self {
            users,
            genres,
            data,
        })
    }

    /// Users `0..n` and genres `g0..`; for data that has no catalog behind it.
    pub fn anonymous(data: Array2<f64>) -> Self {
        Self {
            users: (0..data.nrows() as UserId).collect(),
            genres: (0..data.ncols()).map(|g| format!("g{g}")).collect(),
            data,
        }
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn genres(&self) -> &[String] {
        &self.genres
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Header `user_id,<genres...>`, values in shortest round-trip notation.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["user_id".to_string()];
        header.extend(self.genres.iter().cloned());
        w.write_record(&header)?;
        for (i, user) in self.users.iter().enumerate() {
            let mut rec = vec![user.to_string()];
            rec.extend(self.data.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let genres: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut users = Vec::new();
        let mut flat = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: String| Error::Parse {
                path: path.to_path_buf(),
                line: row + 2,
                message: m,
            };
            let mut fields = rec.iter();
            let user = fields.next().unwrap_or_default();
            users.push(user.parse().map_err(|_| bad(format!("invalid user id `{user}`")))?);
            for v in fields {
                flat.push(v.parse::<f64>().map_err(|_| bad(format!("invalid value `{v}`")))?);
            }
        }
        let data = Array2::from_shape_vec((users.len(), genres.len()), flat)
            .map_err(|e| Error::InvalidInput(format!("{}: ragged matrix: {e}", path.display())))?;
        Self::from_parts(users, genres, data)
    }
}

/// Stacks per-user distributions into a matrix on the catalog's genre axis.
pub fn distribution_matrix(
    dists: &[GenreDistribution],
    catalog: &GenreCatalog,
) -> Result<DistributionMatrix> {
    let width = catalog.genre_count();
    if let Some(first) = dists.first() {
        if let Some(other) = dists.iter().find(|d| d.stage != first.stage) {
            return Err(Error::InvalidInput(format!(
                "mixed stages in one matrix: {} and {}",
                first.stage, other.stage
            )));
        }
    }
    if let Some(d) = dists.iter().find(|d| d.len() > width) {
        return Err(Error::AxisMismatch {
            left: d.len(),
            right: width,
        });
    }
    let mut order: Vec<&GenreDistribution> = dists.iter().collect();
    order.sort_by_key(|d| d.owner);
    let mut seen = BTreeSet::new();
    for d in &order {
        if !seen.insert(d.owner) {
            return Err(Error::DuplicateUser(d.owner));
        }
    }
    let mut data = Array2::zeros((order.len(), width));
    for (i, d) in order.iter().enumerate() {
        for (j, &v) in d.values().iter().enumerate() {
            data[[i, j]] = v;
        }
    }
    DistributionMatrix::from_parts(
        order.iter().map(|d| d.owner).collect(),
        catalog.genres().to_vec(),
        data,
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// The three-movie profile used throughout the worked example, with the
    /// two extra genres nobody in the profile carries.
    pub(crate) fn worked_example() -> (GenreCatalog, Vec<(ItemId, f64)>) {
        let catalog = GenreCatalog::from_names(BTreeMap::from([
            (1, vec!["Adventure", "Comedy"]),             // Three Musketeers
            (2, vec!["Drama"]),                           // The Whale
            (3, vec!["Action", "Adventure", "Crime", "Drama"]), // Batman
            (4, vec!["Romance"]),
            (5, vec!["Sci-fi"]),
        ]));
        (catalog, vec![(1, 5.0), (2, 4.0), (3, 4.0)])
    }

    fn value(cat: &GenreCatalog, d: &GenreDistribution, name: &str) -> f64 {
        d.get(cat.genres().iter().position(|g| g == name).unwrap())
    }

    #[test]
    fn proportions_follow_genre_count() {
        let (cat, _) = worked_example();
        assert_eq!(genre_proportions(1, &cat).unwrap(), vec![(1, 0.5), (2, 0.5)]);
        assert!(genre_proportions(3, &cat).unwrap().iter().all(|&(_, p)| p == 0.25));
        assert_eq!(genre_proportions(2, &cat).unwrap(), vec![(4, 1.0)]);
        assert!(matches!(genre_proportions(99, &cat), Err(Error::UnknownItem(99))));
    }

    #[test]
    fn worked_example_preference_values() {
        let (cat, profile) = worked_example();
        let p = preference_distribution(7, &profile, &cat, Denominator::PerGenre).unwrap();
        let expect = [
            ("Action", 0.25),
            ("Adventure", 3.5 / 9.0),
            ("Comedy", 0.5),
            ("Crime", 0.25),
            ("Drama", 0.625),
            ("Romance", 0.0),
            ("Sci-fi", 0.0),
        ];
        for (g, v) in expect {
            assert!((value(&cat, &p, g) - v).abs() < 1e-12, "{g}");
        }
        // Not renormalized.
        let sum: f64 = p.values().iter().sum();
        assert!((sum - 2.013_888_888_888_889).abs() < 1e-12);
    }

    #[test]
    fn global_denominator_divides_by_all_scores() {
        let (cat, profile) = worked_example();
        let p = preference_distribution(7, &profile, &cat, Denominator::Global).unwrap();
        assert!((value(&cat, &p, "Adventure") - 3.5 / 13.0).abs() < 1e-12);
        assert!((value(&cat, &p, "Drama") - 5.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn shared_genre_items_give_one() {
        let cat = GenreCatalog::from_names(BTreeMap::from([(1, vec!["A"]), (2, vec!["A"])]));
        let p = preference_distribution(1, &[(1, 2.0), (2, 4.0)], &cat, Denominator::PerGenre).unwrap();
        assert_eq!(p.values(), &[1.0]);
        let single = preference_distribution(1, &[(1, 3.0)], &cat, Denominator::PerGenre).unwrap();
        assert_eq!(single.values(), &[1.0]);
    }

    #[test]
    fn zero_weights_give_zero_not_error() {
        let cat = GenreCatalog::from_names(BTreeMap::from([(1, vec!["A"]), (2, vec!["B"])]));
        let p = preference_distribution(1, &[(1, 0.0), (2, 1.0)], &cat, Denominator::PerGenre).unwrap();
        assert_eq!(p.values(), &[0.0, 1.0]);
    }

    #[test]
    fn list_distribution_cancels_scale() {
        let cat = GenreCatalog::from_names(BTreeMap::from([(1, vec!["A", "B"])]));
        for s in [0.3, 4.2] {
            let list = RankedList::new(1, vec![(1, s)]);
            let q = list_distribution(&list, Stage::Candidate, &cat, Denominator::PerGenre).unwrap();
            assert_eq!(q.values(), &[0.5, 0.5]);
        }
        let empty = RankedList::new(1, vec![]);
        assert!(list_distribution(&empty, Stage::Candidate, &cat, Denominator::PerGenre).is_err());
    }

    #[test]
    fn blend_reproduces_worked_example() {
        // Genre order: Action, Adventure, Comedy, Crime, Drama, Romance, Sci-fi.
        let p = GenreDistribution::new(1, Stage::Preference, vec![0.25, 3.5 / 9.0, 0.5, 0.25, 0.625, 0.0, 0.0]);
        let q = GenreDistribution::new(1, Stage::Calibrated, vec![0.0, 0.35, 0.563, 0.4, 0.5, 0.0, 0.0]);
        let qt = blend(&q, &p, 0.01).unwrap();
        // The published Crime cell reads 0.3935; the blend formula gives 0.3985.
        let expect = [0.0025, 0.35038, 0.56237, 0.3985, 0.50125, 0.0, 0.0];
        for (got, want) in qt.values().iter().zip(expect) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn blend_rejects_axis_mismatch() {
        let p = GenreDistribution::new(1, Stage::Preference, vec![0.5]);
        let q = GenreDistribution::new(1, Stage::Candidate, vec![0.5, 0.5]);
        assert!(matches!(blend(&q, &p, 0.01), Err(Error::AxisMismatch { .. })));
    }

    #[test]
    fn matrix_rows_sorted_and_filled() {
        let (cat, profile) = worked_example();
        let a = preference_distribution(9, &profile, &cat, Denominator::PerGenre).unwrap();
        let b = preference_distribution(3, &profile, &cat, Denominator::PerGenre).unwrap();
        let m = distribution_matrix(&[a.clone(), b], &cat).unwrap();
        assert_eq!(m.users(), &[3, 9]);
        assert_eq!(m.row(0), m.row(1));
        assert_eq!(m.row(1).to_vec(), a.values());

        let empty = distribution_matrix(&[], &cat).unwrap();
        assert_eq!((empty.nrows(), empty.ncols()), (0, 7));

        assert!(matches!(
            distribution_matrix(&[a.clone(), a], &cat),
            Err(Error::DuplicateUser(9))
        ));
    }

    #[test]
    fn matrix_csv_round_trips() {
        let (cat, profile) = worked_example();
        let a = preference_distribution(9, &profile, &cat, Denominator::PerGenre).unwrap();
        let m = distribution_matrix(&[a], &cat).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        m.write_csv(&path).unwrap();
        assert_eq!(DistributionMatrix::read_csv(&path).unwrap(), m);
    }
}
