//! Dataset loading, cleaning, score binarization and fold splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type UserId = u64;
pub type ItemId = u64;

/// Token MovieLens uses for items without genre metadata.
const NO_GENRES: &str = "(no genres listed)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub min: f64,
    pub max: f64,
}

impl ScoreScale {
    pub const FIVE: ScoreScale = ScoreScale { min: 0.0, max: 5.0 };
    pub const TEN: ScoreScale = ScoreScale { min: 0.0, max: 10.0 };
    pub const BINARY: ScoreScale = ScoreScale { min: 0.0, max: 1.0 };

    pub fn contains(&self, score: f64) -> bool {
        score >= self.min && score <= self.max
    }

    pub fn clamp(&self, score: f64) -> f64 {
        score.clamp(self.min, self.max)
    }

    /// Score at or above which an interaction counts as positive.
    pub fn positive_threshold(&self) -> Result<f64> {
        if self.max == 1.0 {
            Ok(1.0)
        } else if self.max == 5.0 {
            Ok(4.0)
        } else if self.max == 10.0 {
            Ok(8.0)
        } else {
            Err(Error::UnsupportedScale {
                min: self.min,
                max: self.max,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub score: f64,
    pub timestamp: i64,
}

/// User-item-score records on a known score scale.
///
/// Records are kept sorted by `(user, item)`; each pair occurs once and every
/// score lies inside the scale.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSet {
    records: Vec<Interaction>,
    scale: ScoreScale,
}

impl InteractionSet {
    pub fn new(mut records: Vec<Interaction>, scale: ScoreScale) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| !scale.contains(r.score)) {
            return Err(Error::ScoreOutOfScale {
                user: bad.user,
                item: bad.item,
                score: bad.score,
                min: scale.min,
                max: scale.max,
            });
        }
        records.sort_by_key(|r| (r.user, r.item));
        let dups: Vec<(UserId, ItemId)> = records
            .windows(2)
            .filter(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
            .map(|w| (w[0].user, w[0].item))
            .collect();
        if !dups.is_empty() {
            return Err(Error::DuplicatePairs(dups));
        }
        Ok(Self { records, scale })
    }

    pub fn empty(scale: ScoreScale) -> Self {
        Self {
            records: Vec::new(),
            scale,
        }
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    pub fn scale(&self) -> ScoreScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn users(&self) -> BTreeSet<UserId> {
        self.records.iter().map(|r| r.user).collect()
    }

    pub fn items(&self) -> BTreeSet<ItemId> {
        self.records.iter().map(|r| r.item).collect()
    }

    /// `(item, score)` pairs per user, items ascending.
    pub fn by_user(&self) -> BTreeMap<UserId, Vec<(ItemId, f64)>> {
        let mut out: BTreeMap<UserId, Vec<(ItemId, f64)>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.user).or_default().push((r.item, r.score));
        }
        out
    }

    /// Keeps the records matching `keep`. Invariants carry over from `self`.
    pub fn filtered(&self, mut keep: impl FnMut(&Interaction) -> bool) -> Self {
        Self {
            records: self.records.iter().filter(|r| keep(r)).copied().collect(),
            scale: self.scale,
        }
    }
}

/// Fixed genre axis plus each item's genre set (indices into the axis).
#[derive(Debug, Clone, PartialEq)]
pub struct GenreCatalog {
    genres: Vec<String>,
    item_genres: BTreeMap<ItemId, Vec<usize>>,
}

impl GenreCatalog {
    /// Builds a catalog from genre names per item. The axis is the sorted set
    /// of names that occur.
    pub fn from_names<S: AsRef<str>>(items: BTreeMap<ItemId, Vec<S>>) -> Self {
        let genres: Vec<String> = items
            .values()
            .flatten()
            .map(|g| g.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let item_genres = items
            .into_iter()
            .map(|(item, names)| {
                let mut idx: Vec<usize> = names
                    .iter()
                    .map(|n| genres.binary_search_by(|g| g.as_str().cmp(n.as_ref())).unwrap())
                    .collect();
                idx.sort_unstable();
                idx.dedup();
                (item, idx)
            })
            .collect();
        Self {
            genres,
            item_genres,
        }
    }

    pub fn genres(&self) -> &[String] {
        &self.genres
    }

    pub fn genre_count(&self) -> usize {
        self.genres.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_genres.len()
    }

    pub fn genres_of(&self, item: ItemId) -> Option<&[usize]> {
        self.item_genres.get(&item).map(Vec::as_slice)
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.item_genres.keys().copied()
    }

    pub fn genre_names_of(&self, item: ItemId) -> Option<Vec<&str>> {
        self.genres_of(item)
            .map(|idx| idx.iter().map(|&g| self.genres[g].as_str()).collect())
    }

    fn restricted_to(&self, keep: &BTreeSet<ItemId>) -> Self {
        let names: BTreeMap<ItemId, Vec<&str>> = keep
            .iter()
            .filter_map(|&i| self.genre_names_of(i).map(|g| (i, g)))
            .collect();
        Self::from_names(names)
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // MovieLens 1M ships Latin-1 titles; ids and genres are ASCII either way.
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads MovieLens `::`-separated `ratings.dat` and `movies.dat` files.
pub fn load_movielens(
    ratings_path: impl AsRef<Path>,
    movies_path: impl AsRef<Path>,
) -> Result<(InteractionSet, GenreCatalog)> {
    let ratings_path = ratings_path.as_ref();
    let movies_path = movies_path.as_ref();

    let mut records = Vec::new();
    for (n, line) in read_text(ratings_path)?.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_rating_line(line).map_err(|m| parse_err(ratings_path, n + 1, m))?);
    }

    let mut items: BTreeMap<ItemId, Vec<String>> = BTreeMap::new();
    for (n, line) in read_text(movies_path)?.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (item, genres) =
            parse_movie_line(line).map_err(|m| parse_err(movies_path, n + 1, m))?;
        if items.insert(item, genres).is_some() {
            return Err(parse_err(movies_path, n + 1, format!("duplicate movie id {item}")));
        }
    }

    Ok((
        InteractionSet::new(records, ScoreScale::FIVE)?,
        GenreCatalog::from_names(items),
    ))
}

fn parse_rating_line(line: &str) -> std::result::Result<Interaction, String> {
    let fields: Vec<&str> = line.split("::").collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 `::`-separated fields, found {}", fields.len()));
    }
    let num = |idx: usize, what: &str| -> std::result::Result<u64, String> {
        fields[idx]
            .trim()
            .parse()
            .map_err(|_| format!("invalid {what} `{}`", fields[idx]))
    };
    Ok(Interaction {
        user: num(0, "user id")?,
        item: num(1, "movie id")?,
        score: fields[2]
            .trim()
            .parse()
            .map_err(|_| format!("invalid rating `{}`", fields[2]))?,
        timestamp: fields[3]
            .trim()
            .parse()
            .map_err(|_| format!("invalid timestamp `{}`", fields[3]))?,
    })
}

fn parse_movie_line(line: &str) -> std::result::Result<(ItemId, Vec<String>), String> {
    let (id, rest) = line
        .split_once("::")
        .ok_or_else(|| "expected `MovieID::Title::Genres`".to_string())?;
    let (_title, genres) = rest
        .rsplit_once("::")
        .ok_or_else(|| "expected `MovieID::Title::Genres`".to_string())?;
    let id = id
        .trim()
        .parse()
        .map_err(|_| format!("invalid movie id `{id}`"))?;
    let genres = genres
        .split('|')
        .map(str::trim)
        .filter(|g| !g.is_empty() && *g != NO_GENRES)
        .map(str::to_string)
        .collect();
    Ok((id, genres))
}

/// Column mapping for a headed CSV ratings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub user: String,
    pub item: String,
    pub score: String,
    #[serde(default)]
    pub timestamp: Option<String>,
    pub scale: ScoreScale,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl CsvSchema {
    /// Layout written by [`write_interactions_csv`].
    pub fn cleaned(scale: ScoreScale) -> Self {
        Self {
            user: "user_id".into(),
            item: "item_id".into(),
            score: "score".into(),
            timestamp: Some("timestamp".into()),
            scale,
            delimiter: ',',
        }
    }
}

pub fn load_csv(ratings_path: impl AsRef<Path>, schema: &CsvSchema) -> Result<InteractionSet> {
    let path = ratings_path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in {}", path.display())))
    };
    let (user_col, item_col, score_col) =
        (column(&schema.user)?, column(&schema.item)?, column(&schema.score)?);
    let ts_col = schema.timestamp.as_deref().map(column).transpose()?;

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        // Header is line 1.
        let line = row + 2;
        let field = |col: usize, what: &str| -> Result<&str> {
            rec.get(col)
                .ok_or_else(|| parse_err(path, line, format!("missing {what} field")))
        };
        let parse_id = |col: usize, what: &str| -> Result<u64> {
            let raw = field(col, what)?;
            raw.parse()
                .map_err(|_| parse_err(path, line, format!("invalid {what} `{raw}`")))
        };
        let raw_score = field(score_col, "score")?;
        let score: f64 = raw_score
            .parse()
            .map_err(|_| parse_err(path, line, format!("non-numeric score `{raw_score}`")))?;
        let timestamp = match ts_col {
            Some(c) => {
                let raw = field(c, "timestamp")?;
                raw.parse()
                    .map_err(|_| parse_err(path, line, format!("invalid timestamp `{raw}`")))?
            }
            None => 0,
        };
        records.push(Interaction {
            user: parse_id(user_col, "user id")?,
            item: parse_id(item_col, "item id")?,
            score,
            timestamp,
        });
    }
    InteractionSet::new(records, schema.scale)
}

/// Reads an `item_id,genres` file where genres are `|`-separated.
pub fn load_genre_csv(path: impl AsRef<Path>) -> Result<GenreCatalog> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let mut items: BTreeMap<ItemId, Vec<String>> = BTreeMap::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let raw = rec.get(0).unwrap_or_default();
        let item: ItemId = raw
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid item id `{raw}`")))?;
        let genres = rec
            .get(1)
            .unwrap_or_default()
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty() && *g != NO_GENRES)
            .map(str::to_string)
            .collect();
        items.insert(item, genres);
    }
    Ok(GenreCatalog::from_names(items))
}

pub fn write_interactions_csv(path: impl AsRef<Path>, set: &InteractionSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["user_id", "item_id", "score", "timestamp"])?;
    for r in set.records() {
        w.write_record([
            r.user.to_string(),
            r.item.to_string(),
            r.score.to_string(),
            r.timestamp.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_genre_csv(path: impl AsRef<Path>, catalog: &GenreCatalog) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["item_id", "genres"])?;
    for item in catalog.items() {
        let names = catalog.genre_names_of(item).unwrap_or_default();
        w.write_record([item.to_string(), names.join("|")])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Applies the cleaning rules until nothing changes:
/// items without genres are dropped, users with fewer than `min_user_tx`
/// interactions are dropped, and items nobody interacted with leave the
/// catalog. The genre axis shrinks to genres still carried by some item.
pub fn preprocess(
    interactions: &InteractionSet,
    catalog: &GenreCatalog,
    min_user_tx: usize,
) -> Result<(InteractionSet, GenreCatalog)> {
    let mut current = interactions.clone();
    loop {
        let with_genres = current.filtered(|r| catalog.genres_of(r.item).is_some_and(|g| !g.is_empty()));
        let mut counts: BTreeMap<UserId, usize> = BTreeMap::new();
        for r in with_genres.records() {
            *counts.entry(r.user).or_default() += 1;
        }
        let next = with_genres.filtered(|r| counts[&r.user] >= min_user_tx);
        if next.len() == current.len() {
            break;
        }
        current = next;
    }
    if current.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rated = current.items();
    Ok((current, catalog.restricted_to(&rated)))
}

/// Maps scores to {0, 1}: `>= 4` on a 0-5 scale, `>= 8` on a 0-10 scale.
pub fn binarize(interactions: &InteractionSet) -> Result<InteractionSet> {
    let scale = interactions.scale();
    if scale.max != 5.0 && scale.max != 10.0 {
        return Err(Error::UnsupportedScale {
            min: scale.min,
            max: scale.max,
        });
    }
    let threshold = scale.positive_threshold()?;
    let records = interactions
        .records()
        .iter()
        .map(|r| Interaction {
            score: if r.score >= threshold { 1.0 } else { 0.0 },
            ..*r
        })
        .collect();
    InteractionSet::new(records, ScoreScale::BINARY)
}

/// Per-user assignment of interactions to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    assignment: BTreeMap<(UserId, ItemId), usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, user: UserId, item: ItemId) -> Option<usize> {
        self.assignment.get(&(user, item)).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Splits `set` into (train, test) where test is fold `fold`.
    /// Records without an assignment go to train.
    pub fn split(&self, set: &InteractionSet, fold: usize) -> (InteractionSet, InteractionSet) {
        let in_test = |r: &Interaction| self.fold_of(r.user, r.item) == Some(fold);
        (set.filtered(|r| !in_test(r)), set.filtered(in_test))
    }
}

/// Shuffles each user's interactions (seeded per user) and deals them
/// round-robin into `k` folds, so per-user fold sizes differ by at most one.
pub fn split_folds(interactions: &InteractionSet, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::InvalidInput("fold count must be positive".into()));
    }
    let mut assignment = BTreeMap::new();
    for (user, items) in interactions.by_user() {
        if items.len() < k {
            return Err(Error::TooFewInteractions {
                user,
                count: items.len(),
                k,
            });
        }
        let mut ids: Vec<ItemId> = items.iter().map(|(i, _)| *i).collect();
        ids.shuffle(&mut seed::rng(seed, &[user]));
        for (pos, item) in ids.into_iter().enumerate() {
            assignment.insert((user, item), pos % k);
        }
    }
    Ok(FoldAssignment { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn rec(user: UserId, item: ItemId, score: f64) -> Interaction {
        Interaction {
            user,
            item,
            score,
            timestamp: 0,
        }
    }

    #[test]
    fn parses_movielens_lines() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_tmp(&dir, "ratings.dat", "1::1193::5::978300760\n");
        let m = write_tmp(
            &dir,
            "movies.dat",
            "1::Toy Story (1995)::Animation|Children's|Comedy\n1193::One Flew Over the Cuckoo's Nest (1975)::Drama\n",
        );
        let (set, cat) = load_movielens(&r, &m).unwrap();
        assert_eq!(
            set.records(),
            &[Interaction {
                user: 1,
                item: 1193,
                score: 5.0,
                timestamp: 978300760
            }]
        );
        assert_eq!(cat.genres_of(1).unwrap().len(), 3);
        assert_eq!(cat.genres(), ["Animation", "Children's", "Comedy", "Drama"]);
    }

    #[test]
    fn empty_ratings_file_gives_empty_set() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_tmp(&dir, "ratings.dat", "");
        let m = write_tmp(&dir, "movies.dat", "1::A::Drama\n");
        let (set, _) = load_movielens(&r, &m).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_tmp(&dir, "ratings.dat", "1::2::3::4\n1::x::3::4\n");
        let m = write_tmp(&dir, "movies.dat", "2::A::Drama\n");
        match load_movielens(&r, &m) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_genres_token_gives_empty_set_and_unknown_items_are_kept() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_tmp(&dir, "ratings.dat", "1::7::3::0\n1::99::4::0\n");
        let m = write_tmp(&dir, "movies.dat", "7::Untitled (2000)::(no genres listed)\n");
        let (set, cat) = load_movielens(&r, &m).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(cat.genres_of(7), Some(&[][..]));
        assert_eq!(cat.genres_of(99), None);
    }

    #[test]
    fn csv_loading_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = CsvSchema {
            user: "uid".into(),
            item: "iid".into(),
            score: "rating".into(),
            timestamp: None,
            scale: ScoreScale::TEN,
            delimiter: ',',
        };
        let ok = write_tmp(&dir, "a.csv", "uid,iid,rating\n1,1,8\n1,2,3\n2,1,10\n");
        assert_eq!(load_csv(&ok, &schema).unwrap().len(), 3);

        let bad = write_tmp(&dir, "b.csv", "uid,iid,rating\n1,1,8\n1,2,abc\n");
        match load_csv(&bad, &schema) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let dup = write_tmp(&dir, "c.csv", "uid,iid,rating\n1,1,8\n1,1,3\n");
        match load_csv(&dup, &schema) {
            Err(Error::DuplicatePairs(p)) => assert_eq!(p, vec![(1, 1)]),
            other => panic!("unexpected {other:?}"),
        }

        let missing = write_tmp(&dir, "d.csv", "uid,item,rating\n1,1,8\n");
        assert!(matches!(load_csv(&missing, &schema), Err(Error::Config(_))));
    }

    #[test]
    fn preprocess_drops_short_users_and_genreless_items() {
        let mut items: BTreeMap<ItemId, Vec<&str>> =
            BTreeMap::from([(2, vec![]), (4, vec!["Horror"])]);
        let mut recs = Vec::new();
        for i in 10..60 {
            items.insert(i, vec!["Drama"]);
            recs.push(rec(1, i, 4.0));
        }
        // genreless item, rated anyway
        recs.push(rec(1, 2, 5.0));
        // user 2 reaches 50 only by counting the genreless item
        for i in 10..59 {
            recs.push(rec(2, i, 3.0));
        }
        recs.push(rec(2, 2, 3.0));
        recs.push(rec(3, 4, 3.0));
        let cat = GenreCatalog::from_names(items);
        let set = InteractionSet::new(recs, ScoreScale::FIVE).unwrap();

        let (clean, ccat) = preprocess(&set, &cat, 50).unwrap();
        assert_eq!(clean.users(), BTreeSet::from([1]));
        assert_eq!(clean.len(), 50);
        assert!(ccat.genres_of(2).is_none());
        // Horror (item 4) only had user 2, so it vanishes from the axis.
        assert_eq!(ccat.genres(), ["Drama"]);
        assert_eq!(ccat.item_count(), 50);

        let (again, again_cat) = preprocess(&clean, &ccat, 50).unwrap();
        assert_eq!(again, clean);
        assert_eq!(again_cat, ccat);
    }

    #[test]
    fn preprocess_can_eliminate_everything() {
        let cat = GenreCatalog::from_names(BTreeMap::from([(1, vec!["Drama"])]));
        let set = InteractionSet::new(vec![rec(1, 1, 3.0)], ScoreScale::FIVE).unwrap();
        assert!(matches!(preprocess(&set, &cat, 50), Err(Error::EmptyDataset)));
    }

    #[test]
    fn binarize_thresholds() {
        let five = InteractionSet::new(
            vec![rec(1, 1, 4.0), rec(1, 2, 3.9), rec(1, 3, 5.0)],
            ScoreScale::FIVE,
        )
        .unwrap();
        let b: Vec<f64> = binarize(&five).unwrap().records().iter().map(|r| r.score).collect();
        assert_eq!(b, vec![1.0, 0.0, 1.0]);

        let ten = InteractionSet::new(vec![rec(1, 1, 8.0), rec(1, 2, 7.5)], ScoreScale::TEN).unwrap();
        let b = binarize(&ten).unwrap();
        assert_eq!(b.scale(), ScoreScale::BINARY);
        assert_eq!(b.records()[0].score, 1.0);
        assert_eq!(b.records()[1].score, 0.0);

        let odd = InteractionSet::new(vec![rec(1, 1, 2.0)], ScoreScale { min: 0.0, max: 3.0 }).unwrap();
        assert!(matches!(binarize(&odd), Err(Error::UnsupportedScale { .. })));
    }

    #[test]
    fn folds_are_even_and_deterministic() {
        let recs: Vec<_> = (0..50).map(|i| rec(1, i, 3.0)).collect();
        let set = InteractionSet::new(recs, ScoreScale::FIVE).unwrap();
        let a = split_folds(&set, 5, 11).unwrap();
        let b = split_folds(&set, 5, 11).unwrap();
        assert_eq!(a, b);
        let mut sizes = [0usize; 5];
        for i in 0..50 {
            sizes[a.fold_of(1, i).unwrap()] += 1;
        }
        assert_eq!(sizes, [10; 5]);
        let union: usize = (0..5).map(|f| a.split(&set, f).1.len()).sum();
        assert_eq!(union, 50);
    }

    #[test]
    fn folds_reject_short_users() {
        let set = InteractionSet::new(vec![rec(9, 1, 3.0)], ScoreScale::FIVE).unwrap();
        assert!(matches!(
            split_folds(&set, 5, 0),
            Err(Error::TooFewInteractions { user: 9, .. })
        ));
    }
}
