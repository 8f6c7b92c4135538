//! Small synthetic MovieLens-style dataset for smoke runs and tests.
//!
//! Users fall into taste groups that favour two genres each; they rate
//! favoured items more often and higher.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{GenreCatalog, Interaction, InteractionSet, ItemId, ScoreScale};
use crate::seed;

pub const MINI_GENRES: [&str; 6] = ["Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi"];

#[derive(Debug, Clone, PartialEq)]
pub struct MiniSpec {
    pub users: usize,
    pub items: usize,
    /// Taste groups; group `g` favours genres `2g` and `2g + 1` (mod 6).
    pub groups: usize,
    pub min_ratings: usize,
    pub max_ratings: usize,
    /// Chance that an item carries a second genre.
    pub second_genre: f64,
}

impl Default for MiniSpec {
    fn default() -> Self {
        Self {
            users: 60,
            items: 200,
            groups: 3,
            min_ratings: 50,
            max_ratings: 70,
            second_genre: 0.4,
        }
    }
}

/// Generates ratings on the 1-5 scale (stored on a 0-5 scale) and the genre
/// catalog. User and item ids start at 1; user `u` belongs to group
/// `(u - 1) % groups`.
pub fn mini_dataset(spec: &MiniSpec, seed: u64) -> Result<(InteractionSet, GenreCatalog)> {
    if spec.min_ratings > spec.max_ratings || spec.max_ratings > spec.items || spec.groups == 0 {
        return Err(Error::InvalidInput(format!("inconsistent mini dataset spec {spec:?}")));
    }
    let g = MINI_GENRES.len();
    let mut rng = seed::rng(seed, &[0]);
    let item_genres: Vec<Vec<usize>> = (0..spec.items)
        .map(|_| {
            let first = rng.random_range(0..g);
            let mut genres = vec![first];
            if rng.random_bool(spec.second_genre) {
                let second = (first + rng.random_range(1..g)) % g;
                genres.push(second);
            }
            genres
        })
        .collect();

    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut records = Vec::new();
    for u in 0..spec.users {
        let group = u % spec.groups;
        let favoured = [(2 * group) % g, (2 * group + 1) % g];
        let affinity: Vec<f64> = item_genres
            .iter()
            .map(|gs| gs.iter().filter(|x| favoured.contains(x)).count() as f64 / gs.len() as f64)
            .collect();
        let mut rng = seed::rng(seed, &[1, u as u64]);
        let count = rng.random_range(spec.min_ratings..=spec.max_ratings);
        let bias = rng.random_range(-0.5..=0.5);
        let chosen = index::sample_weighted(&mut rng, spec.items, |i| 1.0 + 4.0 * affinity[i], count)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut chosen: Vec<usize> = chosen.into_iter().collect();
        chosen.sort_unstable();
        for (k, i) in chosen.into_iter().enumerate() {
            let raw = 2.0 + 2.5 * affinity[i] + bias + noise.sample(&mut rng);
            records.push(Interaction {
                user: u as u64 + 1,
                item: i as ItemId + 1,
                score: raw.round().clamp(1.0, 5.0),
                timestamp: 978_300_000 + (u * 1000 + k) as i64,
            });
        }
    }

    let catalog = GenreCatalog::from_names(
        item_genres
            .iter()
            .enumerate()
            .map(|(i, gs)| (i as ItemId + 1, gs.iter().map(|&x| MINI_GENRES[x]).collect::<Vec<_>>()))
            .collect::<BTreeMap<_, _>>(),
    );
    Ok((InteractionSet::new(records, ScoreScale::FIVE)?, catalog))
}

/// Writes `ratings.dat` and `movies.dat` in MovieLens `::` format.
pub fn write_movielens(dir: impl AsRef<Path>, set: &InteractionSet, catalog: &GenreCatalog) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut ratings = String::new();
    for r in set.records() {
        let _ = writeln!(ratings, "{}::{}::{}::{}", r.user, r.item, r.score, r.timestamp);
    }
    let mut movies = String::new();
    for item in catalog.items() {
        let genres = catalog.genre_names_of(item).unwrap_or_default().join("|");
        let _ = writeln!(movies, "{item}::Synthetic Movie {item} (2000)::{genres}");
    }
    let rp = dir.join("ratings.dat");
    let mp = dir.join("movies.dat");
    fs::write(&rp, ratings).map_err(|e| Error::io(&rp, e))?;
    fs::write(&mp, movies).map_err(|e| Error::io(&mp, e))?;
    Ok((rp, mp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_movielens;

    #[test]
    fn shape_matches_spec() {
        let spec = MiniSpec::default();
        let (set, catalog) = mini_dataset(&spec, 7).unwrap();
        let by_user = set.by_user();
        assert_eq!(by_user.len(), 60);
        assert!(by_user.values().all(|v| (50..=70).contains(&v.len())));
        assert_eq!(catalog.genre_count(), 6);
        assert_eq!(catalog.item_count(), 200);
        assert!(set.records().iter().all(|r| (1.0..=5.0).contains(&r.score) && r.score.fract() == 0.0));
    }

    #[test]
    fn groups_rate_favoured_genres_higher() {
        let (set, catalog) = mini_dataset(&MiniSpec::default(), 3).unwrap();
        let action = catalog.genres().iter().position(|g| g == "Action").unwrap();
        let (mut fav, mut other) = (Vec::new(), Vec::new());
        for r in set.records() {
            let only_action = catalog.genres_of(r.item).unwrap() == [action];
            if !only_action {
                continue;
            }
            // Group 0 favours Action.
            if (r.user - 1) % 3 == 0 { fav.push(r.score) } else { other.push(r.score) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&fav) > mean(&other) + 1.0);
    }

    #[test]
    fn deterministic_and_roundtrips_through_movielens_files() {
        let spec = MiniSpec::default();
        let a = mini_dataset(&spec, 11).unwrap();
        let b = mini_dataset(&spec, 11).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let (rp, mp) = write_movielens(dir.path(), &a.0, &a.1).unwrap();
        let back = load_movielens(rp, mp).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rejects_impossible_spec() {
        let spec = MiniSpec {
            max_ratings: 300,
            ..Default::default()
        };
        assert!(mini_dataset(&spec, 0).is_err());
    }
}
