//! Synthetic dataset generation with planted preference structure.
//!
//! Each user likes a small random feature subset; an item's rating is the
//! rating-scale position of the overlap between the item's features and
//! the user's liked set, optionally perturbed by one rating step of
//! noise. Tests rely on this ground truth: a recommender that learns
//! feature weights must beat a random one on this data.

use std::collections::{BTreeMap, BTreeSet};

use crate::dataset::{
    FeatureId, Item, ItemCatalog, ItemId, Rating, RatingScale, RatingTable, UserId,
};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, shuffle, uniform_index, unit_f64};

/// Generator parameters; ranges are inclusive.
#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub features: usize,
    pub seed: u64,
    pub ratings_per_user: (usize, usize),
    pub features_per_item: (usize, usize),
    pub liked_features: (usize, usize),
    /// Probability that a rating moves one step off its planted value.
    pub noise: f64,
    pub scale: RatingScale,
}

impl SynthConfig {
    pub fn new(users: usize, items: usize, features: usize, seed: u64) -> Self {
        SynthConfig {
            users,
            items,
            features,
            seed,
            ratings_per_user: (20, 40),
            features_per_item: (1, 3),
            liked_features: (2, 4),
            noise: 0.1,
            scale: RatingScale::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users < 2 {
            return Err(Error::validation("need at least 2 users".to_owned()));
        }
        if self.items == 0 || self.features == 0 {
            return Err(Error::validation(
                "need at least 1 item and 1 feature".to_owned(),
            ));
        }
        for (name, (lo, hi)) in [
            ("ratings_per_user", self.ratings_per_user),
            ("features_per_item", self.features_per_item),
            ("liked_features", self.liked_features),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::validation(format!(
                    "{name} range ({lo}, {hi}) invalid"
                )));
            }
        }
        if self.ratings_per_user.0 > self.items {
            return Err(Error::validation(format!(
                "ratings_per_user minimum {} exceeds item count {}",
                self.ratings_per_user.0, self.items
            )));
        }
        if self.features_per_item.1 > self.features {
            return Err(Error::validation(format!(
                "features_per_item maximum {} exceeds feature count {}",
                self.features_per_item.1, self.features
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::validation(format!(
                "noise {} outside [0, 1]",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Generated dataset plus the planted ground truth.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub ratings: RatingTable,
    pub catalog: ItemCatalog,
    /// Each user's liked feature set (the planted structure).
    pub liked: BTreeMap<UserId, BTreeSet<FeatureId>>,
}

fn padded(prefix: &str, index: usize, count: usize) -> String {
    let width = (count.max(2) - 1).to_string().len();
    format!("{prefix}{index:0width$}")
}

fn draw_range(rng: &mut impl rand_core::RngCore, (lo, hi): (usize, usize)) -> usize {
    lo + uniform_index(rng, hi - lo + 1)
}

fn draw_subset<T: Clone>(rng: &mut impl rand_core::RngCore, pool: &[T], n: usize) -> Vec<T> {
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    shuffle(rng, &mut indices);
    indices.truncate(n.min(pool.len()));
    indices.into_iter().map(|i| pool[i].clone()).collect()
}

/// Generate a dataset; equal configs give equal outputs.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let feature_pool: Vec<FeatureId> = (0..config.features)
        .map(|i| FeatureId(padded("f", i, config.features)))
        .collect();

    let mut rng = derive_rng(config.seed, "synth-items", "");
    let mut items = Vec::with_capacity(config.items);
    for i in 0..config.items {
        let count = draw_range(&mut rng, config.features_per_item);
        let features: BTreeSet<FeatureId> = draw_subset(&mut rng, &feature_pool, count)
            .into_iter()
            .collect();
        items.push(Item {
            item_id: ItemId(padded("i", i, config.items)),
            title: format!("Item {i}"),
            features,
        });
    }
    let catalog = ItemCatalog::from_items(items.clone())?;

    let step = (config.scale.max - config.scale.min)
        / (config.scale.max - config.scale.min).round().max(1.0);
    let mut ratings = Vec::new();
    let mut liked_map = BTreeMap::new();
    for u in 0..config.users {
        let user_id = UserId(padded("u", u, config.users));
        let mut rng = derive_rng(config.seed, "synth-user", user_id.as_str());
        let liked_count = draw_range(&mut rng, config.liked_features);
        let liked: BTreeSet<FeatureId> = draw_subset(&mut rng, &feature_pool, liked_count)
            .into_iter()
            .collect();

        let n_ratings = draw_range(&mut rng, config.ratings_per_user).min(config.items);
        let rated_items = draw_subset(&mut rng, &items, n_ratings);
        for (position, item) in rated_items.into_iter().enumerate() {
            let overlap = item.features.intersection(&liked).count();
            let frac = overlap as f64 / item.features.len() as f64;
            let mut value =
                (config.scale.min + frac * (config.scale.max - config.scale.min)).round();
            if unit_f64(&mut rng) < config.noise {
                let delta = if uniform_index(&mut rng, 2) == 0 {
                    -step
                } else {
                    step
                };
                value = (value + delta).clamp(config.scale.min, config.scale.max);
            }
            ratings.push(Rating {
                user_id: user_id.clone(),
                item_id: item.item_id,
                value,
                timestamp: Some(position as i64),
            });
        }
        liked_map.insert(user_id, liked);
    }

    Ok(SynthData {
        ratings: RatingTable::new(ratings, config.scale)?,
        catalog,
        liked: liked_map,
    })
}

/// Serialize a rating table to the documented CSV format.
pub fn ratings_csv(table: &RatingTable) -> String {
    let mut out = String::from("user_id,item_id,rating,timestamp\n");
    for r in table.ratings() {
        let ts = r.timestamp.map_or_else(String::new, |t| t.to_string());
        out.push_str(&format!("{},{},{},{}\n", r.user_id, r.item_id, r.value, ts));
    }
    out
}

/// Serialize a catalog to the documented CSV format.
pub fn items_csv(catalog: &ItemCatalog) -> String {
    let mut out = String::from("item_id,title,features\n");
    for item in catalog.items() {
        let features: Vec<&str> = item.features.iter().map(FeatureId::as_str).collect();
        // titles are generator-controlled and contain no CSV metacharacters
        out.push_str(&format!(
            "{},{},{}\n",
            item.item_id,
            item.title,
            features.join("|")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_items, load_ratings};

    fn config() -> SynthConfig {
        let mut c = SynthConfig::new(12, 60, 8, 42);
        c.ratings_per_user = (10, 20);
        c
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&config()).unwrap();
        let b = generate(&config()).unwrap();
        assert_eq!(a.ratings.ratings(), b.ratings.ratings());
        assert_eq!(a.liked, b.liked);
        let ids = |c: &ItemCatalog| c.items().map(|i| i.item_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.catalog), ids(&b.catalog));
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&config()).unwrap();
        let mut other = config();
        other.seed = 43;
        let b = generate(&other).unwrap();
        assert_ne!(a.ratings.ratings(), b.ratings.ratings());
    }

    #[test]
    fn shape_matches_config() {
        let cfg = config();
        let data = generate(&cfg).unwrap();
        assert_eq!(data.catalog.len(), cfg.items);
        assert!(data.catalog.feature_universe().len() <= cfg.features);
        let by_user = data.ratings.by_user();
        assert_eq!(by_user.len(), cfg.users);
        for ratings in by_user.values() {
            assert!(ratings.len() >= cfg.ratings_per_user.0);
            assert!(ratings.len() <= cfg.ratings_per_user.1);
        }
        for item in data.catalog.items() {
            assert!(item.features.len() >= cfg.features_per_item.0);
            assert!(item.features.len() <= cfg.features_per_item.1);
        }
        for r in data.ratings.ratings() {
            assert!(cfg.scale.contains(r.value));
            assert_eq!(r.value, r.value.round(), "ratings are integer-valued");
        }
    }

    #[test]
    fn noiseless_ratings_follow_overlap_exactly() {
        let mut cfg = config();
        cfg.noise = 0.0;
        let data = generate(&cfg).unwrap();
        for r in data.ratings.ratings() {
            let item = data.catalog.get(&r.item_id).unwrap();
            let liked = &data.liked[&r.user_id];
            let overlap = item.features.intersection(liked).count();
            let frac = overlap as f64 / item.features.len() as f64;
            let expected = (cfg.scale.min + frac * (cfg.scale.max - cfg.scale.min)).round();
            assert_eq!(r.value, expected);
        }
    }

    #[test]
    fn ids_sort_numerically() {
        let data = generate(&SynthConfig::new(15, 105, 4, 1)).unwrap();
        let ids: Vec<ItemId> = data.catalog.items().map(|i| i.item_id.clone()).collect();
        for (i, id) in ids.iter().enumerate() {
            assert_eq!(id.as_str(), format!("i{i:03}"));
        }
        let users: Vec<UserId> = data.liked.keys().cloned().collect();
        assert_eq!(users[0].as_str(), "u00");
        assert_eq!(users[14].as_str(), "u14");
    }

    #[test]
    fn csv_round_trips() {
        let cfg = config();
        let data = generate(&cfg).unwrap();
        let table = load_ratings(ratings_csv(&data.ratings).as_bytes(), cfg.scale).unwrap();
        assert_eq!(table.ratings(), data.ratings.ratings());
        let catalog = load_items(items_csv(&data.catalog).as_bytes()).unwrap();
        assert_eq!(catalog.len(), data.catalog.len());
        for item in data.catalog.items() {
            assert_eq!(catalog.get(&item.item_id).unwrap(), item);
        }
    }

    #[test]
    fn validate_rejects_bad_ranges() {
        let mut cfg = config();
        cfg.ratings_per_user = (0, 5);
        assert!(generate(&cfg).is_err());
        let mut cfg = config();
        cfg.ratings_per_user = (100, 200); // exceeds 60 items
        assert!(generate(&cfg).is_err());
        let mut cfg = config();
        cfg.features_per_item = (1, 99);
        assert!(generate(&cfg).is_err());
        let mut cfg = config();
        cfg.noise = 1.5;
        assert!(generate(&cfg).is_err());
    }
}
