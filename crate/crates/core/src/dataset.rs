//! Data ingestion and train/test splitting.
//!
//! Two CSV inputs are understood: a ratings table
//! (`user_id,item_id,rating[,timestamp]`) and an item catalog
//! (`item_id,title,features` with `|`-separated feature tokens).
//! From these the module derives the user-level train/test partition and,
//! per test user, the chronological profile/look-ahead split that drives
//! the simulated dialogues.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, shuffle};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Opaque user identifier.
    UserId
);
id_type!(
    /// Opaque item identifier.
    ItemId
);
id_type!(
    /// Opaque feature identifier (genre, actor, tag, ...).
    FeatureId
);

/// Declared rating scale `[min, max]`; never inferred from data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || min >= max {
            return Err(Error::validation(format!(
                "invalid rating scale [{min}, {max}]: need finite min < max"
            )));
        }
        Ok(RatingScale { min, max })
    }

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.min && value <= self.max
    }

    /// Map a rating onto `[0, 1]`.
    pub fn normalize(&self, value: f64) -> f64 {
        (value - self.min) / (self.max - self.min)
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { min: 1.0, max: 5.0 }
    }
}

impl TryFrom<[f64; 2]> for RatingScale {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        RatingScale::new(v[0], v[1])
    }
}

impl From<RatingScale> for [f64; 2] {
    fn from(s: RatingScale) -> [f64; 2] {
        [s.min, s.max]
    }
}

/// One user-item rating. `timestamp` is an optional monotone tie-breaker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user_id: UserId,
    pub item_id: ItemId,
    pub value: f64,
    pub timestamp: Option<i64>,
}

/// Catalog item with a non-empty feature set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: ItemId,
    pub title: String,
    pub features: BTreeSet<FeatureId>,
}

/// All items known to the experiment, plus the union of their features.
#[derive(Clone, Debug, Default)]
pub struct ItemCatalog {
    items: BTreeMap<ItemId, Item>,
    feature_universe: BTreeSet<FeatureId>,
}

impl ItemCatalog {
    /// Build a catalog, rejecting duplicate ids and empty feature sets.
    pub fn from_items(items: impl IntoIterator<Item = Item>) -> Result<Self> {
        let mut catalog = ItemCatalog::default();
        for item in items {
            if item.features.is_empty() {
                return Err(Error::validation(format!(
                    "item '{}' has an empty feature set",
                    item.item_id
                )));
            }
            catalog
                .feature_universe
                .extend(item.features.iter().cloned());
            if let Some(prev) = catalog.items.insert(item.item_id.clone(), item) {
                return Err(Error::validation(format!(
                    "duplicate item id '{}'",
                    prev.item_id
                )));
            }
        }
        Ok(catalog)
    }

    pub fn get(&self, id: &ItemId) -> Option<&Item> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.items.contains_key(id)
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.items.values()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn feature_universe(&self) -> &BTreeSet<FeatureId> {
        &self.feature_universe
    }

    pub fn has_feature(&self, feature: &FeatureId) -> bool {
        self.feature_universe.contains(feature)
    }
}

/// Parsed ratings table; `(user_id, item_id)` pairs are unique.
#[derive(Clone, Debug)]
pub struct RatingTable {
    ratings: Vec<Rating>,
    scale: RatingScale,
}

impl RatingTable {
    pub fn new(ratings: Vec<Rating>, scale: RatingScale) -> Result<Self> {
        let mut seen: BTreeSet<(&UserId, &ItemId)> = BTreeSet::new();
        for r in &ratings {
            if !scale.contains(r.value) {
                return Err(Error::validation(format!(
                    "rating {} for ({}, {}) outside scale [{}, {}]",
                    r.value, r.user_id, r.item_id, scale.min, scale.max
                )));
            }
            if !seen.insert((&r.user_id, &r.item_id)) {
                return Err(Error::validation(format!(
                    "duplicate rating for ({}, {})",
                    r.user_id, r.item_id
                )));
            }
        }
        Ok(RatingTable { ratings, scale })
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn users(&self) -> BTreeSet<UserId> {
        self.ratings.iter().map(|r| r.user_id.clone()).collect()
    }

    /// Group ratings by user, preserving input order within each group.
    pub fn by_user(&self) -> BTreeMap<UserId, Vec<Rating>> {
        let mut map: BTreeMap<UserId, Vec<Rating>> = BTreeMap::new();
        for r in &self.ratings {
            map.entry(r.user_id.clone()).or_default().push(r.clone());
        }
        map
    }
}

/// Parse a ratings CSV with header `user_id,item_id,rating[,timestamp]`.
pub fn load_ratings(source: impl Read, scale: RatingScale) -> Result<RatingTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(str::to_owned)
        .collect::<Vec<_>>();
    let with_timestamp = match headers.as_slice() {
        [u, i, r] if u == "user_id" && i == "item_id" && r == "rating" => false,
        [u, i, r, t] if u == "user_id" && i == "item_id" && r == "rating" && t == "timestamp" => {
            true
        }
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "expected header 'user_id,item_id,rating[,timestamp]', got '{}'",
                    headers.join(",")
                ),
            })
        }
    };

    let mut ratings = Vec::new();
    let mut seen: BTreeSet<(UserId, ItemId)> = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let expected = if with_timestamp { 4 } else { 3 };
        if record.len() != expected {
            return Err(Error::Parse {
                line,
                msg: format!("expected {expected} fields, got {}", record.len()),
            });
        }
        let user_id = non_empty_id(&record[0], "user_id", line)?;
        let item_id = non_empty_id(&record[1], "item_id", line)?;
        let value: f64 = record[2].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid rating '{}'", &record[2]),
        })?;
        if !scale.contains(value) {
            return Err(Error::validation(format!(
                "line {line}: rating {value} outside scale [{}, {}]",
                scale.min, scale.max
            )));
        }
        let timestamp = if with_timestamp {
            Some(record[3].parse::<i64>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid timestamp '{}'", &record[3]),
            })?)
        } else {
            None
        };
        let user_id = UserId(user_id);
        let item_id = ItemId(item_id);
        if !seen.insert((user_id.clone(), item_id.clone())) {
            return Err(Error::validation(format!(
                "line {line}: duplicate rating for ({user_id}, {item_id})"
            )));
        }
        ratings.push(Rating {
            user_id,
            item_id,
            value,
            timestamp,
        });
    }
    Ok(RatingTable { ratings, scale })
}

/// Parse an items CSV with header `item_id,title,features`.
pub fn load_items(source: impl Read) -> Result<ItemCatalog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(str::to_owned)
        .collect::<Vec<_>>();
    if headers != ["item_id", "title", "features"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "expected header 'item_id,title,features', got '{}'",
                headers.join(",")
            ),
        });
    }

    let mut items = BTreeMap::new();
    let mut universe = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let item_id = ItemId(non_empty_id(&record[0], "item_id", line)?);
        let title = record[1].to_owned();
        let mut features = BTreeSet::new();
        for token in record[2].split('|') {
            let token = token.trim();
            if token.is_empty() {
                return Err(Error::validation(format!(
                    "line {line}: item '{item_id}' has an empty feature token"
                )));
            }
            features.insert(FeatureId(token.to_owned()));
        }
        if features.is_empty() {
            return Err(Error::validation(format!(
                "line {line}: item '{item_id}' has an empty feature set"
            )));
        }
        universe.extend(features.iter().cloned());
        let id = item_id.clone();
        if items
            .insert(
                id,
                Item {
                    item_id: item_id.clone(),
                    title,
                    features,
                },
            )
            .is_some()
        {
            return Err(Error::validation(format!(
                "line {line}: duplicate item id '{item_id}'"
            )));
        }
    }
    Ok(ItemCatalog {
        items,
        feature_universe: universe,
    })
}

fn non_empty_id(raw: &str, field: &str, line: u64) -> Result<String> {
    if raw.is_empty() {
        return Err(Error::Parse {
            line,
            msg: format!("empty {field}"),
        });
    }
    Ok(raw.to_owned())
}

fn csv_error(e: &csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// A test user ready for simulation: the profile items seed the learnt
/// profile, the look-ahead items stand in for the user's future choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUser {
    pub user_id: UserId,
    /// Profile items with their original rating values.
    pub profile_ratings: BTreeMap<ItemId, f64>,
    /// Mean rating over the profile items; threshold between liked and
    /// disliked items for this user.
    pub avg_rtg: f64,
    /// Held-out items with their original rating values.
    pub lookahead: BTreeMap<ItemId, f64>,
}

impl SimulatedUser {
    /// Profile items rated at or above the user's average.
    pub fn trainset_pos(&self) -> BTreeSet<&ItemId> {
        self.profile_ratings
            .iter()
            .filter(|(_, v)| **v >= self.avg_rtg)
            .map(|(id, _)| id)
            .collect()
    }

    /// Profile items rated below the user's average.
    pub fn trainset_neg(&self) -> BTreeSet<&ItemId> {
        self.profile_ratings
            .iter()
            .filter(|(_, v)| **v < self.avg_rtg)
            .map(|(id, _)| id)
            .collect()
    }

    /// Look-ahead items rated at or above the user's average.
    pub fn lookahead_positives(&self) -> BTreeSet<&ItemId> {
        self.lookahead
            .iter()
            .filter(|(_, v)| **v >= self.avg_rtg)
            .map(|(id, _)| id)
            .collect()
    }
}

/// Minimum rating count required before a user is simulated.
pub const MIN_HISTORY: usize = 5;

/// Partition all users into train/test by a seeded uniform shuffle.
///
/// `|train| = round(train_fraction * |users|)`; equal seeds give equal
/// partitions.
pub fn split_users(
    table: &RatingTable,
    train_fraction: f64,
    seed: u64,
) -> Result<(BTreeSet<UserId>, BTreeSet<UserId>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut users: Vec<UserId> = table.users().into_iter().collect();
    if users.len() < 2 {
        return Err(Error::validation(format!(
            "need at least 2 distinct users, got {}",
            users.len()
        )));
    }
    let mut rng = derive_rng(seed, "user-split", "");
    shuffle(&mut rng, &mut users);
    let train_count = (train_fraction * users.len() as f64).round() as usize;
    let test: BTreeSet<UserId> = users.split_off(train_count).into_iter().collect();
    let train: BTreeSet<UserId> = users.into_iter().collect();
    Ok((train, test))
}

/// Sort one user's ratings into canonical history order: by timestamp
/// ascending with ties broken by item id, or stable input order when any
/// timestamp is missing.
pub fn order_history(ratings: &mut [Rating]) {
    if ratings.iter().all(|r| r.timestamp.is_some()) {
        ratings.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
    }
}

/// Split one user's history into profile and look-ahead.
///
/// The first `ceil(profile_fraction * n)` ratings (canonical history order)
/// form the profile; the remainder becomes the look-ahead set.
pub fn split_user_history(
    mut user_ratings: Vec<Rating>,
    profile_fraction: f64,
) -> Result<SimulatedUser> {
    if !(profile_fraction > 0.0 && profile_fraction < 1.0) {
        return Err(Error::validation(format!(
            "profile fraction {profile_fraction} outside (0, 1)"
        )));
    }
    if user_ratings.len() < MIN_HISTORY {
        return Err(Error::validation(format!(
            "user has {} ratings, need at least {MIN_HISTORY}",
            user_ratings.len()
        )));
    }
    let user_id = user_ratings[0].user_id.clone();
    debug_assert!(user_ratings.iter().all(|r| r.user_id == user_id));

    order_history(&mut user_ratings);
    let profile_len = (profile_fraction * user_ratings.len() as f64).ceil() as usize;
    let lookahead: BTreeMap<ItemId, f64> = user_ratings
        .split_off(profile_len)
        .into_iter()
        .map(|r| (r.item_id, r.value))
        .collect();
    let avg_rtg = user_ratings.iter().map(|r| r.value).sum::<f64>() / user_ratings.len() as f64;
    let profile_ratings: BTreeMap<ItemId, f64> = user_ratings
        .into_iter()
        .map(|r| (r.item_id, r.value))
        .collect();

    Ok(SimulatedUser {
        user_id,
        profile_ratings,
        avg_rtg,
        lookahead,
    })
}
