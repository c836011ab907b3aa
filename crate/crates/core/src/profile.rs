//! Learnt user profiles over item features.
//!
//! A profile maps each feature to the running mean of the normalized
//! ratings of the items that carry it. Storing `(sum, count)` per feature
//! makes incremental updates exactly equal to a batch rebuild, which the
//! tests rely on. Summary statistics (min/avg/max weight) are recomputed
//! after every mutation; "anchoring" pins a feature the user explicitly
//! liked or disliked to the pre-call max or min weight.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureId, ItemCatalog, ItemId, RatingScale};
use crate::error::{Error, Result};

/// Running mean of normalized ratings for one feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub sum: f64,
    pub count: u64,
}

impl FeatureStat {
    pub fn weight(&self) -> f64 {
        self.sum / self.count as f64
    }
}

/// Feature-weight profile for one user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    stats: BTreeMap<FeatureId, FeatureStat>,
    rated_items: BTreeSet<ItemId>,
    min_w: f64,
    avg_w: f64,
    max_w: f64,
}

impl Default for UserProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl UserProfile {
    pub fn new() -> Self {
        UserProfile {
            stats: BTreeMap::new(),
            rated_items: BTreeSet::new(),
            min_w: 0.0,
            avg_w: 0.0,
            max_w: 0.0,
        }
    }

    /// Build a profile from raw rating values, normalizing via `scale`.
    pub fn build(
        ratings: &BTreeMap<ItemId, f64>,
        catalog: &ItemCatalog,
        scale: RatingScale,
    ) -> Result<Self> {
        let mut profile = UserProfile::new();
        let relevance: BTreeMap<ItemId, f64> = ratings
            .iter()
            .map(|(id, v)| (id.clone(), scale.normalize(*v)))
            .collect();
        profile.update_with_items(&relevance, catalog)?;
        Ok(profile)
    }

    /// Fold already-normalized `[0, 1]` relevance values into the profile.
    ///
    /// Each item may be folded at most once over the profile's lifetime.
    pub fn update_with_items(
        &mut self,
        relevance: &BTreeMap<ItemId, f64>,
        catalog: &ItemCatalog,
    ) -> Result<()> {
        for (item_id, value) in relevance {
            if !(0.0..=1.0).contains(value) {
                return Err(Error::validation(format!(
                    "relevance {value} for '{item_id}' outside [0, 1]"
                )));
            }
            if self.rated_items.contains(item_id) {
                return Err(Error::validation(format!(
                    "item '{item_id}' already folded into profile"
                )));
            }
            if !catalog.contains(item_id) {
                return Err(Error::validation(format!(
                    "item '{item_id}' missing from catalog"
                )));
            }
        }
        for (item_id, value) in relevance {
            let item = catalog.get(item_id).expect("validated above");
            for feature in &item.features {
                let stat = self
                    .stats
                    .entry(feature.clone())
                    .or_insert(FeatureStat { sum: 0.0, count: 0 });
                stat.sum += value;
                stat.count += 1;
            }
            self.rated_items.insert(item_id.clone());
        }
        self.recompute_summary();
        Ok(())
    }

    /// Pin explicitly liked features to the current max weight and disliked
    /// ones to the current min weight.
    ///
    /// Both anchors use the summary snapshot taken before any change in
    /// this call; anchored features restart their running mean at count 1.
    pub fn anchor_features(
        &mut self,
        positive: &[FeatureId],
        negative: &[FeatureId],
        universe: &BTreeSet<FeatureId>,
    ) -> Result<()> {
        for feature in positive.iter().chain(negative) {
            if !universe.contains(feature) {
                return Err(Error::validation(format!("unknown feature '{feature}'")));
            }
        }
        for feature in positive {
            if negative.contains(feature) {
                return Err(Error::validation(format!(
                    "feature '{feature}' anchored both positive and negative"
                )));
            }
        }
        let (lo, hi) = (self.min_w, self.max_w);
        for feature in positive {
            self.stats
                .insert(feature.clone(), FeatureStat { sum: hi, count: 1 });
        }
        for feature in negative {
            self.stats
                .insert(feature.clone(), FeatureStat { sum: lo, count: 1 });
        }
        self.recompute_summary();
        Ok(())
    }

    fn recompute_summary(&mut self) {
        if self.stats.is_empty() {
            self.min_w = 0.0;
            self.avg_w = 0.0;
            self.max_w = 0.0;
            return;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for stat in self.stats.values() {
            let w = stat.weight();
            min = min.min(w);
            max = max.max(w);
            sum += w;
        }
        self.min_w = min;
        self.max_w = max;
        self.avg_w = sum / self.stats.len() as f64;
    }

    pub fn weight(&self, feature: &FeatureId) -> Option<f64> {
        self.stats.get(feature).map(FeatureStat::weight)
    }

    /// Weight of `feature`, or the profile average when unseen.
    pub fn weight_or_default(&self, feature: &FeatureId) -> f64 {
        self.weight(feature).unwrap_or(self.avg_w)
    }

    pub fn min_weight(&self) -> f64 {
        self.min_w
    }

    pub fn avg_weight(&self) -> f64 {
        self.avg_w
    }

    pub fn max_weight(&self) -> f64 {
        self.max_w
    }

    /// Features and weights in id order.
    pub fn features(&self) -> impl Iterator<Item = (&FeatureId, f64)> {
        self.stats.iter().map(|(f, s)| (f, s.weight()))
    }

    pub fn contains_feature(&self, feature: &FeatureId) -> bool {
        self.stats.contains_key(feature)
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn has_rated(&self, item: &ItemId) -> bool {
        self.rated_items.contains(item)
    }

    pub fn rated_items(&self) -> &BTreeSet<ItemId> {
        &self.rated_items
    }

    /// Split features at the average weight.
    ///
    /// Features strictly below average are negative, the rest positive.
    /// Negative features come back sorted by ascending weight, positive by
    /// descending weight; ties break on ascending feature id.
    pub fn classify_features(&self) -> FeaturePartition {
        let mut pos: Vec<(FeatureId, f64)> = Vec::new();
        let mut neg: Vec<(FeatureId, f64)> = Vec::new();
        for (feature, stat) in &self.stats {
            let w = stat.weight();
            if w < self.avg_w {
                neg.push((feature.clone(), w));
            } else {
                pos.push((feature.clone(), w));
            }
        }
        // iteration was id-ascending, so the stable sorts leave ties in
        // id order
        neg.sort_by(|a, b| a.1.total_cmp(&b.1));
        pos.sort_by(|a, b| b.1.total_cmp(&a.1));
        FeaturePartition { pos, neg }
    }
}

/// Result of [`UserProfile::classify_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePartition {
    /// Weight >= average, descending weight, ties id-ascending.
    pub pos: Vec<(FeatureId, f64)>,
    /// Weight < average, ascending weight, ties id-ascending.
    pub neg: Vec<(FeatureId, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Item;
    use proptest::prelude::*;

    fn item(id: &str, features: &[&str]) -> Item {
        Item {
            item_id: id.into(),
            title: id.to_uppercase(),
            features: features.iter().map(|f| (*f).into()).collect(),
        }
    }

    fn catalog(items: &[Item]) -> ItemCatalog {
        ItemCatalog::from_items(items.to_vec()).unwrap()
    }

    fn scale() -> RatingScale {
        RatingScale::new(1.0, 5.0).unwrap()
    }

    #[test]
    fn build_weights_are_mean_normalized_ratings() {
        let cat = catalog(&[item("i1", &["A", "B"]), item("i2", &["B"])]);
        let ratings = [("i1".into(), 5.0), ("i2".into(), 1.0)].into();
        let profile = UserProfile::build(&ratings, &cat, scale()).unwrap();
        // A: 1.0 from i1 alone; B: (1.0 + 0.0) / 2
        assert_eq!(profile.weight(&"A".into()), Some(1.0));
        assert_eq!(profile.weight(&"B".into()), Some(0.5));
        assert_eq!(profile.min_weight(), 0.5);
        assert_eq!(profile.avg_weight(), 0.75);
        assert_eq!(profile.max_weight(), 1.0);
    }

    #[test]
    fn incremental_update_matches_batch_build() {
        let cat = catalog(&[item("i1", &["A", "B"]), item("i2", &["B"])]);
        let batch = UserProfile::build(
            &[("i1".into(), 5.0), ("i2".into(), 1.0)].into(),
            &cat,
            scale(),
        )
        .unwrap();

        let mut incremental =
            UserProfile::build(&[("i1".into(), 5.0)].into(), &cat, scale()).unwrap();
        incremental
            .update_with_items(&[("i2".into(), 0.0)].into(), &cat)
            .unwrap();
        assert_eq!(incremental, batch);
    }

    #[test]
    fn update_rejects_refolding_an_item() {
        let cat = catalog(&[item("i1", &["A"])]);
        let mut profile = UserProfile::build(&[("i1".into(), 5.0)].into(), &cat, scale()).unwrap();
        let err = profile
            .update_with_items(&[("i1".into(), 0.0)].into(), &cat)
            .unwrap_err();
        assert!(err.to_string().contains("already"), "{err}");
    }

    #[test]
    fn update_rejects_unknown_item_and_bad_relevance() {
        let cat = catalog(&[item("i1", &["A"])]);
        let mut profile = UserProfile::new();
        assert!(profile
            .update_with_items(&[("ghost".into(), 0.5)].into(), &cat)
            .is_err());
        assert!(profile
            .update_with_items(&[("i1".into(), 1.5)].into(), &cat)
            .is_err());
        // failed calls leave the profile untouched
        assert!(profile.is_empty());
    }

    #[test]
    fn anchor_positive_uses_pre_call_max() {
        let cat = catalog(&[item("i1", &["A", "B"]), item("i2", &["B"])]);
        let mut profile = UserProfile::build(
            &[("i1".into(), 5.0), ("i2".into(), 1.0)].into(),
            &cat,
            scale(),
        )
        .unwrap();
        profile
            .anchor_features(&["B".into()], &[], cat.feature_universe())
            .unwrap();
        assert_eq!(profile.weight(&"B".into()), Some(1.0));
        assert_eq!(profile.avg_weight(), 1.0);
    }

    #[test]
    fn anchor_inserts_unseen_feature() {
        let cat = catalog(&[
            item("i1", &["A", "B"]),
            item("i2", &["B"]),
            item("i3", &["C"]),
        ]);
        let mut profile = UserProfile::build(
            &[("i1".into(), 5.0), ("i2".into(), 1.0)].into(),
            &cat,
            scale(),
        )
        .unwrap();
        profile
            .anchor_features(&["C".into()], &[], cat.feature_universe())
            .unwrap();
        assert_eq!(profile.weight(&"C".into()), Some(1.0));
    }

    #[test]
    fn anchor_negative_uses_pre_call_min() {
        let cat = catalog(&[item("i1", &["A", "B"]), item("i2", &["B"])]);
        let mut profile = UserProfile::build(
            &[("i1".into(), 5.0), ("i2".into(), 1.0)].into(),
            &cat,
            scale(),
        )
        .unwrap();
        profile
            .anchor_features(&[], &["A".into()], cat.feature_universe())
            .unwrap();
        assert_eq!(profile.weight(&"A".into()), Some(0.5));
    }

    #[test]
    fn anchor_both_lists_shares_one_snapshot() {
        let cat = catalog(&[item("i1", &["A", "B"]), item("i2", &["B"])]);
        let mut profile = UserProfile::build(
            &[("i1".into(), 5.0), ("i2".into(), 1.0)].into(),
            &cat,
            scale(),
        )
        .unwrap();
        // A is the current max (1.0), B the current min (0.5); anchoring
        // A negative and B positive swaps them using the old snapshot
        profile
            .anchor_features(&["B".into()], &["A".into()], cat.feature_universe())
            .unwrap();
        assert_eq!(profile.weight(&"B".into()), Some(1.0));
        assert_eq!(profile.weight(&"A".into()), Some(0.5));
    }

    #[test]
    fn anchor_rejects_unknown_feature_and_conflicts() {
        let cat = catalog(&[item("i1", &["A"])]);
        let mut profile = UserProfile::new();
        assert!(profile
            .anchor_features(&["Z".into()], &[], cat.feature_universe())
            .is_err());
        assert!(profile
            .anchor_features(&["A".into()], &["A".into()], cat.feature_universe())
            .is_err());
    }

    #[test]
    fn classify_splits_at_average_with_id_ties() {
        let cat = catalog(&[item("i1", &["A"]), item("i2", &["C"]), item("i3", &["B"])]);
        let scale = RatingScale::new(0.0, 1.0).unwrap();
        let ratings = [("i1".into(), 0.9), ("i2".into(), 0.1), ("i3".into(), 0.1)].into();
        let profile = UserProfile::build(&ratings, &cat, scale).unwrap();
        let partition = profile.classify_features();
        let ids = |v: &[(FeatureId, f64)]| {
            v.iter()
                .map(|(f, _)| f.as_str().to_owned())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&partition.pos), ["A"]);
        assert_eq!(ids(&partition.neg), ["B", "C"]);
    }

    #[test]
    fn classify_puts_average_weight_in_pos() {
        let cat = catalog(&[item("i1", &["A"]), item("i2", &["B"])]);
        let scale = RatingScale::new(0.0, 1.0).unwrap();
        let profile = UserProfile::build(
            &[("i1".into(), 0.4), ("i2".into(), 0.4)].into(),
            &cat,
            scale,
        )
        .unwrap();
        let partition = profile.classify_features();
        assert_eq!(partition.pos.len(), 2);
        assert!(partition.neg.is_empty());
    }

    #[test]
    fn empty_profile_summary_is_zero() {
        let profile = UserProfile::new();
        assert_eq!(profile.min_weight(), 0.0);
        assert_eq!(profile.avg_weight(), 0.0);
        assert_eq!(profile.max_weight(), 0.0);
        assert!(profile.classify_features().pos.is_empty());
    }

    proptest! {
        #[test]
        fn incremental_equals_batch(
            values in proptest::collection::vec(1.0f64..=5.0, 2..12),
            split in 1usize..11,
        ) {
            let split = split.min(values.len() - 1);
            let items: Vec<Item> = (0..values.len())
                .map(|i| {
                    let features: Vec<String> = (0..=(i % 3))
                        .map(|k| format!("f{}", (i + k) % 5))
                        .collect();
                    let refs: Vec<&str> = features.iter().map(String::as_str).collect();
                    item(&format!("i{i:02}"), &refs)
                })
                .collect();
            let cat = catalog(&items);
            let all: BTreeMap<ItemId, f64> = values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("i{i:02}").into(), *v))
                .collect();
            let batch = UserProfile::build(&all, &cat, scale()).unwrap();

            let first: BTreeMap<ItemId, f64> =
                all.iter().take(split).map(|(k, v)| (k.clone(), *v)).collect();
            let rest: BTreeMap<ItemId, f64> = all
                .iter()
                .skip(split)
                .map(|(k, v)| (k.clone(), scale().normalize(*v)))
                .collect();
            let mut incremental = UserProfile::build(&first, &cat, scale()).unwrap();
            incremental.update_with_items(&rest, &cat).unwrap();
            prop_assert_eq!(incremental, batch);
        }

        #[test]
        fn summary_brackets_all_weights(
            values in proptest::collection::vec(0.0f64..=1.0, 1..10),
        ) {
            let items: Vec<Item> = (0..values.len())
                .map(|i| {
                    let f = format!("f{}", i % 4);
                    item(&format!("i{i:02}"), &[f.as_str()])
                })
                .collect();
            let cat = catalog(&items);
            let relevance: BTreeMap<ItemId, f64> = values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("i{i:02}").into(), *v))
                .collect();
            let mut profile = UserProfile::new();
            profile.update_with_items(&relevance, &cat).unwrap();
            for (_, w) in profile.features() {
                prop_assert!(w >= profile.min_weight() - 1e-12);
                prop_assert!(w <= profile.max_weight() + 1e-12);
                prop_assert!((0.0..=1.0).contains(&w));
            }
            prop_assert!(profile.min_weight() <= profile.avg_weight() + 1e-12);
            prop_assert!(profile.avg_weight() <= profile.max_weight() + 1e-12);
        }
    }
}
