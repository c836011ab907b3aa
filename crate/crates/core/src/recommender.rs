//! Recommenders and the conversational actions they support.
//!
//! The [`Recommender`] trait covers the three system capabilities the
//! dialogue loop needs: ranked top-k recommendation, preference
//! elicitation (choosing which feature to ask about), and explaining why
//! an item was shown. [`ContentBased`] scores items by mean profile
//! weight; [`RandomRecommender`] is the control baseline.

use std::collections::BTreeSet;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureId, Item, ItemCatalog, ItemId};
use crate::profile::UserProfile;
use crate::rng::{shuffle, uniform_index};

/// One ranked batch of recommendations.
pub type RecList = Vec<ItemId>;

/// Feature with its learnt weight, as quoted in explanations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: FeatureId,
    pub weight: f64,
}

/// Why an item was recommended: its strongest profile features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub item_id: ItemId,
    /// Up to `e` item features known to the profile, strongest first;
    /// empty when the item shares no feature with the profile.
    pub features: Vec<FeatureWeight>,
}

/// A conversational recommender.
///
/// `ignored` holds items the dialogue has already shown or that the user
/// has reacted to; implementations must never return them again, nor
/// items the profile has already rated.
pub trait Recommender: Send + Sync {
    /// Top-`k` eligible items, best first; `None` when none remain.
    fn recommend(
        &self,
        profile: &UserProfile,
        catalog: &ItemCatalog,
        ignored: &BTreeSet<ItemId>,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Option<RecList>;

    /// Feature to ask the user about next; `None` when every feature has
    /// been asked already.
    fn elicit(
        &self,
        profile: &UserProfile,
        catalog: &ItemCatalog,
        ignored: &BTreeSet<ItemId>,
        already_asked: &BTreeSet<FeatureId>,
        rng: &mut dyn RngCore,
    ) -> Option<FeatureId>;

    /// Up to `e` profile features justifying `item`.
    fn explain(&self, profile: &UserProfile, item: &Item, e: usize) -> Explanation {
        explain_item(profile, item, e)
    }
}

/// Mean profile weight across the item's features; unseen features score
/// the profile average.
pub fn score_item(profile: &UserProfile, item: &Item) -> f64 {
    let sum: f64 = item
        .features
        .iter()
        .map(|f| profile.weight_or_default(f))
        .sum();
    sum / item.features.len() as f64
}

fn eligible<'c>(
    profile: &UserProfile,
    catalog: &'c ItemCatalog,
    ignored: &BTreeSet<ItemId>,
) -> impl Iterator<Item = &'c Item> {
    let rated = profile.rated_items().clone();
    let ignored = ignored.clone();
    catalog
        .items()
        .filter(move |item| !rated.contains(&item.item_id) && !ignored.contains(&item.item_id))
}

/// Eligible items scored and ranked: descending score, ties by ascending
/// item id.
pub fn ranked_candidates(
    profile: &UserProfile,
    catalog: &ItemCatalog,
    ignored: &BTreeSet<ItemId>,
) -> Vec<(ItemId, f64)> {
    let mut scored: Vec<(ItemId, f64)> = eligible(profile, catalog, ignored)
        .map(|item| (item.item_id.clone(), score_item(profile, item)))
        .collect();
    // candidates arrive id-ascending, so a stable sort keeps ties in id
    // order
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored
}

/// Entropy of a binary split of `m` out of `n`, symmetric in `m` and
/// `n - m` by construction.
fn split_entropy(m: usize, n: usize) -> f64 {
    debug_assert!(n > 0 && m <= n);
    let a = m.min(n - m);
    if a == 0 {
        return 0.0;
    }
    let p = a as f64 / n as f64;
    let q = 1.0 - p;
    -(p * p.log2() + q * q.log2())
}

/// Feature splitting `candidates` closest to half/half, skipping
/// `already_asked`; ties go to the lexicographically smallest id.
pub fn elicit_feature(
    candidates: &[&Item],
    already_asked: &BTreeSet<FeatureId>,
) -> Option<FeatureId> {
    if candidates.is_empty() {
        return None;
    }
    let features: BTreeSet<&FeatureId> = candidates
        .iter()
        .flat_map(|item| item.features.iter())
        .filter(|f| !already_asked.contains(*f))
        .collect();
    let n = candidates.len();
    let mut best: Option<(&FeatureId, f64)> = None;
    for feature in features {
        let m = candidates
            .iter()
            .filter(|item| item.features.contains(feature))
            .count();
        let h = split_entropy(m, n);
        // strictly-greater keeps the first (smallest id) on exact ties
        if best.is_none_or(|(_, bh)| h > bh) {
            best = Some((feature, h));
        }
    }
    best.map(|(f, _)| f.clone())
}

/// Top-`e` item features the profile knows, strongest first, ties by
/// ascending feature id.
pub fn explain_item(profile: &UserProfile, item: &Item, e: usize) -> Explanation {
    let mut known: Vec<FeatureWeight> = item
        .features
        .iter()
        .filter_map(|f| {
            profile.weight(f).map(|w| FeatureWeight {
                feature: f.clone(),
                weight: w,
            })
        })
        .collect();
    known.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    known.truncate(e);
    Explanation {
        item_id: item.item_id.clone(),
        features: known,
    }
}

/// Content-based recommender ranking items by mean feature weight.
#[derive(Clone, Debug)]
pub struct ContentBased {
    /// How many top-ranked items the elicitation question is computed
    /// over.
    pub elicitation_pool: usize,
}

impl Default for ContentBased {
    fn default() -> Self {
        ContentBased {
            elicitation_pool: 50,
        }
    }
}

impl Recommender for ContentBased {
    fn recommend(
        &self,
        profile: &UserProfile,
        catalog: &ItemCatalog,
        ignored: &BTreeSet<ItemId>,
        k: usize,
        _rng: &mut dyn RngCore,
    ) -> Option<RecList> {
        let mut ranked = ranked_candidates(profile, catalog, ignored);
        if ranked.is_empty() {
            return None;
        }
        ranked.truncate(k);
        Some(ranked.into_iter().map(|(id, _)| id).collect())
    }

    fn elicit(
        &self,
        profile: &UserProfile,
        catalog: &ItemCatalog,
        ignored: &BTreeSet<ItemId>,
        already_asked: &BTreeSet<FeatureId>,
        _rng: &mut dyn RngCore,
    ) -> Option<FeatureId> {
        let mut ranked = ranked_candidates(profile, catalog, ignored);
        ranked.truncate(self.elicitation_pool);
        let pool: Vec<&Item> = ranked
            .iter()
            .map(|(id, _)| catalog.get(id).expect("ranked ids come from catalog"))
            .collect();
        elicit_feature(&pool, already_asked)
    }
}

/// Control baseline: uniform random eligible items, uniform random
/// unasked feature.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomRecommender;

impl Recommender for RandomRecommender {
    fn recommend(
        &self,
        profile: &UserProfile,
        catalog: &ItemCatalog,
        ignored: &BTreeSet<ItemId>,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Option<RecList> {
        let mut pool: Vec<ItemId> = eligible(profile, catalog, ignored)
            .map(|item| item.item_id.clone())
            .collect();
        if pool.is_empty() {
            return None;
        }
        shuffle(rng, &mut pool);
        pool.truncate(k);
        Some(pool)
    }

    fn elicit(
        &self,
        _profile: &UserProfile,
        catalog: &ItemCatalog,
        _ignored: &BTreeSet<ItemId>,
        already_asked: &BTreeSet<FeatureId>,
        rng: &mut dyn RngCore,
    ) -> Option<FeatureId> {
        let unasked: Vec<&FeatureId> = catalog
            .feature_universe()
            .iter()
            .filter(|f| !already_asked.contains(*f))
            .collect();
        if unasked.is_empty() {
            return None;
        }
        Some(unasked[uniform_index(rng, unasked.len())].clone())
    }
}
