//! Conversation state machine between a simulated user and a recommender.
//!
//! A dialogue starts with a forced recommendation turn and then loops:
//! the user reacts to recommendations based on their look-ahead data
//! (accept / reject / no reaction, with optional explore-explain-correct
//! follow-ups after a reject), volunteers preferences, answers
//! elicitation questions, or breaks. Accepted and rejected items shrink
//! the look-ahead and fold into the learnt profile; un-reacted lists join
//! the `ignored` set so no item is ever shown twice.
//!
//! Every random draw comes from the single per-dialogue RNG stream in a
//! fixed documented order, so transcripts are pure functions of
//! `(user, catalog, config, seed)`.

use std::collections::{BTreeMap, BTreeSet};

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureId, ItemCatalog, ItemId, RatingScale, SimulatedUser, UserId};
use crate::error::{Error, Result};
use crate::profile::UserProfile;
use crate::recommender::{FeatureWeight, Recommender};
use crate::rng::{uniform_index, unit_f64};

/// Conversation states; numbers in comments follow the state diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueState {
    /// 0 — action selection; never appears in transcripts.
    Init,
    /// 1 — system presented a recommendation list.
    RecsPresented,
    /// 2 — elicitation question or answer.
    Elicitation,
    /// 3 — preference provision entry; never appears in transcripts
    /// (resolved to 6/7/8).
    ProvidePref,
    /// 4 — user ended the conversation.
    Break,
    /// 6 — preference with both a positive and a negative feature.
    ComplexPref,
    /// 7 — single positive feature preference.
    PosPref,
    /// 8 — single negative feature preference.
    NegPref,
    /// 9 — user rejected every shown item.
    Rejected,
    /// 10 — user showed no reaction.
    NoReaction,
    /// 11 — user accepted at least one item.
    Accepted,
    /// System shows an item's details after a reject.
    Explore,
    /// System explains a recommendation after a reject.
    Explain,
    /// 16 — correction of one wrongly assumed positive feature.
    CorrectPos,
    /// 17 — correction with both a positive and a negative feature.
    CorrectPosNeg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
}

/// Event content; `hits` marks shown items that are look-ahead positives
/// at presentation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Recommendations {
        items: Vec<ItemId>,
        hits: Vec<bool>,
        /// Look-ahead positives remaining when the list was shown.
        lookahead_positives: usize,
    },
    Accept {
        items: Vec<ItemId>,
    },
    Reject,
    NoReaction,
    Explore {
        item: ItemId,
        features: Vec<FeatureId>,
    },
    Explanation {
        item: ItemId,
        features: Vec<FeatureWeight>,
    },
    Correction {
        positive: Option<FeatureId>,
        negative: FeatureId,
        /// Shown item that carries `negative` (and `positive` when set).
        witness: ItemId,
    },
    Preference {
        positive: Option<FeatureId>,
        negative: Option<FeatureId>,
    },
    ElicitationQuestion {
        feature: FeatureId,
    },
    ElicitationAnswer {
        feature: FeatureId,
        yes: bool,
    },
    Break,
}

/// One utterance; `turn_index` is 1-based and dense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogueEvent {
    pub turn_index: u64,
    pub speaker: Speaker,
    pub state: DialogueState,
    pub payload: EventPayload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// The user broke the conversation (or the recommender ran dry).
    Break,
    /// The turn cap cut the dialogue short.
    TurnCap,
}

/// Full record of one dialogue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub user_id: UserId,
    pub events: Vec<DialogueEvent>,
    pub end: EndReason,
}

/// Selection weights for the four top-level actions.
///
/// A weight of 0 means the action is never chosen; the weights must sum
/// to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateWeights {
    #[serde(rename = "break")]
    pub w_break: f64,
    #[serde(rename = "recs")]
    pub w_recs: f64,
    #[serde(rename = "provide_pref")]
    pub w_pref: f64,
    #[serde(rename = "elicitation")]
    pub w_elic: f64,
}

impl Default for StateWeights {
    fn default() -> Self {
        StateWeights {
            w_break: 0.1,
            w_recs: 0.5,
            w_pref: 0.2,
            w_elic: 0.2,
        }
    }
}

impl StateWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_break, self.w_recs, self.w_pref, self.w_elic];
        for w in all {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!("state weight {w} invalid")));
            }
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "state weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Simulation parameters consumed by [`run_dialogue`].
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// Recommendation list size.
    pub k: usize,
    /// Explanation length (features quoted).
    pub e: usize,
    pub state_weights: StateWeights,
    /// Hard cap on events per transcript.
    pub max_turns: usize,
    pub scale: RatingScale,
}

/// Top-level dialogue actions drawn each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NextAction {
    Break,
    GenerateRecs,
    ProvidePref,
    PrefElicitation,
}

/// Weighted draw over the four actions: one uniform variate scanned
/// against the cumulative weights in the fixed order break, recs,
/// provide_pref, elicitation. Zero-weight actions are skipped outright.
pub fn choose_next_state(weights: &StateWeights, rng: &mut dyn RngCore) -> NextAction {
    let entries = [
        (NextAction::Break, weights.w_break),
        (NextAction::GenerateRecs, weights.w_recs),
        (NextAction::ProvidePref, weights.w_pref),
        (NextAction::PrefElicitation, weights.w_elic),
    ];
    let total: f64 = entries.iter().map(|(_, w)| w).sum();
    let u = unit_f64(rng) * total;
    let mut cum = 0.0;
    let mut last = None;
    for (action, w) in entries {
        if w <= 0.0 {
            continue;
        }
        cum += w;
        last = Some(action);
        if u < cum {
            return action;
        }
    }
    // reachable only through accumulated rounding at u ~ total
    last.expect("at least one positive state weight")
}

/// User reaction to a recommendation list.
#[derive(Clone, Debug, PartialEq)]
pub enum Reaction {
    /// Shown items the user's look-ahead rates at or above their average.
    Accept(Vec<ItemId>),
    /// Look-ahead knows some shown items but likes none of them.
    Reject,
    /// Look-ahead knows none of the shown items.
    NoReaction,
}

/// Decide the reaction from the current look-ahead.
pub fn react_to_recommendations(
    lookahead: &BTreeMap<ItemId, f64>,
    avg_rtg: f64,
    rec_list: &[ItemId],
) -> Reaction {
    let known: Vec<&ItemId> = rec_list
        .iter()
        .filter(|id| lookahead.contains_key(*id))
        .collect();
    if known.is_empty() {
        return Reaction::NoReaction;
    }
    let accepted: Vec<ItemId> = known
        .into_iter()
        .filter(|id| lookahead[*id] >= avg_rtg)
        .cloned()
        .collect();
    if accepted.is_empty() {
        Reaction::Reject
    } else {
        Reaction::Accept(accepted)
    }
}

/// Outcome of [`correct_assumption`]: the negative feature is always
/// present, the positive one only when the witness item carries both.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionResult {
    pub positive: Option<FeatureId>,
    pub negative: FeatureId,
    pub witness: ItemId,
}

/// Find a wrongly-assumed feature on a shown item.
///
/// Scans the look-ahead profile's negative features weakest-first; the
/// first one carried by a shown item (in presentation order) becomes the
/// negative correction, and the strongest positive feature on that same
/// item, if any, the positive one.
pub fn correct_assumption(
    lookahead_profile: &UserProfile,
    rec_list: &[ItemId],
    catalog: &ItemCatalog,
) -> Option<CorrectionResult> {
    let partition = lookahead_profile.classify_features();
    for (nf, _) in &partition.neg {
        for item_id in rec_list {
            let item = catalog.get(item_id).expect("shown items come from catalog");
            if item.features.contains(nf) {
                let positive = partition
                    .pos
                    .iter()
                    .find(|(pf, _)| item.features.contains(pf))
                    .map(|(pf, _)| pf.clone());
                return Some(CorrectionResult {
                    positive,
                    negative: nf.clone(),
                    witness: item_id.clone(),
                });
            }
        }
    }
    None
}

/// Preference the user volunteers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreferenceKind {
    Pos,
    Neg,
    Complex,
}

/// Pick the user's strongest preference statement from the look-ahead.
///
/// The positive feature is the maximum-weight feature of the look-ahead
/// profile, the negative the minimum-weight one below average. When no
/// feature sits below average, the negative side falls back to a
/// "changed their mind" feature: a positive learnt-profile feature absent
/// from the user's positively rated look-ahead items. If that also fails,
/// the statement degrades to positive-only. Returns `(fp, fn)`.
pub fn provide_preference(
    kind: PreferenceKind,
    lookahead: &BTreeMap<ItemId, f64>,
    avg_rtg: f64,
    learnt_profile: &UserProfile,
    catalog: &ItemCatalog,
    scale: RatingScale,
) -> (Option<FeatureId>, Option<FeatureId>) {
    if lookahead.is_empty() {
        return (None, None);
    }
    let la_profile =
        UserProfile::build(lookahead, catalog, scale).expect("look-ahead items are cataloged");
    let partition = la_profile.classify_features();
    let fp = partition.pos.first().map(|(f, _)| f.clone());
    let fn_ = partition.neg.first().map(|(f, _)| f.clone());

    match kind {
        PreferenceKind::Pos => (fp, None),
        PreferenceKind::Neg => match fn_ {
            Some(f) => (None, Some(f)),
            None => match changed_mind_feature(learnt_profile, lookahead, avg_rtg, catalog, None) {
                Some(f) => (None, Some(f)),
                None => (fp, None),
            },
        },
        PreferenceKind::Complex => match fn_ {
            Some(f) => (fp, Some(f)),
            None => {
                let fallback =
                    changed_mind_feature(learnt_profile, lookahead, avg_rtg, catalog, fp.as_ref());
                (fp, fallback)
            }
        },
    }
}

/// Strongest positive learnt-profile feature the look-ahead no longer
/// supports, i.e. absent from every positively rated look-ahead item.
fn changed_mind_feature(
    learnt_profile: &UserProfile,
    lookahead: &BTreeMap<ItemId, f64>,
    avg_rtg: f64,
    catalog: &ItemCatalog,
    exclude: Option<&FeatureId>,
) -> Option<FeatureId> {
    let mut liked_now: BTreeSet<&FeatureId> = BTreeSet::new();
    for (item_id, value) in lookahead {
        if *value >= avg_rtg {
            let item = catalog
                .get(item_id)
                .expect("look-ahead items are cataloged");
            liked_now.extend(item.features.iter());
        }
    }
    learnt_profile
        .classify_features()
        .pos
        .into_iter()
        .map(|(f, _)| f)
        .find(|f| Some(f) != exclude && !liked_now.contains(f))
}

/// Answer an elicitation question: yes iff the feature appears on any
/// positively rated look-ahead item.
pub fn answer_elicitation(
    lookahead: &BTreeMap<ItemId, f64>,
    avg_rtg: f64,
    catalog: &ItemCatalog,
    feature: &FeatureId,
) -> bool {
    lookahead.iter().any(|(item_id, value)| {
        *value >= avg_rtg
            && catalog
                .get(item_id)
                .expect("look-ahead items are cataloged")
                .features
                .contains(feature)
    })
}

struct EventLog {
    events: Vec<DialogueEvent>,
    cap: usize,
}

impl EventLog {
    fn emit(&mut self, speaker: Speaker, state: DialogueState, payload: EventPayload) -> bool {
        if self.events.len() >= self.cap {
            return false;
        }
        self.events.push(DialogueEvent {
            turn_index: self.events.len() as u64 + 1,
            speaker,
            state,
            payload,
        });
        true
    }
}

/// Run one full dialogue.
///
/// Draw order per round: recommender draws (if any); after a reject, one
/// draw over {explore, explain, no_react}, then an item draw, then one
/// over {no_react, corr_assmp}; for preferences one draw over {pos, neg,
/// complex} (skipped entirely when the look-ahead is empty); finally one
/// draw for the next action.
pub fn run_dialogue(
    user: &SimulatedUser,
    recommender: &dyn Recommender,
    catalog: &ItemCatalog,
    config: &SimConfig,
    rng: &mut dyn RngCore,
) -> Transcript {
    let mut profile = UserProfile::build(&user.profile_ratings, catalog, config.scale)
        .expect("profile items are cataloged and in scale");
    let mut lookahead = user.lookahead.clone();
    let mut ignored: BTreeSet<ItemId> = BTreeSet::new();
    let mut asked: BTreeSet<FeatureId> = BTreeSet::new();
    let mut log = EventLog {
        events: Vec::new(),
        cap: config.max_turns,
    };
    let universe = catalog.feature_universe();

    let mut end = EndReason::TurnCap;
    let mut action = NextAction::GenerateRecs;
    // iteration cap: actions can be event-free (empty look-ahead
    // preference, exhausted elicitation), so the event cap alone does not
    // bound the loop
    let max_rounds = 2 * config.max_turns;

    'dialogue: for _ in 0..max_rounds {
        match action {
            NextAction::Break => {
                if log.emit(Speaker::User, DialogueState::Break, EventPayload::Break) {
                    end = EndReason::Break;
                }
                break 'dialogue;
            }
            NextAction::GenerateRecs => {
                let Some(rec_list) =
                    recommender.recommend(&profile, catalog, &ignored, config.k, rng)
                else {
                    // nothing left to show: the conversation cannot
                    // continue usefully
                    if log.emit(Speaker::User, DialogueState::Break, EventPayload::Break) {
                        end = EndReason::Break;
                    }
                    break 'dialogue;
                };
                debug_assert!(!rec_list.is_empty() && rec_list.len() <= config.k);
                let hits: Vec<bool> = rec_list
                    .iter()
                    .map(|id| lookahead.get(id).is_some_and(|v| *v >= user.avg_rtg))
                    .collect();
                let lookahead_positives =
                    lookahead.values().filter(|v| **v >= user.avg_rtg).count();
                if !log.emit(
                    Speaker::System,
                    DialogueState::RecsPresented,
                    EventPayload::Recommendations {
                        items: rec_list.clone(),
                        hits,
                        lookahead_positives,
                    },
                ) {
                    break 'dialogue;
                }
                match react_to_recommendations(&lookahead, user.avg_rtg, &rec_list) {
                    Reaction::Accept(accepted) => {
                        if !log.emit(
                            Speaker::User,
                            DialogueState::Accepted,
                            EventPayload::Accept {
                                items: accepted.clone(),
                            },
                        ) {
                            break 'dialogue;
                        }
                        let relevance: BTreeMap<ItemId, f64> = accepted
                            .iter()
                            .map(|id| (id.clone(), config.scale.normalize(lookahead[id])))
                            .collect();
                        profile
                            .update_with_items(&relevance, catalog)
                            .expect("accepted items are new to the profile");
                        for id in &accepted {
                            lookahead.remove(id);
                        }
                        for id in &rec_list {
                            if !accepted.contains(id) {
                                ignored.insert(id.clone());
                            }
                        }
                    }
                    Reaction::Reject => {
                        if !log.emit(Speaker::User, DialogueState::Rejected, EventPayload::Reject) {
                            break 'dialogue;
                        }
                        let relevance: BTreeMap<ItemId, f64> =
                            rec_list.iter().map(|id| (id.clone(), 0.0)).collect();
                        profile
                            .update_with_items(&relevance, catalog)
                            .expect("rejected items are new to the profile");
                        for id in &rec_list {
                            lookahead.remove(id);
                        }
                        // follow-up: explore(0) / explain(1) / no_react(2)
                        let branch = uniform_index(rng, 3);
                        if branch != 2 {
                            let item_id = rec_list[uniform_index(rng, rec_list.len())].clone();
                            let item = catalog.get(&item_id).expect("shown item is cataloged");
                            let emitted = if branch == 0 {
                                log.emit(
                                    Speaker::System,
                                    DialogueState::Explore,
                                    EventPayload::Explore {
                                        item: item_id.clone(),
                                        features: item.features.iter().cloned().collect(),
                                    },
                                )
                            } else {
                                let explanation = recommender.explain(&profile, item, config.e);
                                log.emit(
                                    Speaker::System,
                                    DialogueState::Explain,
                                    EventPayload::Explanation {
                                        item: item_id.clone(),
                                        features: explanation.features,
                                    },
                                )
                            };
                            if !emitted {
                                break 'dialogue;
                            }
                            // second draw: no_react(0) / corr_assmp(1)
                            if uniform_index(rng, 2) == 1 {
                                let la_profile =
                                    UserProfile::build(&lookahead, catalog, config.scale)
                                        .expect("look-ahead items are cataloged");
                                if let Some(corr) =
                                    correct_assumption(&la_profile, &rec_list, catalog)
                                {
                                    let state = if corr.positive.is_some() {
                                        DialogueState::CorrectPosNeg
                                    } else {
                                        DialogueState::CorrectPos
                                    };
                                    if !log.emit(
                                        Speaker::User,
                                        state,
                                        EventPayload::Correction {
                                            positive: corr.positive.clone(),
                                            negative: corr.negative.clone(),
                                            witness: corr.witness.clone(),
                                        },
                                    ) {
                                        break 'dialogue;
                                    }
                                    let pos: Vec<FeatureId> = corr.positive.into_iter().collect();
                                    let neg = [corr.negative];
                                    profile
                                        .anchor_features(&pos, &neg, universe)
                                        .expect("corrected features are cataloged");
                                    asked.extend(pos);
                                    asked.extend(neg);
                                }
                            }
                        }
                    }
                    Reaction::NoReaction => {
                        if !log.emit(
                            Speaker::User,
                            DialogueState::NoReaction,
                            EventPayload::NoReaction,
                        ) {
                            break 'dialogue;
                        }
                        ignored.extend(rec_list.iter().cloned());
                    }
                }
            }
            NextAction::ProvidePref => {
                if !lookahead.is_empty() {
                    let kind = match uniform_index(rng, 3) {
                        0 => PreferenceKind::Pos,
                        1 => PreferenceKind::Neg,
                        _ => PreferenceKind::Complex,
                    };
                    let (fp, fn_) = provide_preference(
                        kind,
                        &lookahead,
                        user.avg_rtg,
                        &profile,
                        catalog,
                        config.scale,
                    );
                    let state = match (&fp, &fn_) {
                        (Some(_), Some(_)) => DialogueState::ComplexPref,
                        (Some(_), None) => DialogueState::PosPref,
                        (None, Some(_)) => DialogueState::NegPref,
                        (None, None) => {
                            action = choose_next_state(&config.state_weights, rng);
                            continue 'dialogue;
                        }
                    };
                    if !log.emit(
                        Speaker::User,
                        state,
                        EventPayload::Preference {
                            positive: fp.clone(),
                            negative: fn_.clone(),
                        },
                    ) {
                        break 'dialogue;
                    }
                    let pos: Vec<FeatureId> = fp.into_iter().collect();
                    let neg: Vec<FeatureId> = fn_.into_iter().collect();
                    profile
                        .anchor_features(&pos, &neg, universe)
                        .expect("preferred features are cataloged");
                    asked.extend(pos);
                    asked.extend(neg);
                }
            }
            NextAction::PrefElicitation => {
                if let Some(feature) = recommender.elicit(&profile, catalog, &ignored, &asked, rng)
                {
                    if !log.emit(
                        Speaker::System,
                        DialogueState::Elicitation,
                        EventPayload::ElicitationQuestion {
                            feature: feature.clone(),
                        },
                    ) {
                        break 'dialogue;
                    }
                    let yes = answer_elicitation(&lookahead, user.avg_rtg, catalog, &feature);
                    if !log.emit(
                        Speaker::User,
                        DialogueState::Elicitation,
                        EventPayload::ElicitationAnswer {
                            feature: feature.clone(),
                            yes,
                        },
                    ) {
                        break 'dialogue;
                    }
                    let anchored = [feature.clone()];
                    let (pos, neg): (&[FeatureId], &[FeatureId]) = if yes {
                        (&anchored, &[])
                    } else {
                        (&[], &anchored)
                    };
                    profile
                        .anchor_features(pos, neg, universe)
                        .expect("elicited feature is cataloged");
                    asked.insert(feature);
                }
            }
        }
        action = choose_next_state(&config.state_weights, rng);
    }

    Transcript {
        user_id: user.user_id.clone(),
        events: log.events,
        end,
    }
}
