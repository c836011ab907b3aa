//! Deterministic user-simulation harness for conversational recommenders.
//!
//! The harness replays simulated users through a conversation state
//! machine: each user's held-out "look-ahead" ratings decide how they
//! react to recommendations, which preferences they volunteer, and how
//! they answer elicitation questions. Dialogues are scored with
//! dialogue-quality and recommendation-accuracy metrics and aggregated
//! across test users.
//!
//! Typical flow: [`experiment::run_experiment`] loads the CSV inputs,
//! splits users, runs one [`simulator::run_dialogue`] per test user
//! against a [`recommender::Recommender`], scores transcripts with
//! [`metrics::score_transcript`], and writes `report.json` plus per-user
//! transcripts and logs. Every random decision flows through seeded,
//! per-user RNG streams, so all outputs are byte-reproducible from the
//! config and seed.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod profile;
pub mod recommender;
pub mod render;
pub mod rng;
pub mod simulator;
pub mod synth;

pub use dataset::{
    load_items, load_ratings, order_history, split_user_history, split_users, FeatureId, Item,
    ItemCatalog, ItemId, Rating, RatingScale, RatingTable, SimulatedUser, UserId, MIN_HISTORY,
};
pub use error::{Error, Result};
pub use experiment::{
    load_dataset, run_experiment, run_simulations, ExperimentConfig, ExperimentOutcome,
};
pub use metrics::{
    aggregate, build_report, compute_ap_at_k, compute_ap_at_k_with_r, score_transcript,
    AggregateMetrics, ApDenominator, MetricsReport, UserMetrics,
};
pub use profile::{FeaturePartition, FeatureStat, UserProfile};
pub use recommender::{
    elicit_feature, explain_item, ranked_candidates, score_item, ContentBased, Explanation,
    FeatureWeight, RandomRecommender, RecList, Recommender,
};
pub use render::{render_aggregate, render_transcript};
pub use rng::{derive_rng, shuffle, uniform_index, unit_f64, SimRng};
pub use simulator::{
    answer_elicitation, choose_next_state, correct_assumption, provide_preference,
    react_to_recommendations, run_dialogue, CorrectionResult, DialogueEvent, DialogueState,
    EndReason, EventPayload, NextAction, PreferenceKind, Reaction, SimConfig, Speaker,
    StateWeights, Transcript,
};
pub use synth::{generate, items_csv, ratings_csv, SynthConfig, SynthData};
