//! Shared fixtures for the criterion benchmarks: a mid-sized synthetic
//! dataset and a ready-to-run simulated user.

use convosim_core::{
    derive_rng, generate, split_user_history, ItemCatalog, RatingScale, SimConfig, SimRng,
    SimulatedUser, SynthConfig, UserProfile,
};

/// A synthetic world plus one prepared test user.
pub struct Fixture {
    pub catalog: ItemCatalog,
    pub user: SimulatedUser,
    pub scale: RatingScale,
}

/// Build a deterministic benchmark fixture: a `users` x `items` synthetic
/// dataset with the first user's history split 80/20 into profile and
/// look-ahead.
pub fn fixture(users: usize, items: usize, features: usize) -> Fixture {
    let config = SynthConfig::new(users, items, features, 42);
    let data = generate(&config).expect("synth generation");

    let history = data
        .ratings
        .by_user()
        .into_values()
        .next()
        .expect("at least one user");
    let user = split_user_history(history, 0.8).expect("enough history");

    Fixture {
        catalog: data.catalog,
        user,
        scale: config.scale,
    }
}

/// Default simulation config for benches.
pub fn sim_config(scale: RatingScale) -> SimConfig {
    SimConfig {
        k: 5,
        e: 4,
        state_weights: Default::default(),
        max_turns: 60,
        scale,
    }
}

/// Profile built from the fixture user's training ratings.
pub fn profile(fx: &Fixture) -> UserProfile {
    UserProfile::build(&fx.user.profile_ratings, &fx.catalog, fx.scale).expect("profile build")
}

/// RNG for a benchmark dialogue.
pub fn dialogue_rng(fx: &Fixture) -> SimRng {
    derive_rng(42, "dialogue", fx.user.user_id.as_str())
}
