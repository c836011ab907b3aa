//! End-to-end experiment orchestration.
//!
//! Loads the ratings and items CSVs, splits users into train/test, builds
//! one simulated user per usable test user, runs all dialogues (optionally
//! in parallel — per-dialogue RNG streams are keyed by user id, so the
//! worker count never changes results), scores them, and writes
//! `report.json`, per-user transcripts, and rendered logs under the
//! configured output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    load_items, load_ratings, split_user_history, split_users, ItemCatalog, RatingScale,
    RatingTable, SimulatedUser, UserId, MIN_HISTORY,
};
use crate::error::{Error, Result};
use crate::metrics::{
    build_report, score_transcript, AggregateMetrics, ApDenominator, MetricsReport, UserMetrics,
};
use crate::recommender::{ContentBased, Recommender};
use crate::render::render_transcript;
use crate::rng::derive_rng;
use crate::simulator::{run_dialogue, SimConfig, StateWeights, Transcript};

fn default_split() -> f64 {
    0.8
}

fn default_k() -> usize {
    5
}

fn default_e() -> usize {
    4
}

fn default_pool() -> usize {
    50
}

fn default_max_turns() -> usize {
    100
}

/// Full experiment configuration, usually read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ratings_path: PathBuf,
    pub items_path: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub rating_scale: RatingScale,
    /// Fraction of users assigned to training.
    #[serde(default = "default_split")]
    pub user_split: f64,
    /// Fraction of each test user's history kept as profile.
    #[serde(default = "default_split")]
    pub history_split: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_e")]
    pub e: usize,
    #[serde(default = "default_pool")]
    pub elicitation_pool: usize,
    #[serde(default)]
    pub state_weights: StateWeights,
    #[serde(default = "default_max_turns")]
    pub max_turns: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ap_denominator: ApDenominator,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("user_split", self.user_split),
            ("history_split", self.history_split),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::validation(format!("{name} {v} outside (0, 1)")));
            }
        }
        self.state_weights.validate()?;
        for (name, v) in [
            ("k", self.k),
            ("e", self.e),
            ("elicitation_pool", self.elicitation_pool),
            ("max_turns", self.max_turns),
        ] {
            if v == 0 {
                return Err(Error::validation(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            k: self.k,
            e: self.e,
            state_weights: self.state_weights,
            max_turns: self.max_turns,
            scale: self.rating_scale,
        }
    }

    /// The bundled content-based baseline for this configuration.
    pub fn baseline(&self) -> ContentBased {
        ContentBased {
            elicitation_pool: self.elicitation_pool,
        }
    }
}

/// Everything a finished experiment produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub transcripts: BTreeMap<UserId, Transcript>,
    /// Test users excluded before simulation (short history or empty
    /// look-ahead after the split).
    pub skipped: Vec<UserId>,
}

/// Load and cross-validate the two input files.
pub fn load_dataset(config: &ExperimentConfig) -> Result<(RatingTable, ItemCatalog)> {
    let ratings_file =
        fs::File::open(&config.ratings_path).map_err(|e| Error::io(&config.ratings_path, e))?;
    let table = load_ratings(BufReader::new(ratings_file), config.rating_scale)
        .map_err(|e| Error::in_file(&config.ratings_path, e))?;

    let items_file =
        fs::File::open(&config.items_path).map_err(|e| Error::io(&config.items_path, e))?;
    let catalog = load_items(BufReader::new(items_file))
        .map_err(|e| Error::in_file(&config.items_path, e))?;

    let missing: Vec<&str> = table
        .ratings()
        .iter()
        .filter(|r| !catalog.contains(&r.item_id))
        .map(|r| r.item_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::validation(format!(
            "{} rated item(s) missing from the items file, first: '{}'",
            missing.len(),
            missing[0]
        )));
    }
    Ok((table, catalog))
}

fn build_test_users(
    config: &ExperimentConfig,
    table: &RatingTable,
) -> Result<(Vec<SimulatedUser>, Vec<UserId>)> {
    let (_train, test) = split_users(table, config.user_split, config.seed)?;
    if test.is_empty() {
        return Err(Error::validation(
            "user split produced no test users".to_owned(),
        ));
    }
    let mut by_user = table.by_user();
    let mut users = Vec::new();
    let mut skipped = Vec::new();
    for user_id in test {
        let ratings = by_user
            .remove(&user_id)
            .expect("test users come from the table");
        if ratings.len() < MIN_HISTORY {
            log::warn!(
                "skipping user '{user_id}': {} ratings, need at least {MIN_HISTORY}",
                ratings.len()
            );
            skipped.push(user_id);
            continue;
        }
        let user = split_user_history(ratings, config.history_split)?;
        if user.lookahead.is_empty() {
            log::warn!("skipping user '{user_id}': history split left no look-ahead");
            skipped.push(user_id);
            continue;
        }
        users.push(user);
    }
    if users.is_empty() {
        return Err(Error::validation(
            "no test user has enough history to simulate".to_owned(),
        ));
    }
    Ok((users, skipped))
}

/// Run every test-user dialogue and score it; touches no files.
///
/// `jobs` caps the worker threads; `None` uses the rayon default. The
/// worker count cannot affect results.
pub fn run_simulations(
    config: &ExperimentConfig,
    recommender: &dyn Recommender,
    jobs: Option<usize>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let (table, catalog) = load_dataset(config)?;
    let (users, skipped) = build_test_users(config, &table)?;
    let sim_config = config.sim_config();

    let simulate = || -> Result<Vec<(UserId, Transcript, UserMetrics)>> {
        users
            .par_iter()
            .map(|user| {
                let mut rng = derive_rng(config.seed, "dialogue", user.user_id.as_str());
                let transcript = run_dialogue(user, recommender, &catalog, &sim_config, &mut rng);
                let metrics = score_transcript(&transcript, config.k, config.ap_denominator)?;
                Ok((user.user_id.clone(), transcript, metrics))
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::validation(format!("cannot build thread pool: {e}")))?
            .install(simulate),
        None => simulate(),
    }?;

    let mut transcripts = BTreeMap::new();
    let mut per_user = BTreeMap::new();
    for (user_id, transcript, metrics) in results {
        transcripts.insert(user_id.clone(), transcript);
        per_user.insert(user_id, metrics);
    }
    Ok(ExperimentOutcome {
        report: build_report(per_user)?,
        transcripts,
        skipped,
    })
}

/// On-disk layout of `report.json`.
#[derive(Serialize)]
struct ReportFile<'a> {
    per_user: &'a BTreeMap<UserId, UserMetrics>,
    aggregate: &'a AggregateMetrics,
    zero_rt_users: &'a [UserId],
    config_echo: &'a ExperimentConfig,
    seed: u64,
}

/// Turn a user id into a filename that cannot collide or escape the
/// output directory.
fn safe_filename(id: &str) -> String {
    let mut sanitized: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if sanitized.starts_with('.') || sanitized.is_empty() {
        sanitized.insert(0, '_');
    }
    if sanitized == id {
        sanitized
    } else {
        // disambiguate ids that sanitize to the same string
        let digest = Sha256::digest(id.as_bytes());
        let tag: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
        format!("{sanitized}-{tag}")
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn reset_dir(dir: &Path) -> Result<()> {
    match fs::remove_dir_all(dir) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(Error::io(dir, e)),
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_artifacts(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let transcripts_dir = out.join("transcripts");
    let logs_dir = out.join("logs");
    reset_dir(&transcripts_dir)?;
    reset_dir(&logs_dir)?;

    for (user_id, transcript) in &outcome.transcripts {
        let name = safe_filename(user_id.as_str());
        write_json(&transcripts_dir.join(format!("{name}.json")), transcript)?;
        let log_path = logs_dir.join(format!("{name}.txt"));
        fs::write(&log_path, render_transcript(transcript)).map_err(|e| Error::io(&log_path, e))?;
    }

    write_json(
        &out.join("report.json"),
        &ReportFile {
            per_user: &outcome.report.per_user,
            aggregate: &outcome.report.aggregate,
            zero_rt_users: &outcome.report.zero_rt_users,
            config_echo: config,
            seed: config.seed,
        },
    )
}

fn remove_outputs(out_dir: &Path) {
    let _ = fs::remove_file(out_dir.join("report.json"));
    let _ = fs::remove_dir_all(out_dir.join("transcripts"));
    let _ = fs::remove_dir_all(out_dir.join("logs"));
}

/// Run the full experiment and write all artifacts.
///
/// On a write failure the partial outputs are removed before the error
/// is returned.
pub fn run_experiment(
    config: &ExperimentConfig,
    recommender: &dyn Recommender,
    jobs: Option<usize>,
) -> Result<ExperimentOutcome> {
    let outcome = run_simulations(config, recommender, jobs)?;
    if let Err(e) = write_artifacts(config, &outcome) {
        remove_outputs(&config.out_dir);
        return Err(e);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_minimal_json() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"ratings_path": "r.csv", "items_path": "i.csv", "out_dir": "out"}"#,
        )
        .unwrap();
        assert_eq!(cfg.rating_scale, RatingScale::new(1.0, 5.0).unwrap());
        assert_eq!(cfg.user_split, 0.8);
        assert_eq!(cfg.history_split, 0.8);
        assert_eq!((cfg.k, cfg.e), (5, 4));
        assert_eq!(cfg.elicitation_pool, 50);
        assert_eq!(cfg.state_weights, StateWeights::default());
        assert_eq!(cfg.max_turns, 100);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.ap_denominator, ApDenominator::ShownHits);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let result: std::result::Result<ExperimentConfig, _> = serde_json::from_str(
            r#"{"ratings_path": "r", "items_path": "i", "out_dir": "o", "max_turn": 5}"#,
        );
        assert!(result.is_err());
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let base: ExperimentConfig = serde_json::from_str(
            r#"{"ratings_path": "r.csv", "items_path": "i.csv", "out_dir": "out"}"#,
        )
        .unwrap();
        let mut cfg = base.clone();
        cfg.user_split = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = base.clone();
        cfg.k = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = base.clone();
        cfg.state_weights.w_break = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = base;
        cfg.max_turns = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
                "ratings_path": "r.csv",
                "items_path": "i.csv",
                "out_dir": "out",
                "rating_scale": [0.5, 5.0],
                "k": 10,
                "seed": 99,
                "ap_denominator": "lookahead_positives",
                "state_weights": {"break": 0.2, "recs": 0.4, "provide_pref": 0.2, "elicitation": 0.2}
            }"#,
        )
        .unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn safe_filename_passes_clean_ids_and_tags_dirty_ones() {
        assert_eq!(safe_filename("u042"), "u042");
        assert_eq!(safe_filename("user-1.a_b"), "user-1.a_b");
        let slashed = safe_filename("a/b");
        assert!(slashed.starts_with("a_b-"), "{slashed}");
        assert_ne!(safe_filename("a/b"), safe_filename("a\\b"));
        assert!(safe_filename("..").starts_with('_'));
        assert!(!safe_filename("").is_empty());
    }

    #[test]
    fn missing_ratings_file_is_an_io_error() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"ratings_path": "/nonexistent/r.csv", "items_path": "/nonexistent/i.csv", "out_dir": "out"}"#,
        )
        .unwrap();
        let err = load_dataset(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/nonexistent/r.csv"));
    }
}
