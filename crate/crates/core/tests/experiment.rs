//! End-to-end tests for the experiment runner: artifact layout,
//! cross-artifact consistency, skip handling, and failure modes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use convosim_core::{
    generate, items_csv, load_ratings, ratings_csv, run_experiment, run_simulations,
    score_transcript, split_users, ApDenominator, ExperimentConfig, RatingScale, StateWeights,
    SynthConfig, Transcript, UserId,
};

fn base_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        ratings_path: dir.join("ratings.csv"),
        items_path: dir.join("items.csv"),
        out_dir: dir.join("out"),
        rating_scale: RatingScale::default(),
        user_split: 0.8,
        history_split: 0.8,
        k: 5,
        e: 4,
        elicitation_pool: 50,
        state_weights: StateWeights::default(),
        max_turns: 100,
        seed: 3,
        ap_denominator: ApDenominator::default(),
    }
}

fn write_synth(dir: &Path, users: usize) {
    let data = generate(&SynthConfig::new(users, 80, 8, 21)).unwrap();
    fs::write(dir.join("ratings.csv"), ratings_csv(&data.ratings)).unwrap();
    fs::write(dir.join("items.csv"), items_csv(&data.catalog)).unwrap();
}

/// Hand-written dataset: `counts[i]` ratings for user `u<i>` over a tiny
/// catalog, timestamps in rating order.
fn write_manual(dir: &Path, counts: &[usize]) {
    let mut ratings = String::from("user_id,item_id,rating,timestamp\n");
    for (u, count) in counts.iter().enumerate() {
        for i in 0..*count {
            let value = 1 + (i + u) % 5;
            writeln!(ratings, "u{u},i{i:02},{value},{i}").unwrap();
        }
    }
    let mut items = String::from("item_id,title,features\n");
    let max = counts.iter().max().copied().unwrap_or(0);
    for i in 0..max {
        let feature = ["A", "B", "C"][i % 3];
        writeln!(items, "i{i:02},Item {i},{feature}").unwrap();
    }
    fs::write(dir.join("ratings.csv"), ratings).unwrap();
    fs::write(dir.join("items.csv"), items).unwrap();
}

#[test]
fn ten_users_leave_two_test_transcripts() {
    let tmp = tempfile::tempdir().unwrap();
    write_synth(tmp.path(), 10);
    let config = base_config(tmp.path());
    let outcome = run_experiment(&config, &config.baseline(), None).unwrap();

    assert_eq!(outcome.report.per_user.len(), 2);
    assert_eq!(outcome.transcripts.len(), 2);
    assert!(outcome.skipped.is_empty());

    let out = &config.out_dir;
    assert!(out.join("report.json").is_file());
    for user_id in outcome.report.per_user.keys() {
        assert!(out
            .join(format!("transcripts/{}.json", user_id.as_str()))
            .is_file());
        let log = out.join(format!("logs/{}.txt", user_id.as_str()));
        let text = fs::read_to_string(&log).unwrap();
        assert!(
            text.starts_with(&format!("dialogue with {}", user_id.as_str())),
            "unexpected log head: {text:.40?}"
        );
    }
}

#[test]
fn report_top_level_key_order_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    write_synth(tmp.path(), 10);
    let config = base_config(tmp.path());
    run_experiment(&config, &config.baseline(), None).unwrap();

    let text = fs::read_to_string(config.out_dir.join("report.json")).unwrap();
    let positions: Vec<usize> = [
        "per_user",
        "aggregate",
        "zero_rt_users",
        "config_echo",
        "seed",
    ]
    .iter()
    .map(|key| {
        text.find(&format!("\"{key}\""))
            .unwrap_or_else(|| panic!("{key} missing"))
    })
    .collect();
    assert!(
        positions.windows(2).all(|w| w[0] < w[1]),
        "key order: {positions:?}"
    );
    assert!(text.ends_with('\n'));

    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["DT", "DSR", "RT", "RSR", "AP_k_DT", "AP_k_RT"] {
        assert!(value["aggregate"][key].is_number(), "aggregate.{key}");
    }
    assert_eq!(value["config_echo"]["k"], 5);
    assert_eq!(value["seed"], 3);
}

#[test]
fn report_aggregate_matches_recomputation_from_transcript_files() {
    let tmp = tempfile::tempdir().unwrap();
    write_synth(tmp.path(), 25);
    let config = base_config(tmp.path());
    run_experiment(&config, &config.baseline(), None).unwrap();

    // recompute every metric from the emitted transcript files alone
    let mut dt = Vec::new();
    let mut dsr = Vec::new();
    let mut rt = Vec::new();
    let mut rsr = Vec::new();
    let mut ap_dt = Vec::new();
    let mut ap_rt = Vec::new();
    for entry in fs::read_dir(config.out_dir.join("transcripts")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let transcript: Transcript = serde_json::from_str(&text).unwrap();
        let m = score_transcript(&transcript, config.k, config.ap_denominator).unwrap();
        dt.push(m.dt as f64);
        dsr.push(m.dsr);
        rt.push(m.rt as f64);
        rsr.push(m.rsr);
        ap_dt.push(m.ap_k_dt);
        ap_rt.push(m.ap_k_rt);
    }
    assert!(!dt.is_empty());
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.out_dir.join("report.json")).unwrap())
            .unwrap();
    let agg = &report["aggregate"];
    for (key, values) in [
        ("DT", &dt),
        ("DSR", &dsr),
        ("RT", &rt),
        ("RSR", &rsr),
        ("AP_k_DT", &ap_dt),
        ("AP_k_RT", &ap_rt),
    ] {
        let reported = agg[key].as_f64().unwrap();
        let recomputed = mean(values);
        assert!(
            (reported - recomputed).abs() <= 1e-12,
            "{key}: report {reported} vs transcripts {recomputed}"
        );
    }
    assert_eq!(
        report["per_user"].as_object().unwrap().len(),
        dt.len(),
        "per_user entries match transcript files"
    );
}

#[test]
fn short_history_test_user_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    // u3 has too little history to simulate; everyone else is fine
    let counts = [20, 20, 20, 4, 20, 20, 20, 20, 20, 20];
    write_manual(tmp.path(), &counts);
    let mut config = base_config(tmp.path());

    let table = load_ratings(
        fs::read_to_string(tmp.path().join("ratings.csv"))
            .unwrap()
            .as_bytes(),
        config.rating_scale,
    )
    .unwrap();
    let short = UserId::from("u3");
    config.seed = (0..200u64)
        .find(|seed| {
            let (_, test) = split_users(&table, config.user_split, *seed).unwrap();
            test.contains(&short)
        })
        .expect("some seed puts u3 in the test split");

    let outcome = run_experiment(&config, &config.baseline(), None).unwrap();
    assert_eq!(outcome.skipped, vec![short.clone()]);
    assert!(!outcome.report.per_user.contains_key(&short));
    assert!(!config.out_dir.join("transcripts/u3.json").exists());
}

#[test]
fn empty_lookahead_user_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    // with history_split 0.9, a 5-rating history keeps all five ratings
    // as profile: ceil(0.9 * 5) = 5, so the look-ahead is empty
    let counts = [20, 20, 5, 20, 20, 20, 20, 20, 20, 20];
    write_manual(tmp.path(), &counts);
    let mut config = base_config(tmp.path());
    config.history_split = 0.9;

    let table = load_ratings(
        fs::read_to_string(tmp.path().join("ratings.csv"))
            .unwrap()
            .as_bytes(),
        config.rating_scale,
    )
    .unwrap();
    let target = UserId::from("u2");
    config.seed = (0..200u64)
        .find(|seed| {
            let (_, test) = split_users(&table, config.user_split, *seed).unwrap();
            test.contains(&target)
        })
        .expect("some seed puts u2 in the test split");

    let outcome = run_simulations(&config, &config.baseline(), None).unwrap();
    assert!(outcome.skipped.contains(&target));
    assert!(!outcome.report.per_user.contains_key(&target));
}

#[test]
fn unusable_test_split_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_manual(tmp.path(), &[4, 4, 4, 4, 4]);
    let config = base_config(tmp.path());
    let err = run_simulations(&config, &config.baseline(), None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("enough history"), "{err}");
}

#[test]
fn stale_artifacts_are_cleared_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    write_synth(tmp.path(), 10);
    let config = base_config(tmp.path());
    run_experiment(&config, &config.baseline(), None).unwrap();

    let stale_t = config.out_dir.join("transcripts/stale.json");
    let stale_l = config.out_dir.join("logs/stale.txt");
    fs::write(&stale_t, "{}").unwrap();
    fs::write(&stale_l, "leftover").unwrap();

    run_experiment(&config, &config.baseline(), None).unwrap();
    assert!(!stale_t.exists(), "stale transcript survived a rerun");
    assert!(!stale_l.exists(), "stale log survived a rerun");
}

#[test]
fn jobs_choice_does_not_change_the_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    write_synth(tmp.path(), 15);
    let config = base_config(tmp.path());
    let serial = run_simulations(&config, &config.baseline(), Some(1)).unwrap();
    let parallel = run_simulations(&config, &config.baseline(), Some(8)).unwrap();
    assert_eq!(serial.report.per_user, parallel.report.per_user);
    assert_eq!(serial.transcripts, parallel.transcripts);
}
