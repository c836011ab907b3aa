//! Plain-text rendering of transcripts and aggregate results.
//!
//! One line per utterance, `[turn] SPEAKER verb: detail`; recommended
//! items that were look-ahead positives get a `*` suffix. The format is
//! stable so rendered logs can be diffed across runs.

use std::fmt::Write;

use crate::dataset::FeatureId;
use crate::metrics::MetricsReport;
use crate::simulator::{DialogueEvent, EndReason, EventPayload, Speaker, Transcript};

fn speaker_tag(speaker: Speaker) -> &'static str {
    match speaker {
        Speaker::System => "SYSTEM",
        Speaker::User => "USER",
    }
}

fn feature_list(features: &[FeatureId]) -> String {
    features
        .iter()
        .map(FeatureId::as_str)
        .collect::<Vec<_>>()
        .join("|")
}

fn correction_text(positive: Option<&FeatureId>, negative: &FeatureId) -> String {
    match positive {
        Some(p) => format!("like {p}, dislike {negative}"),
        None => format!("dislike {negative}"),
    }
}

fn event_line(event: &DialogueEvent) -> String {
    let mut line = format!("[{}] {} ", event.turn_index, speaker_tag(event.speaker));
    match &event.payload {
        EventPayload::Recommendations { items, hits, .. } => {
            line.push_str("recommend:");
            for (item, hit) in items.iter().zip(hits) {
                let marker = if *hit { "*" } else { "" };
                let _ = write!(line, " {item}{marker}");
            }
        }
        EventPayload::Accept { items } => {
            line.push_str("accept:");
            for item in items {
                let _ = write!(line, " {item}");
            }
        }
        EventPayload::Reject => line.push_str("reject"),
        EventPayload::NoReaction => line.push_str("no_reaction"),
        EventPayload::Explore { item, features } => {
            let _ = write!(line, "explore: {item} ({})", feature_list(features));
        }
        EventPayload::Explanation { item, features } => {
            if features.is_empty() {
                let _ = write!(line, "explain: {item} (no shared features)");
            } else {
                let reasons: Vec<String> = features
                    .iter()
                    .map(|fw| format!("{}({:.2})", fw.feature, fw.weight))
                    .collect();
                let _ = write!(line, "explain: {item} because {}", reasons.join(", "));
            }
        }
        EventPayload::Correction {
            positive,
            negative,
            witness,
        } => {
            let _ = write!(
                line,
                "correct: {} (re {witness})",
                correction_text(positive.as_ref(), negative)
            );
        }
        EventPayload::Preference { positive, negative } => {
            line.push_str("prefer: ");
            let parts: Vec<String> = positive
                .iter()
                .map(|f| format!("like {f}"))
                .chain(negative.iter().map(|f| format!("dislike {f}")))
                .collect();
            line.push_str(&parts.join(", "));
        }
        EventPayload::ElicitationQuestion { feature } => {
            let _ = write!(line, "elicit: \"Do you prefer {feature}?\"");
        }
        EventPayload::ElicitationAnswer { yes, .. } => {
            let _ = write!(line, "answer: {}", if *yes { "yes" } else { "no" });
        }
        EventPayload::Break => line.push_str("break"),
    }
    line
}

/// Render a dialogue as one line per utterance.
pub fn render_transcript(transcript: &Transcript) -> String {
    let mut out = format!("dialogue with {}\n", transcript.user_id);
    for event in &transcript.events {
        out.push_str(&event_line(event));
        out.push('\n');
    }
    if transcript.end == EndReason::TurnCap {
        out.push_str("(truncated at turn cap)\n");
    }
    out
}

/// Render the aggregate block of a report as an aligned table.
pub fn render_aggregate(report: &MetricsReport) -> String {
    let a = &report.aggregate;
    let mut out = format!("aggregate over {} users", report.per_user.len());
    if !report.zero_rt_users.is_empty() {
        let _ = write!(
            out,
            " ({} with zero recommendation turns)",
            report.zero_rt_users.len()
        );
    }
    out.push('\n');
    for (name, value) in [
        ("DT", a.dt),
        ("DSR", a.dsr),
        ("RT", a.rt),
        ("RSR", a.rsr),
        ("AP_k_DT", a.ap_k_dt),
        ("AP_k_RT", a.ap_k_rt),
    ] {
        let _ = writeln!(out, "  {name:<8} {value:>10.4}");
    }
    out
}
