//! Dialogue-quality and recommendation-accuracy metrics.
//!
//! Per transcript: DT counts every utterance, RT the recommendation
//! turns, `successes` the shown items that were look-ahead positives.
//! DSR and RSR are successes per dialogue turn and per recommendation
//! turn; AP@k is averaged per recommendation turn and normalized by DT
//! and RT. All zero-denominator cases report 0 and are flagged in the
//! report rather than dropped, so aggregation never divides by zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::UserId;
use crate::error::{Error, Result};
use crate::simulator::{EventPayload, Transcript};

/// What R in AP@k = (1/R) Σ prefix-precisions counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApDenominator {
    /// Hits among the shown items; per-turn AP@k = 1 stays achievable.
    #[default]
    ShownHits,
    /// min(k, look-ahead positives remaining when the list was shown).
    LookaheadPositives,
}

/// Metrics for one dialogue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    #[serde(rename = "DT")]
    pub dt: u64,
    #[serde(rename = "RT")]
    pub rt: u64,
    pub successes: u64,
    #[serde(rename = "DSR")]
    pub dsr: f64,
    #[serde(rename = "RSR")]
    pub rsr: f64,
    #[serde(rename = "AP_k_values")]
    pub ap_k_values: Vec<f64>,
    #[serde(rename = "AP_k_DT")]
    pub ap_k_dt: f64,
    #[serde(rename = "AP_k_RT")]
    pub ap_k_rt: f64,
}

/// Unweighted means over test users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    #[serde(rename = "DT")]
    pub dt: f64,
    #[serde(rename = "DSR")]
    pub dsr: f64,
    #[serde(rename = "RT")]
    pub rt: f64,
    #[serde(rename = "RSR")]
    pub rsr: f64,
    #[serde(rename = "AP_k_DT")]
    pub ap_k_dt: f64,
    #[serde(rename = "AP_k_RT")]
    pub ap_k_rt: f64,
}

/// Per-user metrics plus their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_user: BTreeMap<UserId, UserMetrics>,
    pub aggregate: AggregateMetrics,
    /// Users whose dialogue contained no recommendation turn; their RSR
    /// and AP_k_RT are reported as 0 by convention.
    pub zero_rt_users: Vec<UserId>,
}

/// AP@k over a hit vector of at most `k` shown items, with R = number of
/// hits among them; 0 when there are none.
pub fn compute_ap_at_k(hits: &[bool], k: usize) -> Result<f64> {
    let (sum, found) = prefix_precision_sum(hits, k)?;
    if found == 0 {
        return Ok(0.0);
    }
    Ok(sum / found as f64)
}

/// AP@k with an explicit denominator `r` (the look-ahead variant).
pub fn compute_ap_at_k_with_r(hits: &[bool], k: usize, r: usize) -> Result<f64> {
    let (sum, found) = prefix_precision_sum(hits, k)?;
    if found > r {
        return Err(Error::validation(format!(
            "{found} hits exceed denominator {r}"
        )));
    }
    if r == 0 {
        return Ok(0.0);
    }
    Ok(sum / r as f64)
}

fn prefix_precision_sum(hits: &[bool], k: usize) -> Result<(f64, usize)> {
    if k == 0 {
        return Err(Error::validation("k must be positive".to_owned()));
    }
    if hits.len() > k {
        return Err(Error::validation(format!(
            "{} shown items exceed k = {k}",
            hits.len()
        )));
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (rank0, hit) in hits.iter().enumerate() {
        if *hit {
            found += 1;
            sum += found as f64 / (rank0 + 1) as f64;
        }
    }
    Ok((sum, found))
}

/// Score one transcript.
pub fn score_transcript(
    transcript: &Transcript,
    k: usize,
    denominator: ApDenominator,
) -> Result<UserMetrics> {
    let dt = transcript.events.len() as u64;
    if dt == 0 {
        return Err(Error::validation(format!(
            "transcript for '{}' has no events",
            transcript.user_id
        )));
    }
    let mut successes = 0u64;
    let mut ap_k_values = Vec::new();
    for event in &transcript.events {
        let EventPayload::Recommendations {
            items,
            hits,
            lookahead_positives,
        } = &event.payload
        else {
            continue;
        };
        if hits.len() != items.len() {
            return Err(Error::validation(format!(
                "turn {}: {} hit flags for {} items",
                event.turn_index,
                hits.len(),
                items.len()
            )));
        }
        successes += hits.iter().filter(|h| **h).count() as u64;
        let ap = match denominator {
            ApDenominator::ShownHits => compute_ap_at_k(hits, k)?,
            ApDenominator::LookaheadPositives => {
                compute_ap_at_k_with_r(hits, k, k.min(*lookahead_positives))?
            }
        };
        ap_k_values.push(ap);
    }
    let rt = ap_k_values.len() as u64;
    let ap_sum: f64 = ap_k_values.iter().sum();
    let per_rt = |num: f64| if rt == 0 { 0.0 } else { num / rt as f64 };
    Ok(UserMetrics {
        dt,
        rt,
        successes,
        dsr: successes as f64 / dt as f64,
        rsr: per_rt(successes as f64),
        ap_k_dt: ap_sum / dt as f64,
        ap_k_rt: per_rt(ap_sum),
        ap_k_values,
    })
}

/// Arithmetic mean of each metric over users.
pub fn aggregate(per_user: &BTreeMap<UserId, UserMetrics>) -> Result<AggregateMetrics> {
    if per_user.is_empty() {
        return Err(Error::validation("no users to aggregate".to_owned()));
    }
    let n = per_user.len() as f64;
    let mean = |f: fn(&UserMetrics) -> f64| per_user.values().map(f).sum::<f64>() / n;
    Ok(AggregateMetrics {
        dt: mean(|m| m.dt as f64),
        dsr: mean(|m| m.dsr),
        rt: mean(|m| m.rt as f64),
        rsr: mean(|m| m.rsr),
        ap_k_dt: mean(|m| m.ap_k_dt),
        ap_k_rt: mean(|m| m.ap_k_rt),
    })
}

/// Assemble the full report, flagging zero-RT users.
pub fn build_report(per_user: BTreeMap<UserId, UserMetrics>) -> Result<MetricsReport> {
    let aggregate = aggregate(&per_user)?;
    let zero_rt_users = per_user
        .iter()
        .filter(|(_, m)| m.rt == 0)
        .map(|(u, _)| u.clone())
        .collect();
    Ok(MetricsReport {
        per_user,
        aggregate,
        zero_rt_users,
    })
}
