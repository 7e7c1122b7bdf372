//! Scoring, threshold calibration, and error metrics.
//!
//! Convention throughout: the attack class is positive and higher scores are
//! more anomalous, so a query is accepted as real when its score falls
//! below the threshold. All rates computed here are fractions in [0, 1];
//! the report layer turns them into percentages.
//!
//! * `eer` sweeps every decision boundary the data can distinguish (the
//!   midpoints between consecutive distinct scores, plus the two infinite
//!   ends) and picks the threshold with the smallest |FAR - FRR|, breaking
//!   ties toward the lower threshold.
//! * `hter` applies a threshold chosen elsewhere (dev) to a scored set
//!   (test), the standard guard against calibrating on the data being
//!   graded.
//! * `roc_auc` integrates the ROC by trapezoid, which credits ties at one
//!   half, the Mann-Whitney convention.

pub mod report;

use crate::dataset::{Dataset, Label, Split};
use crate::error::{Error, Result};
use crate::exec;
use crate::registry::{score_query, Mode, ModelRegistry};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Frame,
    Video,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Frame => "frame",
            Granularity::Video => "video",
        }
    }

    pub fn parse(tok: &str) -> Option<Granularity> {
        match tok {
            "frame" => Some(Granularity::Frame),
            "video" => Some(Granularity::Video),
            _ => None,
        }
    }
}

/// How decision thresholds are chosen from the dev set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// One threshold shared by every client.
    Global,
    /// Each client calibrated on their own dev scores.
    PerClient,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Global => "global",
            PolicyKind::PerClient => "per-client",
        }
    }

    pub fn parse(tok: &str) -> Option<PolicyKind> {
        match tok {
            "global" => Some(PolicyKind::Global),
            "per-client" => Some(PolicyKind::PerClient),
            _ => None,
        }
    }
}

/// The calibrated thresholds themselves; exactly the fields of the active
/// policy exist.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPolicy {
    Global { threshold: f64 },
    PerClient { thresholds: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreItem {
    pub claimed_id: String,
    pub label: Label,
    pub attack_type: Option<String>,
    pub video_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub granularity: Granularity,
    pub items: Vec<ScoreItem>,
}

impl ScoreSet {
    fn ensure_scorable(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.items.is_empty() {
            return Err(Error::Validation("score set is empty".into()));
        }
        let mut reals = Vec::new();
        let mut attacks = Vec::new();
        for it in &self.items {
            if !it.score.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite score for client {} video {}",
                    it.claimed_id, it.video_id
                )));
            }
            match it.label {
                Label::Real => reals.push(it.score),
                Label::Attack => attacks.push(it.score),
            }
        }
        if reals.is_empty() || attacks.is_empty() {
            return Err(Error::Validation(
                "need both real and attack scores to measure error rates".into(),
            ));
        }
        Ok((reals, attacks))
    }
}

/// Scores every record of a split against the registry at frame
/// granularity. Records are scored independently and in parallel; the
/// output preserves record order.
pub fn score_split(registry: &ModelRegistry, split: &Split) -> Result<ScoreSet> {
    let results = exec::par_map(&split.records, |r| {
        score_query(registry, &r.client_id, &r.vector).map(|score| ScoreItem {
            claimed_id: r.client_id.clone(),
            label: r.label,
            attack_type: r.attack_type.clone(),
            video_id: r.video_id.clone(),
            score,
        })
    });
    let mut items = Vec::with_capacity(results.len());
    for r in results {
        items.push(r?);
    }
    Ok(ScoreSet { granularity: Granularity::Frame, items })
}

/// Collapses frame scores into one score per (claimed id, video): the
/// arithmetic mean. Frames of one video must agree on label and attack
/// type; scores are summed in sorted order so frame order cannot perturb
/// the mean even at the last bit.
pub fn fuse_per_video(frames: &ScoreSet) -> Result<ScoreSet> {
    if frames.granularity != Granularity::Frame {
        return Err(Error::Validation("fusion expects frame-level scores".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<&ScoreItem>> = BTreeMap::new();
    for it in &frames.items {
        groups
            .entry((it.claimed_id.clone(), it.video_id.clone()))
            .or_default()
            .push(it);
    }
    let mut items = Vec::with_capacity(groups.len());
    for ((claimed_id, video_id), members) in groups {
        let first = members[0];
        for m in &members[1..] {
            if m.label != first.label || m.attack_type != first.attack_type {
                return Err(Error::DataIntegrity(format!(
                    "video {video_id} claimed by {claimed_id} mixes labels or attack types"
                )));
            }
        }
        let mut scores: Vec<f64> = members.iter().map(|m| m.score).collect();
        scores.sort_by(f64::total_cmp);
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        items.push(ScoreItem {
            claimed_id,
            label: first.label,
            attack_type: first.attack_type.clone(),
            video_id,
            score: mean,
        });
    }
    Ok(ScoreSet { granularity: Granularity::Video, items })
}

fn rates_at(reals: &[f64], attacks: &[f64], t: f64) -> (f64, f64) {
    let fa = attacks.iter().filter(|&&s| s < t).count() as f64 / attacks.len() as f64;
    let fr = reals.iter().filter(|&&s| s >= t).count() as f64 / reals.len() as f64;
    (fa, fr)
}

/// False accept and false reject rates of an externally chosen threshold.
pub fn far_frr(scores: &ScoreSet, threshold: f64) -> Result<(f64, f64)> {
    if threshold.is_nan() {
        return Err(Error::Validation("threshold is NaN".into()));
    }
    let (reals, attacks) = scores.ensure_scorable()?;
    Ok(rates_at(&reals, &attacks, threshold))
}

/// Half total error rate at a threshold calibrated elsewhere.
pub fn hter(scores: &ScoreSet, threshold: f64) -> Result<f64> {
    let (fa, fr) = far_frr(scores, threshold)?;
    Ok(0.5 * (fa + fr))
}

/// Equal error rate and the threshold attaining it.
///
/// Candidates are midpoints between consecutive distinct scores plus the
/// infinite endpoints; the exact balance FAR == FRR may not be attainable
/// on finite data, so the reported EER is the mean of the two rates at the
/// best candidate. One ascending sort plus running counts covers every
/// candidate; equal scores are consumed as a block so no threshold ever
/// splits a tie.
pub fn eer(scores: &ScoreSet) -> Result<(f64, f64)> {
    let (reals, attacks) = scores.ensure_scorable()?;
    let n_r = reals.len() as f64;
    let n_a = attacks.len() as f64;
    let mut tagged: Vec<(f64, bool)> = reals
        .iter()
        .map(|&s| (s, false))
        .chain(attacks.iter().map(|&s| (s, true)))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best_t = f64::NAN;
    let mut best_gap = f64::INFINITY;
    let mut best_rates = (0.0, 0.0);
    // Increasing candidate order plus strict improvement: ties keep the
    // lowest threshold.
    let mut consider = |t: f64, attacks_below: usize, reals_below: usize| {
        let fa = attacks_below as f64 / n_a;
        let fr = (reals.len() - reals_below) as f64 / n_r;
        let gap = (fa - fr).abs();
        if gap < best_gap {
            best_gap = gap;
            best_t = t;
            best_rates = (fa, fr);
        }
    };

    consider(f64::NEG_INFINITY, 0, 0);
    let mut attacks_below = 0usize;
    let mut reals_below = 0usize;
    let mut i = 0;
    while i < tagged.len() {
        let s = tagged[i].0;
        while i < tagged.len() && tagged[i].0 == s {
            if tagged[i].1 {
                attacks_below += 1;
            } else {
                reals_below += 1;
            }
            i += 1;
        }
        let t = if i < tagged.len() { 0.5 * (s + tagged[i].0) } else { f64::INFINITY };
        consider(t, attacks_below, reals_below);
    }
    Ok((best_t, 0.5 * (best_rates.0 + best_rates.1)))
}

/// ROC curve (false positive rate, true positive rate) and its area.
///
/// One point per distinct score threshold, swept from strictest to most
/// permissive, so both coordinates are non-decreasing. The trapezoid area
/// equals the probability a random attack outscores a random real, ties
/// counting one half.
pub fn roc_auc(scores: &ScoreSet) -> Result<(Vec<(f64, f64)>, f64)> {
    let (reals, attacks) = scores.ensure_scorable()?;
    let n_r = reals.len() as f64;
    let n_a = attacks.len() as f64;
    // (score, is_attack) sorted descending by score.
    let mut tagged: Vec<(f64, bool)> = reals
        .iter()
        .map(|&s| (s, false))
        .chain(attacks.iter().map(|&s| (s, true)))
        .collect();
    tagged.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < tagged.len() {
        let s = tagged[i].0;
        while i < tagged.len() && tagged[i].0 == s {
            if tagged[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_r, tp as f64 / n_a));
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1);
    }
    Ok((points, auc))
}

/// Per-client calibration on dev scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PerClientCalibration {
    pub thresholds: BTreeMap<String, f64>,
    pub per_client_eer: BTreeMap<String, f64>,
    /// Pooled error when every client runs at their own threshold: total
    /// false accepts and rejects over the whole set, halved and summed.
    pub aggregate_eer: f64,
}

pub fn per_client_thresholds(dev: &ScoreSet) -> Result<PerClientCalibration> {
    if dev.items.is_empty() {
        return Err(Error::Validation("score set is empty".into()));
    }
    let mut by_client: BTreeMap<String, Vec<&ScoreItem>> = BTreeMap::new();
    for it in &dev.items {
        by_client.entry(it.claimed_id.clone()).or_default().push(it);
    }
    let mut thresholds = BTreeMap::new();
    let mut per_client_eer = BTreeMap::new();
    let mut false_accepts = 0usize;
    let mut false_rejects = 0usize;
    let mut n_attacks = 0usize;
    let mut n_reals = 0usize;
    for (client, items) in &by_client {
        let subset = ScoreSet {
            granularity: dev.granularity,
            items: items.iter().map(|&i| i.clone()).collect(),
        };
        let (t, e) = eer(&subset).map_err(|e| {
            Error::Validation(format!("client {client}: {e}"))
        })?;
        thresholds.insert(client.clone(), t);
        per_client_eer.insert(client.clone(), e);
        for it in items {
            match it.label {
                Label::Attack => {
                    n_attacks += 1;
                    if it.score < t {
                        false_accepts += 1;
                    }
                }
                Label::Real => {
                    n_reals += 1;
                    if it.score >= t {
                        false_rejects += 1;
                    }
                }
            }
        }
    }
    let aggregate_eer = 0.5
        * (false_accepts as f64 / n_attacks as f64 + false_rejects as f64 / n_reals as f64);
    Ok(PerClientCalibration { thresholds, per_client_eer, aggregate_eer })
}

/// Five-number summary of one label's dev scores for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quartiles(scores: &mut Vec<f64>) -> Option<Quartiles> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        let h = (scores.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        scores[lo] + (h - lo as f64) * (scores[hi] - scores[lo])
    };
    Some(Quartiles { min: scores[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: scores[scores.len() - 1] })
}

/// Box-plot style per-client summary of dev scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSummary {
    pub real: Option<Quartiles>,
    pub attack: Option<Quartiles>,
}

pub fn client_summaries(scores: &ScoreSet) -> BTreeMap<String, ClientSummary> {
    let mut reals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut attacks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for it in &scores.items {
        let map = match it.label {
            Label::Real => &mut reals,
            Label::Attack => &mut attacks,
        };
        map.entry(it.claimed_id.clone()).or_default().push(it.score);
    }
    let mut out = BTreeMap::new();
    let clients: Vec<String> = reals.keys().chain(attacks.keys()).cloned().collect();
    for client in clients {
        out.entry(client.clone()).or_insert_with(|| ClientSummary {
            real: reals.get_mut(&client).and_then(quartiles),
            attack: attacks.get_mut(&client).and_then(quartiles),
        });
    }
    out
}

/// Full evaluation result. Rates here are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub granularity: Granularity,
    pub policy: PolicyKind,
    pub thresholds: ThresholdPolicy,
    /// Dev-set EER; under the per-client policy this is the aggregate over
    /// clients running at their own thresholds.
    pub eer_dev: f64,
    /// Test-set HTER at the dev threshold. Absent under the per-client
    /// policy: test subjects are disjoint from dev, so no per-client
    /// threshold applies to them.
    pub hter_test: Option<f64>,
    pub auc_test: f64,
    pub roc_test: Vec<(f64, f64)>,
    pub per_client_eer_dev: Option<BTreeMap<String, f64>>,
    pub summaries: BTreeMap<String, ClientSummary>,
}

/// Scores dev and test, calibrates on dev, grades on test.
pub fn evaluate(
    registry: &ModelRegistry,
    data: &Dataset,
    policy: PolicyKind,
    granularity: Granularity,
) -> Result<EvalReport> {
    let mut dev = score_split(registry, &data.dev)?;
    let mut test = score_split(registry, &data.test)?;
    if granularity == Granularity::Video {
        dev = fuse_per_video(&dev)?;
        test = fuse_per_video(&test)?;
    }
    let (roc_test, auc) = roc_auc(&test)?;
    let summaries = client_summaries(&dev);
    match policy {
        PolicyKind::Global => {
            let (t, e) = eer(&dev)?;
            let h = hter(&test, t)?;
            Ok(EvalReport {
                granularity,
                policy,
                thresholds: ThresholdPolicy::Global { threshold: t },
                eer_dev: 100.0 * e,
                hter_test: Some(100.0 * h),
                auc_test: 100.0 * auc,
                roc_test,
                per_client_eer_dev: None,
                summaries,
            })
        }
        PolicyKind::PerClient => {
            let cal = per_client_thresholds(&dev)?;
            Ok(EvalReport {
                granularity,
                policy,
                thresholds: ThresholdPolicy::PerClient { thresholds: cal.thresholds },
                eer_dev: 100.0 * cal.aggregate_eer,
                hter_test: None,
                auc_test: 100.0 * auc,
                roc_test,
                per_client_eer_dev: Some(
                    cal.per_client_eer.into_iter().map(|(k, v)| (k, 100.0 * v)).collect(),
                ),
                summaries,
            })
        }
    }
}

/// The training-set sizes studied by the sample-size sweep, as fractions of
/// the available frames.
pub const DEFAULT_SWEEP_FRACTIONS: [f64; 7] =
    [1.0 / 100.0, 1.0 / 75.0, 1.0 / 50.0, 1.0 / 20.0, 1.0 / 10.0, 1.0 / 5.0, 1.0];

/// Retrains at each training fraction and evaluates with the global
/// threshold policy, returning `(fraction, report)` pairs in input order.
pub fn sample_size_sweep(
    spec: &crate::registry::DetectorSpec,
    data: &Dataset,
    fractions: &[f64],
    granularity: Granularity,
) -> Result<Vec<(f64, EvalReport)>> {
    if fractions.is_empty() {
        return Err(Error::Validation("sweep needs at least one fraction".into()));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Validation(format!("sweep fraction must be in (0, 1], got {f}")));
        }
    }
    let results = exec::par_map(fractions, |&fraction| {
        let sub_spec = crate::registry::DetectorSpec {
            mode: spec.mode,
            train_fraction: fraction,
            params: spec.params.clone(),
        };
        let registry = crate::registry::train_registry(&sub_spec, data)?;
        let report = evaluate(&registry, data, PolicyKind::Global, granularity)?;
        Ok((fraction, report))
    });
    results.into_iter().collect()
}

/// True when the registry can score every claimed identity in the split;
/// client-specific registries need every dev/test claim enrolled.
pub fn claims_covered(registry: &ModelRegistry, split: &Split) -> bool {
    match registry.spec.mode {
        Mode::ClientIndependent => true,
        Mode::ClientSpecific => split
            .client_ids()
            .iter()
            .all(|id| registry.per_client.contains_key(*id)),
    }
}
