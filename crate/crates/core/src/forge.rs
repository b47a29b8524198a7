//! Preference pairs for DPO: curated positives against sampled generations
//! (stage 1) and against synthetically violated copies (stage 2).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{validate, ValidationThresholds};
use crate::gateway::{Gateway, GenerationParams};
use crate::geometry::{containment_violation, footprint, overlap_area, polygon_centroid, FootprintMode, Point2};
use crate::jsonl::{self, JsonlError};
use crate::prompt::{build_generation_prompt, format_completion, parse_completion, parse_completion_for_task, PromptError};
use crate::scene::{Layout, SceneRecord, TaskSpec};

/// Overlap injected between two footprints, as a fraction of the smaller one.
pub const OVERLAP_FRACTION: f64 = 0.25;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("no object lies fully inside the floor")]
    NoEligibleObject,
    #[error("overlap injection needs at least two objects")]
    TooFewObjects,
    #[error("no object pair can reach the target overlap")]
    NoFeasibleOverlap,
    #[error("log-probabilities must be finite")]
    NonFinite,
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("mix must lie in [0, 1], got {0}")]
    InvalidMix(f64),
    #[error("magnitude must be finite and nonnegative, got {0}")]
    InvalidMagnitude(f64),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("record {index}: {message}")]
    Import { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stage1,
    Stage2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    OutOfBounds,
    Overlap,
}

impl Violation {
    pub fn as_str(self) -> &'static str {
        match self {
            Violation::OutOfBounds => "out_of_bounds",
            Violation::Overlap => "overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub task: TaskSpec,
    pub positive: Layout,
    pub negative: Layout,
    pub stage: Stage,
    #[serde(default)]
    pub violation_tags: Vec<Violation>,
    #[serde(default)]
    pub positive_reasoning: String,
    #[serde(default)]
    pub negative_reasoning: String,
}

/// A positive or sample that produced no pair, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipLog {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairBatch {
    pub pairs: Vec<PreferencePair>,
    pub skipped: Vec<SkipLog>,
}

fn task_for(record: &SceneRecord) -> Result<TaskSpec, String> {
    TaskSpec::from_layout(&record.layout, record.semantic_summary.clone().unwrap_or_default()).map_err(|e| e.to_string())
}

/// Samples `k` completions per positive and pairs every parseable one,
/// as the rejected side, with the curated positive.
pub async fn make_stage1_pairs(
    positives: &[SceneRecord],
    gateway: &Gateway,
    params: &GenerationParams,
    k: usize,
) -> PairBatch {
    let mut batch = PairBatch::default();
    let mut jobs = Vec::new();
    let mut bundles = Vec::new();
    for record in positives {
        let skip = |reason: String| SkipLog {
            scene_id: record.scene_id.clone(),
            sample: None,
            reason,
        };
        let task = match task_for(record) {
            Ok(t) => t,
            Err(e) => {
                batch.skipped.push(skip(format!("cannot derive task: {e}")));
                continue;
            }
        };
        if !validate(&record.layout, &ValidationThresholds::forge()).usable {
            batch.skipped.push(skip("positive fails validation".into()));
            continue;
        }
        let bundle = match build_generation_prompt(&task) {
            Ok(b) => b,
            Err(e) => {
                batch.skipped.push(skip(e.to_string()));
                continue;
            }
        };
        for sample in 0..k {
            bundles.push(bundle.clone());
            jobs.push((record, task.clone(), sample));
        }
    }
    let completions = gateway.complete_batch(&bundles, params).await;
    for ((record, task, sample), completion) in jobs.into_iter().zip(completions) {
        let parsed = completion
            .map_err(|e| e.to_string())
            .and_then(|text| parse_completion_for_task(&text, &task).map_err(|e| e.to_string()));
        match parsed {
            Ok(p) => batch.pairs.push(PreferencePair {
                task,
                positive: record.layout.clone(),
                negative: p.layout,
                stage: Stage::Stage1,
                violation_tags: Vec::new(),
                positive_reasoning: record.semantic_summary.clone().unwrap_or_default().trim().to_string(),
                negative_reasoning: p.reasoning.trim().to_string(),
            }),
            Err(reason) => {
                tracing::info!(scene = %record.scene_id, sample, %reason, "skipping stage-1 sample");
                batch.skipped.push(SkipLog {
                    scene_id: record.scene_id.clone(),
                    sample: Some(sample),
                    reason,
                });
            }
        }
    }
    batch
}

fn violation_of(layout: &Layout, i: usize) -> f64 {
    let o = &layout.objects[i];
    containment_violation(&footprint(&o.placement, &o.size, FootprintMode::Oriented), &layout.floor)
}

fn moved(layout: &Layout, i: usize, offset: Point2) -> Layout {
    let mut out = layout.clone();
    let p = &mut out.objects[i].placement;
    *p = p.translated(offset.x, offset.y);
    out
}

/// Pushes one object, chosen uniformly among those fully inside the floor,
/// radially outward until it crosses the boundary, then `magnitude` further.
pub fn inject_out_of_bounds(layout: &Layout, seed: u64, magnitude: f64) -> Result<Layout, ForgeError> {
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(ForgeError::InvalidMagnitude(magnitude));
    }
    let eligible: Vec<usize> = (0..layout.objects.len()).filter(|&i| violation_of(layout, i) == 0.0).collect();
    if eligible.is_empty() {
        return Err(ForgeError::NoEligibleObject);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = eligible[rng.gen_range(0..eligible.len())];
    let centroid = polygon_centroid(&layout.floor.polygon()).map_err(|_| ForgeError::NoEligibleObject)?;
    let center = layout.objects[i].placement.position.ground();
    let mut dir = center.sub(centroid);
    if dir.norm() < 1e-9 {
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        dir = Point2::new(a.cos(), a.sin());
    }
    let dir = dir.scale(1.0 / dir.norm());
    let violates = |t: f64| violation_of(&moved(layout, i, dir.scale(t)), i) > 0.0;
    let (mut lo, mut hi) = (0.0, 0.05);
    while !violates(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(ForgeError::NoEligibleObject);
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if violates(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(moved(layout, i, dir.scale(hi + magnitude)))
}

/// Slides one object toward another's center until their footprints share
/// more than a quarter of the smaller area. The mover takes the target's
/// rotation (or that plus a quarter turn) when its own cannot get there.
pub fn inject_overlap(layout: &Layout, seed: u64) -> Result<Layout, ForgeError> {
    let n = layout.objects.len();
    if n < 2 {
        return Err(ForgeError::TooFewObjects);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let first = pairs.remove(rng.gen_range(0..pairs.len()));
    pairs.shuffle(&mut rng);
    pairs.insert(0, first);
    for (a, b) in pairs {
        if let Some(out) = overlap_pair(layout, a, b) {
            return Ok(out);
        }
    }
    Err(ForgeError::NoFeasibleOverlap)
}

fn overlap_pair(layout: &Layout, a: usize, b: usize) -> Option<Layout> {
    let (oa, ob) = (&layout.objects[a], &layout.objects[b]);
    let rb = footprint(&ob.placement, &ob.size, FootprintMode::Oriented);
    let target = OVERLAP_FRACTION * oa.size.footprint_area().min(ob.size.footprint_area());
    let start = oa.placement.position.ground();
    let delta = ob.placement.position.ground().sub(start);
    let rotations = [
        oa.placement.rotation(),
        ob.placement.rotation(),
        ob.placement.rotation() + std::f64::consts::FRAC_PI_2,
    ];
    let overlap_at = |rotation: f64, s: f64| {
        let p = oa.placement.with_rotation(rotation).translated(delta.x * s, delta.y * s);
        overlap_area(&footprint(&p, &oa.size, FootprintMode::Oriented), &rb)
    };
    let rotation = rotations.into_iter().find(|&r| overlap_at(r, 1.0) > target)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    if overlap_at(rotation, 0.0) > target {
        hi = 0.0;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if overlap_at(rotation, mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let mut out = layout.clone();
    let p = &mut out.objects[a].placement;
    *p = p.with_rotation(rotation).translated(delta.x * hi, delta.y * hi);
    Some(out)
}

/// One stage-2 pair per positive. `mix` is the fraction built with the
/// overlap injector; the rest use the out-of-bounds injector.
pub fn synth_stage2_pairs(positives: &[SceneRecord], seed: u64, mix: f64, magnitude: f64) -> Result<PairBatch, ForgeError> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(ForgeError::InvalidMix(mix));
    }
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(ForgeError::InvalidMagnitude(magnitude));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = positives.len();
    let n_overlap = (mix * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut kinds = vec![Violation::OutOfBounds; n];
    for &i in &order[..n_overlap] {
        kinds[i] = Violation::Overlap;
    }
    let item_seeds: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let thresholds = ValidationThresholds::forge();
    let mut batch = PairBatch::default();
    for (i, record) in positives.iter().enumerate() {
        let skip = |reason: String| SkipLog {
            scene_id: record.scene_id.clone(),
            sample: None,
            reason,
        };
        if !validate(&record.layout, &thresholds).usable {
            batch.skipped.push(skip("positive fails validation".into()));
            continue;
        }
        let task = match task_for(record) {
            Ok(t) => t,
            Err(e) => {
                batch.skipped.push(skip(format!("cannot derive task: {e}")));
                continue;
            }
        };
        let primary = kinds[i];
        let other = match primary {
            Violation::Overlap => Violation::OutOfBounds,
            Violation::OutOfBounds => Violation::Overlap,
        };
        let other_allowed = 0.0 < mix && mix < 1.0;
        let inject = |kind: Violation| match kind {
            Violation::Overlap => inject_overlap(&record.layout, item_seeds[i]),
            Violation::OutOfBounds => inject_out_of_bounds(&record.layout, item_seeds[i], magnitude),
        };
        let attempt = match inject(primary) {
            Ok(l) => Ok((primary, l)),
            Err(e) if other_allowed => inject(other).map(|l| (other, l)).map_err(|e2| format!("{e}; {e2}")),
            Err(e) => Err(e.to_string()),
        };
        match attempt {
            Ok((kind, negative)) => {
                if validate(&negative, &thresholds).usable {
                    batch.skipped.push(skip(format!("{} injection did not invalidate the layout", kind.as_str())));
                    continue;
                }
                batch.pairs.push(PreferencePair {
                    task,
                    positive: record.layout.clone(),
                    negative,
                    stage: Stage::Stage2,
                    violation_tags: vec![kind],
                    positive_reasoning: record.semantic_summary.clone().unwrap_or_default().trim().to_string(),
                    negative_reasoning: String::new(),
                });
            }
            Err(reason) => {
                tracing::info!(scene = %record.scene_id, %reason, "skipping stage-2 positive");
                batch.skipped.push(skip(reason));
            }
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoParams {
    pub beta: f64,
}

/// Per-pair DPO loss in minimization form:
/// `-ln sigmoid(beta * ((pos_policy - pos_ref) - (neg_policy - neg_ref)))`.
pub fn dpo_loss(
    lp_pos_policy: f64,
    lp_neg_policy: f64,
    lp_pos_ref: f64,
    lp_neg_ref: f64,
    params: &DpoParams,
) -> Result<f64, ForgeError> {
    if !(params.beta.is_finite() && params.beta > 0.0) {
        return Err(ForgeError::InvalidBeta(params.beta));
    }
    if ![lp_pos_policy, lp_neg_policy, lp_pos_ref, lp_neg_ref].iter().all(|v| v.is_finite()) {
        return Err(ForgeError::NonFinite);
    }
    let z = params.beta * ((lp_pos_policy - lp_pos_ref) - (lp_neg_policy - lp_neg_ref));
    if !z.is_finite() {
        return Err(ForgeError::NonFinite);
    }
    // softplus(-z), arranged so neither branch overflows.
    Ok(if z >= 0.0 { (-z).exp().ln_1p() } else { -z + z.exp().ln_1p() })
}

/// One line of the pair export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub task: TaskSpec,
    pub prompt_text: String,
    pub chosen: String,
    pub rejected: String,
    pub stage: Stage,
    #[serde(default)]
    pub tags: Vec<Violation>,
}

impl PairRecord {
    pub fn from_pair(pair: &PreferencePair) -> Result<Self, ForgeError> {
        Ok(Self {
            task: pair.task.clone(),
            prompt_text: build_generation_prompt(&pair.task)?.full_text(),
            chosen: format_completion(&pair.positive_reasoning, &pair.positive),
            rejected: format_completion(&pair.negative_reasoning, &pair.negative),
            stage: pair.stage,
            tags: pair.violation_tags.clone(),
        })
    }

    pub fn to_pair(&self) -> Result<PreferencePair, String> {
        let chosen = parse_completion(&self.chosen).map_err(|e| format!("chosen: {e}"))?;
        let rejected = parse_completion(&self.rejected).map_err(|e| format!("rejected: {e}"))?;
        Ok(PreferencePair {
            task: self.task.clone(),
            positive: chosen.layout,
            negative: rejected.layout,
            stage: self.stage,
            violation_tags: self.tags.clone(),
            positive_reasoning: chosen.reasoning,
            negative_reasoning: rejected.reasoning,
        })
    }
}

pub fn export_pairs(pairs: &[PreferencePair], path: &Path) -> Result<(), ForgeError> {
    let records = pairs.iter().map(PairRecord::from_pair).collect::<Result<Vec<_>, _>>()?;
    jsonl::write_path(path, &records)?;
    Ok(())
}

pub fn import_pairs(path: &Path) -> Result<Vec<PreferencePair>, ForgeError> {
    let records: Vec<PairRecord> = jsonl::read_path(path)?;
    records
        .iter()
        .enumerate()
        .map(|(index, r)| r.to_pair().map_err(|message| ForgeError::Import { index: index + 1, message }))
        .collect()
}
