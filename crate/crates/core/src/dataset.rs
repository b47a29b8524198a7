//! Scene ingestion and curation: convention alignment, recentering, the
//! filtering rules, corpus statistics and seeded train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, polygon_centroid, FootprintMode, GeometryError, OrientedRect2D, Point2};
use crate::scene::{
    tokens, BoxSize, FloorPlan, Layout, PlacedObject, Placement, Point3, RoomType, SceneError,
    SceneRecord, SceneSource, TaskSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("floor polygon has zero area")]
    Degenerate,
    #[error("split plan asks for {requested} {room} scenes but only {available} exist")]
    InsufficientData {
        room: RoomType,
        requested: usize,
        available: usize,
    },
    #[error("scene `{scene_id}`: {source}")]
    Scene {
        scene_id: String,
        #[source]
        source: SceneError,
    },
    #[error("invalid config: {0}")]
    Config(String),
}

impl From<GeometryError> for DatasetError {
    fn from(_: GeometryError) -> Self {
        DatasetError::Degenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpAxis {
    YUp,
    ZUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationUnit {
    Radians,
    Degrees,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginConvention {
    FloorCorner,
    FloorCenter,
    Unknown,
}

/// How a source dataset encodes axes and rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceConvention {
    pub up_axis: UpAxis,
    pub rotation_unit: RotationUnit,
    /// Add π to every rotation (opposite ground-plane rotation sense).
    pub rotation_flip: bool,
    pub origin: OriginConvention,
}

impl SourceConvention {
    pub const CANONICAL: SourceConvention = SourceConvention {
        up_axis: UpAxis::ZUp,
        rotation_unit: RotationUnit::Radians,
        rotation_flip: false,
        origin: OriginConvention::FloorCenter,
    };

    /// 3D-Front exports: y-up, radians, floor center unknown.
    pub const THREE_D_FRONT: SourceConvention = SourceConvention {
        up_axis: UpAxis::YUp,
        rotation_unit: RotationUnit::Radians,
        rotation_flip: false,
        origin: OriginConvention::Unknown,
    };

    /// Holodeck scenes: y-up, degrees, opposite rotation sense, origin at a floor corner.
    pub const HOLODECK: SourceConvention = SourceConvention {
        up_axis: UpAxis::YUp,
        rotation_unit: RotationUnit::Degrees,
        rotation_flip: true,
        origin: OriginConvention::FloorCorner,
    };

    pub fn default_for(source: SceneSource) -> SourceConvention {
        match source {
            SceneSource::ThreeDFront => Self::THREE_D_FRONT,
            SceneSource::HolodeckSynth => Self::HOLODECK,
            SceneSource::Generated => Self::CANONICAL,
        }
    }
}

/// Box size in a source file: a `[x, y, z]` extent in the source's axes or
/// named fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceSize {
    Extent([f64; 3]),
    Named {
        width: f64,
        depth: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceObject {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub description: String,
    pub size: SourceSize,
    /// Position in the source's axes.
    pub position: [f64; 3],
    /// Rotation about the source's up axis in the source's unit.
    pub rotation: f64,
}

/// A scene as it appears in a source dataset, before alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScene {
    pub scene_id: String,
    pub room_type: RoomType,
    /// Ground-plane floor vertices: `[x, y]` pairs, or 3D points in the source's axes.
    pub floor: Vec<Vec<f64>>,
    pub objects: Vec<SourceObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_summary: Option<String>,
}

impl From<&SceneRecord> for SourceScene {
    /// A canonical record viewed as a z-up, radians source scene.
    fn from(r: &SceneRecord) -> Self {
        SourceScene {
            scene_id: r.scene_id.clone(),
            room_type: r.layout.room_type,
            floor: r.layout.floor.vertices().iter().map(|p| vec![p.x, p.y]).collect(),
            objects: r
                .layout
                .objects
                .iter()
                .map(|o| {
                    let p = o.placement.position;
                    SourceObject {
                        instance_id: Some(o.instance_id.clone()),
                        description: o.description.clone(),
                        size: SourceSize::Named {
                            width: o.size.width,
                            depth: o.size.depth,
                            height: o.size.height,
                        },
                        position: [p.x, p.y, p.z],
                        rotation: o.placement.rotation(),
                    }
                })
                .collect(),
            semantic_summary: r.semantic_summary.clone(),
        }
    }
}

/// Converts a source scene to canonical z-up meters and radians.
///
/// y-up positions `(x, y, z)` become `(x, z, y)`; `[x, y, z]` extents become
/// width `x`, depth `z`, height `y`. Degrees are converted to radians, then
/// π is added when the convention flips rotations.
pub fn convert_convention(
    scene: &SourceScene,
    source: SceneSource,
    conv: &SourceConvention,
) -> Result<SceneRecord, DatasetError> {
    let err = |source_err: SceneError| DatasetError::Scene {
        scene_id: scene.scene_id.clone(),
        source: source_err,
    };
    let ground = |v: [f64; 3]| match conv.up_axis {
        UpAxis::YUp => Point3::new(v[0], v[2], v[1]),
        UpAxis::ZUp => Point3::new(v[0], v[1], v[2]),
    };
    let floor_pts = scene
        .floor
        .iter()
        .map(|v| match v.as_slice() {
            [x, y] => Ok(Point2::new(*x, *y)),
            [a, b, c] => Ok(ground([*a, *b, *c]).ground()),
            _ => Err(err(SceneError::InvalidFloor(format!(
                "vertex with {} components",
                v.len()
            )))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let floor = FloorPlan::new(floor_pts).map_err(err)?;
    let mut objects = Vec::with_capacity(scene.objects.len());
    for (i, o) in scene.objects.iter().enumerate() {
        let size = match (o.size, conv.up_axis) {
            (SourceSize::Named { width, depth, height }, _) => BoxSize::new(width, depth, height),
            (SourceSize::Extent([x, y, z]), UpAxis::YUp) => BoxSize::new(x, z, y),
            (SourceSize::Extent([x, y, z]), UpAxis::ZUp) => BoxSize::new(x, y, z),
        }
        .map_err(err)?;
        let mut rotation = match conv.rotation_unit {
            RotationUnit::Radians => o.rotation,
            RotationUnit::Degrees => o.rotation.to_radians(),
        };
        if conv.rotation_flip {
            rotation += PI;
        }
        let id = o
            .instance_id
            .clone()
            .unwrap_or_else(|| format!("{}_{i}", crate::scene::slug(&o.description)));
        objects.push(PlacedObject {
            instance_id: id,
            description: o.description.clone(),
            size,
            asset_id: None,
            placement: Placement::new(ground(o.position), rotation),
        });
    }
    let layout = Layout::new(scene.room_type, floor, objects).map_err(err)?;
    Ok(SceneRecord {
        scene_id: scene.scene_id.clone(),
        source,
        semantic_summary: scene.semantic_summary.clone(),
        layout,
    })
}

/// Inverse of [`convert_convention`]: writes a canonical record in a
/// source's axes and rotation encoding. Extents are emitted as `[x, y, z]`.
pub fn export_convention(record: &SceneRecord, conv: &SourceConvention) -> SourceScene {
    let axes = |p: Point3| match conv.up_axis {
        UpAxis::YUp => [p.x, p.z, p.y],
        UpAxis::ZUp => [p.x, p.y, p.z],
    };
    let objects = record
        .layout
        .objects
        .iter()
        .map(|o| {
            let s = o.size;
            let mut rotation = o.placement.rotation();
            if conv.rotation_flip {
                rotation -= PI;
            }
            if conv.rotation_unit == RotationUnit::Degrees {
                rotation = rotation.to_degrees();
            }
            SourceObject {
                instance_id: Some(o.instance_id.clone()),
                description: o.description.clone(),
                size: SourceSize::Extent(match conv.up_axis {
                    UpAxis::YUp => [s.width, s.height, s.depth],
                    UpAxis::ZUp => [s.width, s.depth, s.height],
                }),
                position: axes(o.placement.position),
                rotation,
            }
        })
        .collect();
    SourceScene {
        scene_id: record.scene_id.clone(),
        room_type: record.layout.room_type,
        floor: record
            .layout
            .floor
            .vertices()
            .iter()
            .map(|v| axes(Point3::new(v.x, v.y, 0.0)).to_vec())
            .collect(),
        objects,
        semantic_summary: record.semantic_summary.clone(),
    }
}

/// Translates floor and objects so the floor's area centroid is the origin.
pub fn recenter(record: &SceneRecord) -> Result<SceneRecord, DatasetError> {
    let c = polygon_centroid(&record.layout.floor.polygon())?;
    let offset = Point2::new(-c.x, -c.y);
    let mut out = record.clone();
    out.layout.floor = record.layout.floor.translated(offset);
    for o in &mut out.layout.objects {
        o.placement = o.placement.translated(offset.x, offset.y);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Objects with a smaller footprint (m²) are dropped.
    pub min_footprint_area: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            min_footprint_area: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub scene_id: String,
    pub dropped_small_objects: Vec<String>,
}

/// Convert, drop small objects, recenter.
pub fn ingest_scene(
    scene: &SourceScene,
    source: SceneSource,
    conv: &SourceConvention,
    opts: &IngestOptions,
) -> Result<(SceneRecord, IngestReport), DatasetError> {
    let mut record = convert_convention(scene, source, conv)?;
    let (kept, dropped): (Vec<_>, Vec<_>) = record
        .layout
        .objects
        .drain(..)
        .partition(|o| o.size.footprint_area() >= opts.min_footprint_area);
    record.layout.objects = kept;
    let record = recenter(&record)?;
    let report = IngestReport {
        scene_id: record.scene_id.clone(),
        dropped_small_objects: dropped.into_iter().map(|o| o.instance_id).collect(),
    };
    Ok((record, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    UnderPopulated,
    Clustered,
    CountMismatch,
    OrientationSuspect,
}

impl FilterReason {
    /// Advisory reasons flag a scene for inspection without rejecting it.
    pub fn is_advisory(self) -> bool {
        matches!(self, FilterReason::Clustered | FilterReason::OrientationSuspect)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub accepted: bool,
    pub reasons: Vec<FilterReason>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterRules {
    pub min_objects: BTreeMap<RoomType, usize>,
    /// Dispersion ratio below which a scene is flagged as clustered.
    pub clustering_threshold: f64,
    /// Reach of a chair's facing ray when looking for a table, in meters.
    pub chair_table_range: f64,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            min_objects: BTreeMap::from([
                (RoomType::Bedroom, 6),
                (RoomType::LivingRoom, 6),
                (RoomType::Kitchen, 3),
                (RoomType::Bathroom, 2),
            ]),
            clustering_threshold: 0.25,
            chair_table_range: 1.5,
        }
    }
}

fn is_chair(description: &str) -> bool {
    tokens(description).iter().any(|t| t == "chair" || t == "chairs")
}

fn is_table(description: &str) -> bool {
    tokens(description)
        .iter()
        .any(|t| t == "table" || t == "desk" || t == "tables" || t == "desks")
}

/// Does the ray `origin + t·dir`, `0 ≤ t ≤ range`, touch `rect`?
fn ray_hits_rect(origin: Point2, dir: Point2, range: f64, rect: &OrientedRect2D) -> bool {
    let o = origin.sub(rect.center).rotate(-rect.angle);
    let d = dir.rotate(-rect.angle);
    let (mut t0, mut t1) = (0.0f64, range);
    for (oc, dc, half) in [(o.x, d.x, rect.half_width), (o.y, d.y, rect.half_depth)] {
        if dc.abs() < 1e-15 {
            if oc.abs() > half {
                return false;
            }
        } else {
            let (a, b) = ((-half - oc) / dc, (half - oc) / dc);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Mean object-to-centroid distance over the floor circumradius.
fn dispersion_ratio(layout: &Layout) -> Option<f64> {
    let n = layout.objects.len();
    if n < 2 {
        return None;
    }
    let pts: Vec<Point2> = layout.objects.iter().map(|o| o.placement.position.ground()).collect();
    let mean = pts.iter().fold(Point2::default(), |a, p| a.add(*p)).scale(1.0 / n as f64);
    let spread = pts.iter().map(|p| p.distance(mean)).sum::<f64>() / n as f64;
    let center = polygon_centroid(&layout.floor.polygon()).ok()?;
    let radius = layout
        .floor
        .vertices()
        .iter()
        .map(|v| v.distance(center))
        .fold(0.0, f64::max);
    (radius > 0.0).then(|| spread / radius)
}

/// Applies the curation rules to one scene.
///
/// Rejects under-populated scenes and, when `expected` is given, scenes
/// whose instance count differs from the task's total quantity. Clustering
/// and chair orientation are advisory flags.
pub fn filter_scene(record: &SceneRecord, rules: &FilterRules, expected: Option<&TaskSpec>) -> FilterVerdict {
    let layout = &record.layout;
    let count = layout.objects.len();
    let min = rules.min_objects.get(&layout.room_type).copied().unwrap_or(0);
    let mut reasons = Vec::new();
    let mut metrics = BTreeMap::new();
    metrics.insert("object_count".to_string(), count as f64);
    metrics.insert("min_objects".to_string(), min as f64);

    if count < min {
        reasons.push(FilterReason::UnderPopulated);
    }
    if let Some(ratio) = dispersion_ratio(layout) {
        metrics.insert("dispersion_ratio".to_string(), ratio);
        if ratio < rules.clustering_threshold {
            reasons.push(FilterReason::Clustered);
        }
    }
    if let Some(task) = expected {
        let want = task.total_instances();
        metrics.insert("expected_objects".to_string(), want as f64);
        if want != count {
            reasons.push(FilterReason::CountMismatch);
        }
    }

    let tables: Vec<OrientedRect2D> = layout
        .objects
        .iter()
        .filter(|o| is_table(&o.description))
        .map(|o| geometry::footprint(&o.placement, &o.size, FootprintMode::Oriented))
        .collect();
    if !tables.is_empty() {
        let suspects = layout
            .objects
            .iter()
            .filter(|o| is_chair(&o.description))
            .filter(|o| {
                let origin = o.placement.position.ground();
                let dir = o.placement.facing();
                !tables
                    .iter()
                    .any(|t| ray_hits_rect(origin, dir, rules.chair_table_range, t))
            })
            .count();
        metrics.insert("orientation_suspects".to_string(), suspects as f64);
        if suspects > 0 {
            reasons.push(FilterReason::OrientationSuspect);
        }
    }

    reasons.sort();
    let accepted = reasons.iter().all(|r| r.is_advisory());
    FilterVerdict {
        accepted,
        reasons,
        metrics,
    }
}

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    /// Quartiles by linear interpolation between order statistics.
    pub fn of(values: &[usize]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Summary {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomStats {
    pub scenes: usize,
    pub fraction: f64,
    pub object_counts: Option<Summary>,
    pub distinct_descriptions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub scenes: usize,
    pub total_objects: usize,
    pub rooms: BTreeMap<RoomType, RoomStats>,
    pub sources: BTreeMap<String, usize>,
    pub object_counts: Option<Summary>,
    pub distinct_descriptions: usize,
}

/// Single-pass corpus statistics.
pub fn corpus_stats<'a>(corpus: impl IntoIterator<Item = &'a SceneRecord>) -> CorpusStats {
    let mut counts: Vec<usize> = Vec::new();
    let mut per_room: BTreeMap<RoomType, (Vec<usize>, BTreeSet<String>)> = BTreeMap::new();
    let mut sources: BTreeMap<String, usize> = BTreeMap::new();
    let mut descriptions = BTreeSet::new();
    for r in corpus {
        let n = r.layout.objects.len();
        counts.push(n);
        let entry = per_room.entry(r.layout.room_type).or_default();
        entry.0.push(n);
        for o in &r.layout.objects {
            let d = o.description.trim().to_lowercase();
            entry.1.insert(d.clone());
            descriptions.insert(d);
        }
        let key = serde_json::to_value(r.source)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        *sources.entry(key).or_default() += 1;
    }
    let scenes = counts.len();
    let rooms = per_room
        .into_iter()
        .map(|(room, (c, d))| {
            (
                room,
                RoomStats {
                    scenes: c.len(),
                    fraction: c.len() as f64 / scenes as f64,
                    object_counts: Summary::of(&c),
                    distinct_descriptions: d.len(),
                },
            )
        })
        .collect();
    CorpusStats {
        scenes,
        total_objects: counts.iter().sum(),
        rooms,
        sources,
        object_counts: Summary::of(&counts),
        distinct_descriptions: descriptions.len(),
    }
}

/// Number of test scenes to draw per room type.
pub type SplitPlan = BTreeMap<RoomType, usize>;

/// Parses `bedroom=423,living_room=53`.
pub fn parse_split_plan(s: &str) -> Result<SplitPlan, DatasetError> {
    let mut plan = SplitPlan::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (room, n) = part
            .split_once('=')
            .ok_or_else(|| DatasetError::Config(format!("expected room=count, got `{part}`")))?;
        let room: RoomType = room.parse().map_err(DatasetError::Config)?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|e| DatasetError::Config(format!("bad count in `{part}`: {e}")))?;
        plan.insert(room, n);
    }
    Ok(plan)
}

/// Seeded split drawing exactly `plan[room]` test scenes per room type.
/// Both outputs keep the corpus order.
pub fn split_corpus(
    corpus: &[SceneRecord],
    seed: u64,
    plan: &SplitPlan,
) -> Result<(Vec<SceneRecord>, Vec<SceneRecord>), DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; corpus.len()];
    for (&room, &want) in plan {
        let mut idx: Vec<usize> = corpus
            .iter()
            .enumerate()
            .filter(|(_, r)| r.layout.room_type == room)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < want {
            return Err(DatasetError::InsufficientData {
                room,
                requested: want,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..want] {
            in_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = corpus
        .iter()
        .zip(in_test)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(r, _)| r.clone()).collect(),
        test.into_iter().map(|(r, _)| r.clone()).collect(),
    ))
}

/// Thresholds and per-source conventions, loadable from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub filter: FilterRules,
    pub ingest: IngestOptions,
    pub sources: BTreeMap<String, SourceConvention>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let cfg: Self = toml::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))?;
        Ok(cfg.with_default_minimums())
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))?;
        Ok(cfg.with_default_minimums())
    }

    // A partial `min_objects` table only overrides the rooms it names.
    fn with_default_minimums(mut self) -> Self {
        for (room, n) in FilterRules::default().min_objects {
            self.filter.min_objects.entry(room).or_insert(n);
        }
        self
    }

    /// Configured convention for a source, else the built-in default.
    pub fn convention(&self, source: SceneSource) -> SourceConvention {
        let key = serde_json::to_value(source)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        self.sources
            .get(&key)
            .copied()
            .unwrap_or_else(|| SourceConvention::default_for(source))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObjectSpec, Point3};
    use std::f64::consts::TAU;

    fn obj(id: &str, desc: &str, x: f64, y: f64, w: f64, d: f64, rot: f64) -> PlacedObject {
        PlacedObject::new(
            id,
            desc,
            BoxSize::new(w, d, 0.8).unwrap(),
            Placement::new(Point3::new(x, y, 0.0), rot),
        )
    }

    fn record(room: RoomType, floor: FloorPlan, objects: Vec<PlacedObject>) -> SceneRecord {
        SceneRecord {
            scene_id: "s".into(),
            source: SceneSource::Generated,
            semantic_summary: None,
            layout: Layout::new(room, floor, objects).unwrap(),
        }
    }

    fn spread_objects(n: usize) -> Vec<PlacedObject> {
        (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * TAU;
                obj(&format!("o{i}"), "cabinet", 1.5 * a.cos(), 1.5 * a.sin(), 0.4, 0.4, 0.0)
            })
            .collect()
    }

    #[test]
    fn recenter_square_floor() {
        let floor = FloorPlan::new(vec![
            Point2::new(0., 0.),
            Point2::new(4., 0.),
            Point2::new(4., 4.),
            Point2::new(0., 4.),
        ])
        .unwrap();
        let r = record(RoomType::Bedroom, floor, vec![obj("a", "bed", 1.0, 1.0, 1.0, 1.0, 0.0)]);
        let out = recenter(&r).unwrap();
        assert_eq!(out.layout.objects[0].placement.position, Point3::new(-1.0, -1.0, 0.0));
        let c = polygon_centroid(&out.layout.floor.polygon()).unwrap();
        assert!(c.norm() < 1e-12);
        assert_eq!(recenter(&out).unwrap(), out);
    }

    #[test]
    fn recenter_l_shape_uses_area_centroid() {
        let floor = FloorPlan::new(vec![
            Point2::new(0., 0.),
            Point2::new(2., 0.),
            Point2::new(2., 1.),
            Point2::new(1., 1.),
            Point2::new(1., 2.),
            Point2::new(0., 2.),
        ])
        .unwrap();
        let r = record(RoomType::Bedroom, floor, vec![obj("a", "bed", 0.5, 0.5, 0.2, 0.2, 0.0)]);
        let out = recenter(&r).unwrap();
        let p = out.layout.objects[0].placement.position;
        let shift = 5.0 / 6.0;
        assert!((p.x - (0.5 - shift)).abs() < 1e-12 && (p.y - (0.5 - shift)).abs() < 1e-12);
    }

    fn source_scene(rotation: f64) -> SourceScene {
        SourceScene {
            scene_id: "h1".into(),
            room_type: RoomType::Bedroom,
            floor: vec![vec![0., 0.], vec![4., 0.], vec![4., 4.], vec![0., 4.]],
            objects: vec![SourceObject {
                instance_id: Some("bed_1".into()),
                description: "bed".into(),
                size: SourceSize::Extent([1.8, 0.5, 2.0]),
                position: [1.0, 0.4, 2.0],
                rotation,
            }],
            semantic_summary: None,
        }
    }

    #[test]
    fn holodeck_flip_adds_pi() {
        let conv = SourceConvention {
            rotation_unit: RotationUnit::Radians,
            ..SourceConvention::HOLODECK
        };
        let r = convert_convention(&source_scene(0.5), SceneSource::HolodeckSynth, &conv).unwrap();
        let rot = r.layout.objects[0].placement.rotation();
        assert!((rot - (0.5 + PI)).abs() < 1e-12);
        assert!((rot - 3.6416).abs() < 1e-4);

        let r = convert_convention(&source_scene(PI), SceneSource::HolodeckSynth, &conv).unwrap();
        assert!(r.layout.objects[0].placement.rotation().abs() < 1e-12);
    }

    #[test]
    fn y_up_axis_permutation() {
        let r = convert_convention(&source_scene(0.0), SceneSource::ThreeDFront, &SourceConvention::THREE_D_FRONT)
            .unwrap();
        let o = &r.layout.objects[0];
        assert_eq!(o.placement.position, Point3::new(1.0, 2.0, 0.4));
        assert_eq!(o.size, BoxSize::new(1.8, 2.0, 0.5).unwrap());
    }

    #[test]
    fn degrees_are_converted() {
        let r = convert_convention(&source_scene(90.0), SceneSource::HolodeckSynth, &SourceConvention::HOLODECK)
            .unwrap();
        let rot = r.layout.objects[0].placement.rotation();
        assert!((rot - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn filter_thresholds() {
        let rules = FilterRules::default();
        let big = FloorPlan::rectangle(4.0, 4.0).unwrap();
        let v = filter_scene(&record(RoomType::Bedroom, big.clone(), spread_objects(5)), &rules, None);
        assert!(!v.accepted);
        assert_eq!(v.reasons, vec![FilterReason::UnderPopulated]);
        let v = filter_scene(&record(RoomType::Kitchen, big.clone(), spread_objects(3)), &rules, None);
        assert!(v.accepted, "{v:?}");
        let v = filter_scene(&record(RoomType::Bathroom, big.clone(), spread_objects(1)), &rules, None);
        assert!(!v.accepted);
        let v = filter_scene(&record(RoomType::Bedroom, big, spread_objects(6)), &rules, None);
        assert!(v.accepted);
    }

    #[test]
    fn clustered_is_advisory() {
        let floor = FloorPlan::rectangle(10.0, 10.0).unwrap();
        let objs = (0..6)
            .map(|i| obj(&format!("o{i}"), "cabinet", 0.3 * (i % 3) as f64, 0.3 * (i / 3) as f64, 0.2, 0.2, 0.0))
            .collect();
        let v = filter_scene(&record(RoomType::Bedroom, floor, objs), &FilterRules::default(), None);
        assert!(v.accepted);
        assert_eq!(v.reasons, vec![FilterReason::Clustered]);
    }

    #[test]
    fn count_mismatch_rejects() {
        let floor = FloorPlan::rectangle(4.0, 4.0).unwrap();
        let r = record(RoomType::Kitchen, floor.clone(), spread_objects(3));
        let task = TaskSpec::new("", RoomType::Kitchen, floor, vec![ObjectSpec::new("cabinet", 4, None)]).unwrap();
        let v = filter_scene(&r, &FilterRules::default(), Some(&task));
        assert!(!v.accepted);
        assert_eq!(v.reasons, vec![FilterReason::CountMismatch]);
    }

    #[test]
    fn chair_orientation() {
        let floor = FloorPlan::rectangle(6.0, 6.0).unwrap();
        let mut objs = spread_objects(3);
        objs.push(obj("desk", "writing desk", 0.0, 1.0, 1.2, 0.6, 0.0));
        // Facing +y toward the desk 1 m away.
        objs.push(obj("chair_ok", "office chair", 0.0, 0.0, 0.5, 0.5, 0.0));
        let rules = FilterRules::default();
        let v = filter_scene(&record(RoomType::Kitchen, floor.clone(), objs.clone()), &rules, None);
        assert!(!v.reasons.contains(&FilterReason::OrientationSuspect), "{v:?}");
        // Facing away.
        objs.last_mut().unwrap().placement = Placement::new(Point3::new(0.0, 0.0, 0.0), PI);
        let v = filter_scene(&record(RoomType::Kitchen, floor, objs), &rules, None);
        assert!(v.reasons.contains(&FilterReason::OrientationSuspect));
        assert!(v.accepted);
    }

    #[test]
    fn stats_basics() {
        let empty = corpus_stats(&[]);
        assert_eq!(empty.scenes, 0);
        assert!(empty.object_counts.is_none());

        let floor = FloorPlan::rectangle(4.0, 4.0).unwrap();
        let corpus = vec![
            record(RoomType::Bedroom, floor.clone(), spread_objects(4)),
            record(RoomType::Bedroom, floor.clone(), spread_objects(6)),
            record(RoomType::Kitchen, floor, spread_objects(8)),
        ];
        let s = corpus_stats(&corpus);
        assert_eq!(s.scenes, 3);
        assert!((s.rooms[&RoomType::Bedroom].fraction - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.rooms[&RoomType::Kitchen].fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.object_counts.unwrap().median, 6.0);
        assert_eq!(s.total_objects, 18);
        assert_eq!(s.distinct_descriptions, 1);
    }

    #[test]
    fn split_is_seeded_and_exact() {
        let floor = FloorPlan::rectangle(4.0, 4.0).unwrap();
        let corpus: Vec<SceneRecord> = (0..5)
            .map(|i| {
                let mut r = record(RoomType::Bedroom, floor.clone(), spread_objects(6));
                r.scene_id = format!("s{i}");
                r
            })
            .collect();
        let plan = parse_split_plan("bedroom=2").unwrap();
        let (train, test) = split_corpus(&corpus, 7, &plan).unwrap();
        assert_eq!((train.len(), test.len()), (3, 2));
        assert_eq!(split_corpus(&corpus, 7, &plan).unwrap(), (train, test));
        let too_many = parse_split_plan("bedroom=6").unwrap();
        assert!(matches!(
            split_corpus(&corpus, 7, &too_many),
            Err(DatasetError::InsufficientData { requested: 6, available: 5, .. })
        ));
    }

    #[test]
    fn config_from_toml() {
        let cfg = PipelineConfig::from_toml(
            r#"
            [filter]
            clustering_threshold = 0.3
            [filter.min_objects]
            bedroom = 7
            [ingest]
            min_footprint_area = 0.05
            [sources.holodeck_synth]
            up_axis = "y_up"
            rotation_unit = "radians"
            rotation_flip = true
            origin = "floor_corner"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.filter.clustering_threshold, 0.3);
        assert_eq!(cfg.filter.min_objects[&RoomType::Bedroom], 7);
        assert_eq!(cfg.filter.min_objects[&RoomType::Kitchen], 3);
        assert_eq!(cfg.ingest.min_footprint_area, 0.05);
        assert_eq!(cfg.convention(SceneSource::HolodeckSynth).rotation_unit, RotationUnit::Radians);
        assert_eq!(cfg.convention(SceneSource::ThreeDFront), SourceConvention::THREE_D_FRONT);
    }
}
