//! Layout validation, sampling success rate, object-goal navigation and
//! top-down SVG rendering.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenerationParams};
use crate::geometry::{containment_violation, footprints, oor, overlap_area, FootprintMode, Point2};
use crate::prompt::{build_generation_prompt, build_judge_prompt, parse_completion_for_task, parse_judge, JudgeError, JudgeScore};
use crate::scene::{angle_difference, normalize_rotation, Layout, RoomType, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationThresholds {
    pub max_pair_overlap: f64,
    pub max_boundary_violation: f64,
    pub require_counts_match: bool,
}

impl Default for ValidationThresholds {
    fn default() -> Self {
        Self {
            max_pair_overlap: 0.01,
            max_boundary_violation: 0.01,
            require_counts_match: false,
        }
    }
}

impl ValidationThresholds {
    /// Near-zero tolerances used when building preference pairs.
    pub fn forge() -> Self {
        Self {
            max_pair_overlap: 1e-6,
            max_boundary_violation: 1e-6,
            require_counts_match: false,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("max_pair_overlap", self.max_pair_overlap),
            ("max_boundary_violation", self.max_boundary_violation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a finite nonnegative number, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub a: String,
    pub b: String,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryViolation {
    pub instance_id: String,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub oor: f64,
    pub pair_overlaps: Vec<PairOverlap>,
    pub boundary_violations: Vec<BoundaryViolation>,
    pub count_match: bool,
    pub usable: bool,
}

pub fn validate(layout: &Layout, t: &ValidationThresholds) -> ValidationReport {
    validate_against(layout, None, t)
}

/// Validates a layout, comparing object counts with `task` when given.
pub fn validate_against(layout: &Layout, task: Option<&TaskSpec>, t: &ValidationThresholds) -> ValidationReport {
    let rects = footprints(layout, FootprintMode::Oriented);
    let mut pair_overlaps = Vec::new();
    for i in 0..rects.len() {
        for j in (i + 1)..rects.len() {
            let area = overlap_area(&rects[i], &rects[j]);
            if area > 0.0 {
                pair_overlaps.push(PairOverlap {
                    a: layout.objects[i].instance_id.clone(),
                    b: layout.objects[j].instance_id.clone(),
                    area,
                });
            }
        }
    }
    let boundary_violations: Vec<BoundaryViolation> = rects
        .iter()
        .zip(&layout.objects)
        .filter_map(|(r, o)| {
            let area = containment_violation(r, &layout.floor);
            (area > 0.0).then(|| BoundaryViolation {
                instance_id: o.instance_id.clone(),
                area,
            })
        })
        .collect();
    let count_match = task.is_none_or(|task| counts_match(layout, task));
    let usable = pair_overlaps.iter().all(|p| p.area <= t.max_pair_overlap)
        && boundary_violations.iter().all(|b| b.area <= t.max_boundary_violation)
        && (count_match || !t.require_counts_match);
    ValidationReport {
        oor: oor(layout, FootprintMode::Oriented).unwrap_or(0.0),
        pair_overlaps,
        boundary_violations,
        count_match,
        usable,
    }
}

fn counts_match(layout: &Layout, task: &TaskSpec) -> bool {
    let key = |s: &str| s.trim().to_lowercase();
    let mut want: BTreeMap<String, usize> = BTreeMap::new();
    for o in &task.objects {
        *want.entry(key(&o.description)).or_default() += o.quantity as usize;
    }
    let mut have: BTreeMap<String, usize> = BTreeMap::new();
    for o in &layout.objects {
        *have.entry(key(&o.description)).or_default() += 1;
    }
    want == have
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOutcome {
    Usable,
    Unusable,
    ParseFailure,
    GatewayFailure,
    PromptFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub task_index: usize,
    pub sample_index: usize,
    pub room_type: RoomType,
    pub outcome: SampleOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSuccess {
    pub attempted: usize,
    pub usable: usize,
    pub rate: f64,
    /// Mean OOR over the samples that parsed.
    pub mean_oor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub rooms: BTreeMap<RoomType, RoomSuccess>,
    pub samples: Vec<SampleRecord>,
}

impl SuccessReport {
    pub fn overall_rate(&self) -> f64 {
        let (u, a) = self
            .rooms
            .values()
            .fold((0, 0), |(u, a), r| (u + r.usable, a + r.attempted));
        if a == 0 {
            0.0
        } else {
            u as f64 / a as f64
        }
    }
}

/// Draws `n_per_task` completions per task and reports the usable fraction
/// per room type. Parse and gateway failures count as attempted, not usable.
pub async fn success_rate(
    tasks: &[TaskSpec],
    gateway: &Gateway,
    params: &GenerationParams,
    n_per_task: usize,
    t: &ValidationThresholds,
) -> SuccessReport {
    let mut samples = Vec::with_capacity(tasks.len() * n_per_task);
    let mut bundles = Vec::new();
    let mut slots = Vec::new();
    for (ti, task) in tasks.iter().enumerate() {
        match build_generation_prompt(task) {
            Ok(bundle) => {
                for si in 0..n_per_task {
                    bundles.push(bundle.clone());
                    slots.push((ti, si));
                }
            }
            Err(e) => {
                for si in 0..n_per_task {
                    samples.push(SampleRecord {
                        task_index: ti,
                        sample_index: si,
                        room_type: task.room_type,
                        outcome: SampleOutcome::PromptFailure,
                        report: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    let completions = gateway.complete_batch(&bundles, params).await;
    for ((ti, si), completion) in slots.into_iter().zip(completions) {
        let task = &tasks[ti];
        let (outcome, report, error) = match completion {
            Err(e) => (SampleOutcome::GatewayFailure, None, Some(e.to_string())),
            Ok(text) => match parse_completion_for_task(&text, task) {
                Err(e) => (SampleOutcome::ParseFailure, None, Some(e.to_string())),
                Ok(parsed) => {
                    let report = validate_against(&parsed.layout, Some(task), t);
                    let outcome = if report.usable {
                        SampleOutcome::Usable
                    } else {
                        SampleOutcome::Unusable
                    };
                    (outcome, Some(report), None)
                }
            },
        };
        samples.push(SampleRecord {
            task_index: ti,
            sample_index: si,
            room_type: task.room_type,
            outcome,
            report,
            error,
        });
    }
    samples.sort_by_key(|s| (s.task_index, s.sample_index));
    let mut rooms: BTreeMap<RoomType, (usize, usize, f64, usize)> = BTreeMap::new();
    for s in &samples {
        let e = rooms.entry(s.room_type).or_default();
        e.0 += 1;
        if s.outcome == SampleOutcome::Usable {
            e.1 += 1;
        }
        if let Some(r) = &s.report {
            e.2 += r.oor;
            e.3 += 1;
        }
    }
    let rooms = rooms
        .into_iter()
        .map(|(room, (attempted, usable, oor_sum, parsed))| {
            let rate = if attempted == 0 { 0.0 } else { usable as f64 / attempted as f64 };
            let mean_oor = (parsed > 0).then(|| oor_sum / parsed as f64);
            (room, RoomSuccess { attempted, usable, rate, mean_oor })
        })
        .collect();
    SuccessReport { rooms, samples }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("unknown target instance `{0}`")]
    UnknownTarget(String),
    #[error("invalid start pose: {0}")]
    InvalidStart(String),
    #[error("invalid navigation task: {0}")]
    InvalidTask(String),
}

/// Ground-plane pose. Headings follow the object rotation convention:
/// 0 faces +y, positive angles turn counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Heading whose facing direction is `v`.
pub fn heading_of(v: Point2) -> f64 {
    normalize_rotation((-v.x).atan2(v.y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavTask {
    pub start: Pose,
    pub target_instance: String,
    #[serde(default = "default_fov")]
    pub fov_half_angle: f64,
    #[serde(default = "default_radius")]
    pub success_radius: f64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: f64,
}

fn default_fov() -> f64 {
    std::f64::consts::FRAC_PI_6
}

fn default_radius() -> f64 {
    2.0
}

fn default_resolution() -> f64 {
    0.1
}

impl NavTask {
    pub fn new(start: Pose, target_instance: impl Into<String>) -> Self {
        Self {
            start,
            target_instance: target_instance.into(),
            fov_half_angle: default_fov(),
            success_radius: default_radius(),
            grid_resolution: default_resolution(),
        }
    }

    pub fn with_resolution(mut self, r: f64) -> Self {
        self.grid_resolution = r;
        self
    }

    fn check(&self) -> Result<(), NavError> {
        if !(self.success_radius > 0.0 && self.success_radius.is_finite()) {
            return Err(NavError::InvalidTask("success_radius must be positive".into()));
        }
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle < std::f64::consts::PI) {
            return Err(NavError::InvalidTask("fov_half_angle must be in (0, pi)".into()));
        }
        if !(self.grid_resolution > 0.0 && self.grid_resolution.is_finite()) {
            return Err(NavError::InvalidTask("grid_resolution must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavResult {
    pub success: bool,
    pub reachable: bool,
    pub final_pose: Pose,
    pub path: Vec<Pose>,
    /// Final distance to the target center, in meters.
    pub nav_error: f64,
    /// Absolute angle between the final heading and the bearing to the target.
    pub bearing_error: f64,
}

struct Grid {
    origin: Point2,
    res: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
}

impl Grid {
    fn build(layout: &Layout, res: f64) -> Grid {
        let (lo, hi) = layout.floor.polygon().bounds().expect("floor has vertices");
        let nx = ((hi.x - lo.x) / res).ceil().max(1.0) as usize;
        let ny = ((hi.y - lo.y) / res).ceil().max(1.0) as usize;
        let rects = footprints(layout, FootprintMode::Oriented);
        let floor = layout.floor.polygon();
        let mut free = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = Point2::new(lo.x + (i as f64 + 0.5) * res, lo.y + (j as f64 + 0.5) * res);
                free[j * nx + i] = floor.contains(c) && !rects.iter().any(|r| r.contains(c));
            }
        }
        Grid {
            origin: lo,
            res,
            nx,
            ny,
            free,
        }
    }

    fn center(&self, idx: usize) -> Point2 {
        let (i, j) = (idx % self.nx, idx / self.nx);
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.res,
            self.origin.y + (j as f64 + 0.5) * self.res,
        )
    }

    fn cell_of(&self, p: Point2) -> Option<usize> {
        let i = ((p.x - self.origin.x) / self.res).floor();
        let j = ((p.y - self.origin.y) / self.res).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    fn is_free(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny && self.free[j as usize * self.nx + i as usize]
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Navigates from the start pose toward the nearest free cell within the
/// success radius of the target, then checks distance and field of view.
pub fn nav_eval(layout: &Layout, task: &NavTask) -> Result<NavResult, NavError> {
    task.check()?;
    let target_obj = layout
        .object(&task.target_instance)
        .ok_or_else(|| NavError::UnknownTarget(task.target_instance.clone()))?;
    let target = target_obj.placement.position.ground();
    let start = task.start.position();
    if !(start.x.is_finite() && start.y.is_finite() && task.start.heading.is_finite()) {
        return Err(NavError::InvalidStart("non-finite pose".into()));
    }
    if !layout.floor.polygon().contains(start) {
        return Err(NavError::InvalidStart("start lies outside the floor".into()));
    }
    let rects = footprints(layout, FootprintMode::Oriented);
    if let Some(o) = rects.iter().zip(&layout.objects).find(|(r, _)| r.contains(start)) {
        return Err(NavError::InvalidStart(format!("start collides with `{}`", o.1.instance_id)));
    }
    let start_pose = Pose::new(start.x, start.y, normalize_rotation(task.start.heading));
    let radius = task.success_radius;
    let within = |p: Point2| p.distance(target) <= radius + 1e-12;

    if within(start) {
        return Ok(finish(vec![start_pose], target, task, true));
    }

    let grid = Grid::build(layout, task.grid_resolution);
    let start_idx = grid
        .cell_of(start)
        .filter(|&c| grid.free[c])
        .or_else(|| nearest_free_neighbor(&grid, start))
        .ok_or_else(|| NavError::InvalidStart("no free grid cell at the start".into()))?;

    let n = grid.free.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let h = |idx: usize| (grid.center(idx).distance(target) - radius).max(0.0);
    g[start_idx] = 0.0;
    heap.push(Open { f: h(start_idx), idx: start_idx });
    let mut goal = None;
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if within(grid.center(idx)) {
            goal = Some(idx);
            break;
        }
        let (i, j) = ((idx % grid.nx) as isize, (idx / grid.nx) as isize);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let (ni, nj) = (i + di, j + dj);
            if !grid.is_free(ni, nj) {
                continue;
            }
            if di != 0 && dj != 0 && !(grid.is_free(i + di, j) && grid.is_free(i, j + dj)) {
                continue;
            }
            let nidx = nj as usize * grid.nx + ni as usize;
            let step = if di != 0 && dj != 0 { std::f64::consts::SQRT_2 } else { 1.0 } * grid.res;
            let cand = g[idx] + step;
            if cand < g[nidx] - 1e-12 {
                g[nidx] = cand;
                parent[nidx] = idx;
                heap.push(Open { f: cand + h(nidx), idx: nidx });
            }
        }
    }

    let Some(goal) = goal else {
        return Ok(finish(vec![start_pose], target, task, false));
    };
    let mut cells = vec![goal];
    while let Some(&last) = cells.last() {
        if last == start_idx {
            break;
        }
        cells.push(parent[last]);
    }
    cells.reverse();
    let mut points = vec![start];
    points.extend(cells.iter().skip(usize::from(cells.len() > 1)).map(|&c| grid.center(c)));
    points.dedup_by(|a, b| a.distance(*b) < 1e-12);
    let points = shortcut(&grid, &points);
    let mut path = vec![start_pose];
    for w in points.windows(2) {
        path.push(Pose::new(w[1].x, w[1].y, heading_of(w[1].sub(w[0]))));
    }
    Ok(finish(path, target, task, true))
}

/// True if every sample along the segment lands in a free cell.
fn line_clear(grid: &Grid, a: Point2, b: Point2) -> bool {
    let steps = (a.distance(b) / (grid.res / 8.0)).ceil().max(1.0) as usize;
    (1..=steps).all(|k| {
        let p = a.add(b.sub(a).scale(k as f64 / steps as f64));
        grid.cell_of(p).is_some_and(|c| grid.free[c])
    })
}

/// Drops waypoints that have a clear line of sight past them.
fn shortcut(grid: &Grid, points: &[Point2]) -> Vec<Point2> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut j = points.len() - 1;
        while j > i + 1 && !line_clear(grid, points[i], points[j]) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

fn nearest_free_neighbor(grid: &Grid, p: Point2) -> Option<usize> {
    let i = ((p.x - grid.origin.x) / grid.res).floor() as isize;
    let j = ((p.y - grid.origin.y) / grid.res).floor() as isize;
    let mut best: Option<(f64, usize)> = None;
    for dj in -1..=1 {
        for di in -1..=1 {
            if grid.is_free(i + di, j + dj) {
                let idx = (j + dj) as usize * grid.nx + (i + di) as usize;
                let d = grid.center(idx).distance(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, idx));
                }
            }
        }
    }
    best.map(|(_, idx)| idx)
}

fn finish(path: Vec<Pose>, target: Point2, task: &NavTask, reachable: bool) -> NavResult {
    let final_pose = *path.last().expect("path starts at the start pose");
    let to_target = target.sub(final_pose.position());
    let nav_error = to_target.norm();
    let bearing_error = if nav_error < 1e-12 {
        0.0
    } else {
        angle_difference(heading_of(to_target), final_pose.heading).abs()
    };
    let success = reachable
        && nav_error <= task.success_radius + 1e-12
        && bearing_error <= task.fov_half_angle + 1e-12;
    NavResult {
        success,
        reachable,
        final_pose,
        path,
        nav_error,
        bearing_error,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvgOptions {
    /// Pixels per meter.
    pub scale: f64,
    /// Border around the floor, in meters.
    pub margin: f64,
    pub labels: bool,
    pub highlight: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            scale: 100.0,
            margin: 0.25,
            labels: true,
            highlight: true,
        }
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Top-down SVG: the floor polygon, one rotated rectangle per object with a
/// heading tick and an id label. Overlapping and out-of-bounds objects get
/// the `overlap` and `out-of-bounds` classes.
pub fn render_svg(layout: &Layout, options: &SvgOptions) -> String {
    let (lo, hi) = layout.floor.polygon().bounds().expect("floor has vertices");
    let m = options.margin;
    let s = options.scale;
    let px = |p: Point2| ((p.x - lo.x + m) * s, (hi.y - p.y + m) * s);
    let width = (hi.x - lo.x + 2.0 * m) * s;
    let height = (hi.y - lo.y + 2.0 * m) * s;

    let report = validate(layout, &ValidationThresholds::default());
    let mut overlapping = std::collections::BTreeSet::new();
    let mut outside = std::collections::BTreeSet::new();
    if options.highlight {
        for p in &report.pair_overlaps {
            overlapping.insert(p.a.as_str());
            overlapping.insert(p.b.as_str());
        }
        for b in &report.boundary_violations {
            outside.insert(b.instance_id.as_str());
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    out.push_str(
        "<style>.floor{fill:#f4f1ea;stroke:#333;stroke-width:2}.object{fill:#9cc3e6;fill-opacity:0.7;stroke:#1f4e79;stroke-width:1.5}\
.overlap{stroke:#d62728;stroke-width:3}.out-of-bounds{stroke:#ff7f0e;stroke-width:3;stroke-dasharray:6 3}\
.heading{stroke:#1f4e79;stroke-width:2}.label{font-family:sans-serif;font-size:11px;text-anchor:middle}</style>\n",
    );
    let pts: Vec<String> = layout
        .floor
        .vertices()
        .iter()
        .map(|&p| {
            let (x, y) = px(p);
            format!("{},{}", num(x), num(y))
        })
        .collect();
    let _ = writeln!(out, r#"<polygon class="floor" points="{}"/>"#, pts.join(" "));
    for o in &layout.objects {
        let c = o.placement.position.ground();
        let (cx, cy) = px(c);
        let (w, d) = (o.size.width * s, o.size.depth * s);
        let mut class = String::from("object");
        if overlapping.contains(o.instance_id.as_str()) {
            class.push_str(" overlap");
        }
        if outside.contains(o.instance_id.as_str()) {
            class.push_str(" out-of-bounds");
        }
        let deg = -o.placement.rotation().to_degrees();
        let id = escape(&o.instance_id);
        let _ = writeln!(
            out,
            r#"<rect class="{class}" data-id="{id}" x="{}" y="{}" width="{}" height="{}" transform="rotate({} {} {})"/>"#,
            num(cx - w / 2.0),
            num(cy - d / 2.0),
            num(w),
            num(d),
            num(deg),
            num(cx),
            num(cy)
        );
        let tip = c.add(o.placement.facing().scale(o.size.depth / 2.0));
        let (tx, ty) = px(tip);
        let _ = writeln!(
            out,
            r#"<line class="heading" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            num(cx),
            num(cy),
            num(tx),
            num(ty)
        );
        if options.labels {
            let _ = writeln!(out, r#"<text class="label" x="{}" y="{}">{id}</text>"#, num(cx), num(cy));
        }
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeItemError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Parse(#[from] JudgeError),
}

/// Scores each layout with the judge prompt. Failures are reported per item.
pub async fn judge_scores(
    layouts: &[Layout],
    preferences: &str,
    gateway: &Gateway,
    params: &GenerationParams,
) -> Vec<Result<JudgeScore, JudgeItemError>> {
    let bundles: Vec<_> = layouts.iter().map(|l| build_judge_prompt(l, preferences)).collect();
    gateway
        .complete_batch(&bundles, params)
        .await
        .into_iter()
        .map(|r| Ok(parse_judge(&r?)?))
        .collect()
}
