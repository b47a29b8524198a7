//! Canonical layout data model, its JSON form and the asset catalog.
//!
//! Coordinates are z-up meters with the floor at z = 0. Rotations are
//! radians about the up axis, always stored in `[0, 2π)`.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geometry::{Point2, Polygon2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Value { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("invalid floor: {0}")]
    InvalidFloor(String),
    #[error("no catalog entry matches `{0}`")]
    NoMatch(String),
    #[error("asset catalog is empty")]
    EmptyCatalog,
}

impl SceneError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    fn value(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Value {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Wraps `r` into `[0, 2π)`. Idempotent.
pub fn normalize_rotation(r: f64) -> f64 {
    let n = r.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if n >= TAU {
        0.0
    } else {
        n
    }
}

/// Smallest absolute difference between two angles.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = normalize_rotation(a - b);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomType {
    Bedroom,
    LivingRoom,
    Kitchen,
    Bathroom,
}

impl RoomType {
    pub const ALL: [RoomType; 4] = [
        RoomType::Bedroom,
        RoomType::LivingRoom,
        RoomType::Kitchen,
        RoomType::Bathroom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoomType::Bedroom => "bedroom",
            RoomType::LivingRoom => "living_room",
            RoomType::Kitchen => "kitchen",
            RoomType::Bathroom => "bathroom",
        }
    }

    /// Human-readable name used in prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            RoomType::Bedroom => "Bedroom",
            RoomType::LivingRoom => "Living Room",
            RoomType::Kitchen => "Kitchen",
            RoomType::Bathroom => "Bathroom",
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoomType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match key.as_str() {
            "bedroom" => Ok(RoomType::Bedroom),
            "livingroom" => Ok(RoomType::LivingRoom),
            "kitchen" => Ok(RoomType::Kitchen),
            "bathroom" => Ok(RoomType::Bathroom),
            _ => Err(format!("unknown room type `{s}`")),
        }
    }
}

/// Floor polygon on the ground plane. Always z-up.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    vertices: Vec<Point2>,
}

impl FloorPlan {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, SceneError> {
        if vertices.len() < 3 {
            return Err(SceneError::InvalidFloor(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(SceneError::InvalidFloor("non-finite vertex".into()));
        }
        let poly = Polygon2D::new(vertices);
        if poly.signed_area() == 0.0 {
            return Err(SceneError::InvalidFloor("zero area".into()));
        }
        if !poly.is_simple() {
            return Err(SceneError::InvalidFloor("polygon self-intersects".into()));
        }
        Ok(Self {
            vertices: poly.vertices,
        })
    }

    /// Axis-aligned `width x depth` rectangle centered at the origin.
    pub fn rectangle(width: f64, depth: f64) -> Result<Self, SceneError> {
        let (hw, hd) = (width / 2.0, depth / 2.0);
        Self::new(vec![
            Point2::new(-hw, -hd),
            Point2::new(hw, -hd),
            Point2::new(hw, hd),
            Point2::new(-hw, hd),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn polygon(&self) -> Polygon2D {
        Polygon2D::new(self.vertices.clone())
    }

    pub fn area(&self) -> f64 {
        self.polygon().area()
    }

    pub fn translated(&self, offset: Point2) -> FloorPlan {
        FloorPlan {
            vertices: self.vertices.iter().map(|p| p.add(offset)).collect(),
        }
    }

    fn from_value(v: &Value, path: &str) -> Result<Self, SceneError> {
        let verts = field(v, "vertices", path)?;
        let arr = verts
            .as_array()
            .ok_or_else(|| SceneError::schema(format!("{path}.vertices"), "expected an array"))?;
        let mut pts = Vec::with_capacity(arr.len());
        for (i, p) in arr.iter().enumerate() {
            let vp = format!("{path}.vertices[{i}]");
            let pair = p
                .as_array()
                .filter(|a| a.len() == 2 || a.len() == 3)
                .ok_or_else(|| SceneError::schema(&vp, "expected [x, y]"))?;
            pts.push(Point2::new(
                number(&pair[0], &format!("{vp}[0]"))?,
                number(&pair[1], &format!("{vp}[1]"))?,
            ));
        }
        FloorPlan::new(pts)
    }

    fn to_value(&self) -> Value {
        json!({ "vertices": self.vertices })
    }
}

impl Serialize for FloorPlan {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FloorPlan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        FloorPlan::from_value(&v, "floor").map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxSize {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

#[derive(Deserialize)]
struct RawBox {
    width: f64,
    depth: f64,
    height: f64,
}

impl TryFrom<RawBox> for BoxSize {
    type Error = SceneError;

    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        BoxSize::new(r.width, r.depth, r.height)
    }
}

impl BoxSize {
    pub fn new(width: f64, depth: f64, height: f64) -> Result<Self, SceneError> {
        for (name, v) in [("width", width), ("depth", depth), ("height", height)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SceneError::value(
                    format!("bbox.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(Self {
            width,
            depth,
            height,
        })
    }

    pub fn footprint_area(&self) -> f64 {
        self.width * self.depth
    }

    fn from_value(v: &Value, path: &str) -> Result<Self, SceneError> {
        let w = number(field(v, "width", path)?, &format!("{path}.width"))?;
        let d = number(field(v, "depth", path)?, &format!("{path}.depth"))?;
        let h = number(field(v, "height", path)?, &format!("{path}.height"))?;
        BoxSize::new(w, d, h).map_err(|e| match e {
            SceneError::Value { path: p, message } => SceneError::Value {
                path: format!("{path}.{}", p.trim_start_matches("bbox.")),
                message,
            },
            other => other,
        })
    }
}

/// A requested object type with its multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub description: String,
    #[serde(default = "one")]
    pub quantity: u32,
    #[serde(rename = "bbox", default, skip_serializing_if = "Option::is_none")]
    pub size: Option<BoxSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_id: Option<String>,
}

fn one() -> u32 {
    1
}

impl ObjectSpec {
    pub fn new(description: impl Into<String>, quantity: u32, size: Option<BoxSize>) -> Self {
        Self {
            description: description.into(),
            quantity,
            size,
            asset_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Position plus rotation about the up axis. The rotation is normalized on
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub position: Point3,
    rotation: f64,
}

impl Placement {
    pub fn new(position: Point3, rotation: f64) -> Self {
        Self {
            position,
            rotation: normalize_rotation(rotation),
        }
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = normalize_rotation(rotation);
        self
    }

    pub fn translated(mut self, dx: f64, dy: f64) -> Self {
        self.position.x += dx;
        self.position.y += dy;
        self
    }

    /// Unit vector the object faces on the ground plane: +y rotated by the rotation.
    pub fn facing(&self) -> Point2 {
        Point2::new(0.0, 1.0).rotate(self.rotation)
    }
}

/// One placed instance of an object.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub instance_id: String,
    pub description: String,
    pub size: BoxSize,
    pub asset_id: Option<String>,
    pub placement: Placement,
}

impl PlacedObject {
    pub fn new(
        instance_id: impl Into<String>,
        description: impl Into<String>,
        size: BoxSize,
        placement: Placement,
    ) -> Self {
        Self {
            instance_id: instance_id.into(),
            description: description.into(),
            size,
            asset_id: None,
            placement,
        }
    }

    fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("instance_id".into(), json!(self.instance_id));
        m.insert("description".into(), json!(self.description));
        m.insert(
            "bbox".into(),
            json!({
                "width": self.size.width,
                "depth": self.size.depth,
                "height": self.size.height,
            }),
        );
        let p = self.placement.position;
        m.insert("coordinates".into(), json!({ "x": p.x, "y": p.y, "z": p.z }));
        m.insert("rotate".into(), json!({ "angle": self.placement.rotation() }));
        if let Some(asset) = &self.asset_id {
            m.insert("asset_id".into(), json!(asset));
        }
        Value::Object(m)
    }
}

/// A room and the objects placed in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub room_type: RoomType,
    pub floor: FloorPlan,
    pub objects: Vec<PlacedObject>,
}

impl Layout {
    pub fn new(
        room_type: RoomType,
        floor: FloorPlan,
        objects: Vec<PlacedObject>,
    ) -> Result<Self, SceneError> {
        let layout = Self {
            room_type,
            floor,
            objects,
        };
        layout.check()?;
        Ok(layout)
    }

    /// Re-checks the invariants that public field mutation could break.
    pub fn check(&self) -> Result<(), SceneError> {
        let mut seen = HashSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            if o.instance_id.is_empty() {
                return Err(SceneError::value(format!("{path}.instance_id"), "empty"));
            }
            if !seen.insert(o.instance_id.as_str()) {
                return Err(SceneError::value(
                    format!("{path}.instance_id"),
                    format!("duplicate instance id `{}`", o.instance_id),
                ));
            }
            let p = o.placement.position;
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(SceneError::value(format!("{path}.coordinates"), "non-finite"));
            }
            if p.z < 0.0 {
                return Err(SceneError::value(
                    format!("{path}.coordinates.z"),
                    "objects cannot sit below the floor",
                ));
            }
        }
        Ok(())
    }

    pub fn object(&self, instance_id: &str) -> Option<&PlacedObject> {
        self.objects.iter().find(|o| o.instance_id == instance_id)
    }

    pub fn to_value(&self) -> Value {
        json!({
            "room_type": self.room_type,
            "floor": self.floor.to_value(),
            "objects": self.objects.iter().map(PlacedObject::to_value).collect::<Vec<_>>(),
        })
    }

    /// Strict conversion from the layout file format.
    pub fn from_value(v: &Value) -> Result<Self, SceneError> {
        layout_from_value(v, None)
    }
}

impl Serialize for Layout {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Layout {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Layout::from_value(&v).map_err(D::Error::custom)
    }
}

/// Parses a layout document. Unknown fields are ignored.
pub fn parse_layout(document: &str) -> Result<Layout, SceneError> {
    let v: Value = serde_json::from_str(document).map_err(|e| SceneError::Json(e.to_string()))?;
    Layout::from_value(&v)
}

/// Serializes a layout to the layout file format.
pub fn serialize_layout(layout: &Layout) -> String {
    serde_json::to_string_pretty(&layout.to_value()).expect("layout values are always serializable")
}

/// Semantic equality: same room and ids, coordinates within `tol` meters and
/// rotations equal modulo 2π within `tol`.
pub fn layouts_equivalent(a: &Layout, b: &Layout, tol: f64) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= tol;
    a.room_type == b.room_type
        && a.floor.vertices().len() == b.floor.vertices().len()
        && a
            .floor
            .vertices()
            .iter()
            .zip(b.floor.vertices())
            .all(|(p, q)| close(p.x, q.x) && close(p.y, q.y))
        && a.objects.len() == b.objects.len()
        && a.objects.iter().zip(&b.objects).all(|(o, q)| {
            let (p1, p2) = (o.placement.position, q.placement.position);
            o.instance_id == q.instance_id
                && o.description == q.description
                && o.size == q.size
                && close(p1.x, p2.x)
                && close(p1.y, p2.y)
                && close(p1.z, p2.z)
                && angle_difference(o.placement.rotation(), q.placement.rotation()) <= tol
        })
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value, SceneError> {
    v.get(key)
        .filter(|x| !x.is_null())
        .ok_or_else(|| SceneError::schema(join(path, key), "missing required field"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn number(v: &Value, path: &str) -> Result<f64, SceneError> {
    let n = v
        .as_f64()
        .ok_or_else(|| SceneError::schema(path, "expected a number"))?;
    if !n.is_finite() {
        return Err(SceneError::value(path, "non-finite number"));
    }
    Ok(n)
}

/// `{...}` or a one-element `[{...}]`, the latter being how the generation
/// template prints coordinates and rotations.
fn single_object<'a>(v: &'a Value, path: &str) -> Result<&'a Value, SceneError> {
    match v {
        Value::Object(_) => Ok(v),
        Value::Array(a) if a.len() == 1 && a[0].is_object() => Ok(&a[0]),
        _ => Err(SceneError::schema(path, "expected an object")),
    }
}

/// Token set used for fuzzy description matching.
pub fn tokens(s: &str) -> Vec<String> {
    let mut out: Vec<String> = s
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Lower-case identifier fragment from a description: "Double Bed" -> "double_bed".
pub fn slug(description: &str) -> String {
    let s: Vec<String> = description
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    if s.is_empty() {
        "object".to_string()
    } else {
        s.join("_")
    }
}

/// Converts a JSON value into a layout.
///
/// With `fallback = None` the layout file format is enforced. With a task,
/// completions in the generation-template shape are also accepted: the
/// room and floor default to the task's, a bare array of objects is
/// allowed, missing instance ids are generated and missing boxes are taken
/// from the matching task object.
pub(crate) fn layout_from_value(v: &Value, fallback: Option<&TaskSpec>) -> Result<Layout, SceneError> {
    let (room_type, floor, objects_v): (RoomType, FloorPlan, &Value) = match (v, fallback) {
        (Value::Array(_), Some(task)) => (task.room_type, task.floor.clone(), v),
        (Value::Object(_), _) => {
            let room_type = match (v.get("room_type").filter(|x| !x.is_null()), fallback) {
                (Some(r), _) => {
                    let s = r
                        .as_str()
                        .ok_or_else(|| SceneError::schema("room_type", "expected a string"))?;
                    RoomType::from_str(s).map_err(|e| SceneError::value("room_type", e))?
                }
                (None, Some(task)) => task.room_type,
                (None, None) => return Err(SceneError::schema("room_type", "missing required field")),
            };
            let floor = match (v.get("floor").filter(|x| !x.is_null()), fallback) {
                (Some(f), _) => FloorPlan::from_value(f, "floor")?,
                (None, Some(task)) => task.floor.clone(),
                (None, None) => return Err(SceneError::schema("floor", "missing required field")),
            };
            (room_type, floor, field(v, "objects", "")?)
        }
        _ => return Err(SceneError::schema("", "expected a layout object")),
    };
    let arr = objects_v
        .as_array()
        .ok_or_else(|| SceneError::schema("objects", "expected an array"))?;
    let mut objects = Vec::with_capacity(arr.len());
    let mut used_ids: HashSet<String> = arr
        .iter()
        .filter_map(|o| o.get("instance_id").and_then(Value::as_str).map(str::to_string))
        .collect();
    for (i, o) in arr.iter().enumerate() {
        let path = format!("objects[{i}]");
        if !o.is_object() {
            return Err(SceneError::schema(&path, "expected an object"));
        }
        let description = match o.get("description").or_else(|| o.get("object")) {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => {
                return Err(SceneError::value(format!("{path}.description"), "empty"))
            }
            Some(_) => {
                return Err(SceneError::schema(
                    format!("{path}.description"),
                    "expected a string",
                ))
            }
            None => {
                return Err(SceneError::schema(
                    format!("{path}.description"),
                    "missing required field",
                ))
            }
        };
        let instance_id = match (o.get("instance_id"), fallback) {
            (Some(Value::String(s)), _) => s.clone(),
            (Some(Value::Number(n)), _) => n.to_string(),
            (Some(_), _) => {
                return Err(SceneError::schema(
                    format!("{path}.instance_id"),
                    "expected a string",
                ))
            }
            (None, Some(_)) => {
                let base = slug(&description);
                let mut k = 1;
                loop {
                    let id = format!("{base}_{k}");
                    if used_ids.insert(id.clone()) {
                        break id;
                    }
                    k += 1;
                }
            }
            (None, None) => {
                return Err(SceneError::schema(
                    format!("{path}.instance_id"),
                    "missing required field",
                ))
            }
        };
        let size = match (o.get("bbox").filter(|x| !x.is_null()), fallback) {
            (Some(b), _) => BoxSize::from_value(single_object(b, &format!("{path}.bbox"))?, &format!("{path}.bbox"))?,
            (None, Some(task)) => task.size_for(&description).ok_or_else(|| {
                SceneError::schema(
                    format!("{path}.bbox"),
                    format!("missing and `{description}` is not in the task"),
                )
            })?,
            (None, None) => {
                return Err(SceneError::schema(format!("{path}.bbox"), "missing required field"))
            }
        };
        let cpath = format!("{path}.coordinates");
        let coords = single_object(field(o, "coordinates", &path)?, &cpath)?;
        let position = Point3::new(
            number(field(coords, "x", &cpath)?, &format!("{cpath}.x"))?,
            number(field(coords, "y", &cpath)?, &format!("{cpath}.y"))?,
            number(field(coords, "z", &cpath)?, &format!("{cpath}.z"))?,
        );
        let rpath = format!("{path}.rotate");
        let rotate = single_object(field(o, "rotate", &path)?, &rpath)?;
        let angle = number(field(rotate, "angle", &rpath)?, &format!("{rpath}.angle"))?;
        let asset_id = o.get("asset_id").and_then(Value::as_str).map(str::to_string);
        objects.push(PlacedObject {
            instance_id,
            description,
            size,
            asset_id,
            placement: Placement::new(position, angle),
        });
    }
    Layout::new(room_type, floor, objects)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    ThreeDFront,
    HolodeckSynth,
    Generated,
}

impl FromStr for SceneSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "three_d_front" | "3d-front" | "3dfront" => Ok(Self::ThreeDFront),
            "holodeck_synth" | "holodeck" => Ok(Self::HolodeckSynth),
            "generated" => Ok(Self::Generated),
            _ => Err(format!("unknown scene source `{s}`")),
        }
    }
}

/// One corpus line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub source: SceneSource,
    #[serde(default)]
    pub semantic_summary: Option<String>,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    #[serde(default)]
    pub category: String,
}

impl CatalogEntry {
    pub fn size(&self) -> Result<BoxSize, SceneError> {
        BoxSize::new(self.width, self.depth, self.height)
    }
}

/// Local stand-in for an asset database: name -> box size and category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetCatalog {
    entries: BTreeMap<String, (BoxSize, String)>,
}

impl AssetCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, size: BoxSize, category: impl Into<String>) {
        self.entries.insert(name.into(), (size, category.into()));
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let raw: BTreeMap<String, CatalogEntry> =
            serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))?;
        let mut cat = Self::new();
        for (name, e) in raw {
            let size = e.size().map_err(|err| match err {
                SceneError::Value { path, message } => SceneError::Value {
                    path: format!("{name}.{}", path.trim_start_matches("bbox.")),
                    message,
                },
                other => other,
            })?;
            cat.insert(name, size, e.category);
        }
        Ok(cat)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<BoxSize> {
        self.entries.get(name).map(|(s, _)| *s)
    }

    pub fn category(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(|(_, c)| c.as_str())
    }

    /// Best entry for a description: exact key, then case-insensitive key,
    /// then largest token overlap (ties go to the entry with fewer tokens,
    /// then to the lexicographically first key).
    pub fn best_match(&self, description: &str) -> Option<(&str, BoxSize)> {
        if let Some((k, (s, _))) = self.entries.get_key_value(description) {
            return Some((k.as_str(), *s));
        }
        let lower = description.to_lowercase();
        if let Some((k, (s, _))) = self.entries.iter().find(|(k, _)| k.to_lowercase() == lower) {
            return Some((k.as_str(), *s));
        }
        let want = tokens(description);
        let mut best: Option<(usize, usize, &str, BoxSize)> = None;
        for (k, (s, _)) in &self.entries {
            let have = tokens(k);
            let overlap = have.iter().filter(|t| want.contains(t)).count();
            if overlap == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bo, bl, _, _)) => overlap > bo || (overlap == bo && have.len() < bl),
            };
            if better {
                best = Some((overlap, have.len(), k.as_str(), *s));
            }
        }
        best.map(|(_, _, k, s)| (k, s))
    }
}

/// Fills in missing sizes from the catalog. Specs that already carry a size
/// pass through unchanged.
pub fn retrieve_boxes(specs: &[ObjectSpec], catalog: &AssetCatalog) -> Result<Vec<ObjectSpec>, SceneError> {
    if catalog.is_empty() {
        return Err(SceneError::EmptyCatalog);
    }
    specs
        .iter()
        .map(|spec| {
            if spec.size.is_some() {
                return Ok(spec.clone());
            }
            let by_asset = spec
                .asset_id
                .as_deref()
                .and_then(|id| catalog.get(id).map(|s| (id, s)));
            let (key, size) = by_asset
                .or_else(|| catalog.best_match(&spec.description))
                .ok_or_else(|| SceneError::NoMatch(spec.description.clone()))?;
            let mut out = spec.clone();
            out.size = Some(size);
            out.asset_id = Some(key.to_string());
            Ok(out)
        })
        .collect()
}

/// A structured generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTask")]
pub struct TaskSpec {
    #[serde(default)]
    pub instruction: String,
    pub room_type: RoomType,
    pub floor: FloorPlan,
    pub objects: Vec<ObjectSpec>,
}

#[derive(Deserialize)]
struct RawTask {
    #[serde(default)]
    instruction: String,
    room_type: RoomType,
    floor: FloorPlan,
    objects: Vec<ObjectSpec>,
}

impl TryFrom<RawTask> for TaskSpec {
    type Error = SceneError;

    fn try_from(r: RawTask) -> Result<Self, Self::Error> {
        TaskSpec::new(r.instruction, r.room_type, r.floor, r.objects)
    }
}

impl TaskSpec {
    pub fn new(
        instruction: impl Into<String>,
        room_type: RoomType,
        floor: FloorPlan,
        objects: Vec<ObjectSpec>,
    ) -> Result<Self, SceneError> {
        if objects.is_empty() {
            return Err(SceneError::value("objects", "task needs at least one object"));
        }
        for (i, o) in objects.iter().enumerate() {
            if o.description.trim().is_empty() {
                return Err(SceneError::value(format!("objects[{i}].description"), "empty"));
            }
            if o.quantity == 0 {
                return Err(SceneError::value(format!("objects[{i}].quantity"), "must be at least 1"));
            }
        }
        Ok(Self {
            instruction: instruction.into(),
            room_type,
            floor,
            objects,
        })
    }

    pub fn total_instances(&self) -> usize {
        self.objects.iter().map(|o| o.quantity as usize).sum()
    }

    pub fn sizes_resolved(&self) -> bool {
        self.objects.iter().all(|o| o.size.is_some())
    }

    /// Size of the task object matching `description`: case-insensitive
    /// equality first, then the largest token overlap.
    pub fn size_for(&self, description: &str) -> Option<BoxSize> {
        let lower = description.trim().to_lowercase();
        if let Some(o) = self
            .objects
            .iter()
            .find(|o| o.description.trim().to_lowercase() == lower)
        {
            return o.size;
        }
        let want = tokens(description);
        self.objects
            .iter()
            .filter_map(|o| {
                let overlap = tokens(&o.description).iter().filter(|t| want.contains(t)).count();
                (overlap > 0 && o.size.is_some()).then_some((overlap, o.size))
            })
            .max_by_key(|(overlap, _)| *overlap)
            .and_then(|(_, s)| s)
    }

    /// Instance ids the task expands to: `<slug>_<k>` per object spec.
    pub fn instance_ids(&self) -> Vec<(String, &ObjectSpec)> {
        let mut counters: BTreeMap<String, u32> = BTreeMap::new();
        let mut out = Vec::new();
        for spec in &self.objects {
            let base = slug(&spec.description);
            for _ in 0..spec.quantity {
                let k = counters.entry(base.clone()).or_insert(0);
                *k += 1;
                out.push((format!("{base}_{k}"), spec));
            }
        }
        out
    }

    /// Derives the task a layout answers: objects grouped by description and
    /// size in first-appearance order.
    pub fn from_layout(layout: &Layout, instruction: impl Into<String>) -> Result<Self, SceneError> {
        let mut specs: Vec<ObjectSpec> = Vec::new();
        for o in &layout.objects {
            match specs
                .iter_mut()
                .find(|s| s.description == o.description && s.size == Some(o.size))
            {
                Some(s) => s.quantity += 1,
                None => specs.push(ObjectSpec {
                    description: o.description.clone(),
                    quantity: 1,
                    size: Some(o.size),
                    asset_id: o.asset_id.clone(),
                }),
            }
        }
        TaskSpec::new(instruction, layout.room_type, layout.floor.clone(), specs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const ONE_OBJECT: &str = r#"{
        "room_type": "bedroom",
        "floor": {"vertices": [[-2,-2],[2,-2],[2,2],[-2,2]]},
        "objects": [{
            "instance_id": "bed_1",
            "description": "double bed",
            "bbox": {"width": 1.8, "depth": 2.0, "height": 0.5},
            "coordinates": {"x": 1.0, "y": 2.0, "z": 0.0},
            "rotate": {"angle": 3.14159},
            "color": "ignored"
        }]
    }"#;

    fn sample_layout(n: usize) -> Layout {
        let objects = (0..n)
            .map(|i| {
                PlacedObject::new(
                    format!("obj_{i}"),
                    format!("thing {i}"),
                    BoxSize::new(0.5 + i as f64 * 0.1, 0.4, 0.9).unwrap(),
                    Placement::new(Point3::new(i as f64 * 0.7 - 1.0, 0.3, 0.0), 0.25 * i as f64),
                )
            })
            .collect();
        Layout::new(RoomType::Kitchen, FloorPlan::rectangle(5.0, 4.0).unwrap(), objects).unwrap()
    }

    #[test]
    fn parses_table_format() {
        let l = parse_layout(ONE_OBJECT).unwrap();
        assert_eq!(l.objects.len(), 1);
        let o = &l.objects[0];
        assert_eq!(o.placement.position, Point3::new(1.0, 2.0, 0.0));
        assert!((o.placement.rotation() - 3.14159).abs() < 1e-12);
        assert_eq!(o.size.width, 1.8);
    }

    #[test]
    fn normalizes_rotation_on_parse() {
        let doc = ONE_OBJECT.replace("3.14159", "7.0");
        let l = parse_layout(&doc).unwrap();
        let r = l.objects[0].placement.rotation();
        assert!((r - (7.0 - 2.0 * PI)).abs() < 1e-12);
        assert!((r - 0.7168).abs() < 1e-4);
    }

    #[test]
    fn missing_rotate_is_schema_error() {
        let doc = ONE_OBJECT.replace(r#""rotate": {"angle": 3.14159},"#, "");
        match parse_layout(&doc) {
            Err(SceneError::Schema { path, .. }) => assert_eq!(path, "objects[0].rotate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_size_is_value_error() {
        let doc = ONE_OBJECT.replace(r#""width": 1.8"#, r#""width": 0"#);
        assert!(matches!(parse_layout(&doc), Err(SceneError::Value { .. })));
    }

    #[test]
    fn out_of_range_number_is_rejected() {
        let doc = ONE_OBJECT.replace(r#""x": 1.0"#, r#""x": 1e999"#);
        assert!(parse_layout(&doc).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut l = sample_layout(2);
        l.objects[1].instance_id = "obj_0".into();
        let doc = serialize_layout(&l);
        assert!(matches!(parse_layout(&doc), Err(SceneError::Value { .. })));
    }

    #[test]
    fn serialize_round_trip() {
        let empty = Layout::new(RoomType::Bedroom, FloorPlan::rectangle(3.0, 3.0).unwrap(), vec![]).unwrap();
        let doc = serialize_layout(&empty);
        let v: Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["objects"], json!([]));
        assert_eq!(parse_layout(&doc).unwrap(), empty);

        let l = sample_layout(3);
        assert!(layouts_equivalent(&parse_layout(&serialize_layout(&l)).unwrap(), &l, 1e-9));
    }

    #[test]
    fn zero_rotation_serializes_as_float() {
        let l = sample_layout(1);
        let doc = serialize_layout(&l);
        assert!(doc.contains(r#""angle": 0.0"#), "{doc}");
    }

    #[test]
    fn rotation_normalization_is_idempotent() {
        for r in [-7.5, -1e-300, 0.0, 1.0, TAU, 13.0, 1e6] {
            let n = normalize_rotation(r);
            assert!((0.0..TAU).contains(&n));
            assert_eq!(normalize_rotation(n), n);
        }
    }

    #[test]
    fn floor_validation() {
        assert!(FloorPlan::new(vec![Point2::new(0., 0.), Point2::new(1., 0.)]).is_err());
        assert!(FloorPlan::new(vec![
            Point2::new(0., 0.),
            Point2::new(1., 1.),
            Point2::new(1., 0.),
            Point2::new(0., 1.),
        ])
        .is_err());
        assert!(FloorPlan::new(vec![Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(2., 0.)]).is_err());
    }

    fn catalog() -> AssetCatalog {
        AssetCatalog::from_json(
            r#"{
                "double bed": {"width": 1.8, "depth": 2.0, "height": 0.5, "category": "bed"},
                "nightstand": {"width": 0.5, "depth": 0.4, "height": 0.6, "category": "storage"},
                "office chair": {"width": 0.6, "depth": 0.6, "height": 1.0, "category": "seating"},
                "chair": {"width": 0.5, "depth": 0.5, "height": 0.9, "category": "seating"}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn retrieve_exact_and_passthrough() {
        let cat = catalog();
        let specs = vec![
            ObjectSpec::new("double bed", 1, None),
            ObjectSpec::new("mystery box", 2, Some(BoxSize::new(1.0, 1.0, 1.0).unwrap())),
        ];
        let out = retrieve_boxes(&specs, &cat).unwrap();
        assert_eq!(out[0].size, Some(BoxSize::new(1.8, 2.0, 0.5).unwrap()));
        assert_eq!(out[0].asset_id.as_deref(), Some("double bed"));
        assert_eq!(out[1], specs[1]);
        for (a, b) in out.iter().zip(&specs) {
            assert_eq!(a.quantity, b.quantity);
            assert_eq!(a.description, b.description);
        }
    }

    #[test]
    fn retrieve_token_overlap() {
        let cat = catalog();
        let out = retrieve_boxes(&[ObjectSpec::new("Wooden Chair", 1, None)], &cat).unwrap();
        // "chair" and "office chair" both overlap by one token; the shorter key wins.
        assert_eq!(out[0].asset_id.as_deref(), Some("chair"));
        let out = retrieve_boxes(&[ObjectSpec::new("Double Bed", 1, None)], &cat).unwrap();
        assert_eq!(out[0].asset_id.as_deref(), Some("double bed"));
    }

    #[test]
    fn retrieve_no_match() {
        let err = retrieve_boxes(&[ObjectSpec::new("flying carpet", 1, None)], &catalog()).unwrap_err();
        assert_eq!(err, SceneError::NoMatch("flying carpet".into()));
        assert_eq!(
            retrieve_boxes(&[], &AssetCatalog::new()).unwrap_err(),
            SceneError::EmptyCatalog
        );
    }

    #[test]
    fn task_validation_and_ids() {
        let floor = FloorPlan::rectangle(4.0, 4.0).unwrap();
        assert!(TaskSpec::new("", RoomType::Bedroom, floor.clone(), vec![]).is_err());
        assert!(TaskSpec::new("", RoomType::Bedroom, floor.clone(), vec![ObjectSpec::new("bed", 0, None)]).is_err());
        let t = TaskSpec::new(
            "",
            RoomType::Bedroom,
            floor,
            vec![ObjectSpec::new("Nightstand", 2, None), ObjectSpec::new("bed", 1, None)],
        )
        .unwrap();
        let ids: Vec<_> = t.instance_ids().into_iter().map(|(id, _)| id).collect();
        assert_eq!(ids, ["nightstand_1", "nightstand_2", "bed_1"]);
    }

    #[test]
    fn task_from_layout_groups_objects() {
        let mut l = sample_layout(3);
        l.objects[1].description = l.objects[0].description.clone();
        l.objects[1].size = l.objects[0].size;
        let t = TaskSpec::from_layout(&l, "x").unwrap();
        assert_eq!(t.objects.len(), 2);
        assert_eq!(t.objects[0].quantity, 2);
        assert_eq!(t.total_instances(), 3);
    }

    #[test]
    fn room_type_parsing() {
        assert_eq!("Living Room".parse::<RoomType>().unwrap(), RoomType::LivingRoom);
        assert_eq!("living_room".parse::<RoomType>().unwrap(), RoomType::LivingRoom);
        assert!("garage".parse::<RoomType>().is_err());
    }
}
