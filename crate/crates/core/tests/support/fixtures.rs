//! Seeded layout, polygon and navigation fixtures.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use layoutforge_core::geometry::{containment_violation, footprint, overlap_area, FootprintMode, Point2};
use layoutforge_core::scene::{slug, BoxSize, FloorPlan, Layout, PlacedObject, Placement, Point3, RoomType, SceneRecord, SceneSource};
use rand::Rng;

const NAMES: &[(RoomType, &[&str])] = &[
    (RoomType::Bedroom, &["double bed", "nightstand", "wardrobe", "dresser", "desk", "desk chair", "floor lamp"]),
    (RoomType::LivingRoom, &["sofa", "coffee table", "tv stand", "armchair", "bookshelf", "side table"]),
    (RoomType::Kitchen, &["refrigerator", "kitchen counter", "dining table", "dining chair", "stove"]),
    (RoomType::Bathroom, &["toilet", "bathtub", "sink cabinet", "towel rack"]),
];

fn names(room: RoomType) -> &'static [&'static str] {
    NAMES.iter().find(|(r, _)| *r == room).map(|(_, n)| *n).unwrap()
}

fn object(rng: &mut impl Rng, room: RoomType, k: usize, pos: Point2, rotation: f64) -> PlacedObject {
    let n = names(room);
    let description = n[rng.gen_range(0..n.len())];
    let size = BoxSize::new(rng.gen_range(0.3..1.4), rng.gen_range(0.3..1.1), rng.gen_range(0.4..2.0)).unwrap();
    PlacedObject::new(format!("{}_{k}", slug(description)), description, size, Placement::new(Point3::new(pos.x, pos.y, 0.0), rotation))
}

/// Rectangular room with 2 to 7 objects, all inside the floor and pairwise disjoint.
pub fn valid_layout(rng: &mut impl Rng, room: RoomType) -> Layout {
    loop {
        let (w, d) = (rng.gen_range(3.0..6.0), rng.gen_range(3.0..6.0));
        let floor = FloorPlan::rectangle(w, d).unwrap();
        let want = rng.gen_range(2..=7);
        let mut objects: Vec<PlacedObject> = Vec::new();
        let mut tries = 0;
        while objects.len() < want && tries < 400 {
            tries += 1;
            let rotation = if rng.gen_bool(0.7) { f64::from(rng.gen_range(0..4u8)) * FRAC_PI_2 } else { rng.gen_range(0.0..TAU) };
            let pos = Point2::new(rng.gen_range(-w / 2.0..w / 2.0), rng.gen_range(-d / 2.0..d / 2.0));
            let cand = object(rng, room, objects.len() + 1, pos, rotation);
            let rect = footprint(&cand.placement, &cand.size, FootprintMode::Oriented);
            if containment_violation(&rect, &floor) > 0.0 {
                continue;
            }
            if objects
                .iter()
                .any(|o| overlap_area(&footprint(&o.placement, &o.size, FootprintMode::Oriented), &rect) > 0.0)
            {
                continue;
            }
            objects.push(cand);
        }
        if objects.len() >= 2 {
            return Layout::new(room, floor, objects).unwrap();
        }
    }
}

/// Objects dropped anywhere near the floor; overlaps are likely.
pub fn cluttered_layout(rng: &mut impl Rng) -> Layout {
    let floor = FloorPlan::rectangle(rng.gen_range(2.0..5.0), rng.gen_range(2.0..5.0)).unwrap();
    let n = rng.gen_range(1..=8);
    let objects = (0..n)
        .map(|k| {
            let pos = Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let r = rng.gen_range(0.0..TAU);
            object(rng, RoomType::LivingRoom, k + 1, pos, r)
        })
        .collect();
    Layout::new(RoomType::LivingRoom, floor, objects).unwrap()
}

/// Rigidly moves a whole layout: rotation by `theta` about the origin, then translation.
pub fn rigid_transform(layout: &Layout, theta: f64, dx: f64, dy: f64) -> Layout {
    let (s, c) = theta.sin_cos();
    let map = |x: f64, y: f64| Point2::new(x * c - y * s + dx, x * s + y * c + dy);
    let floor = FloorPlan::new(layout.floor.vertices().iter().map(|v| map(v.x, v.y)).collect()).unwrap();
    let objects = layout
        .objects
        .iter()
        .map(|o| {
            let p = o.placement.position;
            let q = map(p.x, p.y);
            let mut out = o.clone();
            out.placement = Placement::new(Point3::new(q.x, q.y, p.z), o.placement.rotation() + theta);
            out
        })
        .collect();
    Layout::new(layout.room_type, floor, objects).unwrap()
}

/// Star-shaped simple polygon far from the origin.
pub fn random_polygon(rng: &mut impl Rng) -> FloorPlan {
    loop {
        let n = rng.gen_range(3..=12);
        let center = Point2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let pts = angles
            .iter()
            .map(|a| {
                let r = rng.gen_range(1.0..5.0);
                Point2::new(center.x + r * a.cos(), center.y + r * a.sin())
            })
            .collect();
        if let Ok(f) = FloorPlan::new(pts) {
            return f;
        }
    }
}

pub fn record(id: String, layout: Layout) -> SceneRecord {
    SceneRecord {
        scene_id: id,
        source: SceneSource::Generated,
        semantic_summary: None,
        layout,
    }
}

fn thing(id: &str, x: f64, y: f64, w: f64, d: f64) -> PlacedObject {
    PlacedObject::new(id, id.replace('_', " "), BoxSize::new(w, d, 1.0).unwrap(), Placement::new(Point3::new(x, y, 0.0), 0.0))
}

/// Empty 6x6 m room with an armchair 1.5 m straight ahead of the start pose.
pub fn open_room() -> (Layout, (f64, f64, f64), &'static str) {
    let layout = Layout::new(RoomType::LivingRoom, FloorPlan::rectangle(6.0, 6.0).unwrap(), vec![thing("armchair", 0.0, 1.0, 0.8, 0.8)]).unwrap();
    (layout, (0.0, -0.5, 0.0), "armchair")
}

/// Target inside a closed ring of walls that keeps every cell within 2 m out of reach.
pub fn walled_room() -> (Layout, (f64, f64, f64), &'static str) {
    let objects = vec![
        thing("safe", 0.0, 0.0, 0.6, 0.6),
        thing("north_wall", 0.0, 2.5, 5.2, 0.2),
        thing("south_wall", 0.0, -2.5, 5.2, 0.2),
        thing("east_wall", 2.5, 0.0, 0.2, 5.2),
        thing("west_wall", -2.5, 0.0, 0.2, 5.2),
    ];
    let layout = Layout::new(RoomType::LivingRoom, FloorPlan::rectangle(10.0, 10.0).unwrap(), objects).unwrap();
    (layout, (-4.0, -4.0, 0.0), "safe")
}

/// A 0.4 m corridor running past the target. The robot enters the success
/// radius heading along the corridor, about 45 degrees off the target bearing.
pub fn corridor_room() -> (Layout, (f64, f64, f64), &'static str) {
    let floor = FloorPlan::new(vec![Point2::new(-6.0, -1.0), Point2::new(2.0, -1.0), Point2::new(2.0, 1.8), Point2::new(-6.0, 1.8)]).unwrap();
    let objects = vec![thing("partition", -2.0, 0.2, 8.0, 2.4), thing("cabinet", 0.0, 0.0, 0.4, 0.4)];
    let layout = Layout::new(RoomType::LivingRoom, floor, objects).unwrap();
    (layout, (-5.5, 1.6, 3.0 * PI / 2.0), "cabinet")
}
