mod support;

use std::f64::consts::TAU;
use std::time::Instant;

use layoutforge_core::geometry::{oor, overlap_area, FootprintMode, OrientedRect2D, Point2};
use layoutforge_core::scene::{BoxSize, FloorPlan, Layout, PlacedObject, Placement, Point3, RoomType};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{fixtures, raster};

fn random_pair(rng: &mut ChaCha8Rng) -> (raster::Rect, raster::Rect) {
    let mut one = || raster::Rect {
        cx: rng.gen_range(-1.0..1.0),
        cy: rng.gen_range(-1.0..1.0),
        hw: rng.gen_range(0.05..1.0),
        hd: rng.gen_range(0.05..1.0),
        angle: rng.gen_range(0.0..TAU),
    };
    (one(), one())
}

fn lib_rect(r: &raster::Rect) -> OrientedRect2D {
    OrientedRect2D::new(Point2::new(r.cx, r.cy), r.hw, r.hd, r.angle)
}

#[test]
fn overlap_matches_raster_oracle_on_1000_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let started = Instant::now();
    let mut overlapping = 0;
    for i in 0..1000 {
        let (a, b) = random_pair(&mut rng);
        let got = overlap_area(&lib_rect(&a), &lib_rect(&b));
        let want = raster::overlap(&a, &b);
        let tol = (1e-3 * raster::area(&a).min(raster::area(&b))).max(1e-4);
        assert!((got - want).abs() <= tol, "pair {i}: {got} vs oracle {want} (tol {tol}) for {a:?} {b:?}");
        if want > 0.0 {
            overlapping += 1;
        }
    }
    assert!(overlapping > 500, "only {overlapping} overlapping pairs");
    assert!(started.elapsed().as_secs_f64() < 30.0);
}

fn unit(id: &str, x: f64, y: f64, side: f64) -> PlacedObject {
    PlacedObject::new(id, "box", BoxSize::new(side, side, 1.0).unwrap(), Placement::new(Point3::new(x, y, 0.0), 0.0))
}

fn room(objects: Vec<PlacedObject>) -> Layout {
    Layout::new(RoomType::Bedroom, FloorPlan::rectangle(6.0, 6.0).unwrap(), objects).unwrap()
}

#[test]
fn oor_fixtures() {
    let disjoint = room(vec![unit("a", -1.0, 0.0, 1.0), unit("b", 1.0, 0.0, 1.0)]);
    assert_eq!(oor(&disjoint, FootprintMode::Oriented).unwrap(), 0.0);
    let coincident = room(vec![unit("a", 0.0, 0.0, 1.0), unit("b", 0.0, 0.0, 1.0)]);
    assert!((oor(&coincident, FootprintMode::Oriented).unwrap() - 0.5).abs() < 1e-12);
    let shifted = room(vec![unit("a", 0.0, 0.0, 2.0), unit("b", 1.0, 0.0, 2.0)]);
    assert!((oor(&shifted, FootprintMode::Oriented).unwrap() - 0.25).abs() < 1e-9);
}

#[test]
fn oor_is_rigid_motion_invariant_on_100_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nonzero = 0;
    for _ in 0..100 {
        let l = fixtures::cluttered_layout(&mut rng);
        let base = oor(&l, FootprintMode::Oriented).unwrap();
        if base > 0.0 {
            nonzero += 1;
        }
        let moved = fixtures::rigid_transform(&l, rng.gen_range(0.0..TAU), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let after = oor(&moved, FootprintMode::Oriented).unwrap();
        assert!((base - after).abs() < 1e-9, "{base} vs {after}");
    }
    assert!(nonzero > 50);
}

proptest! {
    #[test]
    fn overlap_is_symmetric_and_bounded(
        ax in -2.0..2.0f64, ay in -2.0..2.0f64, aw in 0.01..2.0f64, ad in 0.01..2.0f64, ar in 0.0..TAU,
        bx in -2.0..2.0f64, by in -2.0..2.0f64, bw in 0.01..2.0f64, bd in 0.01..2.0f64, br in 0.0..TAU,
    ) {
        let a = OrientedRect2D::new(Point2::new(ax, ay), aw, ad, ar);
        let b = OrientedRect2D::new(Point2::new(bx, by), bw, bd, br);
        let ab = overlap_area(&a, &b);
        prop_assert_eq!(ab, overlap_area(&b, &a));
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= a.area().min(b.area()) + 1e-9);
        prop_assert!((overlap_area(&a, &a) - a.area()).abs() < 1e-9 * a.area().max(1.0));
    }

    #[test]
    fn oor_invariant_under_random_motion(seed in any::<u64>(), theta in 0.0..TAU, dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = fixtures::cluttered_layout(&mut rng);
        let a = oor(&l, FootprintMode::Oriented).unwrap();
        let b = oor(&fixtures::rigid_transform(&l, theta, dx, dy), FootprintMode::Oriented).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}
