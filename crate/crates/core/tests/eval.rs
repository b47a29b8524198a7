mod support;

use std::time::Instant;

use layoutforge_core::eval::{judge_scores, nav_eval, render_svg, success_rate, validate, JudgeItemError, NavTask, Pose, ValidationThresholds};
use layoutforge_core::gateway::{Gateway, GenerationParams, Script};
use layoutforge_core::prompt::format_completion;
use layoutforge_core::scene::{Layout, RoomType, TaskSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{completions, fixtures};

type Fixture = (Layout, (f64, f64, f64), &'static str);

fn run(f: &Fixture, res: f64) -> layoutforge_core::eval::NavResult {
    let (layout, (x, y, h), target) = f;
    nav_eval(layout, &NavTask::new(Pose::new(*x, *y, *h), *target).with_resolution(res)).unwrap()
}

#[test]
fn open_room_succeeds() {
    let r = run(&fixtures::open_room(), 0.1);
    assert!(r.success);
    assert!(r.nav_error <= 2.0);
}

#[test]
fn walled_target_fails() {
    let r = run(&fixtures::walled_room(), 0.1);
    assert!(!r.success);
    assert!(!r.reachable);
    assert!((r.nav_error - 4.0f64.hypot(4.0)).abs() < 1e-9);
}

#[test]
fn corridor_bearing_fails_the_view_cone() {
    let r = run(&fixtures::corridor_room(), 0.1);
    assert!(r.reachable);
    assert!(r.nav_error <= 2.0);
    let deg = r.bearing_error.to_degrees();
    assert!((40.0..=50.0).contains(&deg), "bearing error {deg}");
    assert!(!r.success);
}

#[test]
fn results_stable_when_grid_refines() {
    for f in [fixtures::open_room(), fixtures::walled_room(), fixtures::corridor_room()] {
        let (a, b) = (run(&f, 0.10), run(&f, 0.05));
        assert_eq!(a.reachable, b.reachable);
        assert_eq!(a.success, b.success);
    }
}

#[test]
fn success_implies_both_thresholds() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    for _ in 0..40 {
        let l = fixtures::valid_layout(&mut rng, RoomType::LivingRoom);
        let target = l.objects[0].instance_id.clone();
        let corner = l.floor.vertices()[0];
        let start = Pose::new(corner.x * 0.95, corner.y * 0.95, 1.0);
        let Ok(r) = nav_eval(&l, &NavTask::new(start, target.clone())) else { continue };
        checked += 1;
        if r.success {
            assert!(r.nav_error <= 2.0 + 1e-12);
            assert!(r.bearing_error <= std::f64::consts::FRAC_PI_6 + 1e-12);
        }
    }
    assert!(checked > 10);
}

fn tasks() -> Vec<TaskSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    RoomType::ALL
        .iter()
        .map(|&room| TaskSpec::from_layout(&fixtures::valid_layout(&mut rng, room), "").unwrap())
        .collect()
}

#[tokio::test]
async fn scripted_three_of_five() {
    let task = completions::task();
    let good = format_completion("ok", &completions::layout());
    let mut overlapping = completions::layout();
    overlapping.objects[1].placement = overlapping.objects[0].placement;
    let bad = format_completion("overlap", &overlapping);
    let script = Script::from_responses([good.clone(), "no answer here".into(), good.clone(), bad, good]);
    let g = Gateway::scripted(script, 2);
    let report = success_rate(&[task.clone()], &g, &GenerationParams::default(), 5, &ValidationThresholds::default()).await;
    let room = &report.rooms[&RoomType::Bedroom];
    assert_eq!((room.usable, room.attempted), (3, 5));
    assert_eq!(room.rate, 0.6);

    let g = Gateway::scripted(Script::from_responses(vec!["<answer>{".to_string(); 4]), 2);
    let report = success_rate(&[task], &g, &GenerationParams::default(), 4, &ValidationThresholds::default()).await;
    assert_eq!(report.rooms[&RoomType::Bedroom].rate, 0.0);
}

#[tokio::test]
async fn full_protocol_against_template_backend() {
    let started = Instant::now();
    let g = Gateway::template(8);
    let report = success_rate(&tasks(), &g, &GenerationParams::default(), 50, &ValidationThresholds::default()).await;
    assert_eq!(report.rooms.len(), 4);
    for r in report.rooms.values() {
        assert_eq!(r.attempted, 50);
        assert!((0.0..=1.0).contains(&r.rate));
    }
    assert!(started.elapsed().as_secs_f64() < 60.0);
    let again = success_rate(&tasks(), &g, &GenerationParams::default(), 50, &ValidationThresholds::default()).await;
    assert_eq!(report, again);
}

#[tokio::test]
async fn judge_batch_reports_per_item() {
    let l = completions::layout();
    let ok = r#"{"functionality_score": 7, "layout_score": 8, "aesthetics_score": 6, "overall_score": 7, "comments": "fine"}"#;
    let g = Gateway::scripted(Script::from_responses([ok, "no scores", ok]), 2);
    let out = judge_scores(&vec![l; 4], "cozy", &g, &GenerationParams::default()).await;
    assert_eq!(out.len(), 4);
    assert_eq!(out[0].as_ref().unwrap().functionality, 7);
    assert!(matches!(out[1], Err(JudgeItemError::Parse(_))));
    assert!(out[2].is_ok());
    assert!(matches!(out[3], Err(JudgeItemError::Gateway(_))));
}

#[test]
fn svg_is_deterministic() {
    let l = completions::layout();
    assert_eq!(render_svg(&l, &Default::default()), render_svg(&l, &Default::default()));
}

proptest! {
    #[test]
    fn loosening_thresholds_never_breaks_usability(seed in any::<u64>(), a in 0.0..0.5f64, b in 0.0..0.5f64, da in 0.0..0.5f64, db in 0.0..0.5f64) {
        let l = fixtures::cluttered_layout(&mut ChaCha8Rng::seed_from_u64(seed));
        let tight = ValidationThresholds { max_pair_overlap: a, max_boundary_violation: b, require_counts_match: false };
        let loose = ValidationThresholds { max_pair_overlap: a + da, max_boundary_violation: b + db, require_counts_match: false };
        prop_assert!(!validate(&l, &tight).usable || validate(&l, &loose).usable);
    }
}
