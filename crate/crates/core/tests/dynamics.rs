use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use weightsim::haptics::{
    cd_ratio, expected_force, step_dynamics, held_transition, DisplayRule, ForceComparison, Gesture,
    STANDARD_GRAVITY,
};
use weightsim::{DynamicsConfig, ForceSample, HandState, ObjectState, Phase};

fn sample(t: u64, force: f64) -> ForceSample {
    ForceSample { time_ms: t, thumb_force: force, palm_force: 0.0, gesture: Gesture::Pinch, effective_force: force }
}

fn lifting(mass_g: f64, cfg: &DynamicsConfig) -> ObjectState {
    let mut obj = ObjectState::new(mass_g, 0.0, 0.0, cfg).unwrap();
    obj.attach(&HandState::new(0, 0.0, 0.0));
    obj.phase = Phase::Lifting;
    obj
}

fn rise(mut obj: ObjectState, force: f64, total: f64, ticks: u32, cfg: &DynamicsConfig) -> ObjectState {
    for i in 1..=ticks {
        let hand = HandState::new(u64::from(i) * 20, 0.0, total * f64::from(i) / f64::from(ticks));
        obj = step_dynamics(&obj, &hand, &sample(hand.time_ms, force), 0.02, cfg);
    }
    obj
}

#[test]
fn table_rows_exhaustive() {
    use DisplayRule::*;
    use ForceComparison::*;
    // (phase, comparison) -> (next, rule, release candidate), written out by hand
    let expected = [
        (Phase::HeldResting, ForceLess, Phase::HeldResting, StayStatic, false),
        (Phase::HeldResting, ForceEqual, Phase::Lifting, BeginLift, false),
        (Phase::HeldResting, ForceGreater, Phase::Lifting, BeginLift, false),
        (Phase::Lifting, ForceEqual, Phase::Lifting, DisplayEqualsPhysical, false),
        (Phase::Lifting, ForceGreater, Phase::Lifting, DisplayAbovePhysical, false),
        (Phase::Lifting, ForceLess, Phase::Lifting, DisplayBelowPhysical, true),
    ];
    for (phase, cmp, next, rule, release) in expected {
        let t = held_transition(phase, cmp).unwrap();
        assert_eq!((t.next, t.rule, t.release_candidate), (next, rule, release), "{phase:?} {cmp:?}");
    }
    for phase in [Phase::Free, Phase::Falling] {
        for cmp in ForceComparison::ALL {
            assert!(held_transition(phase, cmp).is_err());
        }
    }
}

#[test]
fn displacement_scales_with_ratio() {
    let cfg = DynamicsConfig::default();
    for r in [0.5, 1.0, 1.5, 2.0] {
        let obj = lifting(700.0, &cfg);
        let end = rise(obj.clone(), r * obj.expected_force, 0.20, 100, &cfg);
        assert_abs_diff_eq!(end.display_height, r * 0.20, epsilon = 1e-6);
        assert_abs_diff_eq!(end.physical_height, 0.20, epsilon = 1e-12);
    }
}

#[test]
fn resting_cube_does_not_move_under_light_force() {
    let cfg = DynamicsConfig::default();
    let mut obj = ObjectState::new(1800.0, 0.0, 0.0, &cfg).unwrap();
    obj.attach(&HandState::new(0, 0.0, 0.0));
    let end = rise(obj.clone(), 0.5 * obj.expected_force, 0.2, 50, &cfg);
    assert_eq!(end.phase, Phase::HeldResting);
    assert_eq!(end.display_height, 0.0);
}

#[test]
fn zero_force_drops_and_falls_under_gravity() {
    let cfg = DynamicsConfig::default();
    let obj = lifting(100.0, &cfg);
    let mut obj = rise(obj.clone(), obj.expected_force, 0.2, 10, &cfg);
    let hand = HandState::new(220, 0.0, 0.2);
    obj = step_dynamics(&obj, &hand, &ForceSample::idle(220), 0.02, &cfg);
    assert_eq!(obj.phase, Phase::Falling);
    let mut t = 0.0;
    while obj.phase == Phase::Falling {
        obj = step_dynamics(&obj, &hand, &ForceSample::idle(0), 0.001, &cfg);
        t += 0.001;
        assert!(t < 1.0);
    }
    // free fall from 0.2 m takes about sqrt(2h/g) = 0.202 s
    assert_abs_diff_eq!(t, (2.0 * 0.2 / STANDARD_GRAVITY).sqrt(), epsilon = 0.005);
    assert_eq!(obj.display_height, obj.support_height);
}

#[test]
fn cd_off_never_lifts_below_weight() {
    let cfg = DynamicsConfig::default().with_cd(false);
    let mut obj = ObjectState::new(700.0, 0.0, 0.0, &cfg).unwrap();
    obj.attach(&HandState::new(0, 0.0, 0.0));
    let end = rise(obj.clone(), 0.99 * obj.expected_force, 0.2, 100, &cfg);
    assert_eq!(end.display_height, 0.0);
    let end = rise(obj.clone(), 3.0 * obj.expected_force, 0.2, 100, &cfg);
    assert_abs_diff_eq!(end.display_height, 0.2, epsilon = 1e-9);
}

proptest! {
    #[test]
    fn ratio_scale_invariant(f in 0.01f64..50.0, e in 0.01f64..50.0, s in 0.01f64..100.0) {
        let a = cd_ratio(f, e, 4.0).unwrap();
        let b = cd_ratio(f * s, e * s, 4.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        prop_assert!((0.0..=4.0).contains(&a));
    }

    #[test]
    fn expected_force_monotone(m in 1.0f64..5000.0, d in 0.001f64..1000.0) {
        prop_assert!(expected_force(m + d, STANDARD_GRAVITY).unwrap() > expected_force(m, STANDARD_GRAVITY).unwrap());
    }

    #[test]
    fn display_ordering_law(mass in 50.0f64..3000.0, r in 0.3f64..3.9, up in 0.001f64..0.05) {
        // rising hand: display rise is above, equal to or below physical as R is above, at or below 1
        let cfg = DynamicsConfig::default();
        let obj = lifting(mass, &cfg);
        let hand = HandState::new(20, 0.0, up);
        let next = step_dynamics(&obj, &hand, &sample(20, r * obj.expected_force), 0.02, &cfg);
        let dd = next.display_height - obj.display_height;
        prop_assert!((dd - r * up).abs() < 1e-9);
        if r > 1.0 + 1e-6 { prop_assert!(dd > up); }
        if r < 1.0 - 1e-6 { prop_assert!(dd < up); }
    }

    #[test]
    fn display_never_below_support(mass in 50.0f64..3000.0, steps in proptest::collection::vec((-0.05f64..0.05, 0.0f64..40.0), 1..60)) {
        let cfg = DynamicsConfig::default();
        let mut obj = lifting(mass, &cfg);
        let mut h = 0.0;
        for (i, (dh, f)) in steps.into_iter().enumerate() {
            h += dh;
            obj = step_dynamics(&obj, &HandState::new(i as u64 * 20, 0.0, h), &sample(i as u64 * 20, f), 0.02, &cfg);
            prop_assert!(obj.display_height >= obj.support_height);
        }
    }

    #[test]
    fn dynamics_deterministic(mass in 50.0f64..3000.0, steps in proptest::collection::vec((-0.05f64..0.05, 0.0f64..40.0), 1..40)) {
        let cfg = DynamicsConfig::default();
        let run = || {
            let mut obj = lifting(mass, &cfg);
            let mut h = 0.0;
            for (i, (dh, f)) in steps.iter().enumerate() {
                h += dh;
                obj = step_dynamics(&obj, &HandState::new(i as u64 * 20, 0.0, h), &sample(i as u64 * 20, *f), 0.02, &cfg);
            }
            obj
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn cd_off_ratio_is_binary(mass in 50.0f64..3000.0, f in 0.0f64..60.0) {
        let cfg = DynamicsConfig::default().with_cd(false);
        let obj = lifting(mass, &cfg);
        let next = step_dynamics(&obj, &HandState::new(20, 0.0, 0.01), &sample(20, f), 0.02, &cfg);
        prop_assert!(next.ratio == 0.0 || next.ratio == 1.0);
    }
}
