use std::collections::HashMap;

use proptest::prelude::*;

use weightsim::games::{
    apply_action, check_arrangement, check_balance, scale_tilt, shuffled_layout, Side, Tilt, CUBE_COUNT,
};
use weightsim::{new_game, GameAction, GameKind, GameState, Location, Screen};

fn permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| p.contains(&i)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// `perm[container]` is the cube placed in container `container + 1`.
fn arranged(perm: [usize; 4]) -> GameState {
    let mut s = new_game(GameKind::ArrangeCubes, 3);
    for (slot, cube) in perm.iter().enumerate() {
        s.locations[*cube] = Location::Container(slot as u8 + 1);
    }
    s
}

#[test]
fn arrangement_oracle_matches_mass_order() {
    let masses = GameKind::ArrangeCubes.masses();
    let perms = permutations();
    assert_eq!(perms.len(), 24);
    let correct: Vec<_> = perms
        .iter()
        .filter(|p| check_arrangement(&arranged(**p)))
        .collect();
    assert_eq!(correct.len(), 1);
    let p = correct[0];
    assert!(p.windows(2).all(|w| masses[w[0]] < masses[w[1]]));
}

#[test]
fn balance_oracle_over_all_placements() {
    let masses = GameKind::BalanceScale.masses();
    let mut full_balanced = 0;
    for code in 0..81u32 {
        let mut s = new_game(GameKind::BalanceScale, 3);
        let mut c = code;
        let (mut left, mut right, mut all_on) = (0, 0, true);
        for cube in 0..CUBE_COUNT {
            s.locations[cube] = match c % 3 {
                0 => {
                    all_on = false;
                    Location::Table(cube as u8 + 1)
                }
                1 => {
                    left += masses[cube];
                    Location::Scale(Side::Left)
                }
                _ => {
                    right += masses[cube];
                    Location::Scale(Side::Right)
                }
            };
            c /= 3;
        }
        let expect = all_on && left == right;
        assert_eq!(check_balance(&s), expect, "placement {code}");
        full_balanced += usize::from(expect);
    }
    assert_eq!(full_balanced, 2);
}

#[test]
fn shuffles_are_uniform() {
    let n = 10_000u64;
    let mut counts: HashMap<[u8; 4], u32> = HashMap::new();
    for seed in 0..n {
        *counts.entry(shuffled_layout(seed, 0)).or_default() += 1;
    }
    assert_eq!(counts.len(), 24);
    let expected = n as f64 / 24.0;
    let chi2: f64 = counts.values().map(|&c| (f64::from(c) - expected).powi(2) / expected).sum();
    // 23 degrees of freedom, 0.999 quantile is about 49.7
    assert!(chi2 < 49.7, "chi2 = {chi2}");
    for c in counts.values() {
        assert!((f64::from(*c) / n as f64 - 1.0 / 24.0).abs() < 0.01);
    }
}

#[test]
fn scale_hidden_until_submit() {
    let mut s = new_game(GameKind::BalanceScale, 1);
    s.apply(GameAction::Grab(3)).unwrap();
    s.apply(GameAction::Release(Location::Scale(Side::Left))).unwrap();
    assert_eq!(scale_tilt(&s), Tilt::Level);
    s.apply(GameAction::Submit).unwrap();
    assert_eq!(s.screen, Screen::Incorrect);
    assert_eq!(scale_tilt(&s), Tilt::LeftDown);
    s.apply(GameAction::Reset).unwrap();
    assert_eq!(scale_tilt(&s), Tilt::Level);
}

#[test]
fn give_up_freezes() {
    let mut s = new_game(GameKind::ArrangeCubes, 1);
    s.apply(GameAction::GiveUp).unwrap();
    assert!(s.gave_up);
    assert!(s.apply(GameAction::Submit).is_err());
    assert_eq!(s.attempts, 0);
}

fn action() -> impl Strategy<Value = GameAction> {
    let location = prop_oneof![
        (1u8..=4).prop_map(Location::Table),
        (1u8..=4).prop_map(Location::Container),
        Just(Location::Scale(Side::Left)),
        Just(Location::Scale(Side::Right)),
    ];
    prop_oneof![
        4 => (0usize..5).prop_map(GameAction::Grab),
        4 => location.prop_map(GameAction::Release),
        1 => Just(GameAction::Submit),
        1 => Just(GameAction::Reset),
        1 => Just(GameAction::Restart),
    ]
}

fn game() -> impl Strategy<Value = GameKind> {
    prop_oneof![Just(GameKind::ArrangeCubes), Just(GameKind::BalanceScale)]
}

proptest! {
    #[test]
    fn cubes_conserved(kind in game(), seed in any::<u64>(), actions in proptest::collection::vec(action(), 0..80)) {
        let mut s = new_game(kind, seed);
        let mut attempts = 0;
        for a in actions {
            let before = s.clone();
            match s.apply(a) {
                Ok(()) => {}
                Err(_) => prop_assert_eq!(&s, &before),
            }
            prop_assert!(s.attempts >= attempts);
            attempts = s.attempts;
            prop_assert!(s.locations.iter().filter(|l| **l == Location::Held).count() <= 1);
            for (i, l) in s.locations.iter().enumerate() {
                prop_assert!(*l == Location::Held || s.is_valid_location(*l));
                if !matches!(l, Location::Scale(_) | Location::Held) {
                    prop_assert!(s.locations[i + 1..].iter().all(|o| o != l));
                }
            }
        }
        prop_assert_eq!(s.log.len() as u32, s.attempts);
    }

    #[test]
    fn reset_idempotent(kind in game(), seed in any::<u64>(), actions in proptest::collection::vec(action(), 0..30)) {
        let mut s = new_game(kind, seed);
        for a in actions {
            let _ = s.apply(a);
        }
        if let Ok(once) = apply_action(&s, GameAction::Reset) {
            let twice = apply_action(&once, GameAction::Reset).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.locations, once.initial_layout.map(Location::Table));
        }
    }

    #[test]
    fn new_game_deterministic(kind in game(), seed in any::<u64>()) {
        prop_assert_eq!(new_game(kind, seed), new_game(kind, seed));
    }
}
