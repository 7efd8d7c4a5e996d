//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and fails on `FAIL`.
//!
//! Run with `cargo test -p weightsim-core --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weightsim::agent::{play_game, DEFAULT_ATTEMPT_CAP};
use weightsim::games::{check_arrangement, check_balance, Side, CUBE_COUNT};
use weightsim::harness::{replay, replay_steps, RunConfig};
use weightsim::haptics::{step_dynamics, held_transition, DisplayRule, ForceComparison, Gesture};
use weightsim::sensor::{adc_to_force, adc_to_voltage, encode_frame, fit_calibration, parse_frame, ADC_MAX};
use weightsim::stats::{mean, welch_t_test};
use weightsim::trace::{decode_records, TraceRecord, TraceWriter};
use weightsim::{
    new_game, run_cohort, Channel, CohortConfig, Condition, DynamicsConfig, ForceSample, GameKind, HandState,
    Location, ObjectState, ParticipantModel, Phase, SensorFrame,
};

const TABLE_BUDGET: Duration = Duration::from_secs(1);
const DISPLACEMENT_TOL_M: f64 = 1e-6;
const CALIBRATION_REL_TOL: f64 = 1e-6;
const FRAME_ROUND_TRIPS: usize = 10_000;
const FRAME_MUTATIONS: usize = 100_000;
const FRAME_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_BUDGET: Duration = Duration::from_secs(1);
const DIRECTIONAL_AGENTS: usize = 1000;
const DIRECTIONAL_K: f64 = 0.15;
const DIRECTIONAL_CUE: f64 = 1.0;
const DIRECTIONAL_P: f64 = 0.01;
const DIRECTIONAL_BUDGET: Duration = Duration::from_secs(60);
const EXTREME_K: f64 = 10.0;
const EXTREME_ATTEMPTS: u32 = 10_000;
const EXTREME_REL_TOL: f64 = 0.15;

fn verdict(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn table_conformance() {
    use DisplayRule::*;
    use ForceComparison::*;
    let start = Instant::now();
    let rows = [
        (Phase::HeldResting, ForceLess, Phase::HeldResting, StayStatic),
        (Phase::HeldResting, ForceEqual, Phase::Lifting, BeginLift),
        (Phase::HeldResting, ForceGreater, Phase::Lifting, BeginLift),
        (Phase::Lifting, ForceEqual, Phase::Lifting, DisplayEqualsPhysical),
        (Phase::Lifting, ForceGreater, Phase::Lifting, DisplayAbovePhysical),
        (Phase::Lifting, ForceLess, Phase::Lifting, DisplayBelowPhysical),
    ];
    let mut mismatches = Vec::new();
    for phase in [Phase::Free, Phase::HeldResting, Phase::Lifting, Phase::Falling] {
        for cmp in ForceComparison::ALL {
            let want = rows.iter().find(|r| r.0 == phase && r.1 == cmp).map(|r| (r.2, r.3));
            let got = held_transition(phase, cmp).ok().map(|t| (t.next, t.rule));
            if want != got {
                mismatches.push(format!("{phase:?}/{cmp:?}: {got:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "table conformance",
        mismatches.is_empty() && elapsed < TABLE_BUDGET,
        format!("12 pairs checked, {} mismatches {mismatches:?}, {elapsed:?}", mismatches.len()),
    );
}

#[test]
fn displacement_law() {
    let cfg = DynamicsConfig::default();
    let mut worst = 0.0f64;
    let mut unit_gap = f64::NAN;
    for r in [0.5, 1.0, 1.5, 2.0] {
        let mut obj = ObjectState::new(1100.0, 0.0, 0.0, &cfg).unwrap();
        obj.attach(&HandState::new(0, 0.0, 0.0));
        obj.phase = Phase::Lifting;
        let force = r * obj.expected_force;
        for i in 1..=100u32 {
            let hand = HandState::new(u64::from(i) * 20, 0.0, 0.20 * f64::from(i) / 100.0);
            let sample = ForceSample { time_ms: hand.time_ms, thumb_force: force, palm_force: 0.0, gesture: Gesture::Pinch, effective_force: force };
            obj = step_dynamics(&obj, &hand, &sample, 0.02, &cfg);
        }
        worst = worst.max((obj.display_height - r * 0.20).abs());
        if r == 1.0 {
            unit_gap = (obj.display_height - obj.physical_height).abs();
        }
    }
    verdict(
        "C/D displacement law",
        worst <= DISPLACEMENT_TOL_M && unit_gap <= DISPLACEMENT_TOL_M,
        format!("max |rise - R*0.20| = {worst:.3e} m, |display - physical| at R=1 = {unit_gap:.3e} m"),
    );
}

#[test]
fn adc_conversion() {
    let lo = adc_to_voltage(0).unwrap();
    let hi = adc_to_voltage(1023).unwrap();
    verdict("ADC conversion", lo == 0.0 && hi == 5.0, format!("adc 0 -> {lo} V, adc 1023 -> {hi} V"));
}

#[test]
fn calibration_round_trip() {
    let mut worst = 0.0f64;
    let mut monotone = true;
    for (a, b, dead) in [(2.0, 1.5, 10u16), (8.0, 1.3, 10), (0.35, 2.4, 40), (15.0, 0.8, 0)] {
        let points: Vec<(u16, f64)> = [80u16, 200, 350, 600, 900, 1023]
            .iter()
            .map(|&adc| (adc, a * (f64::from(adc) * 5.0 / 1023.0).powf(b)))
            .collect();
        let m = fit_calibration(Channel::Thumb, &points, dead).unwrap();
        worst = worst.max(((m.a - a) / a).abs()).max(((m.b - b) / b).abs());
        let sweep: Vec<f64> = (0..=ADC_MAX).map(|adc| adc_to_force(adc, &m).unwrap()).collect();
        monotone &= sweep.windows(2).all(|w| w[1] >= w[0]);
    }
    verdict(
        "calibration round-trip",
        worst <= CALIBRATION_REL_TOL && monotone,
        format!("max relative error in (a, b) = {worst:.3e}, monotone over 0..=1023: {monotone}"),
    );
}

fn checksum_consistent(line: &[u8]) -> bool {
    let Some(body) = line.strip_suffix(b"\n") else { return false };
    let Some(star) = body.iter().rposition(|&b| b == b'*') else { return false };
    let x = body[..star].iter().fold(0u8, |a, b| a ^ b);
    body[star + 1..] == *format!("{x:02x}").as_bytes()
}

#[test]
fn frame_protocol() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut frames = Vec::with_capacity(FRAME_ROUND_TRIPS);
    let mut round_trip_failures = 0;
    for i in 0..FRAME_ROUND_TRIPS {
        let f = SensorFrame {
            seq: i as u32,
            time_ms: rng.random(),
            thumb_adc: rng.random_range(0..=ADC_MAX),
            palm_adc: rng.random_range(0..=ADC_MAX),
        };
        let line = encode_frame(&f).unwrap();
        if parse_frame(&line).ok() != Some(f) {
            round_trip_failures += 1;
        }
        frames.push(line);
    }

    let (mut accepted, mut bad_accepts) = (0, 0);
    let mut crashed = 0;
    for _ in 0..FRAME_MUTATIONS {
        let mut line = frames[rng.random_range(0..frames.len())].clone();
        for _ in 0..rng.random_range(1..=3) {
            let i = rng.random_range(0..line.len());
            match rng.random_range(0..4) {
                0 => line[i] = rng.random(),
                1 => line[i] ^= 1 << rng.random_range(0..8),
                2 => {
                    line.remove(i);
                    if line.is_empty() {
                        line.push(b'\n');
                    }
                }
                _ => line.insert(i, rng.random()),
            }
        }
        match std::panic::catch_unwind(|| parse_frame(&line)) {
            Err(_) => crashed += 1,
            Ok(Ok(_)) => {
                accepted += 1;
                if !checksum_consistent(&line) {
                    bad_accepts += 1;
                }
            }
            Ok(Err(_)) => {}
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "frame protocol",
        round_trip_failures == 0 && bad_accepts == 0 && crashed == 0 && elapsed < FRAME_BUDGET,
        format!(
            "{FRAME_ROUND_TRIPS} round-trips ({round_trip_failures} failures), {FRAME_MUTATIONS} mutants: \
             {accepted} accepted, {bad_accepts} with inconsistent checksum, {crashed} crashes, {elapsed:?}"
        ),
    );
}

#[test]
fn game_oracles() {
    let start = Instant::now();
    let mut arrangements = 0;
    let mut correct_perms = 0;
    let idx = [0usize, 1, 2, 3];
    for a in idx {
        for b in idx {
            for c in idx {
                for d in idx {
                    let p = [a, b, c, d];
                    if !(0..4).all(|i| p.contains(&i)) {
                        continue;
                    }
                    arrangements += 1;
                    let mut s = new_game(GameKind::ArrangeCubes, 0);
                    for (slot, cube) in p.iter().enumerate() {
                        s.locations[*cube] = Location::Container(slot as u8 + 1);
                    }
                    correct_perms += usize::from(check_arrangement(&s));
                }
            }
        }
    }
    let mut full = 0;
    let mut balanced = 0;
    for mask in 0u8..16 {
        let mut s = new_game(GameKind::BalanceScale, 0);
        for cube in 0..CUBE_COUNT {
            s.locations[cube] = Location::Scale(if mask & (1 << cube) != 0 { Side::Right } else { Side::Left });
        }
        full += 1;
        balanced += usize::from(check_balance(&s));
    }
    let elapsed = start.elapsed();
    verdict(
        "game oracles",
        arrangements == 24 && correct_perms == 1 && full == 16 && balanced == 2 && elapsed < ORACLE_BUDGET,
        format!("{correct_perms}/{arrangements} arrangements correct, {balanced}/{full} placements balanced, {elapsed:?}"),
    );
}

fn synthetic_trace(seed: u64) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = TraceWriter::new(Vec::new());
    let mut t = 0;
    for round in 0..4 {
        let x = 0.2 * f64::from(rng.random_range(0..4u8));
        let adc = rng.random_range(60..700u16);
        for i in 0..30 {
            let y = if i < 5 { 0.0 } else { 0.004 * f64::from(i - 5) };
            w.sample(t, if i < 25 { adc } else { 0 }, rng.random_range(0..40), x + 0.01 * f64::from(round), y).unwrap();
            t += 20;
        }
        w.record(&TraceRecord::action(Some(t), "submit")).unwrap();
        w.record(&TraceRecord::action(Some(t), "reset")).unwrap();
    }
    let bytes = w.finish().unwrap();
    weightsim::trace::read_records(std::io::Cursor::new(bytes)).unwrap()
}

#[test]
fn determinism() {
    let cfg = RunConfig::load(&data("golden_config.json")).unwrap();
    let golden = |c: &RunConfig| serde_json::to_vec(&replay(c, Some(&data("golden_trace.jsonl"))).unwrap().report).unwrap();
    let mut identical = golden(&cfg) == golden(&cfg);
    let mut traces = 1;
    for seed in 0..8 {
        let steps = decode_records(&synthetic_trace(seed)).unwrap();
        for cd in [true, false] {
            let mut c = cfg.clone();
            c.cd_enabled = Some(cd);
            let run = || serde_json::to_vec(&replay_steps(&c, &steps).unwrap().report).unwrap();
            identical &= run() == run();
            traces += 1;
        }
    }
    let cohort = CohortConfig { n_per_condition: 50, base_seed: 42, attempt_cap: DEFAULT_ATTEMPT_CAP, model: ParticipantModel::weber(0.3, 1.0) };
    let cohort_same = serde_json::to_vec(&run_cohort(&cohort).unwrap()).unwrap() == serde_json::to_vec(&run_cohort(&cohort).unwrap()).unwrap();
    verdict(
        "determinism",
        identical && cohort_same,
        format!("{traces} traces replayed twice identical: {identical}; cohort rerun identical: {cohort_same}"),
    );
}

#[test]
fn zero_noise_agents() {
    let cfg = CohortConfig { n_per_condition: 100, base_seed: 7, attempt_cap: DEFAULT_ATTEMPT_CAP, model: ParticipantModel::exact() };
    let report = run_cohort(&cfg).unwrap();
    let bad: Vec<_> = report
        .per_agent
        .iter()
        .filter(|r| !(r.report.attempts == 1 && r.report.solved && r.report.per_attempt.iter().all(|a| a.correct)))
        .map(|r| (r.game, r.condition, r.index))
        .collect();
    verdict(
        "zero-noise agents",
        bad.is_empty(),
        format!("{} agents over both games and conditions, {} not solved in exactly 1 attempt", report.per_agent.len(), bad.len()),
    );
}

#[test]
fn directional_model_check() {
    let start = Instant::now();
    let cfg = CohortConfig {
        n_per_condition: DIRECTIONAL_AGENTS,
        base_seed: 2024,
        attempt_cap: DEFAULT_ATTEMPT_CAP,
        model: ParticipantModel::weber(DIRECTIONAL_K, DIRECTIONAL_CUE),
    };
    let report = run_cohort(&cfg).unwrap();
    let on = report.attempts(GameKind::ArrangeCubes, Condition::CdOn);
    let off = report.attempts(GameKind::ArrangeCubes, Condition::CdOff);
    let test = welch_t_test(&on, &off).unwrap();
    let elapsed = start.elapsed();
    verdict(
        "directional model check",
        mean(&on) < mean(&off) && test.p_less < DIRECTIONAL_P && elapsed < DIRECTIONAL_BUDGET,
        format!(
            "Game 1 mean attempts CdOn {:.3} vs CdOff {:.3}, Welch t = {:.2}, one-sided p = {:.2e}, {elapsed:?}",
            mean(&on),
            mean(&off),
            test.t,
            test.p_less
        ),
    );
}

/// Plays fresh agents until `EXTREME_ATTEMPTS` attempts have been made; returns (successes, attempts).
fn extreme_success(game: GameKind) -> (u32, u32) {
    let model = ParticipantModel::weber(EXTREME_K, 0.0);
    let (mut successes, mut attempts) = (0, 0);
    let mut seed = 0;
    while attempts < EXTREME_ATTEMPTS {
        let r = play_game(game, &model, seed, Condition::CdOff, EXTREME_ATTEMPTS - attempts);
        successes += r.per_attempt.iter().filter(|a| a.correct).count() as u32;
        attempts += r.attempts;
        seed += 1;
    }
    (successes, attempts)
}

#[test]
fn extreme_noise_calibration() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (game, baseline) in [(GameKind::ArrangeCubes, 1.0 / 24.0), (GameKind::BalanceScale, 2.0 / 16.0)] {
        let (s, n) = extreme_success(game);
        let rate = f64::from(s) / f64::from(n);
        let rel = (rate - baseline).abs() / baseline;
        pass &= rel <= EXTREME_REL_TOL;
        lines.push(format!("{game:?} {s}/{n} = {rate:.4} vs {baseline:.4} (off by {:.0}%)", 100.0 * rel));
    }
    verdict("extreme-noise calibration", pass, lines.join("; "));
}
