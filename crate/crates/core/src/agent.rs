//! Synthetic participants that play both cube games from noisy weight estimates.
//!
//! A participant perceives a cube of mass `m` as
//! `m * (1 + e_rel) + e_abs` with `e_rel ~ N(0, k_eff^2)` and
//! `e_abs ~ N(0, sigma_abs^2)`. With C/D feedback on, the observed ratio
//! sharpens the relative term: `k_eff = k / (1 + cue_gain)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{new_game, AttemptReport, GameAction, GameKind, GameState, Location, Screen, Side, CUBE_COUNT};
use crate::games::placement_histogram;
use crate::stats;

pub const DEFAULT_ATTEMPT_CAP: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("mass must be positive, got {0} g")]
    NonPositiveMass(f64),
    #[error("invalid participant model: {0}")]
    InvalidModel(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    CdOn,
    CdOff,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::CdOn, Condition::CdOff];

    pub fn cd_enabled(self) -> bool {
        self == Condition::CdOn
    }

    pub fn from_cd(cd_enabled: bool) -> Self {
        if cd_enabled {
            Condition::CdOn
        } else {
            Condition::CdOff
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantModel {
    pub weber_fraction: f64,
    #[serde(default)]
    pub absolute_noise_g: f64,
    #[serde(default)]
    pub cue_gain: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ParticipantModel {
    pub fn exact() -> Self {
        Self::weber(0.0, 0.0)
    }

    pub fn weber(weber_fraction: f64, cue_gain: f64) -> Self {
        Self {
            weber_fraction,
            absolute_noise_g: 0.0,
            cue_gain,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.weber_fraction) {
            return Err(AgentError::InvalidModel("weber_fraction must be finite and >= 0"));
        }
        if !ok(self.absolute_noise_g) {
            return Err(AgentError::InvalidModel("absolute_noise_g must be finite and >= 0"));
        }
        if !ok(self.cue_gain) {
            return Err(AgentError::InvalidModel("cue_gain must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn effective_weber(&self, condition: Condition) -> f64 {
        match condition {
            Condition::CdOn => self.weber_fraction / (1.0 + self.cue_gain),
            Condition::CdOff => self.weber_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceivedWeight {
    pub cube: usize,
    pub estimate_g: f64,
    pub condition: Condition,
}

/// One noisy weight judgement. Non-positive draws are redrawn.
pub fn perceive_weight<R: Rng>(
    cube: usize,
    mass_g: f64,
    model: &ParticipantModel,
    condition: Condition,
    rng: &mut R,
) -> Result<PerceivedWeight, AgentError> {
    if !(mass_g > 0.0 && mass_g.is_finite()) {
        return Err(AgentError::NonPositiveMass(mass_g));
    }
    model.validate()?;
    let k = model.effective_weber(condition);
    let sigma = model.absolute_noise_g;
    let estimate_g = if k == 0.0 && sigma == 0.0 {
        mass_g
    } else {
        // both scales are finite and non-negative, so construction cannot fail
        let rel = Normal::new(0.0, k).map_err(|_| AgentError::InvalidModel("weber_fraction"))?;
        let abs = Normal::new(0.0, sigma).map_err(|_| AgentError::InvalidModel("absolute_noise_g"))?;
        loop {
            let e = mass_g * (1.0 + rel.sample(rng)) + abs.sample(rng);
            if e > 0.0 && e.is_finite() {
                break e;
            }
        }
    };
    Ok(PerceivedWeight {
        cube,
        estimate_g,
        condition,
    })
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn perception_rng(model: &ParticipantModel, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed ^ mix_seed(model.seed)))
}

fn perceive_all<R: Rng>(
    state: &GameState,
    model: &ParticipantModel,
    condition: Condition,
    rng: &mut R,
) -> [f64; CUBE_COUNT] {
    let mut out = [0.0; CUBE_COUNT];
    for (slot, cube) in out.iter_mut().zip(&state.cubes) {
        // masses are the fixed positive game weights
        *slot = perceive_weight(cube.id, f64::from(cube.mass_g), model, condition, rng)
            .map_or(f64::from(cube.mass_g), |p| p.estimate_g);
    }
    out
}

fn submit_placement(state: &mut GameState, targets: [Location; CUBE_COUNT]) {
    for (cube, target) in targets.into_iter().enumerate() {
        // a freshly reset Playing state always accepts these moves
        let grabbed = state.apply(GameAction::Grab(cube));
        debug_assert!(grabbed.is_ok());
        let released = state.apply(GameAction::Release(target));
        debug_assert!(released.is_ok());
    }
    let submitted = state.apply(GameAction::Submit);
    debug_assert!(submitted.is_ok());
}

fn play<F>(game: GameKind, model: &ParticipantModel, seed: u64, condition: Condition, cap: u32, mut choose: F) -> AttemptReport
where
    F: FnMut(&GameState, &[f64; CUBE_COUNT]) -> [Location; CUBE_COUNT],
{
    let mut state = new_game(game, seed);
    let mut rng = perception_rng(model, seed);
    while state.attempts < cap {
        let estimates = perceive_all(&state, model, condition, &mut rng);
        let targets = choose(&state, &estimates);
        submit_placement(&mut state, targets);
        if state.screen == Screen::Success {
            break;
        }
        let reset = state.apply(GameAction::Reset);
        debug_assert!(reset.is_ok());
    }
    let mut report = AttemptReport::from_state(&state, condition.cd_enabled());
    report.capped = state.screen != Screen::Success;
    report
}

/// Sorts cubes by estimate into containers 1..=4. Ties break by cube id.
pub fn arrangement_from_estimates(estimates: &[f64; CUBE_COUNT]) -> [Location; CUBE_COUNT] {
    let mut order: Vec<usize> = (0..CUBE_COUNT).collect();
    order.sort_by(|&a, &b| estimates[a].total_cmp(&estimates[b]).then(a.cmp(&b)));
    let mut targets = [Location::Held; CUBE_COUNT];
    for (rank, cube) in order.into_iter().enumerate() {
        targets[cube] = Location::Container(rank as u8 + 1);
    }
    targets
}

/// Left/right split for bitmask `mask`: bit `i` set puts cube `i` on the right pan.
pub fn split_from_mask(mask: u8) -> [Location; CUBE_COUNT] {
    std::array::from_fn(|i| {
        if mask >> i & 1 == 1 {
            Location::Scale(Side::Right)
        } else {
            Location::Scale(Side::Left)
        }
    })
}

/// The full placement with the smallest estimated imbalance, first in mask order on ties.
pub fn balance_from_estimates(estimates: &[f64; CUBE_COUNT]) -> [Location; CUBE_COUNT] {
    let imbalance = |mask: u8| -> f64 {
        (0..CUBE_COUNT)
            .map(|i| if mask >> i & 1 == 1 { -estimates[i] } else { estimates[i] })
            .sum::<f64>()
            .abs()
    };
    let best = (0u8..1 << CUBE_COUNT)
        .min_by(|&a, &b| imbalance(a).total_cmp(&imbalance(b)).then(a.cmp(&b)))
        .unwrap_or(0);
    split_from_mask(best)
}

pub fn play_game1(model: &ParticipantModel, seed: u64, condition: Condition) -> AttemptReport {
    play_game1_capped(model, seed, condition, DEFAULT_ATTEMPT_CAP)
}

pub fn play_game1_capped(model: &ParticipantModel, seed: u64, condition: Condition, cap: u32) -> AttemptReport {
    play(GameKind::ArrangeCubes, model, seed, condition, cap, |_, est| arrangement_from_estimates(est))
}

pub fn play_game2(model: &ParticipantModel, seed: u64, condition: Condition) -> AttemptReport {
    play_game2_capped(model, seed, condition, DEFAULT_ATTEMPT_CAP)
}

pub fn play_game2_capped(model: &ParticipantModel, seed: u64, condition: Condition, cap: u32) -> AttemptReport {
    play(GameKind::BalanceScale, model, seed, condition, cap, |_, est| balance_from_estimates(est))
}

pub fn play_game(game: GameKind, model: &ParticipantModel, seed: u64, condition: Condition, cap: u32) -> AttemptReport {
    match game {
        GameKind::ArrangeCubes => play_game1_capped(model, seed, condition, cap),
        GameKind::BalanceScale => play_game2_capped(model, seed, condition, cap),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_per_condition: usize,
    pub base_seed: u64,
    pub attempt_cap: u32,
    pub model: ParticipantModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub index: usize,
    pub game: GameKind,
    pub condition: Condition,
    pub seed: u64,
    pub report: AttemptReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub game: GameKind,
    pub condition: Condition,
    pub agents: usize,
    pub total_attempts: u64,
    pub mean_attempts: f64,
    pub sd_attempts: f64,
    pub capped_agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionHistogram {
    pub game: GameKind,
    pub condition: Condition,
    /// `counts[receptacle][cube]` summed over all agents and attempts.
    pub counts: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub config: CohortConfig,
    pub per_agent: Vec<AgentRecord>,
    pub per_condition: Vec<ConditionSummary>,
    pub histograms: Vec<ConditionHistogram>,
}

impl CohortReport {
    pub fn attempts(&self, game: GameKind, condition: Condition) -> Vec<f64> {
        self.per_agent
            .iter()
            .filter(|r| r.game == game && r.condition == condition)
            .map(|r| f64::from(r.report.attempts))
            .collect()
    }

    pub fn summary(&self, game: GameKind, condition: Condition) -> Option<&ConditionSummary> {
        self.per_condition.iter().find(|s| s.game == game && s.condition == condition)
    }
}

pub const GAMES: [GameKind; 2] = [GameKind::ArrangeCubes, GameKind::BalanceScale];

/// Seed of agent `index` for one game and condition.
pub fn agent_seed(base_seed: u64, game: GameKind, condition: Condition, index: usize) -> u64 {
    let g = match game {
        GameKind::ArrangeCubes => 1,
        GameKind::BalanceScale => 2,
    };
    let c = match condition {
        Condition::CdOn => 1,
        Condition::CdOff => 2,
    };
    mix_seed(mix_seed(mix_seed(base_seed) ^ g) ^ c).wrapping_add(index as u64)
}

/// Runs `n_per_condition` agents for every game and condition.
///
/// Agents run in parallel; records are ordered by (game, condition, index)
/// so the report does not depend on scheduling.
pub fn run_cohort(config: &CohortConfig) -> Result<CohortReport, AgentError> {
    config.model.validate()?;
    let jobs: Vec<(GameKind, Condition, usize)> = GAMES
        .iter()
        .flat_map(|&g| Condition::ALL.iter().flat_map(move |&c| (0..config.n_per_condition).map(move |i| (g, c, i))))
        .collect();
    let per_agent: Vec<AgentRecord> = jobs
        .par_iter()
        .map(|&(game, condition, index)| {
            let seed = agent_seed(config.base_seed, game, condition, index);
            AgentRecord {
                index,
                game,
                condition,
                seed,
                report: play_game(game, &config.model, seed, condition, config.attempt_cap),
            }
        })
        .collect();

    let mut per_condition = Vec::new();
    let mut histograms = Vec::new();
    for game in GAMES {
        for condition in Condition::ALL {
            let group: Vec<&AgentRecord> =
                per_agent.iter().filter(|r| r.game == game && r.condition == condition).collect();
            let attempts: Vec<f64> = group.iter().map(|r| f64::from(r.report.attempts)).collect();
            per_condition.push(ConditionSummary {
                game,
                condition,
                agents: group.len(),
                total_attempts: group.iter().map(|r| u64::from(r.report.attempts)).sum(),
                mean_attempts: if attempts.is_empty() { 0.0 } else { stats::mean(&attempts) },
                sd_attempts: stats::sample_sd(&attempts),
                capped_agents: group.iter().filter(|r| r.report.capped).count(),
            });
            let log: Vec<_> = group.iter().flat_map(|r| r.report.per_attempt.iter().cloned()).collect();
            histograms.push(ConditionHistogram {
                game,
                condition,
                counts: placement_histogram(game, &log),
            });
        }
    }
    Ok(CohortReport {
        config: config.clone(),
        per_agent,
        per_condition,
        histograms,
    })
}
