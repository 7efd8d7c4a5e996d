//! "Arrange the Cubes" and "Balance the Scale" as seeded state machines.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CUBE_COUNT: usize = 4;
pub const ARRANGE_MASSES_G: [u32; CUBE_COUNT] = [100, 700, 1800, 2200];
/// Sorted ascending so cube ids follow mass rank in both games.
pub const BALANCE_MASSES_G: [u32; CUBE_COUNT] = [100, 1100, 1100, 2100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    ArrangeCubes,
    BalanceScale,
}

impl GameKind {
    pub fn masses(self) -> [u32; CUBE_COUNT] {
        match self {
            GameKind::ArrangeCubes => ARRANGE_MASSES_G,
            GameKind::BalanceScale => BALANCE_MASSES_G,
        }
    }

    pub fn color(self) -> CubeColor {
        match self {
            GameKind::ArrangeCubes => CubeColor::Blue,
            GameKind::BalanceScale => CubeColor::Green,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeColor {
    Blue,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub id: usize,
    pub mass_g: u32,
    pub color: CubeColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Where a cube currently is. Slots and containers are numbered 1..=4 from the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Table(u8),
    Container(u8),
    Scale(Side),
    Held,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Table(n) => write!(f, "table {n}"),
            Location::Container(n) => write!(f, "container {n}"),
            Location::Scale(Side::Left) => f.write_str("scale left"),
            Location::Scale(Side::Right) => f.write_str("scale right"),
            Location::Held => f.write_str("held"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Screen {
    Playing,
    Incorrect,
    Success,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameAction {
    Grab(usize),
    Release(Location),
    Submit,
    Reset,
    Restart,
    GiveUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tilt {
    Level,
    LeftDown,
    RightDown,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("{action:?} is not allowed on the {screen:?} screen")]
    IllegalForScreen { action: GameAction, screen: Screen },
    #[error("game was given up; no further actions")]
    Frozen,
    #[error("no cube with id {0}")]
    UnknownCube(usize),
    #[error("a cube is already held")]
    AlreadyHolding,
    #[error("no cube is held")]
    NothingHeld,
    #[error("{0} is not a location in this game")]
    InvalidLocation(Location),
    #[error("{0} is occupied")]
    Occupied(Location),
}

/// One submitted arrangement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// Location of each cube, indexed by cube id.
    pub placements: [Location; CUBE_COUNT],
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub game: GameKind,
    pub cubes: [CubeSpec; CUBE_COUNT],
    pub locations: [Location; CUBE_COUNT],
    pub screen: Screen,
    pub attempts: u32,
    pub gave_up: bool,
    pub seed: u64,
    /// Table slot of each cube at the last shuffle.
    pub initial_layout: [u8; CUBE_COUNT],
    /// Number of shuffles drawn so far; the next restart uses this index.
    pub shuffles: u64,
    /// Set by Submit, cleared by Reset/Restart. The scale only tilts once revealed.
    pub scale_revealed: bool,
    pub log: Vec<AttemptRecord>,
}

/// Table slot per cube for the `index`-th shuffle of `seed` (Fisher-Yates).
pub fn shuffled_layout(seed: u64, index: u64) -> [u8; CUBE_COUNT] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut slots = [1u8, 2, 3, 4];
    slots.shuffle(&mut rng);
    slots
}

pub fn new_game(game: GameKind, seed: u64) -> GameState {
    let masses = game.masses();
    let cubes = std::array::from_fn(|id| CubeSpec {
        id,
        mass_g: masses[id],
        color: game.color(),
    });
    let layout = shuffled_layout(seed, 0);
    GameState {
        game,
        cubes,
        locations: layout.map(Location::Table),
        screen: Screen::Playing,
        attempts: 0,
        gave_up: false,
        seed,
        initial_layout: layout,
        shuffles: 1,
        scale_revealed: false,
        log: Vec::new(),
    }
}

/// Pure form of [`GameState::apply`].
pub fn apply_action(state: &GameState, action: GameAction) -> Result<GameState, GameError> {
    let mut next = state.clone();
    next.apply(action)?;
    Ok(next)
}

impl GameState {
    pub fn new(game: GameKind, seed: u64) -> Self {
        new_game(game, seed)
    }

    pub fn held_cube(&self) -> Option<usize> {
        self.locations.iter().position(|l| *l == Location::Held)
    }

    pub fn cube_at(&self, location: Location) -> Option<usize> {
        self.locations.iter().position(|l| *l == location)
    }

    /// Cube ids in each container 1..=4 (Game 1 layout).
    pub fn containers(&self) -> [Option<usize>; CUBE_COUNT] {
        std::array::from_fn(|i| self.cube_at(Location::Container(i as u8 + 1)))
    }

    pub fn side_sum(&self, side: Side) -> u32 {
        self.cubes
            .iter()
            .zip(&self.locations)
            .filter(|(_, l)| **l == Location::Scale(side))
            .map(|(c, _)| c.mass_g)
            .sum()
    }

    pub fn is_valid_location(&self, location: Location) -> bool {
        match (self.game, location) {
            (_, Location::Table(n)) => (1..=4).contains(&n),
            (GameKind::ArrangeCubes, Location::Container(n)) => (1..=4).contains(&n),
            (GameKind::BalanceScale, Location::Scale(_)) => true,
            _ => false,
        }
    }

    fn legal_on_screen(&self, action: &GameAction) -> bool {
        match action {
            GameAction::Grab(_) | GameAction::Release(_) | GameAction::Submit => self.screen == Screen::Playing,
            GameAction::Reset => matches!(self.screen, Screen::Incorrect | Screen::Playing),
            GameAction::Restart => matches!(self.screen, Screen::Success | Screen::Playing),
            GameAction::GiveUp => true,
        }
    }

    /// Applies an action in place. Rejected actions leave the state untouched.
    pub fn apply(&mut self, action: GameAction) -> Result<(), GameError> {
        if self.gave_up {
            return Err(GameError::Frozen);
        }
        if !self.legal_on_screen(&action) {
            return Err(GameError::IllegalForScreen {
                action,
                screen: self.screen,
            });
        }
        match action {
            GameAction::Grab(cube) => {
                if cube >= CUBE_COUNT {
                    return Err(GameError::UnknownCube(cube));
                }
                if self.held_cube().is_some() {
                    return Err(GameError::AlreadyHolding);
                }
                self.locations[cube] = Location::Held;
            }
            GameAction::Release(location) => {
                let cube = self.held_cube().ok_or(GameError::NothingHeld)?;
                if location == Location::Held || !self.is_valid_location(location) {
                    return Err(GameError::InvalidLocation(location));
                }
                let shared = matches!(location, Location::Scale(_));
                if !shared && self.cube_at(location).is_some() {
                    return Err(GameError::Occupied(location));
                }
                self.locations[cube] = location;
            }
            GameAction::Submit => {
                self.attempts += 1;
                self.scale_revealed = true;
                let correct = self.is_solved();
                self.log.push(AttemptRecord {
                    placements: self.locations,
                    correct,
                });
                self.screen = if correct { Screen::Success } else { Screen::Incorrect };
            }
            GameAction::Reset => {
                self.locations = self.initial_layout.map(Location::Table);
                self.screen = Screen::Playing;
                self.scale_revealed = false;
            }
            GameAction::Restart => {
                self.initial_layout = shuffled_layout(self.seed, self.shuffles);
                self.shuffles += 1;
                self.locations = self.initial_layout.map(Location::Table);
                self.screen = Screen::Playing;
                self.scale_revealed = false;
            }
            GameAction::GiveUp => self.gave_up = true,
        }
        Ok(())
    }

    pub fn is_solved(&self) -> bool {
        match self.game {
            GameKind::ArrangeCubes => check_arrangement(self),
            GameKind::BalanceScale => check_balance(self),
        }
    }
}

/// Containers 1..=4 hold the cubes in ascending mass order.
pub fn check_arrangement(state: &GameState) -> bool {
    let contents = state.containers();
    let mut masses = Vec::with_capacity(CUBE_COUNT);
    for slot in contents {
        match slot {
            Some(cube) => masses.push(state.cubes[cube].mass_g),
            None => return false,
        }
    }
    let mut sorted = state.cubes.map(|c| c.mass_g);
    sorted.sort_unstable();
    masses == sorted
}

/// Every cube is on the scale and both pans carry the same mass.
pub fn check_balance(state: &GameState) -> bool {
    state.locations.iter().all(|l| matches!(l, Location::Scale(_)))
        && state.side_sum(Side::Left) == state.side_sum(Side::Right)
}

pub fn scale_tilt(state: &GameState) -> Tilt {
    if !state.scale_revealed {
        return Tilt::Level;
    }
    match state.side_sum(Side::Left).cmp(&state.side_sum(Side::Right)) {
        std::cmp::Ordering::Equal => Tilt::Level,
        std::cmp::Ordering::Greater => Tilt::LeftDown,
        std::cmp::Ordering::Less => Tilt::RightDown,
    }
}

/// Outcome of one play session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptReport {
    pub game: GameKind,
    pub seed: u64,
    pub cd_enabled: bool,
    pub attempts: u32,
    pub gave_up: bool,
    pub solved: bool,
    /// Set when an automated player hit its attempt cap.
    #[serde(default)]
    pub capped: bool,
    pub per_attempt: Vec<AttemptRecord>,
    /// `histogram[receptacle][cube]`: containers 1..=4 for Game 1, scale left/right for Game 2.
    pub placement_histogram: Vec<Vec<u32>>,
}

impl AttemptReport {
    pub fn from_state(state: &GameState, cd_enabled: bool) -> Self {
        Self {
            game: state.game,
            seed: state.seed,
            cd_enabled,
            attempts: state.attempts,
            gave_up: state.gave_up,
            solved: state.screen == Screen::Success,
            capped: false,
            per_attempt: state.log.clone(),
            placement_histogram: placement_histogram(state.game, &state.log),
        }
    }

    pub fn placements_counted(&self) -> u32 {
        self.placement_histogram.iter().flatten().sum()
    }
}

pub fn receptacle_count(game: GameKind) -> usize {
    match game {
        GameKind::ArrangeCubes => 4,
        GameKind::BalanceScale => 2,
    }
}

fn receptacle_index(location: Location) -> Option<usize> {
    match location {
        Location::Container(n @ 1..=4) => Some(usize::from(n) - 1),
        Location::Scale(Side::Left) => Some(0),
        Location::Scale(Side::Right) => Some(1),
        _ => None,
    }
}

/// Counts where each cube was placed across all submitted attempts.
pub fn placement_histogram(game: GameKind, log: &[AttemptRecord]) -> Vec<Vec<u32>> {
    let mut hist = vec![vec![0u32; CUBE_COUNT]; receptacle_count(game)];
    for record in log {
        for (cube, loc) in record.placements.iter().enumerate() {
            if let Some(r) = receptacle_index(*loc).filter(|r| *r < hist.len()) {
                hist[r][cube] += 1;
            }
        }
    }
    hist
}
