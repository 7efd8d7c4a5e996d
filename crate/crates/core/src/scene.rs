//! A playable table: one game, four physical cubes, a hand and a glove.
//!
//! The scene is the shared engine behind trace replay and live sessions. It
//! calibrates raw glove readings, steps the held cube through the weight
//! model and keeps the game's notion of cube locations in sync with where the
//! cubes physically come to rest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{new_game, GameAction, GameError, GameKind, GameState, Location, Screen, Side, CUBE_COUNT};
use crate::haptics::{step_dynamics, DynamicsConfig, ForceSample, HandState, HapticsError, ObjectState, Phase};
use crate::sensor::{adc_to_force, CalibrationModel, Channel, SensorError};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Haptics(#[from] HapticsError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("cube {cube} is {distance:.3} m from the hand, outside the grab radius")]
    OutOfReach { cube: usize, distance: f64 },
    #[error("cube {0} is not resting")]
    NotResting(usize),
    #[error("{channel:?} calibration supplied for the {slot} channel")]
    ChannelMismatch { channel: Channel, slot: &'static str },
}

/// Horizontal positions of everything a cube can rest on, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneGeometry {
    pub table_x: [f64; CUBE_COUNT],
    pub container_x: [f64; CUBE_COUNT],
    pub scale_left_x: f64,
    pub scale_right_x: f64,
    pub table_height: f64,
    pub container_height: f64,
    pub scale_height: f64,
    /// A dropped cube lands in the nearest receptacle within this distance.
    pub snap_radius: f64,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self {
            table_x: [0.0, 0.2, 0.4, 0.6],
            container_x: [1.0, 1.2, 1.4, 1.6],
            scale_left_x: 1.1,
            scale_right_x: 1.5,
            table_height: 0.0,
            container_height: 0.0,
            scale_height: 0.0,
            snap_radius: 0.1,
        }
    }
}

impl SceneGeometry {
    /// `(x, support height)` of a resting location.
    pub fn anchor(&self, location: Location) -> Option<(f64, f64)> {
        let idx = |n: u8| usize::from(n).checked_sub(1).filter(|i| *i < CUBE_COUNT);
        match location {
            Location::Table(n) => idx(n).map(|i| (self.table_x[i], self.table_height)),
            Location::Container(n) => idx(n).map(|i| (self.container_x[i], self.container_height)),
            Location::Scale(Side::Left) => Some((self.scale_left_x, self.scale_height)),
            Location::Scale(Side::Right) => Some((self.scale_right_x, self.scale_height)),
            Location::Held => None,
        }
    }

    pub fn locations(game: GameKind) -> Vec<Location> {
        let mut out: Vec<Location> = (1..=4).map(Location::Table).collect();
        match game {
            GameKind::ArrangeCubes => out.extend((1..=4).map(Location::Container)),
            GameKind::BalanceScale => out.extend([Location::Scale(Side::Left), Location::Scale(Side::Right)]),
        }
        out
    }
}

/// Thumb and palm calibration curves.
#[derive(Debug, Clone, PartialEq)]
pub struct GloveCalibration {
    pub thumb: CalibrationModel,
    pub palm: CalibrationModel,
}

impl GloveCalibration {
    pub fn new(thumb: CalibrationModel, palm: CalibrationModel) -> Result<Self, SceneError> {
        if thumb.channel != Channel::Thumb {
            return Err(SceneError::ChannelMismatch { channel: thumb.channel, slot: "thumb" });
        }
        if palm.channel != Channel::Palm {
            return Err(SceneError::ChannelMismatch { channel: palm.channel, slot: "palm" });
        }
        Ok(Self { thumb, palm })
    }

    /// `(thumb N, palm N)` for a pair of raw readings.
    pub fn forces(&self, thumb_adc: u16, palm_adc: u16) -> Result<(f64, f64), SensorError> {
        Ok((adc_to_force(thumb_adc, &self.thumb)?, adc_to_force(palm_adc, &self.palm)?))
    }
}

/// What changed during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepEvents {
    pub grabbed: Option<usize>,
    pub released: Option<(usize, Location)>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub game: GameState,
    pub objects: Vec<ObjectState>,
    pub held: Option<usize>,
    held_origin: Option<Location>,
    pub dynamics: DynamicsConfig,
    pub geometry: SceneGeometry,
    calibration: GloveCalibration,
    pub hand: HandState,
    pub sample: ForceSample,
    pub time_ms: u64,
    /// Grab a reachable cube whenever force appears, instead of waiting for a Grab action.
    pub auto_grab: bool,
    /// Highest display height above its support reached by each cube.
    pub peak_lift: [f64; CUBE_COUNT],
}

impl Scene {
    pub fn new(
        game: GameKind,
        seed: u64,
        dynamics: DynamicsConfig,
        calibration: GloveCalibration,
        geometry: SceneGeometry,
    ) -> Result<Self, SceneError> {
        dynamics.validate()?;
        let state = new_game(game, seed);
        let mut scene = Self {
            objects: Vec::with_capacity(CUBE_COUNT),
            game: state,
            held: None,
            held_origin: None,
            dynamics,
            geometry,
            calibration,
            hand: HandState::default(),
            sample: ForceSample::idle(0),
            time_ms: 0,
            auto_grab: false,
            peak_lift: [0.0; CUBE_COUNT],
        };
        scene.sync_objects()?;
        Ok(scene)
    }

    pub fn cd_enabled(&self) -> bool {
        self.dynamics.cd_enabled
    }

    pub fn calibration(&self) -> &GloveCalibration {
        &self.calibration
    }

    /// Rebuilds every cube's physical state from the game's locations.
    fn sync_objects(&mut self) -> Result<(), SceneError> {
        self.objects.clear();
        for (cube, location) in self.game.cubes.iter().zip(self.game.locations) {
            let (x, support) = self.geometry.anchor(location).unwrap_or((self.hand.x, self.geometry.table_height));
            self.objects.push(ObjectState::new(f64::from(cube.mass_g), x, support, &self.dynamics)?);
        }
        self.held = None;
        self.held_origin = None;
        Ok(())
    }

    pub fn set_hand(&mut self, x: f64, height: f64) {
        self.hand.x = x;
        self.hand.height = height;
        self.hand.time_ms = self.time_ms;
    }

    pub fn set_force(&mut self, thumb_force: f64, palm_force: f64) {
        self.sample = ForceSample::new(self.time_ms, thumb_force, palm_force, &self.dynamics);
    }

    /// Calibrates a raw reading pair and makes it the current force input.
    pub fn set_force_adc(&mut self, thumb_adc: u16, palm_adc: u16) -> Result<ForceSample, SensorError> {
        let (thumb, palm) = self.calibration.forces(thumb_adc, palm_adc)?;
        self.set_force(thumb, palm);
        Ok(self.sample)
    }

    pub fn clear_force(&mut self) {
        self.sample = ForceSample::idle(self.time_ms);
    }

    /// Nearest resting cube within the grab radius, lowest id on ties.
    pub fn reachable_cube(&self) -> Option<usize> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.phase == Phase::Free && o.within_reach(&self.hand, &self.dynamics))
            .min_by(|a, b| a.1.distance_to(&self.hand).total_cmp(&b.1.distance_to(&self.hand)).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    /// Explicit grab of `cube` with the current hand pose.
    pub fn grab(&mut self, cube: usize) -> Result<(), SceneError> {
        let obj = self.objects.get(cube).ok_or(GameError::UnknownCube(cube))?;
        if self.held.is_some() {
            return Err(GameError::AlreadyHolding.into());
        }
        if obj.phase != Phase::Free {
            return Err(SceneError::NotResting(cube));
        }
        if !obj.within_reach(&self.hand, &self.dynamics) {
            return Err(SceneError::OutOfReach { cube, distance: obj.distance_to(&self.hand) });
        }
        let origin = self.game.locations[cube];
        self.game.apply(GameAction::Grab(cube))?;
        self.objects[cube].attach(&self.hand);
        self.held = Some(cube);
        self.held_origin = Some(origin);
        Ok(())
    }

    /// Where a cube dropped at `x` comes to rest.
    pub fn landing_location(&self, x: f64) -> Option<Location> {
        SceneGeometry::locations(self.game.game)
            .into_iter()
            .filter(|l| matches!(l, Location::Scale(_)) || self.game.cube_at(*l).is_none())
            .filter_map(|l| self.geometry.anchor(l).map(|(lx, _)| (l, (lx - x).abs())))
            .filter(|(_, d)| *d <= self.geometry.snap_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, _)| l)
    }

    /// Explicit release. Without a target the landing spot follows the hand.
    pub fn release(&mut self, target: Option<Location>) -> Result<Location, SceneError> {
        let cube = self.held.ok_or(GameError::NothingHeld)?;
        let location = match target {
            Some(l) => l,
            None => self.landing_location(self.hand.x).or(self.held_origin).ok_or(GameError::NothingHeld)?,
        };
        self.game.apply(GameAction::Release(location))?;
        self.settle(cube, location);
        self.objects[cube].release();
        Ok(location)
    }

    fn settle(&mut self, cube: usize, location: Location) {
        let (x, support) = self.geometry.anchor(location).unwrap_or((self.hand.x, self.geometry.table_height));
        let obj = &mut self.objects[cube];
        obj.x = x;
        obj.support_height = support;
        if obj.display_height <= support {
            obj.display_height = support;
            if obj.phase == Phase::Falling {
                obj.phase = Phase::Free;
            }
        } else if obj.phase == Phase::Free {
            obj.phase = Phase::Falling;
        }
        self.held = None;
        self.held_origin = None;
    }

    /// Applies a button press (Submit, Reset, Restart, GiveUp) or a grab/release.
    pub fn apply(&mut self, action: GameAction) -> Result<(), SceneError> {
        match action {
            GameAction::Grab(cube) => self.grab(cube),
            GameAction::Release(target) => self.release(Some(target)).map(|_| ()),
            GameAction::Reset | GameAction::Restart => {
                self.game.apply(action)?;
                self.sync_objects()
            }
            GameAction::Submit | GameAction::GiveUp => Ok(self.game.apply(action)?),
        }
    }

    /// Advances the physics by `dt_s` seconds using the current inputs.
    pub fn step(&mut self, dt_s: f64) -> StepEvents {
        let mut events = StepEvents::default();
        self.time_ms += (dt_s * 1000.0).round() as u64;
        self.hand.time_ms = self.time_ms;
        self.sample.time_ms = self.time_ms;

        if self.held.is_none() && self.auto_grab && self.sample.effective_force > 0.0 && self.game.screen == Screen::Playing && !self.game.gave_up {
            if let Some(cube) = self.reachable_cube() {
                let next = step_dynamics(&self.objects[cube], &self.hand, &self.sample, dt_s, &self.dynamics);
                if next.is_held() && self.grab(cube).is_ok() {
                    events.grabbed = Some(cube);
                }
            }
        }

        let idle = ForceSample::idle(self.time_ms);
        for cube in 0..self.objects.len() {
            if Some(cube) == self.held {
                if events.grabbed == Some(cube) {
                    continue;
                }
                let next = step_dynamics(&self.objects[cube], &self.hand, &self.sample, dt_s, &self.dynamics);
                let dropped = !next.is_held();
                self.objects[cube] = next;
                if dropped {
                    let location = self
                        .landing_location(self.objects[cube].x)
                        .or(self.held_origin)
                        .unwrap_or(Location::Table(1));
                    let location = match self.game.apply(GameAction::Release(location)) {
                        Ok(()) => location,
                        // the origin slot is always free while its cube is in hand
                        Err(_) => {
                            let origin = self.held_origin.unwrap_or(Location::Table(1));
                            let _ = self.game.apply(GameAction::Release(origin));
                            origin
                        }
                    };
                    self.settle(cube, location);
                    events.released = Some((cube, location));
                }
            } else {
                self.objects[cube] = step_dynamics(&self.objects[cube], &self.hand, &idle, dt_s, &self.dynamics);
            }
            let obj = &self.objects[cube];
            self.peak_lift[cube] = self.peak_lift[cube].max(obj.display_height - obj.support_height);
        }
        events
    }

    /// Ratio to show for the held cube, if any.
    pub fn display_ratio(&self) -> Option<f64> {
        let obj = &self.objects[self.held?];
        if self.dynamics.cd_enabled {
            Some(obj.ratio)
        } else if obj.phase == Phase::Lifting && obj.ratio >= 1.0 {
            Some(1.0)
        } else {
            None
        }
    }
}
