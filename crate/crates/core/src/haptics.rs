//! Pseudo-haptic weight model.
//!
//! An object's weight is rendered by scaling its displayed motion with a
//! dynamic control/display ratio `R = F_actual / F_expected`: the user has to
//! squeeze harder to make a heavier cube keep up with the hand. While a cube
//! is lifted, every tick moves its display height by `R` times the physical
//! hand displacement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity in m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Relative tolerance under which two forces compare as equal.
pub const FORCE_EQUALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HapticsError {
    #[error("mass must be positive, got {0} g")]
    NonPositiveMass(f64),
    #[error("expected force must be positive, got {0} N")]
    NonPositiveExpectedForce(f64),
    #[error("phase {0:?} has no force-comparison rule")]
    UncoveredPhase(Phase),
    #[error("invalid dynamics config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gesture {
    #[default]
    None,
    Pinch,
    Grip,
}

/// One calibrated force reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ForceSample {
    pub time_ms: u64,
    pub thumb_force: f64,
    pub palm_force: f64,
    pub gesture: Gesture,
    /// The force compared against the object's weight.
    pub effective_force: f64,
}

impl ForceSample {
    pub fn new(time_ms: u64, thumb_force: f64, palm_force: f64, cfg: &DynamicsConfig) -> Self {
        let (gesture, effective_force) = resolve_gesture(thumb_force, palm_force, cfg);
        Self {
            time_ms,
            thumb_force,
            palm_force,
            gesture,
            effective_force,
        }
    }

    /// A sample carrying no force at all.
    pub fn idle(time_ms: u64) -> Self {
        Self {
            time_ms,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Free,
    HeldResting,
    Lifting,
    Falling,
}

/// Tracked hand pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct HandState {
    pub time_ms: u64,
    pub height: f64,
    pub x: f64,
    pub grab_target: Option<usize>,
}

impl HandState {
    pub fn new(time_ms: u64, x: f64, height: f64) -> Self {
        Self {
            time_ms,
            height,
            x,
            grab_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub gravity: f64,
    pub pinch_gain: f64,
    pub grip_gain: f64,
    pub pinch_threshold: f64,
    pub grip_threshold: f64,
    pub grab_radius: f64,
    pub release_ratio: f64,
    pub release_hold_ms: f64,
    pub ratio_cap: f64,
    pub cd_enabled: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            gravity: STANDARD_GRAVITY,
            pinch_gain: 1.0,
            grip_gain: 1.0,
            pinch_threshold: 0.05,
            grip_threshold: 0.5,
            grab_radius: 0.10,
            release_ratio: 0.25,
            release_hold_ms: 150.0,
            ratio_cap: 4.0,
            cd_enabled: true,
        }
    }
}

impl DynamicsConfig {
    pub fn with_cd(mut self, cd_enabled: bool) -> Self {
        self.cd_enabled = cd_enabled;
        self
    }

    pub fn validate(&self) -> Result<(), HapticsError> {
        let positive = [
            (self.gravity, "gravity must be positive"),
            (self.pinch_gain, "pinch_gain must be positive"),
            (self.grip_gain, "grip_gain must be positive"),
            (self.pinch_threshold, "pinch_threshold must be positive"),
            (self.grip_threshold, "grip_threshold must be positive"),
            (self.grab_radius, "grab_radius must be positive"),
            (self.release_ratio, "release_ratio must be positive"),
            (self.release_hold_ms, "release_hold_ms must be positive"),
            (self.ratio_cap, "ratio_cap must be positive"),
        ];
        for (value, msg) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(HapticsError::InvalidConfig(msg));
            }
        }
        if !(self.release_ratio < 1.0 && 1.0 <= self.ratio_cap) {
            return Err(HapticsError::InvalidConfig(
                "require release_ratio < 1 <= ratio_cap",
            ));
        }
        Ok(())
    }
}

/// Weight of a mass given in grams, in Newtons.
pub fn expected_force(mass_g: f64, gravity: f64) -> Result<f64, HapticsError> {
    if !(mass_g > 0.0) || !mass_g.is_finite() {
        return Err(HapticsError::NonPositiveMass(mass_g));
    }
    Ok(mass_g / 1000.0 * gravity)
}

/// Work done moving against `force` over `height_change`. Negative when moving down.
pub fn work_done(force: f64, height_change: f64) -> f64 {
    force * height_change
}

/// Control/display ratio, clamped to `[0, ratio_cap]`.
pub fn cd_ratio(actual_force: f64, expected_force: f64, ratio_cap: f64) -> Result<f64, HapticsError> {
    if !(expected_force > 0.0) {
        return Err(HapticsError::NonPositiveExpectedForce(expected_force));
    }
    Ok((actual_force / expected_force).clamp(0.0, ratio_cap))
}

/// Picks the dominant gesture channel. Grip wins over pinch when both are active.
pub fn resolve_gesture(thumb_force: f64, palm_force: f64, cfg: &DynamicsConfig) -> (Gesture, f64) {
    if palm_force >= cfg.grip_threshold {
        (Gesture::Grip, cfg.grip_gain * palm_force)
    } else if thumb_force >= cfg.pinch_threshold {
        (Gesture::Pinch, cfg.pinch_gain * thumb_force)
    } else {
        (Gesture::None, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceComparison {
    ForceLess,
    ForceEqual,
    ForceGreater,
}

impl ForceComparison {
    pub const ALL: [ForceComparison; 3] = [
        ForceComparison::ForceLess,
        ForceComparison::ForceEqual,
        ForceComparison::ForceGreater,
    ];

    /// Classifies a ratio against 1 with [`FORCE_EQUALITY_TOLERANCE`].
    pub fn from_ratio(ratio: f64) -> Self {
        if (ratio - 1.0).abs() <= FORCE_EQUALITY_TOLERANCE {
            ForceComparison::ForceEqual
        } else if ratio < 1.0 {
            ForceComparison::ForceLess
        } else {
            ForceComparison::ForceGreater
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayRule {
    StayStatic,
    BeginLift,
    DisplayEqualsPhysical,
    DisplayAbovePhysical,
    DisplayBelowPhysical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub next: Phase,
    pub rule: DisplayRule,
    /// The object may be dropped if this persists.
    pub release_candidate: bool,
}

/// The state/condition table for a held object.
pub fn held_transition(phase: Phase, cmp: ForceComparison) -> Result<Transition, HapticsError> {
    use DisplayRule::*;
    use ForceComparison::*;
    let (next, rule, release_candidate) = match (phase, cmp) {
        (Phase::HeldResting, ForceLess) => (Phase::HeldResting, StayStatic, false),
        (Phase::HeldResting, ForceEqual | ForceGreater) => (Phase::Lifting, BeginLift, false),
        (Phase::Lifting, ForceEqual) => (Phase::Lifting, DisplayEqualsPhysical, false),
        (Phase::Lifting, ForceGreater) => (Phase::Lifting, DisplayAbovePhysical, false),
        (Phase::Lifting, ForceLess) => (Phase::Lifting, DisplayBelowPhysical, true),
        (p @ (Phase::Free | Phase::Falling), _) => return Err(HapticsError::UncoveredPhase(p)),
    };
    Ok(Transition {
        next,
        rule,
        release_candidate,
    })
}

/// A virtual cube as seen by the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub mass_g: f64,
    pub expected_force: f64,
    pub phase: Phase,
    /// Hand attachment height while held.
    pub physical_height: f64,
    pub display_height: f64,
    /// Hand height when the current lift began.
    pub grab_height: f64,
    pub support_height: f64,
    pub x: f64,
    /// Ratio applied on the most recent held step.
    pub ratio: f64,
    pub fall_velocity: f64,
    /// Time spent continuously below the release ratio.
    pub below_release_ms: f64,
}

impl ObjectState {
    pub fn new(mass_g: f64, x: f64, support_height: f64, cfg: &DynamicsConfig) -> Result<Self, HapticsError> {
        Ok(Self {
            mass_g,
            expected_force: expected_force(mass_g, cfg.gravity)?,
            phase: Phase::Free,
            physical_height: support_height,
            display_height: support_height,
            grab_height: support_height,
            support_height,
            x,
            ratio: 0.0,
            fall_velocity: 0.0,
            below_release_ms: 0.0,
        })
    }

    pub fn is_held(&self) -> bool {
        matches!(self.phase, Phase::HeldResting | Phase::Lifting)
    }

    /// Straight-line distance from the hand to the object's rendered position.
    pub fn distance_to(&self, hand: &HandState) -> f64 {
        (hand.x - self.x).hypot(hand.height - self.display_height)
    }

    pub fn within_reach(&self, hand: &HandState, cfg: &DynamicsConfig) -> bool {
        self.distance_to(hand) <= cfg.grab_radius
    }

    /// Puts the object in the hand without moving it.
    pub fn attach(&mut self, hand: &HandState) {
        self.phase = Phase::HeldResting;
        self.physical_height = hand.height;
        self.grab_height = hand.height;
        self.display_height = self.support_height;
        self.x = hand.x;
        self.ratio = 0.0;
        self.fall_velocity = 0.0;
        self.below_release_ms = 0.0;
    }

    /// Lets go. Falls if above its support, otherwise comes to rest.
    pub fn release(&mut self) {
        self.below_release_ms = 0.0;
        self.fall_velocity = 0.0;
        self.phase = if self.display_height > self.support_height {
            Phase::Falling
        } else {
            self.display_height = self.support_height;
            Phase::Free
        };
    }

    /// Moves a resting object onto a new support.
    pub fn place(&mut self, x: f64, support_height: f64) {
        self.x = x;
        self.support_height = support_height;
        if self.display_height < support_height || matches!(self.phase, Phase::Free) {
            self.display_height = support_height;
        }
    }
}

/// Ratio used for one held step: the clamped force ratio when C/D rendering is on, otherwise a
/// binary 1-or-0 depending on whether the weight is matched.
pub fn step_ratio(effective_force: f64, expected_force: f64, cfg: &DynamicsConfig) -> Result<f64, HapticsError> {
    if cfg.cd_enabled {
        cd_ratio(effective_force, expected_force, cfg.ratio_cap)
    } else if !(expected_force > 0.0) {
        Err(HapticsError::NonPositiveExpectedForce(expected_force))
    } else if effective_force >= expected_force {
        Ok(1.0)
    } else {
        Ok(0.0)
    }
}

/// Advances one object by `dt_s` seconds.
pub fn step_dynamics(
    obj: &ObjectState,
    hand: &HandState,
    sample: &ForceSample,
    dt_s: f64,
    cfg: &DynamicsConfig,
) -> ObjectState {
    let mut next = obj.clone();
    match obj.phase {
        Phase::Free => {
            next.display_height = next.support_height;
            if sample.effective_force > 0.0 && obj.within_reach(hand, cfg) {
                next.attach(hand);
            }
        }
        Phase::HeldResting | Phase::Lifting => step_held(&mut next, hand, sample, dt_s, cfg),
        Phase::Falling => {
            next.fall_velocity += cfg.gravity * dt_s;
            next.display_height -= next.fall_velocity * dt_s;
            if next.display_height <= next.support_height {
                next.display_height = next.support_height;
                next.fall_velocity = 0.0;
                next.phase = Phase::Free;
            }
        }
    }
    next
}

fn step_held(obj: &mut ObjectState, hand: &HandState, sample: &ForceSample, dt_s: f64, cfg: &DynamicsConfig) {
    let hand_delta = hand.height - obj.physical_height;
    obj.physical_height = hand.height;
    obj.x = hand.x;

    if sample.effective_force <= 0.0 {
        obj.release();
        return;
    }

    // expected_force is positive by construction of ObjectState
    let ratio = step_ratio(sample.effective_force, obj.expected_force, cfg).unwrap_or(0.0);
    obj.ratio = ratio;
    let transition = match held_transition(obj.phase, ForceComparison::from_ratio(ratio)) {
        Ok(t) => t,
        Err(_) => return,
    };

    match transition.rule {
        DisplayRule::StayStatic => {
            obj.display_height = obj.support_height;
            obj.grab_height = hand.height;
        }
        DisplayRule::BeginLift => {
            obj.grab_height = hand.height - hand_delta;
            obj.display_height = (obj.display_height + ratio * hand_delta).max(obj.support_height);
        }
        DisplayRule::DisplayEqualsPhysical => {
            obj.display_height = (obj.display_height + hand_delta).max(obj.support_height);
        }
        DisplayRule::DisplayAbovePhysical | DisplayRule::DisplayBelowPhysical => {
            obj.display_height = (obj.display_height + ratio * hand_delta).max(obj.support_height);
        }
    }
    obj.phase = transition.next;

    if transition.release_candidate && ratio < cfg.release_ratio {
        obj.below_release_ms += dt_s * 1000.0;
        if obj.below_release_ms >= cfg.release_hold_ms {
            obj.release();
        }
    } else {
        obj.below_release_ms = 0.0;
    }
}
