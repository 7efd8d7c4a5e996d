//! Batch entry points behind the `weightsim` CLI.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_cohort, AgentError, CohortConfig, CohortReport, ParticipantModel, DEFAULT_ATTEMPT_CAP};
use crate::games::{AttemptReport, GameKind};
use crate::haptics::DynamicsConfig;
use crate::scene::{GloveCalibration, Scene, SceneError, SceneGeometry};
use crate::sensor::{fit_calibration, CalibrationModel, Channel, SensorError};
use crate::trace::{load_trace, TraceEntry, TraceError, TraceStep};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(#[from] TraceError),
    #[error("calibration: {0}")]
    Calibration(#[from] SensorError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Short stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "io",
            HarnessError::Json { .. } => "json",
            HarnessError::Config(_) => "config",
            HarnessError::Trace(_) => "trace",
            HarnessError::Calibration(SensorError::InsufficientPoints(_)) => "insufficient_points",
            HarnessError::Calibration(_) => "calibration",
            HarnessError::Scene(_) => "scene",
            HarnessError::Agent(_) => "agent",
            HarnessError::Csv(_) => "csv",
        }
    }
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_owned(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    serde_json::from_str(&read_text(path)?).map_err(|source| HarnessError::Json { path: path.to_owned(), source })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json { path: path.to_owned(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.to_owned(), source })
}

/// A calibration given inline or as a path to a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CalibrationSource {
    Path(PathBuf),
    Inline(CalibrationModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationPaths {
    pub thumb: CalibrationSource,
    pub palm: CalibrationSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSelection {
    pub kind: GameKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GameSelection {
    fn default() -> Self {
        Self { kind: GameKind::ArrangeCubes, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySettings {
    /// Grab the nearest reachable cube as soon as force appears.
    pub auto_grab: bool,
}

impl Default for ReplaySettings {
    fn default() -> Self {
        Self { auto_grab: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSettings {
    pub n_per_condition: usize,
    pub base_seed: u64,
    pub attempt_cap: u32,
}

impl Default for CohortSettings {
    fn default() -> Self {
        Self { n_per_condition: 6, base_seed: 0, attempt_cap: DEFAULT_ATTEMPT_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub tick_ms: u64,
    pub staleness_ms: u64,
    pub max_sessions: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self { tick_ms: 20, staleness_ms: 200, max_sessions: 64 }
    }
}

/// Harness configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dynamics: DynamicsConfig,
    /// Overrides `dynamics.cd_enabled` when present.
    pub cd_enabled: Option<bool>,
    pub calibration: Option<CalibrationPaths>,
    pub game: GameSelection,
    pub geometry: SceneGeometry,
    pub trace: Option<PathBuf>,
    pub agent: Option<ParticipantModel>,
    pub replay: ReplaySettings,
    pub cohort: CohortSettings,
    pub service: ServiceSettings,
    pub output: Option<PathBuf>,
    /// Directory relative paths resolve against; the config file's directory when loaded.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut cfg: RunConfig = read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.effective_dynamics()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.trace.is_some() && self.agent.is_some() {
            return Err(HarnessError::Config("give either \"trace\" or \"agent\", not both".into()));
        }
        if let Some(agent) = &self.agent {
            agent.validate()?;
        }
        Ok(())
    }

    pub fn effective_dynamics(&self) -> DynamicsConfig {
        let mut d = self.dynamics.clone();
        if let Some(cd) = self.cd_enabled {
            d.cd_enabled = cd;
        }
        d
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.base_dir.join(path)
        }
    }

    fn load_model(&self, source: &CalibrationSource, channel: Channel) -> Result<CalibrationModel, HarnessError> {
        let model = match source {
            CalibrationSource::Inline(m) => m.clone(),
            CalibrationSource::Path(p) => read_json(&self.resolve(p))?,
        };
        if model.channel != channel {
            return Err(HarnessError::Config(format!("expected a {channel:?} calibration, got {:?}", model.channel)));
        }
        CalibrationModel::power_law(model.channel, model.a, model.b, model.deadband_adc)?;
        Ok(model)
    }

    pub fn glove_calibration(&self) -> Result<GloveCalibration, HarnessError> {
        let paths = self
            .calibration
            .as_ref()
            .ok_or_else(|| HarnessError::Config("calibration missing: set \"calibration\" with thumb and palm".into()))?;
        Ok(GloveCalibration::new(
            self.load_model(&paths.thumb, Channel::Thumb)?,
            self.load_model(&paths.palm, Channel::Palm)?,
        )?)
    }
}

/// What a replay produced, beyond the report.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: AttemptReport,
    pub scene: Scene,
    pub samples: usize,
    pub rejected_actions: Vec<String>,
}

/// Feeds a decoded trace through calibration, the weight model and the game.
pub fn replay_steps(cfg: &RunConfig, steps: &[TraceStep]) -> Result<ReplayOutcome, HarnessError> {
    let mut scene = Scene::new(
        cfg.game.kind,
        cfg.game.seed,
        cfg.effective_dynamics(),
        cfg.glove_calibration()?,
        cfg.geometry.clone(),
    )?;
    scene.auto_grab = cfg.replay.auto_grab;
    let mut last_t: Option<u64> = None;
    let mut samples = 0;
    let mut rejected_actions = Vec::new();
    for step in steps {
        match step {
            TraceStep::Entry(TraceEntry::Sample { frame, hand }) => {
                samples += 1;
                scene.set_force_adc(frame.thumb_adc, frame.palm_adc)?;
                scene.set_hand(hand.x_m, hand.y_m);
                let dt_ms = last_t.map_or(0, |t| frame.time_ms - t);
                last_t = Some(frame.time_ms);
                if dt_ms > 0 {
                    scene.step(dt_ms as f64 / 1000.0);
                }
            }
            TraceStep::Entry(TraceEntry::Action { action, .. }) => {
                if let Err(e) = scene.apply(*action) {
                    rejected_actions.push(format!("{action:?}: {e}"));
                }
            }
            TraceStep::ReleaseAtHand { .. } => {
                if let Err(e) = scene.release(None) {
                    rejected_actions.push(format!("release: {e}"));
                }
            }
        }
    }
    let report = AttemptReport::from_state(&scene.game, scene.cd_enabled());
    Ok(ReplayOutcome { report, scene, samples, rejected_actions })
}

/// Replays the configured (or given) trace file.
pub fn replay(cfg: &RunConfig, trace: Option<&Path>) -> Result<ReplayOutcome, HarnessError> {
    let path = match (trace, &cfg.trace) {
        (Some(p), _) => p.to_owned(),
        (None, Some(p)) => cfg.resolve(p),
        (None, None) => return Err(HarnessError::Config("replay needs a trace".into())),
    };
    let steps = load_trace(&path)?;
    replay_steps(cfg, &steps)
}

/// Runs a cohort from the config's agent model, with optional overrides.
pub fn simulate_cohort(cfg: &RunConfig, n: Option<usize>, seed: Option<u64>) -> Result<CohortReport, HarnessError> {
    let model = cfg
        .agent
        .ok_or_else(|| HarnessError::Config("cohort mode needs an \"agent\" model".into()))?;
    let cohort = CohortConfig {
        n_per_condition: n.unwrap_or(cfg.cohort.n_per_condition),
        base_seed: seed.unwrap_or(cfg.cohort.base_seed),
        attempt_cap: cfg.cohort.attempt_cap,
        model,
    };
    if cohort.n_per_condition == 0 {
        return Err(HarnessError::Config("cohort size must be at least 1".into()));
    }
    Ok(run_cohort(&cohort)?)
}

#[derive(Debug, Serialize)]
struct CohortCsvRow {
    index: usize,
    condition: crate::agent::Condition,
    arrange_seed: u64,
    arrange_attempts: u32,
    arrange_solved: bool,
    arrange_capped: bool,
    balance_seed: u64,
    balance_attempts: u32,
    balance_solved: bool,
    balance_capped: bool,
}

/// One row per participant (condition, index), both games side by side.
pub fn write_cohort_csv<W: Write>(report: &CohortReport, out: W) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    let find = |game, condition, index| {
        report
            .per_agent
            .iter()
            .find(|r| r.game == game && r.condition == condition && r.index == index)
    };
    for condition in crate::agent::Condition::ALL {
        for index in 0..report.config.n_per_condition {
            let (Some(a), Some(b)) = (
                find(GameKind::ArrangeCubes, condition, index),
                find(GameKind::BalanceScale, condition, index),
            ) else {
                continue;
            };
            writer.serialize(CohortCsvRow {
                index,
                condition,
                arrange_seed: a.seed,
                arrange_attempts: a.report.attempts,
                arrange_solved: a.report.solved,
                arrange_capped: a.report.capped,
                balance_seed: b.seed,
                balance_attempts: b.report.attempts,
                balance_solved: b.report.solved,
                balance_capped: b.report.capped,
            })?;
        }
    }
    writer.flush().map_err(|source| HarnessError::Io { path: PathBuf::from("<csv>"), source })?;
    Ok(())
}

/// Calibration points file: `{"channel", "deadband_adc", "points": [[adc, newtons], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationPoints {
    pub channel: Channel,
    #[serde(default)]
    pub deadband_adc: u16,
    pub points: Vec<(u16, f64)>,
}

/// Fits a points file. Returns the model and its residuals in Newtons.
pub fn calibrate(points_path: &Path) -> Result<(CalibrationModel, Vec<f64>), HarnessError> {
    let pts: CalibrationPoints = read_json(points_path)?;
    let model = fit_calibration(pts.channel, &pts.points, pts.deadband_adc)?;
    let residuals = model.residuals();
    Ok((model, residuals))
}
