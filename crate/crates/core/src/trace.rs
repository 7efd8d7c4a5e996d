//! JSON Lines session traces.
//!
//! Each line is either a sensor tick
//!
//! ```json
//! {"t_ms": 40, "thumb_adc": 312, "palm_adc": 10, "hand_y_m": 0.05, "hand_x_m": 0.2}
//! ```
//!
//! or a button/gesture action such as `{"action": "submit"}` or
//! `{"t_ms": 900, "action": "release", "target": "container-1"}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{GameAction, Location, Side};
use crate::sensor::{SensorFrame, ADC_MAX};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {t_ms} ms is earlier than {previous} ms")]
    TimeReversed { line: usize, t_ms: u64, previous: u64 },
    #[error("line {line}: unknown action {name:?}")]
    UnknownAction { line: usize, name: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub t_ms: u64,
    pub thumb_adc: u16,
    pub palm_adc: u16,
    pub hand_y_m: f64,
    pub hand_x_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ms: Option<u64>,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// One raw line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceRecord {
    Action(ActionRecord),
    Sample(SampleRecord),
}

impl TraceRecord {
    pub fn t_ms(&self) -> Option<u64> {
        match self {
            TraceRecord::Sample(s) => Some(s.t_ms),
            TraceRecord::Action(a) => a.t_ms,
        }
    }

    pub fn action(t_ms: Option<u64>, name: &str) -> Self {
        TraceRecord::Action(ActionRecord {
            t_ms,
            action: name.to_owned(),
            cube: None,
            target: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct HandPose {
    pub x_m: f64,
    pub y_m: f64,
}

/// A decoded trace entry.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEntry {
    Sample { frame: SensorFrame, hand: HandPose },
    Action { t_ms: Option<u64>, action: GameAction },
}

/// Parses `table-2`, `container-1`, `scale-left`, `scale-right`.
pub fn parse_location(text: &str) -> Option<Location> {
    match text {
        "scale-left" => return Some(Location::Scale(Side::Left)),
        "scale-right" => return Some(Location::Scale(Side::Right)),
        _ => {}
    }
    let (kind, n) = text.split_once('-')?;
    let n = u8::from_str(n).ok().filter(|n| (1..=4).contains(n))?;
    match kind {
        "table" => Some(Location::Table(n)),
        "container" => Some(Location::Container(n)),
        _ => None,
    }
}

pub fn location_name(location: Location) -> String {
    match location {
        Location::Table(n) => format!("table-{n}"),
        Location::Container(n) => format!("container-{n}"),
        Location::Scale(Side::Left) => "scale-left".into(),
        Location::Scale(Side::Right) => "scale-right".into(),
        Location::Held => "held".into(),
    }
}

/// Reasons an action name/argument combination cannot become a [`GameAction`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionParseError {
    Unknown(String),
    MissingCube,
    BadTarget(String),
}

impl std::fmt::Display for ActionParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionParseError::Unknown(name) => write!(f, "unknown action {name:?}"),
            ActionParseError::MissingCube => f.write_str("grab needs a \"cube\""),
            ActionParseError::BadTarget(t) => write!(f, "bad target {t:?}"),
        }
    }
}

/// Builds a game action from its wire name. A release without target is `Ok(None)`
/// and lets the caller infer the landing spot.
pub fn parse_action(name: &str, cube: Option<usize>, target: Option<&str>) -> Result<Option<GameAction>, ActionParseError> {
    let action = match name {
        "submit" => GameAction::Submit,
        "reset" => GameAction::Reset,
        "restart" => GameAction::Restart,
        "giveup" => GameAction::GiveUp,
        "grab" => GameAction::Grab(cube.ok_or(ActionParseError::MissingCube)?),
        "release" => match target {
            None => return Ok(None),
            Some(t) => GameAction::Release(parse_location(t).ok_or_else(|| ActionParseError::BadTarget(t.to_owned()))?),
        },
        other => return Err(ActionParseError::Unknown(other.to_owned())),
    };
    Ok(Some(action))
}

/// Parsed trace plus releases that should follow the hand.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceStep {
    Entry(TraceEntry),
    ReleaseAtHand { t_ms: Option<u64> },
}

fn parse_record(line_no: usize, text: &str) -> Result<TraceRecord, TraceError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| TraceError::Parse { line: line_no, message: e.to_string() })?;
    let is_action = value.get("action").is_some();
    let record = if is_action {
        serde_json::from_value(value).map(TraceRecord::Action)
    } else {
        serde_json::from_value(value).map(TraceRecord::Sample)
    };
    record.map_err(|e| TraceError::Parse { line: line_no, message: e.to_string() })
}

/// Reads raw records, checking syntax and timestamp order.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    let mut previous: Option<u64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line_no, &line)?;
        if let TraceRecord::Sample(s) = &record {
            for (field, v) in [("thumb_adc", s.thumb_adc), ("palm_adc", s.palm_adc)] {
                if v > ADC_MAX {
                    return Err(TraceError::Parse {
                        line: line_no,
                        message: format!("{field} {v} outside 0..=1023"),
                    });
                }
            }
            if !(s.hand_x_m.is_finite() && s.hand_y_m.is_finite()) {
                return Err(TraceError::Parse { line: line_no, message: "hand pose must be finite".into() });
            }
        }
        if let Some(t) = record.t_ms() {
            if let Some(p) = previous.filter(|p| t < *p) {
                return Err(TraceError::TimeReversed { line: line_no, t_ms: t, previous: p });
            }
            previous = Some(t);
        }
        out.push(record);
    }
    Ok(out)
}

/// Converts raw records into replayable steps.
pub fn decode_records(records: &[TraceRecord]) -> Result<Vec<TraceStep>, TraceError> {
    let mut seq = 0u32;
    records
        .iter()
        .enumerate()
        .map(|(i, record)| match record {
            TraceRecord::Sample(s) => {
                let frame = SensorFrame {
                    seq,
                    time_ms: s.t_ms,
                    thumb_adc: s.thumb_adc,
                    palm_adc: s.palm_adc,
                };
                seq = seq.wrapping_add(1);
                Ok(TraceStep::Entry(TraceEntry::Sample {
                    frame,
                    hand: HandPose { x_m: s.hand_x_m, y_m: s.hand_y_m },
                }))
            }
            TraceRecord::Action(a) => match parse_action(&a.action, a.cube, a.target.as_deref()) {
                Ok(Some(action)) => Ok(TraceStep::Entry(TraceEntry::Action { t_ms: a.t_ms, action })),
                Ok(None) => Ok(TraceStep::ReleaseAtHand { t_ms: a.t_ms }),
                Err(ActionParseError::Unknown(name)) => Err(TraceError::UnknownAction { line: i + 1, name }),
                Err(e) => Err(TraceError::Parse { line: i + 1, message: e.to_string() }),
            },
        })
        .collect()
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    read_records(BufReader::new(File::open(path)?))
}

/// Loads and decodes a trace file.
pub fn load_trace(path: &Path) -> Result<Vec<TraceStep>, TraceError> {
    decode_records(&read_trace_file(path)?)
}

/// Writes records one per line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl TraceWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn record(&mut self, record: &TraceRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn sample(&mut self, t_ms: u64, thumb_adc: u16, palm_adc: u16, hand_x_m: f64, hand_y_m: f64) -> std::io::Result<()> {
        self.record(&TraceRecord::Sample(SampleRecord { t_ms, thumb_adc, palm_adc, hand_y_m, hand_x_m }))
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
