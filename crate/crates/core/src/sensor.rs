//! Glove link: wire frames, ADC conversion, FSR calibration and a synthetic glove.
//!
//! Frames are ASCII lines
//!
//! ```text
//! F,<seq>,<time_ms>,<thumb_adc>,<palm_adc>*<ck>\n
//! ```
//!
//! where `<ck>` is two lowercase hex digits of the XOR of every byte from the
//! leading `F` up to (not including) the `*`.

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ADC_MAX: u16 = 1023;
pub const ADC_FULL_SCALE_VOLTS: f64 = 5.0;
/// Longest valid frame: `F,` + 3 max-width integers + 2 adc fields + `*ck\n`.
pub const MAX_FRAME_LEN: usize = 2 + 10 + 1 + 20 + 1 + 4 + 1 + 4 + 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("adc value {0} outside 0..=1023")]
    AdcOutOfRange(u32),
    #[error("{field} value {value} outside 0..=1023")]
    FieldOutOfRange { field: &'static str, value: u64 },
    #[error("truncated frame")]
    Truncated,
    #[error("frame does not start with 'F,'")]
    BadPrefix,
    #[error("wrong number of fields: {0}")]
    FieldCount(usize),
    #[error("field {field} is not a decimal integer")]
    NonNumeric { field: &'static str },
    #[error("malformed checksum")]
    MalformedChecksum,
    #[error("checksum mismatch: computed {computed:02x}, frame carries {received:02x}")]
    ChecksumMismatch { computed: u8, received: u8 },
    #[error("frame longer than {MAX_FRAME_LEN} bytes")]
    TooLong,
    #[error("insufficient points: calibration needs at least 3 distinct points, got {0}")]
    InsufficientPoints(usize),
    #[error("calibration point has non-positive force {0} N")]
    NonPositiveForce(f64),
    #[error("calibration point adc {0} is at or below the deadband")]
    PointInDeadband(u16),
    #[error("calibration voltages are degenerate")]
    DegenerateVoltages,
    #[error("calibration fit is not monotone (a = {a}, b = {b})")]
    NonMonotoneFit { a: f64, b: f64 },
    #[error("force must be non-negative, got {0} N")]
    NegativeForce(f64),
    #[error("force profile times must be nondecreasing")]
    TimeReversed,
    #[error("smoothing factor must be in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("invalid emulator setting: {0}")]
    InvalidEmulator(&'static str),
    #[error("io error: {0}")]
    Io(String),
}

/// `adc * 5 / 1023`.
pub fn adc_to_voltage(adc: u16) -> Result<f64, SensorError> {
    if adc > ADC_MAX {
        return Err(SensorError::AdcOutOfRange(u32::from(adc)));
    }
    Ok(f64::from(adc) * ADC_FULL_SCALE_VOLTS / f64::from(ADC_MAX))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorFrame {
    pub seq: u32,
    pub time_ms: u64,
    pub thumb_adc: u16,
    pub palm_adc: u16,
}

impl SensorFrame {
    pub fn validate(&self) -> Result<(), SensorError> {
        for (field, value) in [("thumb_adc", self.thumb_adc), ("palm_adc", self.palm_adc)] {
            if value > ADC_MAX {
                return Err(SensorError::FieldOutOfRange {
                    field,
                    value: u64::from(value),
                });
            }
        }
        Ok(())
    }
}

pub fn xor_checksum(payload: &[u8]) -> u8 {
    payload.iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_frame(frame: &SensorFrame) -> Result<Vec<u8>, SensorError> {
    frame.validate()?;
    let payload = format!(
        "F,{},{},{},{}",
        frame.seq, frame.time_ms, frame.thumb_adc, frame.palm_adc
    );
    let ck = xor_checksum(payload.as_bytes());
    Ok(format!("{payload}*{ck:02x}\n").into_bytes())
}

fn parse_digits<T: std::str::FromStr>(raw: &[u8], field: &'static str) -> Result<T, SensorError> {
    if raw.is_empty() || !raw.iter().all(u8::is_ascii_digit) {
        return Err(SensorError::NonNumeric { field });
    }
    // digits only, so this is valid utf-8; overflow is reported as non-numeric
    std::str::from_utf8(raw)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(SensorError::NonNumeric { field })
}

fn parse_hex_nibble(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        _ => None,
    }
}

/// Decodes one LF-terminated frame.
pub fn parse_frame(line: &[u8]) -> Result<SensorFrame, SensorError> {
    if line.len() > MAX_FRAME_LEN {
        return Err(SensorError::TooLong);
    }
    let body = line.strip_suffix(b"\n").ok_or(SensorError::Truncated)?;
    let star = body.iter().rposition(|&b| b == b'*').ok_or(SensorError::Truncated)?;
    let (payload, ck) = (&body[..star], &body[star + 1..]);

    let received = match ck {
        [hi, lo] => match (parse_hex_nibble(*hi), parse_hex_nibble(*lo)) {
            (Some(hi), Some(lo)) => (hi << 4) | lo,
            _ => return Err(SensorError::MalformedChecksum),
        },
        [] | [_] => return Err(SensorError::Truncated),
        _ => return Err(SensorError::MalformedChecksum),
    };
    let computed = xor_checksum(payload);
    if computed != received {
        return Err(SensorError::ChecksumMismatch { computed, received });
    }

    let fields: Vec<&[u8]> = payload.split(|&b| b == b',').collect();
    if fields.first() != Some(&&b"F"[..]) {
        return Err(SensorError::BadPrefix);
    }
    if fields.len() != 5 {
        return Err(SensorError::FieldCount(fields.len()));
    }
    let seq = parse_digits(fields[1], "seq")?;
    let time_ms = parse_digits(fields[2], "time_ms")?;
    let adc = |raw: &[u8], field: &'static str| -> Result<u16, SensorError> {
        let value: u64 = parse_digits(raw, field)?;
        u16::try_from(value)
            .ok()
            .filter(|v| *v <= ADC_MAX)
            .ok_or(SensorError::FieldOutOfRange { field, value })
    };
    Ok(SensorFrame {
        seq,
        time_ms,
        thumb_adc: adc(fields[3], "thumb_adc")?,
        palm_adc: adc(fields[4], "palm_adc")?,
    })
}

/// Something the reader saw on the byte stream.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    Frame(SensorFrame),
    /// `missing` sequence numbers were skipped before `frame`.
    Gap { missing: u32, frame: SensorFrame },
    /// A line that failed to decode; it is dropped.
    Rejected(SensorError),
}

/// Line-oriented frame reader over any byte stream (file, pipe, socket).
///
/// Out-of-order or repeated sequence numbers are rejected, forward jumps are
/// reported as gaps.
pub struct FrameReader<R> {
    inner: R,
    last_seq: Option<u32>,
    buf: Vec<u8>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            last_seq: None,
            buf: Vec::with_capacity(MAX_FRAME_LEN),
        }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = StreamEvent;

    fn next(&mut self) -> Option<StreamEvent> {
        self.buf.clear();
        match self.inner.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(_) => Some(match parse_frame(&self.buf) {
                Err(e) => StreamEvent::Rejected(e),
                Ok(frame) => match self.last_seq {
                    Some(last) if frame.seq <= last => {
                        StreamEvent::Rejected(SensorError::FieldOutOfRange {
                            field: "seq",
                            value: u64::from(frame.seq),
                        })
                    }
                    Some(last) if frame.seq > last + 1 => {
                        self.last_seq = Some(frame.seq);
                        StreamEvent::Gap {
                            missing: frame.seq - last - 1,
                            frame,
                        }
                    }
                    _ => {
                        self.last_seq = Some(frame.seq);
                        StreamEvent::Frame(frame)
                    }
                },
            }),
            Err(e) => Some(StreamEvent::Rejected(SensorError::Io(e.to_string()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Thumb,
    Palm,
}

/// Power-law FSR calibration, `F = a * V^b` above the deadband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub channel: Channel,
    pub a: f64,
    pub b: f64,
    pub deadband_adc: u16,
    pub points: Vec<(u16, f64)>,
}

impl CalibrationModel {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn force(&self, adc: u16) -> Result<f64, SensorError> {
        adc_to_force(adc, self)
    }

    /// Inverse of the power law, before quantization.
    pub fn voltage_for(&self, force: f64) -> f64 {
        (force / self.a).powf(1.0 / self.b)
    }

    /// Force residuals `fitted - measured` at each source point.
    pub fn residuals(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|&(adc, f)| adc_to_force(adc, self).map_or(f64::NAN, |fit| fit - f))
            .collect()
    }

    /// A hand-built model, bypassing the fit.
    pub fn power_law(channel: Channel, a: f64, b: f64, deadband_adc: u16) -> Result<Self, SensorError> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(SensorError::NonMonotoneFit { a, b });
        }
        if deadband_adc > ADC_MAX {
            return Err(SensorError::AdcOutOfRange(u32::from(deadband_adc)));
        }
        Ok(Self {
            channel,
            a,
            b,
            deadband_adc,
            points: Vec::new(),
        })
    }
}

/// Least-squares fit of `log F = log a + b log V`.
pub fn fit_calibration(
    channel: Channel,
    points: &[(u16, f64)],
    deadband_adc: u16,
) -> Result<CalibrationModel, SensorError> {
    if deadband_adc > ADC_MAX {
        return Err(SensorError::AdcOutOfRange(u32::from(deadband_adc)));
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(adc, force) in points {
        let v = adc_to_voltage(adc)?;
        if !(force > 0.0) || !force.is_finite() {
            return Err(SensorError::NonPositiveForce(force));
        }
        if adc <= deadband_adc {
            return Err(SensorError::PointInDeadband(adc));
        }
        logs.push((v.ln(), force.ln()));
    }
    let mut distinct: Vec<u16> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if points.len() < 3 {
        return Err(SensorError::InsufficientPoints(points.len()));
    }
    if distinct.len() < 2 {
        return Err(SensorError::DegenerateVoltages);
    }
    if distinct.len() < 3 {
        return Err(SensorError::InsufficientPoints(distinct.len()));
    }

    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx <= f64::EPSILON {
        return Err(SensorError::DegenerateVoltages);
    }
    let b = sxy / sxx;
    let a = (mean_y - b * mean_x).exp();
    if !(b > 0.0 && a > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(SensorError::NonMonotoneFit { a, b });
    }
    Ok(CalibrationModel {
        channel,
        a,
        b,
        deadband_adc,
        points: points.to_vec(),
    })
}

/// Converts a raw reading to Newtons; zero at or below the deadband.
pub fn adc_to_force(adc: u16, model: &CalibrationModel) -> Result<f64, SensorError> {
    let v = adc_to_voltage(adc)?;
    if adc <= model.deadband_adc {
        return Ok(0.0);
    }
    Ok(model.a * v.powf(model.b))
}

/// Exponential moving average step.
pub fn smooth_ema(previous: f64, input: f64, alpha: f64) -> Result<f64, SensorError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SensorError::BadAlpha(alpha));
    }
    Ok(alpha * input + (1.0 - alpha) * previous)
}

/// Synthetic glove: inverts the calibration curves to produce ADC frames.
#[derive(Debug, Clone)]
pub struct FsrEmulator {
    pub thumb: CalibrationModel,
    pub palm: CalibrationModel,
    /// Gaussian noise added to each reading, in ADC counts.
    pub noise_sigma_adc: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl FsrEmulator {
    pub fn new(thumb: CalibrationModel, palm: CalibrationModel) -> Self {
        Self {
            thumb,
            palm,
            noise_sigma_adc: 0.0,
            sample_rate_hz: 50.0,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, sigma_adc: f64, seed: u64) -> Self {
        self.noise_sigma_adc = sigma_adc;
        self.seed = seed;
        self
    }

    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    /// One frame per profile entry, sequence numbers from 0.
    pub fn emulate_frames(&self, profile: &[(u64, f64, f64)]) -> Result<Vec<SensorFrame>, SensorError> {
        let noise = if self.noise_sigma_adc > 0.0 {
            Some(
                Normal::new(0.0, self.noise_sigma_adc)
                    .map_err(|_| SensorError::InvalidEmulator("noise sigma"))?,
            )
        } else if self.noise_sigma_adc == 0.0 {
            None
        } else {
            return Err(SensorError::InvalidEmulator("noise sigma must be >= 0"));
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut last_time = 0;
        let mut frames = Vec::with_capacity(profile.len());
        for (i, &(time_ms, thumb_n, palm_n)) in profile.iter().enumerate() {
            if time_ms < last_time {
                return Err(SensorError::TimeReversed);
            }
            last_time = time_ms;
            let mut reading = |model: &CalibrationModel, force: f64| -> Result<u16, SensorError> {
                let adc = force_to_adc(force, model)?;
                Ok(match &noise {
                    Some(n) => (f64::from(adc) + n.sample(&mut rng)).round().clamp(0.0, f64::from(ADC_MAX)) as u16,
                    None => adc,
                })
            };
            let thumb_adc = reading(&self.thumb, thumb_n)?;
            let palm_adc = reading(&self.palm, palm_n)?;
            frames.push(SensorFrame {
                seq: i as u32,
                time_ms,
                thumb_adc,
                palm_adc,
            });
        }
        Ok(frames)
    }
}

/// Nearest ADC count whose calibrated force matches `force`.
pub fn force_to_adc(force: f64, model: &CalibrationModel) -> Result<u16, SensorError> {
    if !(force >= 0.0) {
        return Err(SensorError::NegativeForce(force));
    }
    if force == 0.0 {
        return Ok(model.deadband_adc);
    }
    let ideal = model.voltage_for(force) * f64::from(ADC_MAX) / ADC_FULL_SCALE_VOLTS;
    let centre = ideal.round().clamp(f64::from(model.deadband_adc), f64::from(ADC_MAX)) as u16;
    let lo = centre.saturating_sub(1).max(model.deadband_adc);
    let hi = (centre + 1).min(ADC_MAX);
    let best = (lo..=hi)
        .min_by(|&x, &y| {
            let ex = (adc_to_force(x, model).unwrap_or(f64::INFINITY) - force).abs();
            let ey = (adc_to_force(y, model).unwrap_or(f64::INFINITY) - force).abs();
            ex.total_cmp(&ey)
        })
        .unwrap_or(centre);
    Ok(best)
}

/// Reads every frame in a stream, dropping corrupted lines.
pub fn read_frames<R: BufRead>(reader: R) -> (Vec<SensorFrame>, usize) {
    let mut frames = Vec::new();
    let mut dropped = 0;
    for event in FrameReader::new(reader) {
        match event {
            StreamEvent::Frame(f) | StreamEvent::Gap { frame: f, .. } => frames.push(f),
            StreamEvent::Rejected(_) => dropped += 1,
        }
    }
    (frames, dropped)
}
