//! C ABI for the weightsim engine.
//!
//! Every fallible call returns a [`WsStatus`]; on failure a message is kept per
//! thread and can be read with `ws_last_error`. Games and sessions are opaque
//! handles freed with their `_free` function. Strings returned to the caller
//! are NUL-terminated UTF-8 and must be released with `ws_string_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, size_t};

use weightsim::games::GameState;
use weightsim::haptics::{cd_ratio, expected_force};
use weightsim::sensor::{adc_to_force, adc_to_voltage, encode_frame, parse_frame};
use weightsim::service::{ServiceConfig, Session};
use weightsim::trace::parse_action;
use weightsim::{new_game, CalibrationModel, Channel, GameKind, SensorFrame};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// The engine refused the request (bad frame, illegal action, ...).
    Rejected = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Decoded sensor frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WsFrame {
    pub seq: u32,
    pub time_ms: u64,
    pub thumb_adc: u16,
    pub palm_adc: u16,
}

/// Opaque game handle.
pub struct WsGame {
    state: GameState,
}

/// Opaque play session handle.
pub struct WsSession {
    session: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: WsStatus, msg: impl Into<String>) -> WsStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`WsStatus::Panic`].
fn guard(f: impl FnOnce() -> WsStatus) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == WsStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(WsStatus::Panic, "internal panic"),
    }
}

fn guard_ptr<T>(f: impl FnOnce() -> *mut T) -> *mut T {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        ptr::null_mut()
    })
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, WsStatus> {
    if p.is_null() {
        return Err(fail(WsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(WsStatus::InvalidUtf8, "argument is not UTF-8"))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

fn game_kind(kind: u32) -> Option<GameKind> {
    match kind {
        0 => Some(GameKind::ArrangeCubes),
        1 => Some(GameKind::BalanceScale),
        _ => None,
    }
}

/// Message describing the last failure on this thread, or NULL.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ws_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Weight of `mass_g` grams in Newtons.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ws_expected_force(mass_g: f64, gravity: f64, out: *mut f64) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return fail(WsStatus::NullPointer, "out is null");
        }
        match expected_force(mass_g, gravity) {
            Ok(f) => {
                *out = f;
                WsStatus::Ok
            }
            Err(e) => fail(WsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Control/display ratio for a grip force, clamped to `[0, ratio_cap]`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ws_cd_ratio(actual_force: f64, expected: f64, ratio_cap: f64, out: *mut f64) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return fail(WsStatus::NullPointer, "out is null");
        }
        match cd_ratio(actual_force, expected, ratio_cap) {
            Ok(r) => {
                *out = r;
                WsStatus::Ok
            }
            Err(e) => fail(WsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ws_adc_to_voltage(adc: u16, out: *mut f64) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return fail(WsStatus::NullPointer, "out is null");
        }
        match adc_to_voltage(adc) {
            Ok(v) => {
                *out = v;
                WsStatus::Ok
            }
            Err(e) => fail(WsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Force for a reading under `F = a * V^b` with a deadband.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ws_adc_to_force(adc: u16, a: f64, b: f64, deadband_adc: u16, out: *mut f64) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return fail(WsStatus::NullPointer, "out is null");
        }
        let model = match CalibrationModel::power_law(Channel::Thumb, a, b, deadband_adc) {
            Ok(m) => m,
            Err(e) => return fail(WsStatus::InvalidArgument, e.to_string()),
        };
        match adc_to_force(adc, &model) {
            Ok(f) => {
                *out = f;
                WsStatus::Ok
            }
            Err(e) => fail(WsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Encodes a frame, newline included, without a terminating NUL.
/// `written` receives the frame length, also when the buffer is too small.
///
/// # Safety
/// `buf` must point to `cap` writable bytes; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ws_encode_frame(frame: WsFrame, buf: *mut u8, cap: size_t, written: *mut size_t) -> WsStatus {
    guard(|| {
        if buf.is_null() || written.is_null() {
            return fail(WsStatus::NullPointer, "buf or written is null");
        }
        let f = SensorFrame { seq: frame.seq, time_ms: frame.time_ms, thumb_adc: frame.thumb_adc, palm_adc: frame.palm_adc };
        let bytes = match encode_frame(&f) {
            Ok(b) => b,
            Err(e) => return fail(WsStatus::InvalidArgument, e.to_string()),
        };
        *written = bytes.len();
        if bytes.len() > cap {
            return fail(WsStatus::BufferTooSmall, format!("frame needs {} bytes", bytes.len()));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        WsStatus::Ok
    })
}

/// Decodes one LF-terminated frame of `len` bytes.
///
/// # Safety
/// `line` must point to `len` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ws_parse_frame(line: *const u8, len: size_t, out: *mut WsFrame) -> WsStatus {
    guard(|| {
        if line.is_null() || out.is_null() {
            return fail(WsStatus::NullPointer, "line or out is null");
        }
        match parse_frame(std::slice::from_raw_parts(line, len)) {
            Ok(f) => {
                *out = WsFrame { seq: f.seq, time_ms: f.time_ms, thumb_adc: f.thumb_adc, palm_adc: f.palm_adc };
                WsStatus::Ok
            }
            Err(e) => fail(WsStatus::Rejected, e.to_string()),
        }
    })
}

/// New game: `kind` 0 arranges cubes, 1 balances the scale. NULL on bad kind.
#[no_mangle]
pub extern "C" fn ws_game_new(kind: u32, seed: u64) -> *mut WsGame {
    guard_ptr(|| match game_kind(kind) {
        Some(k) => Box::into_raw(Box::new(WsGame { state: new_game(k, seed) })),
        None => {
            set_error(format!("unknown game kind {kind}"));
            ptr::null_mut()
        }
    })
}

/// # Safety
/// `game` must come from `ws_game_new` and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ws_game_free(game: *mut WsGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Applies `{"name": "grab"|"release"|"submit"|"reset"|"restart"|"giveup", "cube"?, "target"?}`.
/// A rejected action leaves the game unchanged.
///
/// # Safety
/// `game` must be a live handle; `action_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ws_game_apply_json(game: *mut WsGame, action_json: *const c_char) -> WsStatus {
    guard(|| {
        let Some(game) = game.as_mut() else { return fail(WsStatus::NullPointer, "game is null") };
        let text = match str_arg(action_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let v: serde_json::Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return fail(WsStatus::InvalidArgument, format!("bad action: {e}")),
        };
        let Some(name) = v.get("name").and_then(|n| n.as_str()) else {
            return fail(WsStatus::InvalidArgument, "action needs a \"name\"");
        };
        let cube = v.get("cube").and_then(|c| c.as_u64()).map(|c| c as usize);
        let target = v.get("target").and_then(|t| t.as_str());
        match parse_action(name, cube, target) {
            Ok(Some(action)) => match game.state.apply(action) {
                Ok(()) => WsStatus::Ok,
                Err(e) => fail(WsStatus::Rejected, e.to_string()),
            },
            Ok(None) => fail(WsStatus::InvalidArgument, "release needs a target"),
            Err(e) => fail(WsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Full game state as JSON. Free with `ws_string_free`.
///
/// # Safety
/// `game` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_game_state_json(game: *const WsGame) -> *mut c_char {
    guard_ptr(|| match game.as_ref() {
        Some(g) => serde_json::to_string(&g.state).map_or(ptr::null_mut(), to_c_string),
        None => {
            set_error("game is null");
            ptr::null_mut()
        }
    })
}

/// Play session with the reference glove calibration and default dynamics.
#[no_mangle]
pub extern "C" fn ws_session_new(kind: u32, seed: u64, cd_enabled: bool) -> *mut WsSession {
    guard_ptr(|| {
        let Some(k) = game_kind(kind) else {
            set_error(format!("unknown game kind {kind}"));
            return ptr::null_mut();
        };
        match Session::open(0, k, seed, cd_enabled, &ServiceConfig::default()) {
            Ok(session) => Box::into_raw(Box::new(WsSession { session })),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// # Safety
/// `session` must come from `ws_session_new` and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ws_session_free(session: *mut WsSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Feeds one client message (`force`, `hand` or `action`, as on the socket).
///
/// # Safety
/// `session` must be a live handle; `message_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ws_session_handle_json(session: *mut WsSession, message_json: *const c_char) -> WsStatus {
    guard(|| {
        let Some(s) = session.as_mut() else { return fail(WsStatus::NullPointer, "session is null") };
        let text = match str_arg(message_json) {
            Ok(t) => t,
            Err(st) => return st,
        };
        match s.session.handle_json(text) {
            Ok(()) => WsStatus::Ok,
            Err(reason) => fail(WsStatus::Rejected, reason),
        }
    })
}

/// Advances one tick and returns the snapshot as JSON. Free with `ws_string_free`.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_session_tick(session: *mut WsSession) -> *mut c_char {
    guard_ptr(|| match session.as_mut() {
        Some(s) => serde_json::to_string(&s.session.tick()).map_or(ptr::null_mut(), to_c_string),
        None => {
            set_error("session is null");
            ptr::null_mut()
        }
    })
}

/// Current snapshot as JSON without advancing. Free with `ws_string_free`.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_session_snapshot(session: *const WsSession) -> *mut c_char {
    guard_ptr(|| match session.as_ref() {
        Some(s) => serde_json::to_string(&s.session.snapshot()).map_or(ptr::null_mut(), to_c_string),
        None => {
            set_error("session is null");
            ptr::null_mut()
        }
    })
}
