use std::ffi::{CStr, CString};
use std::ptr;

use weightsim_ffi::*;

fn take_string(p: *mut libc::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { ws_string_free(p) };
    s
}

fn last_error() -> String {
    let p = ws_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    let mut out = 0.0;
    assert_eq!(unsafe { ws_adc_to_voltage(1023, &mut out) }, WsStatus::Ok);
    assert_eq!(out, 5.0);
    assert_eq!(unsafe { ws_adc_to_voltage(1024, &mut out) }, WsStatus::InvalidArgument);
    assert!(last_error().contains("1024"));
    assert_eq!(unsafe { ws_expected_force(1000.0, 9.80665, &mut out) }, WsStatus::Ok);
    assert!((out - 9.80665).abs() < 1e-12);
    assert_eq!(unsafe { ws_cd_ratio(19.6133, 9.80665, 4.0, &mut out) }, WsStatus::Ok);
    assert!((out - 2.0).abs() < 1e-12);
    assert_eq!(unsafe { ws_cd_ratio(1.0, 0.0, 4.0, &mut out) }, WsStatus::InvalidArgument);
    assert_eq!(unsafe { ws_expected_force(1.0, 9.8, ptr::null_mut()) }, WsStatus::NullPointer);
    assert_eq!(unsafe { ws_adc_to_force(5, 2.0, 1.5, 10, &mut out) }, WsStatus::Ok);
    assert_eq!(out, 0.0);
}

#[test]
fn frames_round_trip() {
    let frame = WsFrame { seq: 7, time_ms: 140, thumb_adc: 512, palm_adc: 3 };
    let mut buf = [0u8; 64];
    let mut n = 0;
    assert_eq!(unsafe { ws_encode_frame(frame, buf.as_mut_ptr(), buf.len(), &mut n) }, WsStatus::Ok);
    let payload = "F,7,140,512,3";
    let ck = payload.bytes().fold(0u8, |a, b| a ^ b);
    assert_eq!(&buf[..n], format!("{payload}*{ck:02x}\n").as_bytes());
    let mut back = WsFrame::default();
    assert_eq!(unsafe { ws_parse_frame(buf.as_ptr(), n, &mut back) }, WsStatus::Ok);
    assert_eq!(back, frame);
    let mut small = [0u8; 4];
    assert_eq!(unsafe { ws_encode_frame(frame, small.as_mut_ptr(), small.len(), &mut n) }, WsStatus::BufferTooSmall);
    buf[2] = b'8';
    assert_eq!(unsafe { ws_parse_frame(buf.as_ptr(), n, &mut back) }, WsStatus::Rejected);
    assert!(last_error().contains("checksum"));
}

#[test]
fn game_handle() {
    let g = ws_game_new(0, 3);
    assert!(!g.is_null());
    let submit = CString::new(r#"{"name": "submit"}"#).unwrap();
    assert_eq!(unsafe { ws_game_apply_json(g, submit.as_ptr()) }, WsStatus::Ok);
    assert_eq!(unsafe { ws_game_apply_json(g, submit.as_ptr()) }, WsStatus::Rejected);
    let state: serde_json::Value = serde_json::from_str(&take_string(unsafe { ws_game_state_json(g) })).unwrap();
    assert_eq!(state["attempts"], 1);
    assert_eq!(state["screen"], "incorrect");
    let bad = CString::new(r#"{"name": "jump"}"#).unwrap();
    assert_eq!(unsafe { ws_game_apply_json(g, bad.as_ptr()) }, WsStatus::InvalidArgument);
    unsafe { ws_game_free(g) };
    assert!(ws_game_new(9, 0).is_null());
    unsafe { ws_game_free(ptr::null_mut()) };
}

#[test]
fn session_handle() {
    let s = ws_session_new(1, 5, false);
    assert!(!s.is_null());
    let first: serde_json::Value = serde_json::from_str(&take_string(unsafe { ws_session_snapshot(s) })).unwrap();
    assert_eq!(first["tick"], 0);
    assert_eq!(first["tilt"], "level");
    let bad = CString::new(r#"{"type":"force","thumb_adc":2000,"palm_adc":0}"#).unwrap();
    assert_eq!(unsafe { ws_session_handle_json(s, bad.as_ptr()) }, WsStatus::Rejected);
    let submit = CString::new(r#"{"type":"action","name":"submit"}"#).unwrap();
    assert_eq!(unsafe { ws_session_handle_json(s, submit.as_ptr()) }, WsStatus::Ok);
    let snap: serde_json::Value = serde_json::from_str(&take_string(unsafe { ws_session_tick(s) })).unwrap();
    assert_eq!((snap["tick"].as_u64(), snap["attempts"].as_u64()), (Some(1), Some(1)));
    unsafe { ws_session_free(s) };
    assert!(unsafe { ws_session_tick(ptr::null_mut()) }.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/weightsim.h")).unwrap();
    for sym in [
        "ws_last_error", "ws_string_free", "ws_expected_force", "ws_cd_ratio", "ws_adc_to_voltage", "ws_adc_to_force",
        "ws_encode_frame", "ws_parse_frame", "ws_game_new", "ws_game_free", "ws_game_apply_json", "ws_game_state_json",
        "ws_session_new", "ws_session_free", "ws_session_handle_json", "ws_session_tick", "ws_session_snapshot",
        "typedef struct WsGame WsGame", "typedef struct WsSession WsSession", "WS_STATUS_OK = 0",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}
