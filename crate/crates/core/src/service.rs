//! Live play sessions and the JSON socket server at `/session`.
//!
//! A [`Session`] is a plain value: messages mutate its latest inputs, and
//! [`Session::tick`] advances the scene by one fixed step and returns a
//! snapshot. The socket server owns one session per connection and ticks it
//! on a timer; everything observable is a function of the message order
//! relative to ticks.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::games::{scale_tilt, GameKind, Screen, Tilt};
use crate::harness::ServiceSettings;
use crate::haptics::{DynamicsConfig, Gesture, Phase};
use crate::scene::{GloveCalibration, Scene, SceneError, SceneGeometry};
use crate::sensor::{CalibrationModel, Channel, ADC_MAX};
use crate::trace::{location_name, parse_action};

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Open {
        game: GameKind,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_cd")]
        cd: bool,
    },
    Force {
        thumb_adc: u32,
        palm_adc: u32,
    },
    Hand {
        y_m: f64,
        x_m: f64,
    },
    Action {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cube: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
}

fn default_cd() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeView {
    pub id: usize,
    pub mass_g: u32,
    pub location: String,
    pub phase: Phase,
    pub x: f64,
    pub display_height: f64,
    pub physical_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub game: GameKind,
    pub cubes: Vec<CubeView>,
    pub screen: Screen,
    pub attempts: u32,
    pub gave_up: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub gesture: Gesture,
    pub effective_force: f64,
    pub hand_x: f64,
    pub hand_y: f64,
    /// Balance game only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt: Option<Tilt>,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Opened { session: u64 },
    State(Snapshot),
    Error { reason: String },
}

impl ServerMessage {
    pub fn error(reason: impl Into<String>) -> Self {
        ServerMessage::Error { reason: reason.into() }
    }

    pub fn to_json(&self) -> String {
        // plain data with finite numbers and string keys always serializes
        serde_json::to_string(self).unwrap_or_else(|e| format!(r#"{{"type":"error","reason":"{e}"}}"#))
    }
}

/// Settings shared by every session of a server.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub dynamics: DynamicsConfig,
    pub geometry: SceneGeometry,
    pub calibration: GloveCalibration,
    pub settings: ServiceSettings,
}

/// Curves used when a server is started without calibration files.
pub fn reference_calibration() -> GloveCalibration {
    GloveCalibration {
        thumb: CalibrationModel {
            channel: Channel::Thumb,
            a: 2.0,
            b: 1.5,
            deadband_adc: 10,
            points: Vec::new(),
        },
        palm: CalibrationModel {
            channel: Channel::Palm,
            a: 8.0,
            b: 1.3,
            deadband_adc: 10,
            points: Vec::new(),
        },
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            dynamics: DynamicsConfig::default(),
            geometry: SceneGeometry::default(),
            calibration: reference_calibration(),
            settings: ServiceSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: u64,
    pub scene: Scene,
    pub tick: u64,
    tick_ms: u64,
    staleness_ms: u64,
    /// Tick at which the latest force message arrived.
    last_force_tick: Option<u64>,
}

impl Session {
    pub fn open(id: u64, game: GameKind, seed: u64, cd_enabled: bool, cfg: &ServiceConfig) -> Result<Self, SceneError> {
        let scene = Scene::new(
            game,
            seed,
            cfg.dynamics.clone().with_cd(cd_enabled),
            cfg.calibration.clone(),
            cfg.geometry.clone(),
        )?;
        Ok(Self {
            id,
            scene,
            tick: 0,
            tick_ms: cfg.settings.tick_ms.max(1),
            staleness_ms: cfg.settings.staleness_ms,
            last_force_tick: None,
        })
    }

    /// Applies one client message. Errors leave the session unchanged.
    pub fn handle_message(&mut self, msg: &ClientMessage) -> Result<(), String> {
        match msg {
            ClientMessage::Open { .. } => Err("session already open".into()),
            ClientMessage::Force { thumb_adc, palm_adc } => {
                for (field, v) in [("thumb_adc", *thumb_adc), ("palm_adc", *palm_adc)] {
                    if v > u32::from(ADC_MAX) {
                        return Err(format!("{field} {v} outside 0..=1023"));
                    }
                }
                let (thumb, palm) = (*thumb_adc as u16, *palm_adc as u16);
                self.scene.set_force_adc(thumb, palm).map_err(|e| e.to_string())?;
                self.last_force_tick = Some(self.tick);
                Ok(())
            }
            ClientMessage::Hand { y_m, x_m } => {
                if !(y_m.is_finite() && x_m.is_finite()) {
                    return Err("hand position must be finite".into());
                }
                self.scene.set_hand(*x_m, *y_m);
                Ok(())
            }
            ClientMessage::Action { name, cube, target } => {
                let action = parse_action(name, *cube, target.as_deref()).map_err(|e| e.to_string())?;
                match action {
                    Some(a) => self.scene.apply(a).map_err(|e| e.to_string()),
                    None => self.scene.release(None).map(|_| ()).map_err(|e| e.to_string()),
                }
            }
        }
    }

    /// Parses and applies a raw JSON message.
    pub fn handle_json(&mut self, text: &str) -> Result<(), String> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
        self.handle_message(&msg)
    }

    fn force_is_stale(&self) -> bool {
        match self.last_force_tick {
            None => true,
            Some(t) => (self.tick - t) * self.tick_ms >= self.staleness_ms,
        }
    }

    /// One fixed step of the dynamics, then a snapshot.
    pub fn tick(&mut self) -> Snapshot {
        if self.force_is_stale() {
            self.scene.clear_force();
        }
        self.scene.step(self.tick_ms as f64 / 1000.0);
        self.tick += 1;
        self.snapshot()
    }

    pub fn snapshot(&self) -> Snapshot {
        let scene = &self.scene;
        let cubes = scene
            .objects
            .iter()
            .zip(&scene.game.cubes)
            .zip(&scene.game.locations)
            .map(|((obj, spec), loc)| CubeView {
                id: spec.id,
                mass_g: spec.mass_g,
                location: location_name(*loc),
                phase: obj.phase,
                x: obj.x,
                display_height: obj.display_height,
                physical_height: obj.physical_height,
            })
            .collect();
        Snapshot {
            tick: self.tick,
            game: scene.game.game,
            cubes,
            screen: scene.game.screen,
            attempts: scene.game.attempts,
            gave_up: scene.game.gave_up,
            ratio: scene.display_ratio(),
            gesture: scene.sample.gesture,
            effective_force: scene.sample.effective_force,
            hand_x: scene.hand.x,
            hand_y: scene.hand.height,
            tilt: (scene.game.game == GameKind::BalanceScale).then(|| scale_tilt(&scene.game)),
        }
    }
}

/// Shared server state: configuration and the session budget.
pub struct ServiceState {
    pub config: ServiceConfig,
    next_id: AtomicU64,
    active: AtomicUsize,
}

impl ServiceState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self { config, next_id: AtomicU64::new(1), active: AtomicUsize::new(0) })
    }

    pub fn active_sessions(&self) -> usize {
        self.active.load(Ordering::SeqCst)
    }

    fn reserve(self: &Arc<Self>) -> Option<SessionSlot> {
        let max = self.config.settings.max_sessions;
        self.active
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < max).then_some(n + 1))
            .ok()
            .map(|_| SessionSlot { state: Arc::clone(self), id: self.next_id.fetch_add(1, Ordering::SeqCst) })
    }
}

struct SessionSlot {
    state: Arc<ServiceState>,
    id: u64,
}

impl Drop for SessionSlot {
    fn drop(&mut self) {
        self.state.active.fetch_sub(1, Ordering::SeqCst);
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new().route("/session", get(upgrade)).with_state(state)
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_connection(socket, state))
}

async fn run_connection(socket: WebSocket, state: Arc<ServiceState>) {
    let (mut tx, mut rx) = socket.split();
    let send = |msg: ServerMessage| Message::Text(msg.to_json().into());

    // wait for an open request
    let (mut session, _slot) = loop {
        let Some(Ok(frame)) = rx.next().await else { return };
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => return,
            _ => continue,
        };
        let reply = match serde_json::from_str::<ClientMessage>(&text) {
            Ok(ClientMessage::Open { game, seed, cd }) => match state.reserve() {
                None => ServerMessage::error("session limit reached"),
                Some(slot) => match Session::open(slot.id, game, seed, cd, &state.config) {
                    Ok(session) => {
                        let opened = send(ServerMessage::Opened { session: session.id });
                        let first = send(ServerMessage::State(session.snapshot()));
                        if tx.send(opened).await.is_err() || tx.send(first).await.is_err() {
                            return;
                        }
                        break (session, slot);
                    }
                    Err(e) => ServerMessage::error(e.to_string()),
                },
            },
            Ok(_) => ServerMessage::error("no open session"),
            Err(e) => ServerMessage::error(format!("bad message: {e}")),
        };
        if tx.send(send(reply)).await.is_err() {
            return;
        }
    };

    let mut ticker = tokio::time::interval(Duration::from_millis(state.config.settings.tick_ms.max(1)));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            biased;
            frame = rx.next() => {
                let text = match frame {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                if let Err(reason) = session.handle_json(&text) {
                    if tx.send(send(ServerMessage::error(reason))).await.is_err() {
                        break;
                    }
                }
            }
            _ = ticker.tick() => {
                let snap = session.tick();
                if tx.send(send(ServerMessage::State(snap))).await.is_err() {
                    break;
                }
            }
        }
    }
}

/// Serves on an already-bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub async fn serve_addr(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on ws://{}/session", listener.local_addr()?);
    serve(listener, ServiceState::new(config)).await
}
