//! The `/v1` control protocol over HTTP + JSON, and the live frame stream
//! over a WebSocket.
//!
//! Handlers never touch the coordinator directly: they go through
//! [`Shared`], which only enqueues moderated requests and serves views.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::RecvTimeoutError;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evoplay_core::runtime::{Runtime, Shared, SubmitOutcome, Suggestion};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

/// Frames buffered per live subscriber before it counts as slow and is dropped.
pub const LIVE_BUFFER: usize = 256;
/// How long `POST /v1/admin/snapshot` waits for the coordinator.
pub const SNAPSHOT_WAIT: Duration = Duration::from_secs(120);

#[derive(Clone)]
pub struct AppState {
    pub shared: Arc<Shared>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GamesResponse {
    pub games: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GameUpload {
    pub gdf: String,
    #[serde(default)]
    pub submitter: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandRequest {
    pub command: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandResponse {
    pub response: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsQuery {
    pub game: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PauseResponse {
    pub paused: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotResponse {
    pub path: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/v1/status", get(status))
        .route("/v1/games", get(games).post(upload_game))
        .route("/v1/suggestions", post(suggest))
        .route("/v1/stats", get(stats))
        .route("/v1/command", post(command))
        .route("/v1/live", get(live))
        .route("/v1/admin/snapshot", post(snapshot))
        .route("/v1/admin/pause", post(pause))
        .route("/v1/admin/resume", post(resume))
        .with_state(AppState { shared })
}

async fn status(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.shared.status())
}

async fn games(State(app): State<AppState>) -> impl IntoResponse {
    Json(GamesResponse {
        games: app.shared.library(),
    })
}

fn submit_response(outcome: SubmitOutcome) -> Response {
    let code = if outcome.is_accepted() {
        StatusCode::ACCEPTED
    } else {
        StatusCode::UNPROCESSABLE_ENTITY
    };
    (code, Json(outcome)).into_response()
}

async fn upload_game(State(app): State<AppState>, Json(body): Json<GameUpload>) -> Response {
    submit_response(app.shared.submit_game(&body.gdf, &body.submitter))
}

async fn suggest(State(app): State<AppState>, Json(s): Json<Suggestion>) -> Response {
    submit_response(app.shared.submit(s))
}

async fn stats(State(app): State<AppState>, Query(q): Query<StatsQuery>) -> impl IntoResponse {
    Json(app.shared.stats(q.game.as_deref()))
}

async fn command(State(app): State<AppState>, Json(c): Json<CommandRequest>) -> impl IntoResponse {
    Json(CommandResponse {
        response: app.shared.command(&c.command),
    })
}

async fn pause(State(app): State<AppState>) -> impl IntoResponse {
    app.shared.pause();
    Json(PauseResponse { paused: true })
}

async fn resume(State(app): State<AppState>) -> impl IntoResponse {
    app.shared.resume();
    Json(PauseResponse { paused: false })
}

async fn snapshot(State(app): State<AppState>) -> Response {
    let rx = app.shared.request_snapshot();
    let reply = tokio::task::spawn_blocking(move || rx.recv_timeout(SNAPSHOT_WAIT)).await;
    match reply {
        Ok(Ok(Ok(path))) => Json(SnapshotResponse {
            path: path.display().to_string(),
        })
        .into_response(),
        Ok(Ok(Err(error))) => (StatusCode::INTERNAL_SERVER_ERROR, Json(ErrorResponse { error })).into_response(),
        _ => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(ErrorResponse {
                error: "coordinator did not reach a quiescent point in time".into(),
            }),
        )
            .into_response(),
    }
}

async fn live(State(app): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_frames(app.shared, socket))
}

/// Forwards hub frames to the socket as JSON text messages. The hub drops
/// this subscriber if the socket falls `LIVE_BUFFER` frames behind.
async fn stream_frames(shared: Arc<Shared>, mut socket: WebSocket) {
    let rx = shared.live.subscribe(LIVE_BUFFER);
    let (tx, mut frames) = mpsc::channel::<String>(LIVE_BUFFER);
    tokio::task::spawn_blocking(move || loop {
        match rx.recv_timeout(Duration::from_millis(200)) {
            Ok(frame) => {
                let text = serde_json::to_string(&*frame).expect("frames serialize");
                if tx.blocking_send(text).is_err() {
                    return;
                }
            }
            Err(RecvTimeoutError::Timeout) if !tx.is_closed() => {}
            Err(_) => return,
        }
    });
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Some(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                None => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// The coordinator loop on its own thread.
pub struct Coordinator {
    stop: Arc<AtomicBool>,
    done: Arc<AtomicBool>,
    handle: JoinHandle<Runtime>,
}

impl Coordinator {
    /// Runs `runtime` until [`Coordinator::stop`], or for `max_episodes`.
    pub fn spawn(mut runtime: Runtime, max_episodes: Option<u64>) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let done = Arc::new(AtomicBool::new(false));
        let (flag, finished) = (Arc::clone(&stop), Arc::clone(&done));
        let handle = std::thread::Builder::new()
            .name("coordinator".into())
            .spawn(move || {
                runtime.run(max_episodes, &flag);
                finished.store(true, Ordering::SeqCst);
                runtime
            })
            .expect("spawn coordinator thread");
        Self { stop, done, handle }
    }

    pub fn is_finished(&self) -> bool {
        self.done.load(Ordering::SeqCst)
    }

    /// Stops after the current episode and hands the runtime back.
    pub fn stop(self) -> Runtime {
        self.stop.store(true, Ordering::SeqCst);
        self.handle.join().expect("coordinator thread panicked")
    }
}

/// Serves the control protocol for `runtime` on `listener` until Ctrl-C or,
/// with `max_episodes`, until that many episodes have been played. Then stops
/// the loop and returns the runtime for a final snapshot.
pub async fn serve(runtime: Runtime, listener: TcpListener, max_episodes: Option<u64>) -> std::io::Result<Runtime> {
    let shared = runtime.shared();
    log::info!("control protocol on http://{}", listener.local_addr()?);
    let coordinator = Coordinator::spawn(runtime, max_episodes);
    let done = Arc::clone(&coordinator.done);
    let bounded_end = async move {
        while !done.load(Ordering::SeqCst) {
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
    };
    axum::serve(listener, router(shared))
        .with_graceful_shutdown(async move {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = bounded_end => {}
            }
        })
        .await?;
    Ok(tokio::task::spawn_blocking(move || coordinator.stop())
        .await
        .expect("join coordinator"))
}
