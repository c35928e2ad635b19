//! HTTP service for live annotation sessions.
//!
//! Each session pairs an experiment with a human annotator: the engine picks
//! a question, the client answers it, and the answer is appended to the
//! session's log before it is applied. Re-training runs in the background
//! while the session reports `retraining`.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | `POST` | `/sessions` | [`api::CreateSession`] | 201 [`api::SessionView`] |
//! | `GET` | `/sessions` | | list of [`api::SessionSummary`] |
//! | `GET` | `/sessions/{id}/question` | | [`api::SessionView`] |
//! | `POST` | `/sessions/{id}/answer` | [`api::AnswerRequest`] | [`api::SessionView`] |
//! | `GET` | `/sessions/{id}/metrics` | | [`api::MetricsView`] |
//! | `GET` | `/healthz` | | [`api::Health`] |

pub mod api;
mod app;
mod error;
mod session;
mod store;

use std::net::SocketAddr;

pub use app::{router, AppState, ServiceConfig};
pub use error::ServiceError;

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(cfg: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(cfg, listener).await
}

/// Serves on an already bound listener until ctrl-c.
pub async fn serve_on(
    cfg: ServiceConfig,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    let state = AppState::open(cfg).await?;
    tracing::info!(addr = %listener.local_addr()?, sessions = state.session_count(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
