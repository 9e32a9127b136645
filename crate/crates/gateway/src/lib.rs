//! HTTP gateway for the three-step flow: generate a palette from text,
//! category and a grayscale image; record the user's palette adjustments;
//! colorize the image with the final palette.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/v1/palette` | multipart `text`, `category`, `image`, optional `seed` | `{"palette": [hex; 5], "session_id"}` |
//! | POST | `/v1/palette/adjust` | JSON `{"session_id", "palette": [hex; 5]}` | 204 |
//! | POST | `/v1/colorize` | multipart `session_id` or `palette` + `image`, optional `text`, `category`, `seed` | PNG |
//! | GET | `/v1/categories` | | `[string]` |

pub mod api;
pub mod error;
pub mod feedback;
pub mod state;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use cyscolor::config::Config;

pub use error::{ApiError, ErrorBody};

pub use feedback::{read_feedback, FeedbackRecord, FEEDBACK_FILE};
pub use state::AppState;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Model(#[from] cyscolor::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_upload_bytes;
    Router::new()
        .route("/v1/palette", post(api::palette))
        .route("/v1/palette/adjust", post(api::adjust))
        .route("/v1/colorize", post(api::colorize))
        .route("/v1/categories", get(api::categories))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Loads the configured models and serves until interrupted.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let addr = format!("{}:{}", config.host, config.port);
    let state = AppState::from_config(config)?;
    if state.palette_model().is_none() {
        tracing::warn!("no palette model configured; /v1/palette will answer 503");
    }
    if state.colorizer_model().is_none() {
        tracing::warn!("no colorizer model configured; /v1/colorize will answer 503");
    }
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
