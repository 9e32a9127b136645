use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Multipart, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use cyscolor::imaging::{decode_rgb, encode_png16, RgbGrid};
use cyscolor::Palette;
use serde::Serialize;
use uuid::Uuid;

use crate::error::ApiError;
use crate::feedback::{image_hash, ContextDigest, FeedbackRecord};
use crate::state::{AppState, Session};

pub const LATENCY_HEADER: &str = "x-colorize-latency-ms";
pub const CLIPPED_HEADER: &str = "x-gamut-clipped-pixels";

#[derive(Debug, Serialize)]
pub struct PaletteResponse {
    pub palette: Palette,
    pub session_id: Uuid,
}

struct Form(HashMap<String, Bytes>);

impl Form {
    async fn read(mut multipart: Multipart) -> Result<Self, ApiError> {
        let mut fields = HashMap::new();
        while let Some(field) = multipart
            .next_field()
            .await
            .map_err(|e| ApiError::BadRequest(format!("malformed multipart body: {e}")))?
        {
            let name = field.name().unwrap_or_default().to_string();
            let data = field
                .bytes()
                .await
                .map_err(|e| ApiError::BadRequest(format!("malformed multipart body: {e}")))?;
            fields.insert(name, data);
        }
        Ok(Form(fields))
    }

    fn text(&self, name: &'static str) -> Result<Option<String>, ApiError> {
        self.0
            .get(name)
            .map(|b| {
                String::from_utf8(b.to_vec()).map_err(|_| ApiError::field(name, format!("{name} must be UTF-8 text")))
            })
            .transpose()
    }

    fn required_text(&self, name: &'static str) -> Result<String, ApiError> {
        self.text(name)?
            .ok_or_else(|| ApiError::field(name, format!("missing field {name}")))
    }

    fn seed(&self, default: u64) -> Result<u64, ApiError> {
        match self.text("seed")? {
            None => Ok(default),
            Some(s) if s.trim().is_empty() => Ok(default),
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| ApiError::field("seed", format!("seed must be a non-negative integer, got {s:?}"))),
        }
    }

    fn image(&self) -> Result<(Bytes, RgbGrid), ApiError> {
        let bytes = self
            .0
            .get("image")
            .cloned()
            .ok_or_else(|| ApiError::field("image", "missing field image"))?;
        let grid = decode_rgb(&bytes).map_err(|e| ApiError::field("image", format!("cannot decode image: {e}")))?;
        Ok((bytes, grid))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

pub async fn categories(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.0.categories.names().to_vec())
}

pub async fn palette(State(state): State<AppState>, multipart: Multipart) -> Result<Json<PaletteResponse>, ApiError> {
    let slot = state.palette_model().ok_or(ApiError::Unavailable("palette"))?;
    let form = Form::read(multipart).await?;
    let text = form.required_text("text")?;
    let category = form.required_text("category")?;
    if state.0.categories.id(&category).is_none() {
        return Err(ApiError::field("category", format!("unknown category {category:?}")));
    }
    let seed = form.seed(state.config().seed)?;
    let (bytes, image) = form.image()?;

    let job_slot = Arc::clone(&slot);
    let (t, c) = (text.clone(), category.clone());
    let palette = blocking(move || {
        let model = &job_slot.model;
        let ctx = model
            .context_builder()
            .build(&t, &c, &image.luma())
            .map_err(|e| ApiError::field("category", e.to_string()))?;
        Ok(model.sample_palette(&ctx, seed)?)
    })
    .await?;

    let session_id = state.insert_session(Session {
        created: Instant::now(),
        digest: ContextDigest {
            text,
            category,
            image_hash: image_hash(&bytes),
        },
        image: Arc::new(bytes.to_vec()),
        original: palette,
        current: palette,
        model_version: slot.version.clone(),
        seed,
    });
    Ok(Json(PaletteResponse { palette, session_id }))
}

fn parse_session_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw.trim()).map_err(|_| ApiError::field("session_id", format!("malformed session id {raw:?}")))
}

fn parse_palette_json(value: &serde_json::Value) -> Result<Palette, ApiError> {
    let items = value
        .as_array()
        .ok_or_else(|| ApiError::field("palette", "palette must be an array of 5 hex colors"))?;
    let hex = items
        .iter()
        .map(|v| v.as_str().ok_or_else(|| ApiError::field("palette", "palette entries must be hex strings")))
        .collect::<Result<Vec<_>, _>>()?;
    Palette::from_hex(&hex).map_err(|e| ApiError::field("palette", e.to_string()))
}

/// Accepts a JSON array or a comma-separated list of hex colors.
fn parse_palette_text(raw: &str) -> Result<Palette, ApiError> {
    let trimmed = raw.trim();
    if trimmed.starts_with('[') {
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| ApiError::field("palette", format!("invalid JSON: {e}")))?;
        return parse_palette_json(&value);
    }
    let hex: Vec<&str> = trimmed.split(',').map(str::trim).collect();
    Palette::from_hex(&hex).map_err(|e| ApiError::field("palette", e.to_string()))
}

pub async fn adjust(State(state): State<AppState>, body: Bytes) -> Result<StatusCode, ApiError> {
    let value: serde_json::Value =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid JSON body: {e}")))?;
    let raw_id = value
        .get("session_id")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ApiError::field("session_id", "missing field session_id"))?;
    let id = parse_session_id(raw_id)?;
    let palette = parse_palette_json(
        value
            .get("palette")
            .ok_or_else(|| ApiError::field("palette", "missing field palette"))?,
    )?;
    let session = state
        .session(&id)
        .ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;

    blocking(move || {
        let record = FeedbackRecord {
            session_id: id.to_string(),
            original_palette: session.original,
            adjusted_palette: palette,
            context: session.digest.clone(),
            timestamp: chrono::Utc::now(),
            model_version: session.model_version.clone(),
        };
        let mut log = state.0.feedback.lock().expect("feedback lock");
        log.store_image(&session.digest.image_hash, &session.image)?;
        log.append(&record)?;
        state
            .update_session(&id, |s| s.current = palette)
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn colorize(State(state): State<AppState>, multipart: Multipart) -> Result<Response, ApiError> {
    let slot = state.colorizer_model().ok_or(ApiError::Unavailable("colorizer"))?;
    let form = Form::read(multipart).await?;
    let default_category = slot
        .model
        .categories()
        .names()
        .first()
        .cloned()
        .unwrap_or_default();

    let (palette, image, text, category, seed) = match form.text("session_id")? {
        Some(raw) => {
            let id = parse_session_id(&raw)?;
            let s = state
                .session(&id)
                .ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
            let image = match form.0.contains_key("image") {
                true => form.image()?.1,
                false => decode_rgb(&s.image).map_err(|e| ApiError::Internal(e.to_string()))?,
            };
            (s.current, image, s.digest.text, s.digest.category, form.seed(s.seed)?)
        }
        None => {
            let palette = parse_palette_text(
                &form
                    .text("palette")?
                    .ok_or_else(|| ApiError::field("palette", "either session_id or palette is required"))?,
            )?;
            let text = form.text("text")?.unwrap_or_default();
            let category = form.text("category")?.unwrap_or(default_category);
            (palette, form.image()?.1, text, category, form.seed(state.config().seed)?)
        }
    };

    let start = Instant::now();
    let (png, clipped) = blocking(move || {
        let model = &slot.model;
        let luma = image.luma();
        let ctx = model
            .context_builder()
            .build(&text, &category, &luma)
            .map_err(|e| ApiError::field("category", e.to_string()))?;
        let out = model.colorize_any(&luma, &palette, &ctx, seed)?;
        Ok((encode_png16(&out.rgb)?, out.gamut_clipped))
    })
    .await?;
    let latency = start.elapsed().as_millis();
    tracing::info!(latency_ms = latency as u64, gamut_clipped = clipped, "colorized");

    let mut response = (StatusCode::OK, png).into_response();
    let headers = response.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    headers.insert(LATENCY_HEADER, HeaderValue::from(latency as u64));
    headers.insert(CLIPPED_HEADER, HeaderValue::from(clipped as u64));
    Ok(response)
}
