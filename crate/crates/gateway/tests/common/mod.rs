#![allow(dead_code)]

use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cyscolor::config::Config;
use cyscolor::dataset::CategoryVocab;
use cyscolor::fusion::TokenVocab;
use cyscolor::imaging::{encode_png8, RgbGrid};
use cyscolor::toy;
use cyscolor_gateway::{router, AppState};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const BOUNDARY: &str = "XtestBOUNDARYx";

pub enum Part<'a> {
    Text(&'a str),
    File(&'a [u8]),
}

pub fn multipart(fields: &[(&str, Part<'_>)]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, part) in fields {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match part {
            Part::Text(t) => {
                body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes());
                body.extend_from_slice(t.as_bytes());
            }
            Part::File(bytes) => {
                body.extend_from_slice(
                    format!(
                        "Content-Disposition: form-data; name=\"{name}\"; filename=\"upload.png\"\r\nContent-Type: image/png\r\n\r\n"
                    )
                    .as_bytes(),
                );
                body.extend_from_slice(bytes);
            }
        }
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn multipart_request(uri: &str, fields: &[(&str, Part<'_>)]) -> Request<Body> {
    Request::post(uri)
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(fields)))
        .unwrap()
}

pub fn json_request(uri: &str, value: &serde_json::Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(value).unwrap()))
        .unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

/// A gradient test image, `w`×`h`.
pub fn test_png(w: usize, h: usize) -> Vec<u8> {
    let pixels = (0..w * h)
        .map(|i| {
            let x = (i % w) as f64 / w as f64;
            let y = (i / w) as f64 / h as f64;
            [x, 0.5 * (x + y), y]
        })
        .collect();
    encode_png8(&RgbGrid::new(w, h, pixels).unwrap()).unwrap()
}

pub fn config(data_dir: &Path) -> Config {
    Config {
        data_dir: data_dir.to_path_buf(),
        ..Config::default()
    }
}

/// State with small untrained models over the configured categories.
pub fn state_with_models(config: Config) -> AppState {
    let cats = config.category_vocab().unwrap();
    let vocab = TokenVocab::build(["neon night punk rebel street soft dawn"]);
    let state = AppState::new(config).unwrap();
    state
        .set_palette_model(toy::palette_model(vocab.clone(), cats.clone(), 1).unwrap())
        .unwrap();
    state
        .set_colorizer_model(toy::colorizer_model(vocab, cats, 2).unwrap())
        .unwrap();
    state
}

pub fn app(data_dir: &Path) -> (Router, AppState) {
    let state = state_with_models(config(data_dir));
    (router(state.clone()), state)
}

pub fn vocab_of(names: &[&str]) -> CategoryVocab {
    CategoryVocab::new(names.iter().map(|s| s.to_string()).collect()).unwrap()
}
