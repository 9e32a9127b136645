//! Runs every headline check and prints one PASS/FAIL line per property.
//! `cargo test -p cyscolor-gateway --test acceptance -- --nocapture`

mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use axum::http::StatusCode;
use common::*;
use cyscolor::imaging::decode_rgb;
use cyscolor_gateway::{read_feedback, FEEDBACK_FILE};

/// Three-step round trip against toy models with the default configuration.
fn service_contract() {
    let dir = tempfile::tempdir().unwrap();
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(async {
        let (app, _) = app(dir.path());

        let r = send(&app, axum::http::Request::get("/v1/categories").body(axum::body::Body::empty()).unwrap()).await;
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(r.json().as_array().unwrap().len(), 14);

        let png = test_png(23, 17);
        let r = send(
            &app,
            multipart_request(
                "/v1/palette",
                &[
                    ("text", Part::Text("neon night")),
                    ("category", Part::Text("punk")),
                    ("image", Part::File(&png)),
                    ("seed", Part::Text("1")),
                ],
            ),
        )
        .await;
        assert_eq!(r.status, StatusCode::OK);
        let v = r.json();
        let palette = v["palette"].as_array().unwrap().clone();
        assert_eq!(palette.len(), 5);
        for c in &palette {
            let c = c.as_str().unwrap();
            assert!(c.len() == 7 && c.starts_with('#') && c[1..].chars().all(|ch| ch.is_ascii_hexdigit()));
        }
        let id = v["session_id"].as_str().unwrap().to_string();

        for k in 1..=3 {
            let mut adjusted = palette.clone();
            adjusted[0] = serde_json::json!(format!("#0{k}0000"));
            let r = send(
                &app,
                json_request("/v1/palette/adjust", &serde_json::json!({"session_id": id, "palette": adjusted})),
            )
            .await;
            assert!(r.status.is_success(), "adjust status {}", r.status);
            let lines = read_feedback(&dir.path().join(FEEDBACK_FILE)).unwrap();
            assert_eq!(lines.len(), k);
        }

        let r = send(&app, multipart_request("/v1/colorize", &[("session_id", Part::Text(&id))])).await;
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(r.headers["content-type"], "image/png");
        let out = decode_rgb(&r.body).unwrap();
        assert_eq!((out.width, out.height), (23, 17));
    });
}

#[test]
fn acceptance() {
    let mut checks = support::all_checks();
    checks.push(("service contract", service_contract));
    let mut failed = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
        println!("{verdict}  {name}  ({:.1}s)", start.elapsed().as_secs_f64());
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
