//! Drives the HTTP router in-process: upload a model, add a goal, react.
//! The same router is what `goalmed serve` listens with.
//!
//! ```bash
//! cargo run --example rest_service
//! ```

use std::error::Error;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use goalmed::scenario::Scenario;
use goalmed::service::{router, AppState};

async fn call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> Result<(StatusCode, Value), Box<dyn Error>> {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v)?)
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body)?).await?;
    let status = res.status();
    let bytes = res.into_body().collect().await?.to_bytes();
    Ok((status, serde_json::from_slice(&bytes)?))
}

async fn demo() -> Result<(), Box<dyn Error>> {
    let app = router(AppState::new());

    let (status, body) = call(&app, "POST", "/react", None).await?;
    println!("react before any model: {status} {body}");

    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/smart_home.json"
    );
    let model = serde_json::to_value(&Scenario::load(path)?.environment)?;
    let (_, body) = call(&app, "PUT", "/model", Some(model)).await?;
    println!("model uploaded: {body}");

    let goal = json!({"user": "alice", "zone": "livingroom", "instance": "roomTemp", "value": 24});
    let (_, body) = call(&app, "POST", "/goals", Some(goal)).await?;
    println!("goal replaced: {body}");

    let (status, body) = call(&app, "POST", "/react", None).await?;
    println!("react: {status}\n{}", serde_json::to_string_pretty(&body)?);
    assert_eq!(body["revision"], 2);
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?
        .block_on(demo())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
