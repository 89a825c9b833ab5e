//! Drives the JSON API in-process: sign in, create content, sit a lecture
//! test over HTTP and read the result.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use satep::domain::PersonProfile;
use satep::{Platform, Settings, SystemClock};

async fn call(
    app: &Router,
    method: Method,
    path: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (u16, Value) {
    let mut req = Request::builder().method(method).uri(path);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn solve(prompt: &str) -> String {
    let n: Vec<u64> = prompt
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|s| s.parse().ok())
        .collect();
    (n[0] + n[1]).to_string()
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let settings = Settings {
        password_rounds: 1000,
        lecture_blueprint: (1, 1),
        ..Settings::default()
    };
    let platform =
        Arc::new(Platform::ephemeral(dir.path(), Arc::new(SystemClock), None, settings).unwrap());
    let (_, password) = platform
        .seed_admin(&PersonProfile {
            name: "Ada".into(),
            surname: "Admin".into(),
            username: "root".into(),
            email: "root@admin.example".into(),
            department: "Informatics".into(),
        })
        .unwrap();
    let app = satep::api::router(platform);

    let (_, r) = call(
        &app,
        Method::POST,
        "/api/login",
        None,
        Some(json!({"username": "root", "password": password})),
    )
    .await;
    let admin = r["data"]["token"].as_str().unwrap().to_owned();

    let (_, r) = call(
        &app,
        Method::POST,
        "/api/lectures",
        Some(&admin),
        Some(json!({"title": "Compilers"})),
    )
    .await;
    let lecture = r["data"]["id"].as_i64().unwrap();
    call(
        &app,
        Method::POST,
        "/api/questions/multiple_choice",
        Some(&admin),
        Some(json!({"lecture": lecture, "question": "A lexer produces", "right_answer": "tokens", "wrong_answers": ["trees", "bytes", "types"]})),
    )
    .await;
    call(
        &app,
        Method::POST,
        "/api/questions/gap_fill",
        Some(&admin),
        Some(json!({"lecture": lecture, "question": "LR parsing reads input from the ___", "answer": "left"})),
    )
    .await;

    let (_, c) = call(&app, Method::POST, "/api/captcha", None, Some(json!({}))).await;
    let (status, r) = call(
        &app,
        Method::POST,
        "/api/register",
        None,
        Some(json!({
            "am": 7007, "name": "Sofia", "surname": "Lambrou", "username": "sofia",
            "email": "sofia@uni.example", "department": "Informatics", "password": "a long passphrase",
            "captcha_token": c["data"]["token"], "captcha_answer": solve(c["data"]["prompt"].as_str().unwrap()),
        })),
    )
    .await;
    println!("register -> {status} {}", r["data"]);
    call(
        &app,
        Method::POST,
        "/api/registrations/7007/decision",
        Some(&admin),
        Some(json!({"decision": "approve"})),
    )
    .await;
    let (_, r) = call(
        &app,
        Method::POST,
        "/api/login",
        None,
        Some(json!({"username": "sofia", "password": "a long passphrase"})),
    )
    .await;
    let student = r["data"]["token"].as_str().unwrap().to_owned();

    let (status, view) = call(
        &app,
        Method::POST,
        &format!("/api/tests/lecture_{lecture}/start"),
        Some(&student),
        None,
    )
    .await;
    println!("start test -> {status}");
    let answers: Vec<Value> = view["data"]["questions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| {
            let response = if q["kind"] == "multiple_choice" {
                "tokens"
            } else {
                "LEFT"
            };
            json!({"question_id": q["question_id"], "kind": q["kind"], "response": response})
        })
        .collect();
    let id = view["data"]["instance_id"].as_str().unwrap();
    let (status, r) = call(
        &app,
        Method::POST,
        &format!("/api/tests/{id}/submit"),
        Some(&student),
        Some(json!({"answers": answers})),
    )
    .await;
    println!("submit -> {status} {}", r["data"]);

    let (_, r) = call(&app, Method::GET, "/api/results/me", Some(&student), None).await;
    println!("my results: {}", r["data"]);
    let (status, r) = call(&app, Method::GET, "/api/users", Some(&student), None).await;
    println!("student lists users -> {status} {}", r["error"]);
}
