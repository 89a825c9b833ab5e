#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use satep::{ManualClock, Platform, Settings};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 6, 1, 9, 0, 0).unwrap()
}

pub fn fast_settings() -> Settings {
    Settings {
        password_rounds: 1000,
        ..Settings::default()
    }
}

pub struct Harness {
    pub platform: Arc<Platform>,
    pub clock: Arc<ManualClock>,
    pub app: Router,
    pub dir: TempDir,
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub raw: Vec<u8>,
    pub headers: axum::http::HeaderMap,
}

impl Reply {
    pub fn data(&self) -> &Value {
        &self.body["data"]
    }

    pub fn code(&self) -> &str {
        self.body["error"]["code"].as_str().unwrap_or("")
    }
}

/// Answers an arithmetic captcha prompt.
pub fn solve(prompt: &str) -> String {
    let nums: Vec<u64> = prompt
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap())
        .collect();
    (nums[0] + nums[1]).to_string()
}

impl Harness {
    pub fn new(seed: u64) -> Self {
        Self::with_settings(seed, fast_settings())
    }

    pub fn with_settings(seed: u64, settings: Settings) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(t0()));
        let platform =
            Arc::new(Platform::ephemeral(dir.path(), clock.clone(), Some(seed), settings).unwrap());
        let app = satep::api::router(platform.clone());
        Self {
            platform,
            clock,
            app,
            dir,
        }
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let raw = resp
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
        Reply {
            status,
            body,
            raw,
            headers,
        }
    }

    pub async fn call(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Reply {
        let mut req = Request::builder()
            .method(Method::from_bytes(method.as_bytes()).unwrap())
            .uri(path);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        self.send(req).await
    }

    pub async fn raw_json(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        text: &str,
    ) -> Reply {
        let mut req = Request::builder()
            .method(method)
            .uri(path)
            .header(header::CONTENT_TYPE, "application/json");
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        self.send(req.body(Body::from(text.to_owned())).unwrap())
            .await
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> Reply {
        self.call("GET", path, token, None).await
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> Reply {
        self.call("POST", path, token, Some(body)).await
    }

    pub async fn login(&self, username: &str, password: &str) -> Reply {
        self.post(
            "/api/login",
            None,
            json!({ "username": username, "password": password }),
        )
        .await
    }

    /// Seeds an administrator and returns its generated password.
    pub fn seed_admin(&self, username: &str) -> String {
        let (_, pw) = self
            .platform
            .seed_admin(&satep::domain::PersonProfile {
                name: "Ada".into(),
                surname: "Admin".into(),
                username: username.into(),
                email: format!("{username}@admin.example"),
                department: "Informatics".into(),
            })
            .unwrap();
        pw
    }

    /// Seeds an administrator and signs it in.
    pub async fn admin(&self, username: &str) -> String {
        let pw = self.seed_admin(username);
        let r = self.login(username, &pw).await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
        r.data()["token"].as_str().unwrap().to_owned()
    }

    pub fn registration_body(&self, captcha: &Value, am: i64, username: &str) -> Value {
        json!({
            "am": am,
            "name": "Eleni",
            "surname": format!("Student{am}"),
            "username": username,
            "email": format!("{username}@uni.example"),
            "department": "Informatics",
            "password": format!("pw-{username}"),
            "captcha_token": captcha["token"],
            "captcha_answer": solve(captcha["prompt"].as_str().unwrap()),
        })
    }

    pub async fn register(&self, am: i64, username: &str) -> Reply {
        let c = self.post("/api/captcha", None, json!({})).await;
        assert_eq!(c.status, StatusCode::CREATED);
        let body = self.registration_body(c.data(), am, username);
        self.post("/api/register", None, body).await
    }

    /// Registers, approves and signs in a student. Password is `pw-<username>`.
    pub async fn student(&self, admin: &str, am: i64, username: &str) -> String {
        let r = self.register(am, username).await;
        assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
        let r = self
            .post(
                &format!("/api/registrations/{am}/decision"),
                Some(admin),
                json!({ "decision": "approve" }),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
        let r = self.login(username, &format!("pw-{username}")).await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
        r.data()["token"].as_str().unwrap().to_owned()
    }

    pub async fn lecture(&self, admin: &str, title: &str) -> i64 {
        let r = self
            .post("/api/lectures", Some(admin), json!({ "title": title }))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
        r.data()["id"].as_i64().unwrap()
    }

    pub async fn mc(&self, admin: &str, lecture: i64, n: usize) -> i64 {
        let r = self
            .post(
                "/api/questions/multiple_choice",
                Some(admin),
                json!({
                    "lecture": lecture,
                    "question": format!("L{lecture} multiple choice {n}"),
                    "right_answer": format!("right {lecture}-{n}"),
                    "wrong_answers": [format!("wrong {lecture}-{n} a"), format!("wrong {lecture}-{n} b"), format!("wrong {lecture}-{n} c")],
                }),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
        r.data()["id"].as_i64().unwrap()
    }

    pub async fn gf(&self, admin: &str, lecture: i64, n: usize) -> i64 {
        let r = self
            .post(
                "/api/questions/gap_fill",
                Some(admin),
                json!({
                    "lecture": lecture,
                    "question": format!("L{lecture} gap fill {n}: ___"),
                    "answer": format!("Answer {lecture}-{n}"),
                }),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
        r.data()["id"].as_i64().unwrap()
    }

    /// (kind, id) -> accepted answer, read back through the admin listing.
    pub async fn answer_key(&self, admin: &str) -> HashMap<(String, i64), String> {
        let mut key = HashMap::new();
        for kind in ["multiple_choice", "gap_fill"] {
            let r = self
                .get(
                    &format!("/api/questions/{kind}?page_size=100000"),
                    Some(admin),
                )
                .await;
            assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
            for q in r.data()["items"].as_array().unwrap() {
                let answer = q.get("right_answer").or_else(|| q.get("answer")).unwrap();
                key.insert(
                    (kind.to_owned(), q["id"].as_i64().unwrap()),
                    answer.as_str().unwrap().to_owned(),
                );
            }
        }
        key
    }

    pub async fn upload(
        &self,
        admin: &str,
        lecture: i64,
        name: &str,
        media_type: &str,
        bytes: &[u8],
    ) -> Reply {
        let boundary = "satep-test-boundary";
        let mut body = Vec::new();
        body.extend_from_slice(
            format!(
                "--{boundary}\r\nContent-Disposition: form-data; name=\"meta\"\r\nContent-Type: application/json\r\n\r\n{}\r\n",
                json!({ "logical_name": name, "media_type": media_type })
            )
            .as_bytes(),
        );
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"blob\"\r\nContent-Type: application/octet-stream\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        let req = Request::builder()
            .method("POST")
            .uri(format!("/api/lectures/{lecture}/files"))
            .header(header::AUTHORIZATION, format!("Bearer {admin}"))
            .header(
                header::CONTENT_TYPE,
                format!("multipart/form-data; boundary={boundary}"),
            )
            .body(Body::from(body))
            .unwrap();
        self.send(req).await
    }
}

/// Builds a submission from a test view; `correct` picks which questions get the right answer.
pub fn sheet(
    view: &Value,
    key: &HashMap<(String, i64), String>,
    correct: impl Fn(usize) -> bool,
) -> Value {
    let answers: Vec<Value> = view["questions"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let kind = q["kind"].as_str().unwrap().to_owned();
            let id = q["question_id"].as_i64().unwrap();
            let response = if correct(i) {
                key[&(kind.clone(), id)].clone()
            } else {
                "no idea".into()
            };
            json!({ "question_id": id, "kind": kind, "response": response })
        })
        .collect();
    json!({ "answers": answers })
}
