mod common;

use axum::http::StatusCode;
use chrono::Duration;
use serde_json::{json, Value};

use common::{t0, Harness};
use satep::api::{error_status_table, Access, ROUTES};

/// Released codes and their statuses. Changing a line here is a breaking change.
const FROZEN: &[(&str, u16)] = &[
    ("UNAUTHENTICATED", 401),
    ("INVALID_CREDENTIALS", 401),
    ("NOT_AUTHORIZED", 403),
    ("NOT_FOUND", 404),
    ("DUPLICATE_USERNAME", 409),
    ("DUPLICATE_EMAIL", 409),
    ("DUPLICATE_REGISTER_NUMBER", 409),
    ("DUPLICATE_TITLE", 409),
    ("DUPLICATE_KEY", 409),
    ("CAPTCHA_FAILED", 422),
    ("INVALID_FIELD", 422),
    ("INVALID_QUESTION", 422),
    ("INVALID_SCHEDULE", 422),
    ("POOL_TOO_SMALL", 409),
    ("UNKNOWN_QUESTION", 422),
    ("DUPLICATE_ANSWER", 422),
    ("OUTSIDE_WINDOW", 409),
    ("ALREADY_OPEN", 409),
    ("NOT_OWNER", 403),
    ("TEST_EXPIRED", 409),
    ("ALREADY_SUBMITTED", 409),
    ("GROUP_UNAVAILABLE", 409),
    ("REFERENCED_BY_ACTIVE_EXAM", 409),
    ("FILE_TOO_LARGE", 413),
    ("EMPTY_FILE", 422),
    ("EMPTY_BODY", 422),
    ("BODY_TOO_LONG", 422),
    ("NO_RECIPIENTS", 409),
    ("DRAIN_IN_PROGRESS", 409),
    ("MALFORMED_JSON", 400),
    ("UNKNOWN_FIELD", 422),
    ("MISSING_FIELD", 422),
    ("MIGRATION_CONFLICT", 500),
    ("STORAGE_UNAVAILABLE", 503),
    ("CONFIG_ERROR", 500),
    ("INTERNAL", 500),
];

#[test]
fn error_codes_are_frozen() {
    assert_eq!(error_status_table(), FROZEN);
}

#[test]
fn route_table_covers_the_documented_surface() {
    let has = |m: &str, p: &str, a: Access| {
        ROUTES
            .iter()
            .any(|r| r.method == m && r.path == p && r.access == a)
    };
    assert!(has("GET", "/api/lectures", Access::Public));
    assert!(has("POST", "/api/tests/{key}/start", Access::User));
    assert!(has("PUT", "/api/schedule/{kind}", Access::Admin));
    assert!(has("GET", "/api/questions/{kind}", Access::Admin));
    // Every mutating endpoint except the sign-up/sign-in flow needs a session.
    let open: Vec<_> = ROUTES
        .iter()
        .filter(|r| r.method != "GET" && r.access == Access::Public)
        .map(|r| r.path)
        .collect();
    assert_eq!(
        open,
        [
            "/api/captcha",
            "/api/register",
            "/api/login",
            "/api/recover"
        ]
    );
}

async fn seeded() -> (Harness, String, String, i64) {
    let h = Harness::new(11);
    let admin = h.admin("root").await;
    let user = h.student(&admin, 42, "eleni").await;
    let lecture = h.lecture(&admin, "Algorithms").await;
    for n in 0..6 {
        h.mc(&admin, lecture, n).await;
        h.gf(&admin, lecture, n).await;
    }
    (h, admin, user, lecture)
}

#[tokio::test]
async fn documented_examples() {
    let (h, admin, user, lecture) = seeded().await;
    let r = h
        .upload(&admin, lecture, "notes.txt", "text/plain", b"hello")
        .await;
    assert_eq!(r.status, StatusCode::CREATED);

    let r = h.get("/api/lectures", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(
        r.data(),
        &json!([{ "id": lecture, "title": "Algorithms", "files": ["notes.txt"] }])
    );

    let r = h.post("/api/tests/final_exam/start", None, json!({})).await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNAUTHORIZED, "UNAUTHENTICATED")
    );

    let schedule = json!({ "date": "2025-06-01", "time": "10:00:00", "duration_minutes": 60 });
    let r = h
        .call(
            "PUT",
            "/api/schedule/final_exam",
            Some(&user),
            Some(schedule.clone()),
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::FORBIDDEN, "NOT_AUTHORIZED")
    );
    let r = h
        .call(
            "PUT",
            "/api/schedule/final_exam",
            Some(&admin),
            Some(schedule.clone()),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    assert_eq!(r.data()["schedule"]["time"], "10:00:00");

    let mut extra = schedule.clone();
    extra["foo"] = json!(1);
    let r = h
        .call("PUT", "/api/schedule/final_exam", Some(&admin), Some(extra))
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_FIELD")
    );

    let mut bad_date = schedule.clone();
    bad_date["date"] = json!("01-06-2025");
    let r = h
        .call(
            "PUT",
            "/api/schedule/final_exam",
            Some(&admin),
            Some(bad_date),
        )
        .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut bad_time = schedule;
    bad_time["time"] = json!("10:00");
    let r = h
        .call(
            "PUT",
            "/api/schedule/final_exam",
            Some(&admin),
            Some(bad_time),
        )
        .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn strict_json() {
    let (h, admin, _, _) = seeded().await;
    let r = h
        .raw_json("POST", "/api/lectures", Some(&admin), "{\"title\": ")
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::BAD_REQUEST, "MALFORMED_JSON")
    );
    let r = h.post("/api/lectures", Some(&admin), json!({})).await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "MISSING_FIELD")
    );
    let r = h
        .post(
            "/api/lectures",
            Some(&admin),
            json!({ "title": "x", "colour": "red" }),
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_FIELD")
    );
    let r = h
        .post("/api/lectures", Some(&admin), json!({ "title": 5 }))
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_FIELD")
    );
    let r = h.get("/api/users?colour=red", Some(&admin)).await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_FIELD")
    );
    let r = h.get("/api/nowhere", None).await;
    assert_eq!((r.status, r.code()), (StatusCode::NOT_FOUND, "NOT_FOUND"));
    assert_eq!(r.body["error"]["http_status"], 404);
    assert_eq!(r.body["ok"], false);
}

#[tokio::test]
async fn gets_do_not_write() {
    let (h, admin, user, lecture) = seeded().await;
    h.upload(&admin, lecture, "notes.txt", "text/plain", b"hello")
        .await;
    let r = h
        .post(
            &format!("/api/tests/lecture_{lecture}/start"),
            Some(&user),
            json!({}),
        )
        .await;
    let instance = r.data()["instance_id"].as_str().unwrap().to_owned();
    h.post("/api/chat", Some(&user), json!({ "body": "hi" }))
        .await;
    let before = h.platform.store().dump().unwrap();
    let files = h
        .get(&format!("/api/lectures/{lecture}/files"), Some(&user))
        .await;
    let file_id = files.data()[0]["id"].as_i64().unwrap();
    let paths = [
        ("/api/health".to_owned(), None),
        ("/api/lectures".to_owned(), None),
        ("/api/me".to_owned(), Some(&user)),
        ("/api/me".to_owned(), Some(&admin)),
        (format!("/api/lectures/{lecture}/files"), Some(&user)),
        (format!("/api/files/{file_id}"), Some(&user)),
        ("/api/registrations".to_owned(), Some(&admin)),
        (
            "/api/users?field=username&search=ele".to_owned(),
            Some(&admin),
        ),
        (
            "/api/questions/gap_fill?search=gap".to_owned(),
            Some(&admin),
        ),
        ("/api/schedule".to_owned(), Some(&user)),
        ("/api/results".to_owned(), Some(&admin)),
        ("/api/results/me".to_owned(), Some(&user)),
        (format!("/api/tests/{instance}"), Some(&user)),
        ("/api/chat?after=0".to_owned(), Some(&user)),
        ("/api/contact".to_owned(), Some(&admin)),
    ];
    assert_eq!(
        paths.len(),
        ROUTES.iter().filter(|r| r.method == "GET").count() + 1
    );
    for (path, token) in &paths {
        let r = h.get(path, token.map(String::as_str)).await;
        assert_eq!(r.status, StatusCode::OK, "{path}: {}", r.body);
    }
    assert_eq!(h.platform.store().dump().unwrap(), before);
}

#[tokio::test]
async fn sessions() {
    let (h, _, user, _) = seeded().await;
    let r = h.get("/api/me", Some(&user)).await;
    assert_eq!(r.data()["role"], "user");
    assert_eq!(r.data()["id"], 42);
    assert_eq!(r.data()["username"], "eleni");

    let r = h.login("eleni", "wrong").await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNAUTHORIZED, "INVALID_CREDENTIALS")
    );
    let r = h.get("/api/me", Some("not-a-token")).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);

    // Sliding expiry: activity keeps the session alive, silence ends it.
    h.clock.advance(Duration::hours(11));
    assert_eq!(h.get("/api/me", Some(&user)).await.status, StatusCode::OK);
    h.clock.advance(Duration::hours(11));
    assert_eq!(h.get("/api/me", Some(&user)).await.status, StatusCode::OK);
    h.clock.advance(Duration::hours(13));
    assert_eq!(
        h.get("/api/me", Some(&user)).await.status,
        StatusCode::UNAUTHORIZED
    );

    let token = h.login("eleni", "pw-eleni").await.data()["token"]
        .as_str()
        .unwrap()
        .to_owned();
    let r = h.post("/api/logout", Some(&token), json!({})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(
        h.get("/api/me", Some(&token)).await.status,
        StatusCode::UNAUTHORIZED
    );
}

#[tokio::test]
async fn profile_edits() {
    let (h, admin, user, _) = seeded().await;
    let r = h
        .call(
            "PATCH",
            "/api/me",
            Some(&user),
            Some(json!({ "email": "new@uni.example", "name": "Hacker", "am": 1 })),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    assert_eq!(r.data()["email"], "new@uni.example");
    assert_eq!(r.data()["name"], "Eleni");
    assert_eq!(r.data()["am"], 42);

    let r = h
        .call(
            "PATCH",
            "/api/me",
            Some(&admin),
            Some(json!({ "email": "a@b.example" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);

    h.student(&admin, 43, "nikos").await;
    let r = h
        .call(
            "PATCH",
            "/api/me",
            Some(&user),
            Some(json!({ "username": "NIKOS" })),
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::CONFLICT, "DUPLICATE_USERNAME")
    );

    let r = h
        .call(
            "PATCH",
            "/api/users",
            Some(&admin),
            Some(json!({ "am": 43, "changes": { "surname": "Papadopoulos" } })),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let r = h
        .get(
            "/api/users?field=surname&search=papa&page=1&page_size=1",
            Some(&admin),
        )
        .await;
    assert_eq!(r.data()["total"], 1);
    assert_eq!(r.data()["items"][0]["am"], 43);

    let r = h
        .call(
            "DELETE",
            "/api/users",
            Some(&admin),
            Some(json!({ "ams": [43, 999] })),
        )
        .await;
    assert_eq!(
        r.data(),
        &json!([{ "id": 43, "status": "deleted" }, { "id": 999, "status": "not_found" }])
    );
}

#[tokio::test]
async fn registration_rules() {
    let h = Harness::new(12);
    let admin = h.admin("root").await;
    assert_eq!(h.register(7, "anna").await.status, StatusCode::CREATED);
    let r = h.register(7, "other").await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::CONFLICT, "DUPLICATE_REGISTER_NUMBER")
    );
    let r = h.register(8, "ANNA").await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::CONFLICT, "DUPLICATE_USERNAME")
    );
    let r = h.register(9, "root").await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::CONFLICT, "DUPLICATE_USERNAME")
    );

    // A captcha is good for one attempt only.
    let c = h.post("/api/captcha", None, json!({})).await;
    let body = h.registration_body(c.data(), 10, "beth");
    assert_eq!(
        h.post("/api/register", None, body.clone()).await.status,
        StatusCode::CREATED
    );
    let mut again = body;
    again["am"] = json!(11);
    again["username"] = json!("carl");
    again["email"] = json!("carl@uni.example");
    let r = h.post("/api/register", None, again).await;
    assert_eq!(r.code(), "CAPTCHA_FAILED");

    let r = h
        .post(
            "/api/registrations/10/decision",
            Some(&admin),
            json!({ "decision": "reject" }),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(
        h.login("beth", "pw-beth").await.status,
        StatusCode::UNAUTHORIZED
    );
    let r = h
        .post(
            "/api/registrations/10/decision",
            Some(&admin),
            json!({ "decision": "approve" }),
        )
        .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn recovery_does_not_reveal_accounts() {
    let (h, _, _, _) = seeded().await;
    let before = h
        .platform
        .store()
        .transaction(|tx| tx.all_outbox())
        .unwrap()
        .len();
    let known = h
        .post("/api/recover", None, json!({ "username": "eleni" }))
        .await;
    let unknown = h
        .post("/api/recover", None, json!({ "username": "nobody" }))
        .await;
    assert_eq!((known.status, &known.body), (unknown.status, &unknown.body));
    let outbox = h
        .platform
        .store()
        .transaction(|tx| tx.all_outbox())
        .unwrap();
    assert_eq!(outbox.len(), before + 1);
    let password = outbox
        .last()
        .unwrap()
        .body
        .lines()
        .nth(4)
        .unwrap()
        .trim()
        .to_owned();
    assert_eq!(
        h.login("eleni", "pw-eleni").await.status,
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(h.login("eleni", &password).await.status, StatusCode::OK);
    // The mailed password leaves storage once delivered.
    let sink = satep::messaging::FileSink::new(h.dir.path().join("mail")).unwrap();
    h.platform.drain_outbox(&sink).unwrap();
    assert!(!h.platform.store().dump().unwrap().contains(&password));
    let delivered = std::fs::read_to_string(sink.messages().unwrap().last().unwrap()).unwrap();
    assert!(delivered.contains(&password));
}

#[tokio::test]
async fn files() {
    let h = Harness::with_settings(
        13,
        satep::Settings {
            max_upload_bytes: 1024,
            ..common::fast_settings()
        },
    );
    let admin = h.admin("root").await;
    let user = h.student(&admin, 5, "files").await;
    let lecture = h.lecture(&admin, "Graphics").await;

    let r = h
        .upload(
            &admin,
            lecture,
            "big.bin",
            "application/octet-stream",
            &[7u8; 1025],
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::PAYLOAD_TOO_LARGE, "FILE_TOO_LARGE")
    );
    let r = h
        .upload(
            &admin,
            lecture,
            "empty.bin",
            "application/octet-stream",
            b"",
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_FILE")
    );
    let r = h.upload(&admin, 999, "x.txt", "text/plain", b"x").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = h.upload(&user, lecture, "x.txt", "text/plain", b"x").await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);

    let a = h
        .upload(&admin, lecture, "a.txt", "text/plain", b"same")
        .await;
    let b = h
        .upload(&admin, lecture, "b.txt", "text/plain", b"same")
        .await;
    assert_eq!(h.platform.objects().len().unwrap(), 1);
    let (a, b) = (
        a.data()["id"].as_i64().unwrap(),
        b.data()["id"].as_i64().unwrap(),
    );
    let r = h.get(&format!("/api/files/{a}"), Some(&user)).await;
    assert_eq!(r.raw, b"same");
    assert_eq!(
        r.headers["content-disposition"],
        "attachment; filename=\"a.txt\""
    );

    let r = h
        .call(
            "DELETE",
            "/api/files",
            Some(&admin),
            Some(json!({ "ids": [a] })),
        )
        .await;
    assert_eq!(r.data(), &json!([{ "id": a, "status": "deleted" }]));
    assert_eq!(h.platform.objects().len().unwrap(), 1);
    h.call(
        "DELETE",
        "/api/files",
        Some(&admin),
        Some(json!({ "ids": [b] })),
    )
    .await;
    assert_eq!(h.platform.objects().len().unwrap(), 0);
    assert_eq!(
        h.get(&format!("/api/files/{a}"), Some(&user)).await.status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn question_authoring() {
    let (h, admin, _, lecture) = seeded().await;
    let r = h
        .post(
            "/api/questions/multiple_choice",
            Some(&admin),
            json!({ "lecture": lecture, "question": "q", "right_answer": "a", "wrong_answers": [] }),
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_QUESTION")
    );
    let r = h
        .post(
            "/api/questions/multiple_choice",
            Some(&admin),
            json!({ "kind": "gap_fill", "lecture": lecture, "question": "q", "answer": "a" }),
        )
        .await;
    assert_eq!(r.code(), "INVALID_QUESTION");
    let r = h
        .post(
            "/api/questions/gap_fill",
            Some(&admin),
            json!({ "lecture": 999, "question": "q", "answer": "a" }),
        )
        .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let r = h
        .get(
            "/api/questions/gap_fill?search=GAP%20FILL%203&page=1&page_size=10",
            Some(&admin),
        )
        .await;
    assert_eq!(r.data()["total"], 1);
    let id = r.data()["items"][0]["id"].as_i64().unwrap();
    let r = h
        .call(
            "PATCH",
            "/api/questions/gap_fill",
            Some(&admin),
            Some(
                json!({ "id": id, "lecture": lecture, "question": "edited ___", "answer": "yes" }),
            ),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    assert_eq!(r.data()["question"], "edited ___");
    let r = h
        .call(
            "PATCH",
            "/api/questions/gap_fill",
            Some(&admin),
            Some(json!({ "lecture": lecture })),
        )
        .await;
    assert_eq!(r.code(), "MISSING_FIELD");

    let r = h
        .get(
            "/api/questions/multiple_choice?page=2&page_size=4",
            Some(&admin),
        )
        .await;
    assert_eq!(
        (
            r.data()["total"].clone(),
            r.data()["items"].as_array().unwrap().len()
        ),
        (json!(6), 2)
    );
    let r = h.get("/api/questions/essay", Some(&admin)).await;
    assert_eq!(r.code(), "INVALID_FIELD");

    let r = h
        .call(
            "DELETE",
            "/api/questions/gap_fill",
            Some(&admin),
            Some(json!({ "ids": [id, 9999] })),
        )
        .await;
    assert_eq!(
        r.data(),
        &json!([{ "id": id, "status": "deleted" }, { "id": 9999, "status": "not_found" }])
    );
}

#[tokio::test]
async fn lecture_deletion_cascades_and_respects_open_tests() {
    let (h, admin, user, lecture) = seeded().await;
    h.upload(&admin, lecture, "a.txt", "text/plain", b"aaa")
        .await;
    let r = h
        .post(
            &format!("/api/tests/lecture_{lecture}/start"),
            Some(&user),
            json!({}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    let r = h
        .call(
            "DELETE",
            "/api/lectures",
            Some(&admin),
            Some(json!({ "ids": [lecture, 77] })),
        )
        .await;
    assert_eq!(
        r.data(),
        &json!([
            { "id": lecture, "status": "refused", "code": "REFERENCED_BY_ACTIVE_EXAM" },
            { "id": 77, "status": "not_found" },
        ])
    );
    h.clock.advance(Duration::hours(1));
    assert_eq!(h.platform.expire_overdue(None).unwrap(), 1);
    let r = h
        .call(
            "DELETE",
            "/api/lectures",
            Some(&admin),
            Some(json!({ "ids": [lecture] })),
        )
        .await;
    assert_eq!(
        r.data(),
        &json!([{ "id": lecture, "status": "deleted", "files_removed": 1, "mc_removed": 6, "gf_removed": 6 }])
    );
    assert_eq!(h.platform.objects().len().unwrap(), 0);
    assert!(h.platform.store().integrity_report().unwrap().is_clean());
    // History survives the content it referred to.
    let r = h.get("/api/results/me", Some(&user)).await;
    assert_eq!(r.data().as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn sittings_over_http() {
    let (h, admin, user, lecture) = seeded().await;
    let key = h.answer_key(&admin).await;
    let r = h
        .post(
            &format!("/api/tests/lecture_{lecture}/start"),
            Some(&user),
            json!({}),
        )
        .await;
    let view = r.data().clone();
    let again = h
        .post(
            &format!("/api/tests/lecture_{lecture}/start"),
            Some(&user),
            json!({}),
        )
        .await;
    assert_eq!(
        (again.status, again.code()),
        (StatusCode::CONFLICT, "ALREADY_OPEN")
    );
    let r = h
        .post("/api/tests/lecture_999/start", Some(&user), json!({}))
        .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = h
        .post("/api/tests/midterm/start", Some(&user), json!({}))
        .await;
    assert_eq!(r.code(), "INVALID_FIELD");

    // Multiple-choice options carry no marker of the right answer.
    for q in view["questions"].as_array().unwrap() {
        assert_eq!(
            q.as_object()
                .unwrap()
                .keys()
                .filter(|k| k.contains("right") || k.contains("answer"))
                .count(),
            0
        );
    }

    let id = view["instance_id"].as_str().unwrap();
    let mut bad = common::sheet(&view, &key, |_| true);
    let first = bad["answers"][0].clone();
    bad["answers"].as_array_mut().unwrap().push(first);
    let r = h
        .post(&format!("/api/tests/{id}/submit"), Some(&user), bad)
        .await;
    assert_eq!(r.code(), "DUPLICATE_ANSWER");
    let r = h
        .post(
            &format!("/api/tests/{id}/submit"),
            Some(&user),
            json!({ "answers": [{ "question_id": 9999, "kind": "gap_fill", "response": "x" }] }),
        )
        .await;
    assert_eq!(r.code(), "UNKNOWN_QUESTION");

    // Missing answers count as wrong.
    let mut partial = common::sheet(&view, &key, |_| true);
    partial["answers"].as_array_mut().unwrap().truncate(4);
    let r = h
        .post(&format!("/api/tests/{id}/submit"), Some(&user), partial)
        .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(
        r.data(),
        &json!({ "correct_count": 4, "total_count": 10, "percent": 40.0 })
    );
}

#[tokio::test]
async fn chat_contact_and_mass_email() {
    let (h, admin, user, _) = seeded().await;
    let r = h.post("/api/chat", None, json!({ "body": "hi" })).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    for (who, body) in [(&user, "first"), (&admin, "second"), (&user, "third")] {
        assert_eq!(
            h.post("/api/chat", Some(who), json!({ "body": body }))
                .await
                .status,
            StatusCode::CREATED
        );
    }
    let r = h
        .post("/api/chat", Some(&user), json!({ "body": "   " }))
        .await;
    assert_eq!(r.code(), "EMPTY_BODY");
    let r = h
        .post(
            "/api/chat",
            Some(&user),
            json!({ "body": "é".repeat(2001) }),
        )
        .await;
    assert_eq!(r.code(), "BODY_TOO_LONG");
    let r = h.get("/api/chat?after=0&limit=2", Some(&user)).await;
    let page: Vec<Value> = r.data().as_array().unwrap().clone();
    assert_eq!(
        page.iter().map(|m| m["body"].clone()).collect::<Vec<_>>(),
        [json!("first"), json!("second")]
    );
    assert_eq!(page[1]["sender_name"], "Ada Admin");
    let cursor = page[1]["id"].as_i64().unwrap();
    let r = h
        .get(&format!("/api/chat?after={cursor}"), Some(&admin))
        .await;
    assert_eq!(r.data().as_array().unwrap().len(), 1);
    assert_eq!(
        h.get("/api/chat?limit=0", Some(&admin)).await.code(),
        "INVALID_FIELD"
    );

    let r = h
        .post(
            "/api/contact",
            Some(&user),
            json!({ "body": "help", "name": "Someone Else", "email": "x@y.example", "date": "1999-01-01", "time": "00:00:00" }),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
    let r = h.get("/api/contact", Some(&admin)).await;
    let msg = &r.data()[0];
    assert_eq!(
        (msg["am"].clone(), msg["email"].clone()),
        (json!(42), json!("eleni@uni.example"))
    );
    assert_eq!(msg["name"], "Eleni Student42");
    assert_eq!(msg["date"], t0().format("%Y-%m-%d").to_string());
    assert_eq!(
        h.post("/api/contact", Some(&admin), json!({ "body": "x" }))
            .await
            .status,
        StatusCode::FORBIDDEN
    );

    let r = h
        .post(
            "/api/mass-email",
            Some(&admin),
            json!({ "subject": "News", "body": "Exams soon" }),
        )
        .await;
    assert_eq!(r.data(), &json!({ "recipients": 1 }));
}

#[tokio::test]
async fn mass_email_needs_recipients() {
    let h = Harness::new(14);
    let admin = h.admin("root").await;
    let r = h
        .post(
            "/api/mass-email",
            Some(&admin),
            json!({ "subject": "s", "body": "b" }),
        )
        .await;
    assert_eq!(
        (r.status, r.code()),
        (StatusCode::CONFLICT, "NO_RECIPIENTS")
    );
}
