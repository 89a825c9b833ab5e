//! HTTP/JSON boundary. Every response body is an envelope:
//! `{"ok": true, "data": ...}` or `{"ok": false, "error": {code, message, http_status}}`.
//! File downloads are the one exception and stream raw bytes.

mod extract;
mod handlers;

use std::fmt::Write as _;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{any, delete, get, patch, post, put, MethodRouter};
use axum::Router;

pub use extract::{json_error, ApiError};

use crate::error::ERROR_CODES;
use crate::platform::Platform;

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
    pub body_limit: usize,
}

/// Who may call an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    /// Any signed-in user or administrator.
    Authenticated,
    User,
    Admin,
}

impl Access {
    pub fn as_str(self) -> &'static str {
        match self {
            Access::Public => "public",
            Access::Authenticated => "authenticated",
            Access::User => "user",
            Access::Admin => "admin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    pub access: Access,
    pub summary: &'static str,
}

const fn r(
    method: &'static str,
    path: &'static str,
    access: Access,
    summary: &'static str,
) -> Route {
    Route {
        method,
        path,
        access,
        summary,
    }
}

use Access::{Admin, Authenticated, Public, User};

/// The bound endpoint set. [`router`] wires exactly these.
pub const ROUTES: &[Route] = &[
    r("GET", "/api/health", Public, "Liveness probe."),
    r(
        "POST",
        "/api/captcha",
        Public,
        "Issue an arithmetic captcha challenge.",
    ),
    r(
        "POST",
        "/api/register",
        Public,
        "Submit a registration for approval.",
    ),
    r(
        "POST",
        "/api/login",
        Public,
        "Exchange username and password for a bearer token.",
    ),
    r(
        "POST",
        "/api/logout",
        Authenticated,
        "Revoke the presented token.",
    ),
    r(
        "POST",
        "/api/recover",
        Public,
        "Mail a new password to the account's address.",
    ),
    r("GET", "/api/me", Authenticated, "The caller's profile."),
    r(
        "PATCH",
        "/api/me",
        User,
        "Change own username, email or password.",
    ),
    r(
        "GET",
        "/api/lectures",
        Public,
        "Lecture titles with the names of their files.",
    ),
    r("POST", "/api/lectures", Admin, "Create a lecture."),
    r(
        "DELETE",
        "/api/lectures",
        Admin,
        "Delete lectures with their files and questions.",
    ),
    r(
        "GET",
        "/api/lectures/{id}/files",
        Authenticated,
        "File records of one lecture.",
    ),
    r(
        "POST",
        "/api/lectures/{id}/files",
        Admin,
        "Upload a file (multipart: meta, file).",
    ),
    r(
        "GET",
        "/api/files/{id}",
        Authenticated,
        "Download the stored bytes of a file.",
    ),
    r("DELETE", "/api/files", Admin, "Delete file records."),
    r("GET", "/api/registrations", Admin, "Pending registrations."),
    r(
        "POST",
        "/api/registrations/{am}/decision",
        Admin,
        "Approve or reject a registration.",
    ),
    r("GET", "/api/users", Admin, "Search users with paging."),
    r(
        "PATCH",
        "/api/users",
        Admin,
        "Change a user's register number, name or surname.",
    ),
    r(
        "DELETE",
        "/api/users",
        Admin,
        "Delete users with everything that references them.",
    ),
    r(
        "GET",
        "/api/questions/{kind}",
        Admin,
        "Questions ordered by lecture, searchable, paged.",
    ),
    r("POST", "/api/questions/{kind}", Admin, "Create a question."),
    r(
        "PATCH",
        "/api/questions/{kind}",
        Admin,
        "Replace a question's content.",
    ),
    r(
        "DELETE",
        "/api/questions/{kind}",
        Admin,
        "Delete questions.",
    ),
    r("GET", "/api/schedule", Authenticated, "All schedules."),
    r(
        "PUT",
        "/api/schedule/{kind}",
        Admin,
        "Set the schedule for a test kind and notify users.",
    ),
    r(
        "POST",
        "/api/mass-email",
        Admin,
        "Queue one email per registered user.",
    ),
    r(
        "GET",
        "/api/results",
        Admin,
        "Completed tests, filterable by am and kind, paged.",
    ),
    r(
        "GET",
        "/api/results/me",
        User,
        "The caller's completed tests.",
    ),
    r(
        "POST",
        "/api/tests/{key}/start",
        User,
        "Open a sitting; key is final_exam or lecture_<id>.",
    ),
    r(
        "GET",
        "/api/tests/{key}",
        User,
        "Re-fetch an open sitting by instance id.",
    ),
    r(
        "POST",
        "/api/tests/{key}/submit",
        User,
        "Submit answers for grading; key is the instance id.",
    ),
    r(
        "GET",
        "/api/chat",
        Authenticated,
        "Chat messages after a cursor.",
    ),
    r("POST", "/api/chat", Authenticated, "Post a chat message."),
    r(
        "POST",
        "/api/contact",
        User,
        "Send a message to the administrators.",
    ),
    r(
        "GET",
        "/api/contact",
        Admin,
        "Contact messages, newest first.",
    ),
];

fn handler_for(route: &Route) -> MethodRouter<AppState> {
    use handlers as h;
    match (route.method, route.path) {
        ("GET", "/api/health") => get(h::health),
        ("POST", "/api/captcha") => post(h::captcha),
        ("POST", "/api/register") => post(h::register),
        ("POST", "/api/login") => post(h::login),
        ("POST", "/api/logout") => post(h::logout),
        ("POST", "/api/recover") => post(h::recover),
        ("GET", "/api/me") => get(h::me),
        ("PATCH", "/api/me") => patch(h::edit_me),
        ("GET", "/api/lectures") => get(h::lectures),
        ("POST", "/api/lectures") => post(h::create_lecture),
        ("DELETE", "/api/lectures") => delete(h::delete_lectures),
        ("GET", "/api/lectures/{id}/files") => get(h::list_files),
        ("POST", "/api/lectures/{id}/files") => post(h::upload_file),
        ("GET", "/api/files/{id}") => get(h::download_file),
        ("DELETE", "/api/files") => delete(h::delete_files),
        ("GET", "/api/registrations") => get(h::registrations),
        ("POST", "/api/registrations/{am}/decision") => post(h::decide),
        ("GET", "/api/users") => get(h::users),
        ("PATCH", "/api/users") => patch(h::edit_user),
        ("DELETE", "/api/users") => delete(h::delete_users),
        ("GET", "/api/questions/{kind}") => get(h::list_questions),
        ("POST", "/api/questions/{kind}") => post(h::create_question),
        ("PATCH", "/api/questions/{kind}") => patch(h::edit_question),
        ("DELETE", "/api/questions/{kind}") => delete(h::delete_questions),
        ("GET", "/api/schedule") => get(h::schedules),
        ("PUT", "/api/schedule/{kind}") => put(h::set_schedule),
        ("POST", "/api/mass-email") => post(h::mass_email),
        ("GET", "/api/results") => get(h::admin_results),
        ("GET", "/api/results/me") => get(h::my_results),
        ("POST", "/api/tests/{key}/start") => post(h::start_test),
        ("GET", "/api/tests/{key}") => get(h::get_test),
        ("POST", "/api/tests/{key}/submit") => post(h::submit_test),
        ("GET", "/api/chat") => get(h::fetch_chat),
        ("POST", "/api/chat") => post(h::post_chat),
        ("POST", "/api/contact") => post(h::send_contact),
        ("GET", "/api/contact") => get(h::list_contacts),
        (m, p) => unreachable!("route {m} {p} has no handler"),
    }
}

/// Multipart overhead allowed on top of the largest accepted file.
const BODY_SLACK: usize = 64 * 1024;

pub fn router(platform: Arc<Platform>) -> Router {
    let body_limit = platform.settings().max_upload_bytes as usize + BODY_SLACK;
    let state = AppState {
        platform,
        body_limit,
    };
    let mut app = Router::new();
    for route in ROUTES {
        app = app.route(route.path, handler_for(route));
    }
    // Unknown /api paths keep the envelope even when a static fallback is mounted.
    app.route("/api/{*rest}", any(handlers::not_found))
        .fallback(handlers::not_found)
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// The endpoint reference shipped as `docs/api.md`.
pub fn render_reference() -> String {
    let mut out = String::new();
    out.push_str("# HTTP API reference\n\n");
    out.push_str("Generated from the route table. Bodies are JSON unless noted; field names are snake_case, ");
    out.push_str("timestamps ISO-8601 UTC, dates `YYYY-MM-DD`, times `HH:MM:SS`. Unknown fields are rejected.\n\n");
    out.push_str("Authenticate with `Authorization: Bearer <token>` from `POST /api/login`.\n\n");
    out.push_str("| Method | Path | Access | Summary |\n|---|---|---|---|\n");
    for route in ROUTES {
        let _ = writeln!(
            out,
            "| {} | `{}` | {} | {} |",
            route.method,
            route.path,
            route.access.as_str(),
            route.summary
        );
    }
    out.push_str(
        "\nA guest calling a non-public endpoint gets 401; a caller of the wrong role gets 403.\n",
    );
    out.push_str("\n## Error codes\n\n| Code | HTTP status |\n|---|---|\n");
    for (code, status) in error_status_table() {
        let _ = writeln!(out, "| `{code}` | {status} |");
    }
    out
}

/// Every error code paired with its status, in declaration order.
pub fn error_status_table() -> Vec<(&'static str, u16)> {
    use crate::error::Error as E;
    let samples = [
        E::Unauthenticated,
        E::InvalidCredentials,
        E::NotAuthorized,
        E::NotFound(String::new()),
        E::DuplicateUsername,
        E::DuplicateEmail,
        E::DuplicateRegisterNumber,
        E::DuplicateTitle,
        E::DuplicateKey(String::new()),
        E::CaptchaFailed,
        E::invalid("", ""),
        E::InvalidQuestion(String::new()),
        E::InvalidSchedule(String::new()),
        E::PoolTooSmall {
            side: String::new(),
            needed: 0,
            available: 0,
        },
        E::UnknownQuestion(String::new()),
        E::DuplicateAnswer(String::new()),
        E::OutsideWindow,
        E::AlreadyOpen,
        E::NotOwner,
        E::Expired { percent: 0.0 },
        E::AlreadySubmitted,
        E::GroupUnavailable,
        E::ReferencedByActiveExam,
        E::FileTooLarge { limit: 0 },
        E::EmptyFile,
        E::EmptyBody,
        E::BodyTooLong { max: 0 },
        E::NoRecipients,
        E::DrainInProgress,
        E::MalformedJson(String::new()),
        E::UnknownField(String::new()),
        E::MissingField(String::new()),
        E::MigrationConflict { version: 0 },
        E::Storage(String::new()),
        E::Config(String::new()),
        E::Internal(String::new()),
    ];
    let table: Vec<_> = samples
        .iter()
        .map(|e| (e.code(), e.http_status()))
        .collect();
    debug_assert_eq!(
        table.iter().map(|(c, _)| *c).collect::<Vec<_>>(),
        ERROR_CODES
    );
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_doc_is_current() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/api.md");
        let on_disk = std::fs::read_to_string(path).unwrap_or_default();
        if on_disk != render_reference() {
            if std::env::var_os("SATEP_BLESS").is_some() {
                std::fs::write(path, render_reference()).unwrap();
            } else {
                panic!("docs/api.md is stale; rerun with SATEP_BLESS=1");
            }
        }
    }

    #[test]
    fn every_code_has_a_status() {
        assert_eq!(error_status_table().len(), ERROR_CODES.len());
    }

    #[test]
    fn routes_are_unique() {
        let mut seen = std::collections::HashSet::new();
        for route in ROUTES {
            assert!(seen.insert((route.method, route.path)), "{route:?}");
        }
    }
}
