use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Request};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde_json::json;

use super::AppState;
use crate::domain::Principal;
use crate::error::Error;

/// An [`Error`] rendered as the `{ok: false, error}` envelope.
#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.0.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        let body = json!({
            "ok": false,
            "error": {
                "code": self.0.code(),
                "message": self.0.to_string(),
                "http_status": status.as_u16(),
            }
        });
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T = Response> = std::result::Result<T, ApiError>;

pub fn ok<T: serde::Serialize>(data: T) -> Response {
    with_status(StatusCode::OK, data)
}

pub fn created<T: serde::Serialize>(data: T) -> Response {
    with_status(StatusCode::CREATED, data)
}

fn with_status<T: serde::Serialize>(status: StatusCode, data: T) -> Response {
    (status, Json(json!({ "ok": true, "data": data }))).into_response()
}

fn bearer(parts: &Parts) -> Option<String> {
    let value = parts.headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme
        .eq_ignore_ascii_case("bearer")
        .then(|| token.trim().to_owned())
}

async fn resolve(parts: &Parts, state: &AppState) -> Result<(Principal, String), ApiError> {
    let token = bearer(parts).ok_or(ApiError(Error::Unauthenticated))?;
    let platform = state.platform.clone();
    let t = token.clone();
    let principal = tokio::task::spawn_blocking(move || platform.authenticate(&t))
        .await
        .map_err(|e| ApiError(Error::Internal(e.to_string())))??;
    Ok((principal, token))
}

/// Any signed-in caller. Carries the raw token for logout.
pub struct Caller(pub Principal, pub String);

/// A signed-in student.
pub struct UserCaller(pub Principal);

/// A signed-in administrator.
pub struct AdminCaller(pub Principal);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;
    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        let (p, token) = resolve(parts, state).await?;
        Ok(Caller(p, token))
    }
}

impl FromRequestParts<AppState> for UserCaller {
    type Rejection = ApiError;
    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        match resolve(parts, state).await?.0 {
            p @ Principal::User(_) => Ok(UserCaller(p)),
            Principal::Admin(_) => Err(ApiError(Error::NotAuthorized)),
        }
    }
}

impl FromRequestParts<AppState> for AdminCaller {
    type Rejection = ApiError;
    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        match resolve(parts, state).await?.0 {
            p @ Principal::Admin(_) => Ok(AdminCaller(p)),
            Principal::User(_) => Err(ApiError(Error::NotAuthorized)),
        }
    }
}

/// Maps a serde_json failure onto the API codes.
pub fn json_error(e: &serde_json::Error) -> Error {
    use serde_json::error::Category;
    let msg = e.to_string();
    match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => Error::MalformedJson(msg),
        Category::Data if msg.starts_with("unknown field") => Error::UnknownField(msg),
        Category::Data if msg.starts_with("missing field") => Error::MissingField(msg),
        Category::Data => Error::invalid("body", msg),
    }
}

/// Strict JSON body: unknown fields are rejected.
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned> FromRequest<AppState> for ApiJson<T> {
    type Rejection = ApiError;
    async fn from_request(req: Request, state: &AppState) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ApiError(Error::FileTooLarge {
                    limit: state.body_limit as u64,
                })
            } else {
                ApiError(Error::MalformedJson(e.body_text()))
            }
        })?;
        serde_json::from_slice(&bytes)
            .map(ApiJson)
            .map_err(|e| ApiError(json_error(&e)))
    }
}

/// Query string with errors reported as `INVALID_FIELD`.
pub struct ApiQuery<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;
    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::try_from_uri(&parts.uri)
            .map(|q| ApiQuery(q.0))
            .map_err(|e| ApiError(Error::invalid("query", e.body_text())))
    }
}

/// Parses one path segment with a field name for the error.
pub fn path_param<T: std::str::FromStr>(field: &str, raw: &str) -> Result<T, ApiError> {
    raw.parse().map_err(|_| {
        ApiError(Error::invalid(
            field,
            format!("{raw:?} is not a valid {field}"),
        ))
    })
}
