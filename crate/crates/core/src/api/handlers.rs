use axum::extract::multipart::{Multipart, MultipartError, MultipartRejection};
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Deserialize;
use serde_json::{json, Value};

use super::extract::{
    created, json_error, ok, path_param, AdminCaller, ApiError, ApiJson, ApiQuery, ApiResult,
    Caller, UserCaller,
};
use super::AppState;
use crate::accounts::{AdminUserChanges, Decision, RegistrationForm, SelfChanges};
use crate::content::{FileView, UploadedFile};
use crate::domain::{
    LectureId, QuestionDraft, QuestionId, QuestionKind, RegisterNumber, SubmittedAnswer, TestKind,
};
use crate::error::Error;
use crate::examinations::ScheduleForm;
use crate::platform::Platform;
use crate::storage::{ResultFilter, SearchField};

const DEFAULT_PAGE_SIZE: usize = 20;

/// Runs a blocking platform call off the async workers.
async fn run<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Platform) -> crate::Result<T> + Send + 'static,
{
    let platform = state.platform.clone();
    tokio::task::spawn_blocking(move || f(&platform))
        .await
        .map_err(|e| ApiError(Error::Internal(e.to_string())))?
        .map_err(ApiError)
}

pub async fn not_found() -> ApiError {
    ApiError(Error::not_found("endpoint"))
}

pub async fn health() -> Response {
    ok(json!({ "status": "up" }))
}

pub async fn captcha(State(s): State<AppState>) -> ApiResult {
    Ok(created(run(&s, |p| p.issue_captcha()).await?))
}

pub async fn register(
    State(s): State<AppState>,
    ApiJson(form): ApiJson<RegistrationForm>,
) -> ApiResult {
    let am = run(&s, move |p| p.submit_registration(&form)).await?;
    Ok(created(json!({ "am": am, "status": "pending" })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginBody {
    username: String,
    password: String,
}

pub async fn login(State(s): State<AppState>, ApiJson(b): ApiJson<LoginBody>) -> ApiResult {
    Ok(ok(
        run(&s, move |p| p.login(&b.username, &b.password)).await?
    ))
}

pub async fn logout(State(s): State<AppState>, Caller(_, token): Caller) -> ApiResult {
    run(&s, move |p| p.logout(&token)).await?;
    Ok(ok(json!({ "logged_out": true })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverBody {
    username: String,
}

pub async fn recover(State(s): State<AppState>, ApiJson(b): ApiJson<RecoverBody>) -> ApiResult {
    run(&s, move |p| p.recover_password(&b.username)).await?;
    Ok(ok(json!({ "accepted": true })))
}

pub async fn me(State(s): State<AppState>, Caller(actor, _): Caller) -> ApiResult {
    Ok(ok(run(&s, move |p| p.me(actor)).await?))
}

pub async fn edit_me(
    State(s): State<AppState>,
    UserCaller(actor): UserCaller,
    ApiJson(c): ApiJson<SelfChanges>,
) -> ApiResult {
    Ok(ok(run(&s, move |p| p.edit_own_profile(actor, &c)).await?))
}

pub async fn lectures(State(s): State<AppState>) -> ApiResult {
    Ok(ok(run(&s, |p| p.lecture_catalogue()).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TitleBody {
    title: String,
}

pub async fn create_lecture(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiJson(b): ApiJson<TitleBody>,
) -> ApiResult {
    Ok(created(
        run(&s, move |p| p.create_lecture(actor, &b.title)).await?,
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsBody<T> {
    ids: Vec<T>,
}

pub async fn delete_lectures(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiJson(b): ApiJson<IdsBody<LectureId>>,
) -> ApiResult {
    Ok(ok(run(&s, move |p| p.delete_lectures(actor, &b.ids)).await?))
}

pub async fn list_files(
    State(s): State<AppState>,
    Caller(actor, _): Caller,
    Path(raw): Path<String>,
) -> ApiResult {
    let lecture: LectureId = lecture_param(&raw)?;
    Ok(ok(run(&s, move |p| p.list_files(actor, lecture)).await?))
}

fn lecture_param(raw: &str) -> ApiResult<LectureId> {
    let n: i64 = path_param("lecture id", raw)?;
    LectureId::new(n).map_err(|e| ApiError(e.into()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMeta {
    logical_name: String,
    #[serde(default)]
    media_type: Option<String>,
}

fn multipart_error(e: MultipartError, limit: usize) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError(Error::FileTooLarge {
            limit: limit as u64,
        })
    } else {
        ApiError(Error::invalid("multipart", e.body_text()))
    }
}

/// Parts: `meta` (JSON `{logical_name, media_type}`) and `file` (the bytes).
/// Without `meta` the part's own file name and content type are used.
pub async fn upload_file(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    form: Result<Multipart, MultipartRejection>,
) -> ApiResult {
    let lecture = lecture_param(&raw)?;
    let mut form = form.map_err(|e| ApiError(Error::invalid("body", e.body_text())))?;
    let mut meta: Option<FileMeta> = None;
    let mut file: Option<(Option<String>, Option<String>, Vec<u8>)> = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| multipart_error(e, s.body_limit))?
    {
        match field.name() {
            Some("meta") => {
                let text = field
                    .bytes()
                    .await
                    .map_err(|e| multipart_error(e, s.body_limit))?;
                meta = Some(serde_json::from_slice(&text).map_err(|e| ApiError(json_error(&e)))?);
            }
            Some("file") => {
                let name = field.file_name().map(str::to_owned);
                let ctype = field.content_type().map(str::to_owned);
                let bytes = field
                    .bytes()
                    .await
                    .map_err(|e| multipart_error(e, s.body_limit))?;
                file = Some((name, ctype, bytes.to_vec()));
            }
            Some(other) => {
                return Err(ApiError(Error::UnknownField(format!(
                    "multipart part {other:?}"
                ))))
            }
            None => return Err(ApiError(Error::invalid("multipart", "unnamed part"))),
        }
    }
    let (part_name, part_type, bytes) =
        file.ok_or_else(|| ApiError(Error::MissingField("file".into())))?;
    let logical_name = meta
        .as_ref()
        .map(|m| m.logical_name.clone())
        .or(part_name)
        .ok_or_else(|| ApiError(Error::MissingField("meta.logical_name".into())))?;
    let media_type = meta
        .and_then(|m| m.media_type)
        .or(part_type)
        .unwrap_or_else(|| "application/octet-stream".into());
    let upload = UploadedFile {
        logical_name,
        media_type,
        bytes,
    };
    let record = run(&s, move |p| p.upload_file(actor, lecture, &upload)).await?;
    Ok(created(FileView::from(&record)))
}

pub async fn download_file(
    State(s): State<AppState>,
    Caller(actor, _): Caller,
    Path(raw): Path<String>,
) -> ApiResult {
    let id: i64 = path_param("file id", &raw)?;
    let (record, bytes) = run(&s, move |p| p.download_file(actor, id)).await?;
    let ctype = HeaderValue::from_str(&record.media_type)
        .unwrap_or(HeaderValue::from_static("application/octet-stream"));
    let safe_name: String = record
        .name
        .chars()
        .map(|c| {
            if c.is_ascii_graphic() && c != '"' && c != '\\' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let disposition = HeaderValue::from_str(&format!("attachment; filename=\"{safe_name}\""))
        .unwrap_or(HeaderValue::from_static("attachment"));
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, ctype),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

pub async fn delete_files(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiJson(b): ApiJson<IdsBody<i64>>,
) -> ApiResult {
    Ok(ok(run(&s, move |p| p.delete_files(actor, &b.ids)).await?))
}

pub async fn registrations(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
) -> ApiResult {
    Ok(ok(run(&s, move |p| p.list_registrations(actor)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBody {
    decision: Decision,
}

pub async fn decide(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    ApiJson(b): ApiJson<DecisionBody>,
) -> ApiResult {
    let n: i64 = path_param("am", &raw)?;
    let am = RegisterNumber::new(n).map_err(|e| ApiError(e.into()))?;
    Ok(ok(run(&s, move |p| {
        p.decide_registration(actor, am, b.decision)
    })
    .await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersQuery {
    field: Option<String>,
    search: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

pub async fn users(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiQuery(q): ApiQuery<UsersQuery>,
) -> ApiResult {
    let field: SearchField = q.field.as_deref().unwrap_or("surname").parse()?;
    if field == SearchField::Question {
        return Err(ApiError(Error::invalid(
            "field",
            "\"question\" applies to question searches",
        )));
    }
    let needle = q.search.unwrap_or_default();
    let (page, size) = (
        q.page.unwrap_or(1),
        q.page_size.unwrap_or(DEFAULT_PAGE_SIZE),
    );
    Ok(ok(run(&s, move |p| {
        p.search_users(actor, field, &needle, page, size)
    })
    .await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserPatch {
    am: RegisterNumber,
    changes: AdminUserChanges,
}

pub async fn edit_user(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiJson(b): ApiJson<UserPatch>,
) -> ApiResult {
    Ok(ok(run(&s, move |p| {
        p.admin_edit_user(actor, b.am, &b.changes)
    })
    .await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersDeleteBody {
    ams: Vec<RegisterNumber>,
}

pub async fn delete_users(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiJson(b): ApiJson<UsersDeleteBody>,
) -> ApiResult {
    Ok(ok(
        run(&s, move |p| p.admin_delete_users(actor, &b.ams)).await?
    ))
}

fn kind_param(raw: &str) -> ApiResult<QuestionKind> {
    raw.parse()
        .map_err(|e: String| ApiError(Error::invalid("kind", e)))
}

/// Reads a question draft whose `kind` defaults to the path kind and must
/// agree with it when given.
fn draft_from(mut body: Value, kind: QuestionKind) -> ApiResult<QuestionDraft> {
    let obj = body
        .as_object_mut()
        .ok_or_else(|| ApiError(Error::invalid("body", "expected a JSON object")))?;
    match obj.get("kind") {
        None => {
            obj.insert("kind".into(), Value::String(kind.as_str().into()));
        }
        Some(Value::String(k)) if k == kind.as_str() => {}
        Some(other) => {
            return Err(ApiError(Error::InvalidQuestion(format!(
                "kind {other} does not match the path kind {kind}"
            ))));
        }
    }
    serde_json::from_value(body).map_err(|e| ApiError(json_error(&e)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionsQuery {
    search: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

pub async fn list_questions(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    ApiQuery(q): ApiQuery<QuestionsQuery>,
) -> ApiResult {
    let kind = kind_param(&raw)?;
    let (page, size) = (
        q.page.unwrap_or(1),
        q.page_size.unwrap_or(DEFAULT_PAGE_SIZE),
    );
    Ok(ok(run(&s, move |p| {
        p.list_questions(actor, kind, q.search.as_deref(), page, size)
    })
    .await?))
}

pub async fn create_question(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    ApiJson(body): ApiJson<Value>,
) -> ApiResult {
    let kind = kind_param(&raw)?;
    let draft = draft_from(body, kind)?;
    Ok(created(
        run(&s, move |p| p.insert_question(actor, &draft)).await?,
    ))
}

pub async fn edit_question(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    ApiJson(mut body): ApiJson<Value>,
) -> ApiResult {
    let kind = kind_param(&raw)?;
    let id = body
        .as_object_mut()
        .and_then(|o| o.remove("id"))
        .ok_or_else(|| ApiError(Error::MissingField("id".into())))?;
    let id: QuestionId =
        serde_json::from_value(id).map_err(|e| ApiError(Error::invalid("id", e.to_string())))?;
    let draft = draft_from(body, kind)?;
    Ok(ok(run(&s, move |p| {
        p.edit_question(actor, kind, id, &draft)
    })
    .await?))
}

pub async fn delete_questions(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    ApiJson(b): ApiJson<IdsBody<QuestionId>>,
) -> ApiResult {
    let kind = kind_param(&raw)?;
    Ok(ok(run(&s, move |p| {
        p.delete_questions(actor, kind, &b.ids)
    })
    .await?))
}

fn test_kind_param(raw: &str) -> ApiResult<TestKind> {
    raw.parse()
        .map_err(|e: String| ApiError(Error::invalid("kind", e)))
}

pub async fn schedules(State(s): State<AppState>, Caller(_, _): Caller) -> ApiResult {
    Ok(ok(run(&s, |p| p.schedules()).await?))
}

pub async fn set_schedule(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    Path(raw): Path<String>,
    ApiJson(form): ApiJson<ScheduleForm>,
) -> ApiResult {
    let kind = test_kind_param(&raw)?;
    Ok(ok(
        run(&s, move |p| p.set_schedule(actor, kind, &form)).await?
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassEmailBody {
    subject: String,
    body: String,
}

pub async fn mass_email(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiJson(b): ApiJson<MassEmailBody>,
) -> ApiResult {
    Ok(ok(run(&s, move |p| {
        p.mass_email(actor, &b.subject, &b.body)
    })
    .await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsQuery {
    am: Option<i64>,
    kind: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

pub async fn admin_results(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
    ApiQuery(q): ApiQuery<ResultsQuery>,
) -> ApiResult {
    let filter = ResultFilter {
        am: q
            .am
            .map(RegisterNumber::new)
            .transpose()
            .map_err(|e| ApiError(e.into()))?,
        kind: q.kind.as_deref().map(test_kind_param).transpose()?,
    };
    let (page, size) = (
        q.page.unwrap_or(1),
        q.page_size.unwrap_or(DEFAULT_PAGE_SIZE),
    );
    Ok(ok(run(&s, move |p| {
        p.admin_results(actor, &filter, page, size)
    })
    .await?))
}

pub async fn my_results(State(s): State<AppState>, UserCaller(actor): UserCaller) -> ApiResult {
    Ok(ok(run(&s, move |p| p.my_results(actor)).await?))
}

pub async fn start_test(
    State(s): State<AppState>,
    UserCaller(actor): UserCaller,
    Path(raw): Path<String>,
) -> ApiResult {
    let kind = test_kind_param(&raw)?;
    Ok(created(run(&s, move |p| p.start_test(actor, kind)).await?))
}

pub async fn get_test(
    State(s): State<AppState>,
    UserCaller(actor): UserCaller,
    Path(id): Path<String>,
) -> ApiResult {
    Ok(ok(run(&s, move |p| p.get_test(actor, &id)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitBody {
    answers: Vec<SubmittedAnswer>,
}

pub async fn submit_test(
    State(s): State<AppState>,
    UserCaller(actor): UserCaller,
    Path(id): Path<String>,
    ApiJson(b): ApiJson<SubmitBody>,
) -> ApiResult {
    Ok(ok(
        run(&s, move |p| p.submit_test(actor, &id, &b.answers)).await?
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatQuery {
    after: Option<i64>,
    limit: Option<usize>,
}

pub async fn fetch_chat(
    State(s): State<AppState>,
    Caller(actor, _): Caller,
    ApiQuery(q): ApiQuery<ChatQuery>,
) -> ApiResult {
    let (after, limit) = (q.after.unwrap_or(0), q.limit.unwrap_or(100));
    Ok(ok(
        run(&s, move |p| p.fetch_chat(actor, after, limit)).await?
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatBody {
    body: String,
}

pub async fn post_chat(
    State(s): State<AppState>,
    Caller(actor, _): Caller,
    ApiJson(b): ApiJson<ChatBody>,
) -> ApiResult {
    Ok(created(
        run(&s, move |p| p.post_chat(actor, &b.body)).await?,
    ))
}

/// Identity fields are accepted for form compatibility and then ignored;
/// the server fills them from the account and the clock.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactBody {
    body: String,
    #[serde(default, rename = "am")]
    _am: Option<Value>,
    #[serde(default, rename = "name")]
    _name: Option<Value>,
    #[serde(default, rename = "email")]
    _email: Option<Value>,
    #[serde(default, rename = "date")]
    _date: Option<Value>,
    #[serde(default, rename = "time")]
    _time: Option<Value>,
}

pub async fn send_contact(
    State(s): State<AppState>,
    UserCaller(actor): UserCaller,
    ApiJson(b): ApiJson<ContactBody>,
) -> ApiResult {
    Ok(created(
        run(&s, move |p| p.send_contact(actor, &b.body)).await?,
    ))
}

pub async fn list_contacts(
    State(s): State<AppState>,
    AdminCaller(actor): AdminCaller,
) -> ApiResult {
    Ok(ok(run(&s, move |p| p.list_contacts(actor)).await?))
}
