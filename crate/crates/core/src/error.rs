use thiserror::Error;

use crate::domain::DomainError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("authentication required")]
    Unauthenticated,
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("not authorized for this operation")]
    NotAuthorized,
    #[error("{0} not found")]
    NotFound(String),
    #[error("username already in use")]
    DuplicateUsername,
    #[error("email already in use")]
    DuplicateEmail,
    #[error("register number already in use")]
    DuplicateRegisterNumber,
    #[error("a lecture with this title already exists")]
    DuplicateTitle,
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("captcha answer rejected")]
    CaptchaFailed,
    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("not enough {side} questions: need {needed}, have {available}")]
    PoolTooSmall {
        side: String,
        needed: usize,
        available: usize,
    },
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("question {0} answered more than once")]
    DuplicateAnswer(String),
    #[error("outside the scheduled window")]
    OutsideWindow,
    #[error("an open test of this kind already exists")]
    AlreadyOpen,
    #[error("test instance belongs to another user")]
    NotOwner,
    #[error("submission after deadline; sitting recorded at {percent}%")]
    Expired { percent: f64 },
    #[error("test already submitted")]
    AlreadySubmitted,
    #[error("test group references deleted questions and cannot be presented")]
    GroupUnavailable,
    #[error("lecture is referenced by an open test")]
    ReferencedByActiveExam,
    #[error("file exceeds the upload limit of {limit} bytes")]
    FileTooLarge { limit: u64 },
    #[error("file is empty")]
    EmptyFile,
    #[error("message body is empty")]
    EmptyBody,
    #[error("message body exceeds {max} characters")]
    BodyTooLong { max: usize },
    #[error("no registered users to email")]
    NoRecipients,
    #[error("another outbox drain is running")]
    DrainInProgress,
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("migration {version} was modified after it was applied")]
    MigrationConflict { version: i64 },
    #[error("storage unavailable: {0}")]
    Storage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn not_found(what: impl Into<String>) -> Self {
        Error::NotFound(what.into())
    }

    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable code. Released codes never change.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Unauthenticated => "UNAUTHENTICATED",
            Error::InvalidCredentials => "INVALID_CREDENTIALS",
            Error::NotAuthorized => "NOT_AUTHORIZED",
            Error::NotFound(_) => "NOT_FOUND",
            Error::DuplicateUsername => "DUPLICATE_USERNAME",
            Error::DuplicateEmail => "DUPLICATE_EMAIL",
            Error::DuplicateRegisterNumber => "DUPLICATE_REGISTER_NUMBER",
            Error::DuplicateTitle => "DUPLICATE_TITLE",
            Error::DuplicateKey(_) => "DUPLICATE_KEY",
            Error::CaptchaFailed => "CAPTCHA_FAILED",
            Error::InvalidField { .. } => "INVALID_FIELD",
            Error::InvalidQuestion(_) => "INVALID_QUESTION",
            Error::InvalidSchedule(_) => "INVALID_SCHEDULE",
            Error::PoolTooSmall { .. } => "POOL_TOO_SMALL",
            Error::UnknownQuestion(_) => "UNKNOWN_QUESTION",
            Error::DuplicateAnswer(_) => "DUPLICATE_ANSWER",
            Error::OutsideWindow => "OUTSIDE_WINDOW",
            Error::AlreadyOpen => "ALREADY_OPEN",
            Error::NotOwner => "NOT_OWNER",
            Error::Expired { .. } => "TEST_EXPIRED",
            Error::AlreadySubmitted => "ALREADY_SUBMITTED",
            Error::GroupUnavailable => "GROUP_UNAVAILABLE",
            Error::ReferencedByActiveExam => "REFERENCED_BY_ACTIVE_EXAM",
            Error::FileTooLarge { .. } => "FILE_TOO_LARGE",
            Error::EmptyFile => "EMPTY_FILE",
            Error::EmptyBody => "EMPTY_BODY",
            Error::BodyTooLong { .. } => "BODY_TOO_LONG",
            Error::NoRecipients => "NO_RECIPIENTS",
            Error::DrainInProgress => "DRAIN_IN_PROGRESS",
            Error::MalformedJson(_) => "MALFORMED_JSON",
            Error::UnknownField(_) => "UNKNOWN_FIELD",
            Error::MissingField(_) => "MISSING_FIELD",
            Error::MigrationConflict { .. } => "MIGRATION_CONFLICT",
            Error::Storage(_) => "STORAGE_UNAVAILABLE",
            Error::Config(_) => "CONFIG_ERROR",
            Error::Io(_) | Error::Internal(_) => "INTERNAL",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            Error::Unauthenticated | Error::InvalidCredentials => 401,
            Error::NotAuthorized | Error::NotOwner => 403,
            Error::NotFound(_) => 404,
            Error::DuplicateUsername
            | Error::DuplicateEmail
            | Error::DuplicateRegisterNumber
            | Error::DuplicateTitle
            | Error::DuplicateKey(_)
            | Error::PoolTooSmall { .. }
            | Error::OutsideWindow
            | Error::AlreadyOpen
            | Error::Expired { .. }
            | Error::AlreadySubmitted
            | Error::GroupUnavailable
            | Error::ReferencedByActiveExam
            | Error::NoRecipients
            | Error::DrainInProgress => 409,
            Error::FileTooLarge { .. } => 413,
            Error::MalformedJson(_) => 400,
            Error::CaptchaFailed
            | Error::InvalidField { .. }
            | Error::InvalidQuestion(_)
            | Error::InvalidSchedule(_)
            | Error::UnknownQuestion(_)
            | Error::DuplicateAnswer(_)
            | Error::EmptyFile
            | Error::EmptyBody
            | Error::BodyTooLong { .. }
            | Error::UnknownField(_)
            | Error::MissingField(_) => 422,
            Error::Storage(_) => 503,
            Error::MigrationConflict { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::Internal(_) => 500,
        }
    }
}

/// Every code [`Error::code`] can produce, in declaration order.
pub const ERROR_CODES: &[&str] = &[
    "UNAUTHENTICATED",
    "INVALID_CREDENTIALS",
    "NOT_AUTHORIZED",
    "NOT_FOUND",
    "DUPLICATE_USERNAME",
    "DUPLICATE_EMAIL",
    "DUPLICATE_REGISTER_NUMBER",
    "DUPLICATE_TITLE",
    "DUPLICATE_KEY",
    "CAPTCHA_FAILED",
    "INVALID_FIELD",
    "INVALID_QUESTION",
    "INVALID_SCHEDULE",
    "POOL_TOO_SMALL",
    "UNKNOWN_QUESTION",
    "DUPLICATE_ANSWER",
    "OUTSIDE_WINDOW",
    "ALREADY_OPEN",
    "NOT_OWNER",
    "TEST_EXPIRED",
    "ALREADY_SUBMITTED",
    "GROUP_UNAVAILABLE",
    "REFERENCED_BY_ACTIVE_EXAM",
    "FILE_TOO_LARGE",
    "EMPTY_FILE",
    "EMPTY_BODY",
    "BODY_TOO_LONG",
    "NO_RECIPIENTS",
    "DRAIN_IN_PROGRESS",
    "MALFORMED_JSON",
    "UNKNOWN_FIELD",
    "MISSING_FIELD",
    "MIGRATION_CONFLICT",
    "STORAGE_UNAVAILABLE",
    "CONFIG_ERROR",
    "INTERNAL",
];

impl From<DomainError> for Error {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::NotPositive { field, .. } => Error::invalid(field, e.to_string()),
            DomainError::PoolTooSmall {
                side,
                needed,
                available,
            } => Error::PoolTooSmall {
                side: side.to_string(),
                needed,
                available,
            },
            DomainError::InvalidQuestion(rule) => Error::InvalidQuestion(rule.to_string()),
            DomainError::UnknownQuestion(r) => Error::UnknownQuestion(r.to_string()),
            DomainError::DuplicateAnswer(r) => Error::DuplicateAnswer(r.to_string()),
            DomainError::EmptyBlueprint => Error::Config(e.to_string()),
            DomainError::DuplicateInPool(_)
            | DomainError::InvalidGroup(_)
            | DomainError::EmptyAnswerKey => Error::Internal(e.to_string()),
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(e: rusqlite::Error) -> Self {
        if let rusqlite::Error::SqliteFailure(f, ref msg) = e {
            if f.extended_code == rusqlite::ffi::SQLITE_CONSTRAINT_UNIQUE
                || f.extended_code == rusqlite::ffi::SQLITE_CONSTRAINT_PRIMARYKEY
            {
                return Error::DuplicateKey(
                    msg.clone().unwrap_or_else(|| "unique constraint".into()),
                );
            }
        }
        Error::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Internal(format!("stored JSON: {e}"))
    }
}
