//! Domain types and the pure logic behind test generation and grading.
//!
//! Nothing in here touches storage, the clock, or the network. Every random
//! decision takes an injected [`rand::Rng`] so callers control determinism.

mod grading;
mod identity;
mod selection;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grading::{grade, normalize_response};
pub use identity::{
    is_plausible_email, Credential, PersonProfile, Principal, DEFAULT_DIGEST_ROUNDS,
};
pub use selection::{assemble_test, select_questions, shuffle_options};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("{field} must be a positive integer, got {value}")]
    NotPositive { field: &'static str, value: i64 },
    #[error("pool too small for {side}: need {needed}, have {available}")]
    PoolTooSmall {
        side: QuestionKind,
        needed: usize,
        available: usize,
    },
    #[error("question pool contains duplicate id {0}")]
    DuplicateInPool(i64),
    #[error("invalid question: {0}")]
    InvalidQuestion(&'static str),
    #[error("test group: {0}")]
    InvalidGroup(&'static str),
    #[error("blueprint must request at least one question")]
    EmptyBlueprint,
    #[error("answer references question {0} which is not part of this test")]
    UnknownQuestion(QuestionRef),
    #[error("question {0} answered more than once")]
    DuplicateAnswer(QuestionRef),
    #[error("answer key is empty")]
    EmptyAnswerKey,
}

macro_rules! positive_id {
    ($(#[$meta:meta])* $name:ident, $field:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "i64", into = "i64")]
        pub struct $name(i64);

        impl $name {
            pub fn new(value: i64) -> Result<Self, DomainError> {
                if value >= 1 {
                    Ok(Self(value))
                } else {
                    Err(DomainError::NotPositive { field: $field, value })
                }
            }

            pub fn get(self) -> i64 {
                self.0
            }
        }

        impl TryFrom<i64> for $name {
            type Error = DomainError;
            fn try_from(value: i64) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for i64 {
            fn from(id: $name) -> i64 {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

positive_id!(
    /// A student's register number (AM). Primary key of users and pending registrations.
    RegisterNumber,
    "register number"
);
positive_id!(
    /// Lecture id (IDD).
    LectureId,
    "lecture id"
);
positive_id!(AdminId, "admin id");
positive_id!(
    /// IDE for multiple-choice questions, IDF for gap-fill questions.
    QuestionId,
    "question id"
);

/// IDUM / IDUF. Zero is reserved for the empty group of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub i64);

impl GroupId {
    pub const EMPTY: GroupId = GroupId(0);

    pub fn is_empty_marker(self) -> bool {
        self == Self::EMPTY
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultipleChoice,
    GapFill,
}

impl QuestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::MultipleChoice => "multiple_choice",
            QuestionKind::GapFill => "gap_fill",
        }
    }
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multiple_choice" => Ok(QuestionKind::MultipleChoice),
            "gap_fill" => Ok(QuestionKind::GapFill),
            other => Err(format!("unknown question kind {other:?}")),
        }
    }
}

/// Question ids are only unique within a kind, so anything spanning both
/// kinds keys on the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuestionRef {
    pub kind: QuestionKind,
    pub id: QuestionId,
}

impl QuestionRef {
    pub fn new(kind: QuestionKind, id: QuestionId) -> Self {
        Self { kind, id }
    }
}

impl fmt::Display for QuestionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.kind, self.id)
    }
}

pub const MAX_WRONG_ANSWERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultipleChoiceQuestion {
    pub id: QuestionId,
    pub lecture: LectureId,
    pub question: String,
    pub right_answer: String,
    pub wrong_answers: Vec<String>,
}

impl MultipleChoiceQuestion {
    pub fn answers(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.right_answer.as_str())
            .chain(self.wrong_answers.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapFillQuestion {
    pub id: QuestionId,
    pub lecture: LectureId,
    pub question: String,
    pub answer: String,
}

/// Question content before it has been stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuestionDraft {
    MultipleChoice {
        lecture: LectureId,
        question: String,
        right_answer: String,
        wrong_answers: Vec<String>,
    },
    GapFill {
        lecture: LectureId,
        question: String,
        answer: String,
    },
}

impl QuestionDraft {
    pub fn kind(&self) -> QuestionKind {
        match self {
            QuestionDraft::MultipleChoice { .. } => QuestionKind::MultipleChoice,
            QuestionDraft::GapFill { .. } => QuestionKind::GapFill,
        }
    }

    pub fn lecture(&self) -> LectureId {
        match self {
            QuestionDraft::MultipleChoice { lecture, .. }
            | QuestionDraft::GapFill { lecture, .. } => *lecture,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match self {
            QuestionDraft::MultipleChoice {
                question,
                right_answer,
                wrong_answers,
                ..
            } => validate_multiple_choice(question, right_answer, wrong_answers),
            QuestionDraft::GapFill {
                question, answer, ..
            } => {
                if question.trim().is_empty() {
                    return Err(DomainError::InvalidQuestion(
                        "question text must not be empty",
                    ));
                }
                if answer.trim().is_empty() {
                    return Err(DomainError::InvalidQuestion("answer must not be empty"));
                }
                Ok(())
            }
        }
    }
}

fn validate_multiple_choice(
    question: &str,
    right: &str,
    wrong: &[String],
) -> Result<(), DomainError> {
    if question.trim().is_empty() {
        return Err(DomainError::InvalidQuestion(
            "question text must not be empty",
        ));
    }
    if right.trim().is_empty() {
        return Err(DomainError::InvalidQuestion(
            "right answer must not be empty",
        ));
    }
    if wrong.is_empty() {
        return Err(DomainError::InvalidQuestion(
            "at least one wrong answer is required",
        ));
    }
    if wrong.len() > MAX_WRONG_ANSWERS {
        return Err(DomainError::InvalidQuestion(
            "at most three wrong answers are allowed",
        ));
    }
    if wrong.iter().any(|w| w.trim().is_empty()) {
        return Err(DomainError::InvalidQuestion(
            "wrong answers must not be empty",
        ));
    }
    // Options are graded by normalized text, so two options that normalize
    // equal would be indistinguishable.
    let mut seen = vec![normalize_response(right)];
    for w in wrong {
        let n = normalize_response(w);
        if seen.contains(&n) {
            return Err(DomainError::InvalidQuestion(
                "answers must be pairwise distinct",
            ));
        }
        seen.push(n);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Question {
    MultipleChoice(MultipleChoiceQuestion),
    GapFill(GapFillQuestion),
}

impl Question {
    pub fn id(&self) -> QuestionId {
        match self {
            Question::MultipleChoice(q) => q.id,
            Question::GapFill(q) => q.id,
        }
    }

    pub fn kind(&self) -> QuestionKind {
        match self {
            Question::MultipleChoice(_) => QuestionKind::MultipleChoice,
            Question::GapFill(_) => QuestionKind::GapFill,
        }
    }

    pub fn lecture(&self) -> LectureId {
        match self {
            Question::MultipleChoice(q) => q.lecture,
            Question::GapFill(q) => q.lecture,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Question::MultipleChoice(q) => &q.question,
            Question::GapFill(q) => &q.question,
        }
    }

    /// The text a correct response must match.
    pub fn canonical_answer(&self) -> &str {
        match self {
            Question::MultipleChoice(q) => &q.right_answer,
            Question::GapFill(q) => &q.answer,
        }
    }

    pub fn to_draft(&self) -> QuestionDraft {
        match self.clone() {
            Question::MultipleChoice(q) => QuestionDraft::MultipleChoice {
                lecture: q.lecture,
                question: q.question,
                right_answer: q.right_answer,
                wrong_answers: q.wrong_answers,
            },
            Question::GapFill(q) => QuestionDraft::GapFill {
                lecture: q.lecture,
                question: q.question,
                answer: q.answer,
            },
        }
    }

    pub fn from_draft(id: QuestionId, draft: QuestionDraft) -> Self {
        match draft {
            QuestionDraft::MultipleChoice {
                lecture,
                question,
                right_answer,
                wrong_answers,
            } => Question::MultipleChoice(MultipleChoiceQuestion {
                id,
                lecture,
                question,
                right_answer,
                wrong_answers,
            }),
            QuestionDraft::GapFill {
                lecture,
                question,
                answer,
            } => Question::GapFill(GapFillQuestion {
                id,
                lecture,
                question,
                answer,
            }),
        }
    }
}

/// Which kind of sitting a test instance or schedule refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    FinalExam,
    LectureTest(LectureId),
}

impl TestKind {
    pub fn is_final(self) -> bool {
        self == TestKind::FinalExam
    }
}

/// `final_exam` or `lecture_<id>`; the same text appears in URLs and storage.
impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::FinalExam => f.write_str("final_exam"),
            TestKind::LectureTest(l) => write!(f, "lecture_{l}"),
        }
    }
}

impl FromStr for TestKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "final_exam" {
            return Ok(TestKind::FinalExam);
        }
        s.strip_prefix("lecture_")
            .and_then(|n| n.parse::<i64>().ok())
            .and_then(|n| LectureId::new(n).ok())
            .map(TestKind::LectureTest)
            .ok_or_else(|| format!("unknown test kind {s:?}; expected final_exam or lecture_<id>"))
    }
}

impl Serialize for TestKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TestKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered set of question references of one kind, frozen at creation.
/// The order is the presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestGroup {
    kind: QuestionKind,
    question_ids: Vec<QuestionId>,
}

impl TestGroup {
    pub fn new(kind: QuestionKind, question_ids: Vec<QuestionId>) -> Result<Self, DomainError> {
        if question_ids.is_empty() {
            return Err(DomainError::InvalidGroup(
                "a non-empty group needs at least one question",
            ));
        }
        let mut sorted = question_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(DomainError::InvalidGroup("duplicate question id in group"));
        }
        Ok(Self { kind, question_ids })
    }

    /// The "no questions of this kind" marker, stored under [`GroupId::EMPTY`].
    pub fn empty(kind: QuestionKind) -> Self {
        Self {
            kind,
            question_ids: Vec::new(),
        }
    }

    pub fn kind(&self) -> QuestionKind {
        self.kind
    }

    pub fn question_ids(&self) -> &[QuestionId] {
        &self.question_ids
    }

    pub fn len(&self) -> usize {
        self.question_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.question_ids.is_empty()
    }

    pub fn refs(&self) -> impl Iterator<Item = QuestionRef> + '_ {
        self.question_ids
            .iter()
            .map(move |&id| QuestionRef::new(self.kind, id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    SingleLecture(LectureId),
    AllLectures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestBlueprint {
    pub mc_count: usize,
    pub gf_count: usize,
    pub scope: Scope,
}

impl TestBlueprint {
    pub fn new(mc_count: usize, gf_count: usize, scope: Scope) -> Result<Self, DomainError> {
        if mc_count + gf_count == 0 {
            return Err(DomainError::EmptyBlueprint);
        }
        Ok(Self {
            mc_count,
            gf_count,
            scope,
        })
    }

    pub fn total(&self) -> usize {
        self.mc_count + self.gf_count
    }
}

/// A question as shown to the examinee. The right answer is not marked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedQuestion {
    pub question_id: QuestionId,
    pub kind: QuestionKind,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
}

impl PresentedQuestion {
    pub fn gap_fill(q: &GapFillQuestion) -> Self {
        Self {
            question_id: q.id,
            kind: QuestionKind::GapFill,
            prompt: q.question.clone(),
            options: None,
        }
    }

    pub fn question_ref(&self) -> QuestionRef {
        QuestionRef::new(self.kind, self.question_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmittedAnswer {
    pub question_id: QuestionId,
    pub kind: QuestionKind,
    #[serde(default)]
    pub response: String,
}

impl SubmittedAnswer {
    pub fn new(kind: QuestionKind, question_id: QuestionId, response: impl Into<String>) -> Self {
        Self {
            question_id,
            kind,
            response: response.into(),
        }
    }

    pub fn question_ref(&self) -> QuestionRef {
        QuestionRef::new(self.kind, self.question_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeResult {
    pub correct_count: u32,
    pub total_count: u32,
    pub percent: f64,
}

impl GradeResult {
    pub fn from_counts(correct_count: u32, total_count: u32) -> Self {
        debug_assert!(total_count > 0 && correct_count <= total_count);
        Self {
            correct_count,
            total_count,
            percent: 100.0 * f64::from(correct_count) / f64::from(total_count),
        }
    }

    /// The outcome recorded for a sitting that missed its deadline.
    pub fn zero(total_count: u32) -> Self {
        Self {
            correct_count: 0,
            total_count,
            percent: 0.0,
        }
    }
}
