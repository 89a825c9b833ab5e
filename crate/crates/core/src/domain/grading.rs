use std::collections::{HashMap, HashSet};

use super::{DomainError, GradeResult, QuestionRef, SubmittedAnswer};

/// Trim, collapse internal whitespace runs to a single space, lowercase.
pub fn normalize_response(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Scores a sheet against the canonical answers. Every question in `key`
/// counts once; a question without a submitted answer counts as wrong.
pub fn grade(
    answers: &[SubmittedAnswer],
    key: &HashMap<QuestionRef, String>,
) -> Result<GradeResult, DomainError> {
    if key.is_empty() {
        return Err(DomainError::EmptyAnswerKey);
    }
    let mut seen = HashSet::with_capacity(answers.len());
    let mut correct = 0u32;
    for answer in answers {
        let r = answer.question_ref();
        let canonical = key.get(&r).ok_or(DomainError::UnknownQuestion(r))?;
        if !seen.insert(r) {
            return Err(DomainError::DuplicateAnswer(r));
        }
        if normalize_response(&answer.response) == normalize_response(canonical) {
            correct += 1;
        }
    }
    let total = u32::try_from(key.len()).expect("answer key fits in u32");
    Ok(GradeResult::from_counts(correct, total))
}
