use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{StoreTx, UserRecord};
use crate::domain::{Question, QuestionKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

impl<T> Page<T> {
    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Page<U> {
        Page {
            items: self.items.into_iter().map(f).collect(),
            total: self.total,
            page: self.page,
            page_size: self.page_size,
        }
    }
}

/// 1-based page slicing. A page past the end is empty but reports the total.
pub fn paginate<T>(all: Vec<T>, page: usize, page_size: usize) -> Result<Page<T>> {
    if page == 0 {
        return Err(Error::invalid("page", "must be at least 1"));
    }
    if page_size == 0 {
        return Err(Error::invalid("page_size", "must be at least 1"));
    }
    let total = all.len();
    let start = (page - 1).saturating_mul(page_size);
    let items = all.into_iter().skip(start).take(page_size).collect();
    Ok(Page {
        items,
        total,
        page,
        page_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchScope {
    Users,
    Questions(QuestionKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchField {
    Am,
    Name,
    Surname,
    Username,
    Email,
    Question,
}

impl FromStr for SearchField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "am" => SearchField::Am,
            "name" => SearchField::Name,
            "surname" => SearchField::Surname,
            "username" => SearchField::Username,
            "email" => SearchField::Email,
            "question" => SearchField::Question,
            other => {
                return Err(Error::invalid(
                    "field",
                    format!("{other:?} is not searchable"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchHit {
    User(UserRecord),
    Question(Question),
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

impl StoreTx<'_> {
    /// Case-insensitive substring search, primary-key order, one page.
    pub fn search_records(
        &self,
        scope: SearchScope,
        field: SearchField,
        needle: &str,
        page: usize,
        page_size: usize,
    ) -> Result<Page<SearchHit>> {
        match scope {
            SearchScope::Users => Ok(self
                .search_users(field, needle, page, page_size)?
                .map(SearchHit::User)),
            SearchScope::Questions(kind) => {
                if field != SearchField::Question {
                    return Err(Error::invalid(
                        "field",
                        "questions are searchable by question text only",
                    ));
                }
                let hits = self.matching_questions(kind, needle)?;
                Ok(paginate(hits, page, page_size)?.map(SearchHit::Question))
            }
        }
    }

    pub fn search_users(
        &self,
        field: SearchField,
        needle: &str,
        page: usize,
        page_size: usize,
    ) -> Result<Page<UserRecord>> {
        let pick: fn(&UserRecord) -> String = match field {
            SearchField::Am => |u| u.am.to_string(),
            SearchField::Name => |u| u.profile.name.clone(),
            SearchField::Surname => |u| u.profile.surname.clone(),
            SearchField::Username => |u| u.profile.username.clone(),
            SearchField::Email => |u| u.profile.email.clone(),
            SearchField::Question => {
                return Err(Error::invalid(
                    "field",
                    "users are not searchable by question",
                ))
            }
        };
        let hits: Vec<UserRecord> = self
            .list_users()?
            .into_iter()
            .filter(|u| contains_ci(&pick(u), needle))
            .collect();
        paginate(hits, page, page_size)
    }

    /// Questions of one kind whose text contains `needle`, by id.
    pub fn matching_questions(&self, kind: QuestionKind, needle: &str) -> Result<Vec<Question>> {
        Ok(self
            .list_questions(kind)?
            .into_iter()
            .filter(|q| contains_ci(q.text(), needle))
            .collect())
    }
}
