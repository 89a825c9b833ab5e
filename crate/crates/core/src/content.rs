//! Lectures, lecture files and question authoring.

use serde::{Deserialize, Serialize};

use crate::domain::{LectureId, Principal, Question, QuestionDraft, QuestionId, QuestionKind};
use crate::error::{Error, Result};
use crate::platform::{require_admin, ItemOutcome, ItemStatus, Platform};
use crate::storage::{paginate, CascadeReport, LectureRecord, Page, StoredFileRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UploadedFile {
    pub logical_name: String,
    pub media_type: String,
    pub bytes: Vec<u8>,
}

/// Listing form of a file record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileView {
    pub id: i64,
    pub lecture: LectureId,
    pub name: String,
    pub media_type: String,
    pub size: u64,
}

impl From<&StoredFileRecord> for FileView {
    fn from(r: &StoredFileRecord) -> Self {
        Self {
            id: r.id,
            lecture: r.lecture,
            name: r.name.clone(),
            media_type: r.media_type.clone(),
            size: r.size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LectureSummary {
    pub id: LectureId,
    pub title: String,
    pub files: Vec<String>,
}

pub type LectureDeletion = ItemOutcome<LectureId, CascadeReport>;
pub type FileDeletion = ItemOutcome<i64>;
pub type QuestionDeletion = ItemOutcome<QuestionId>;

impl Platform {
    /// Lecture titles with the names of their files; open to guests.
    pub fn lecture_catalogue(&self) -> Result<Vec<LectureSummary>> {
        self.transaction(|tx| {
            tx.list_lectures()?
                .into_iter()
                .map(|l| {
                    let files = tx.list_files(l.id)?.into_iter().map(|f| f.name).collect();
                    Ok(LectureSummary {
                        id: l.id,
                        title: l.title,
                        files,
                    })
                })
                .collect()
        })
    }

    pub fn create_lecture(&self, actor: Principal, title: &str) -> Result<LectureRecord> {
        require_admin(actor)?;
        let title = title.trim();
        if title.is_empty() {
            return Err(Error::invalid("title", "must not be empty"));
        }
        self.transaction(|tx| tx.insert_lecture(title))
    }

    /// Deletes each lecture with its files and questions. Items are
    /// independent: one refusal does not stop the rest.
    pub fn delete_lectures(
        &self,
        actor: Principal,
        ids: &[LectureId],
    ) -> Result<Vec<LectureDeletion>> {
        require_admin(actor)?;
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            let res = self.transaction(|tx| {
                let report = tx.delete_lecture_cascade(id)?;
                for d in &report.orphaned_digests {
                    self.objects().remove(d)?;
                }
                Ok(report)
            });
            let status = match res {
                Ok(detail) => ItemStatus::Deleted { detail },
                Err(Error::NotFound(_)) => ItemStatus::NotFound,
                Err(e @ Error::ReferencedByActiveExam) => ItemStatus::Refused {
                    code: e.code().into(),
                },
                Err(e) => return Err(e),
            };
            out.push(ItemOutcome { id, status });
        }
        Ok(out)
    }

    pub fn upload_file(
        &self,
        actor: Principal,
        lecture: LectureId,
        file: &UploadedFile,
    ) -> Result<StoredFileRecord> {
        require_admin(actor)?;
        let name = file.logical_name.trim();
        if name.is_empty() {
            return Err(Error::invalid("logical_name", "must not be empty"));
        }
        if file.bytes.is_empty() {
            return Err(Error::EmptyFile);
        }
        let limit = self.settings().max_upload_bytes;
        if file.bytes.len() as u64 > limit {
            return Err(Error::FileTooLarge { limit });
        }
        let now = self.now();
        self.transaction(|tx| {
            tx.require_lecture(lecture)?;
            // Holding the transaction while writing the object keeps this
            // ordered against a concurrent collection of the same digest.
            let digest = self.objects().put(&file.bytes)?;
            tx.insert_file(
                lecture,
                name,
                file.media_type.trim(),
                file.bytes.len() as u64,
                &digest,
                now,
            )
        })
    }

    pub fn list_files(&self, _actor: Principal, lecture: LectureId) -> Result<Vec<FileView>> {
        self.transaction(|tx| {
            tx.require_lecture(lecture)?;
            Ok(tx.list_files(lecture)?.iter().map(FileView::from).collect())
        })
    }

    pub fn download_file(&self, _actor: Principal, id: i64) -> Result<(StoredFileRecord, Vec<u8>)> {
        self.transaction(|tx| {
            let rec = tx
                .get_file(id)?
                .ok_or_else(|| Error::not_found(format!("file {id}")))?;
            let bytes = self.objects().get(&rec.digest)?;
            Ok((rec, bytes))
        })
    }

    /// Removes file records; an object goes when its last record does.
    pub fn delete_files(&self, actor: Principal, ids: &[i64]) -> Result<Vec<FileDeletion>> {
        require_admin(actor)?;
        self.transaction(|tx| {
            let mut out = Vec::with_capacity(ids.len());
            for &id in ids {
                let status = match tx.delete_file(id)? {
                    Some(rec) => {
                        if !tx.digest_in_use(&rec.digest)? {
                            self.objects().remove(&rec.digest)?;
                        }
                        ItemStatus::Deleted { detail: () }
                    }
                    None => ItemStatus::NotFound,
                };
                out.push(ItemOutcome { id, status });
            }
            Ok(out)
        })
    }

    pub fn insert_question(&self, actor: Principal, draft: &QuestionDraft) -> Result<Question> {
        require_admin(actor)?;
        draft.validate()?;
        self.transaction(|tx| tx.insert_question(draft))
    }

    /// Replaces a question's fields. The lecture may change.
    pub fn edit_question(
        &self,
        actor: Principal,
        kind: QuestionKind,
        id: QuestionId,
        draft: &QuestionDraft,
    ) -> Result<Question> {
        require_admin(actor)?;
        if draft.kind() != kind {
            return Err(Error::InvalidQuestion(format!(
                "body is {} but path says {kind}",
                draft.kind()
            )));
        }
        draft.validate()?;
        self.transaction(|tx| {
            tx.get_question(kind, id)?
                .ok_or_else(|| Error::not_found(format!("{kind} question {id}")))?;
            tx.update_question(id, draft)
        })
    }

    pub fn delete_questions(
        &self,
        actor: Principal,
        kind: QuestionKind,
        ids: &[QuestionId],
    ) -> Result<Vec<QuestionDeletion>> {
        require_admin(actor)?;
        self.transaction(|tx| {
            ids.iter()
                .map(|&id| {
                    let status = if tx.delete_question(kind, id)? {
                        ItemStatus::Deleted { detail: () }
                    } else {
                        ItemStatus::NotFound
                    };
                    Ok(ItemOutcome { id, status })
                })
                .collect()
        })
    }

    /// Questions of one kind ordered by lecture, then id, filtered by a
    /// case-insensitive substring of the question text.
    pub fn list_questions(
        &self,
        actor: Principal,
        kind: QuestionKind,
        search: Option<&str>,
        page: usize,
        page_size: usize,
    ) -> Result<Page<Question>> {
        require_admin(actor)?;
        let mut hits = self.transaction(|tx| tx.matching_questions(kind, search.unwrap_or("")))?;
        hits.sort_by_key(|q| (q.lecture(), q.id()));
        paginate(hits, page, page_size)
    }
}
