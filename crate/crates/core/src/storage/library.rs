use chrono::{DateTime, Utc};
use rusqlite::{params, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use super::{fmt_ts, ts_col, StoreTx};
use crate::domain::{
    GapFillQuestion, LectureId, MultipleChoiceQuestion, Question, QuestionDraft, QuestionId,
    QuestionKind, Scope,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LectureRecord {
    pub id: LectureId,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFileRecord {
    pub id: i64,
    pub lecture: LectureId,
    pub name: String,
    pub media_type: String,
    pub size: u64,
    pub digest: String,
    pub uploaded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub files_removed: usize,
    pub mc_removed: usize,
    pub gf_removed: usize,
    /// Object digests no longer referenced by any file record.
    #[serde(skip)]
    pub orphaned_digests: Vec<String>,
}

fn conv_err(idx: usize, e: impl std::error::Error + Send + Sync + 'static) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Integer, Box::new(e))
}

fn lecture_id(row: &Row<'_>, idx: usize) -> rusqlite::Result<LectureId> {
    LectureId::new(row.get(idx)?).map_err(|e| conv_err(idx, e))
}

fn question_id(row: &Row<'_>, idx: usize) -> rusqlite::Result<QuestionId> {
    QuestionId::new(row.get(idx)?).map_err(|e| conv_err(idx, e))
}

fn file_row(row: &Row<'_>) -> rusqlite::Result<StoredFileRecord> {
    Ok(StoredFileRecord {
        id: row.get(0)?,
        lecture: lecture_id(row, 1)?,
        name: row.get(2)?,
        media_type: row.get(3)?,
        size: row.get::<_, i64>(4)? as u64,
        digest: row.get(5)?,
        uploaded_at: ts_col(row, 6)?,
    })
}

fn mc_row(row: &Row<'_>) -> rusqlite::Result<Question> {
    let wrong: Vec<String> = [row.get::<_, String>(4)?]
        .into_iter()
        .chain(row.get::<_, Option<String>>(5)?)
        .chain(row.get::<_, Option<String>>(6)?)
        .collect();
    Ok(Question::MultipleChoice(MultipleChoiceQuestion {
        id: question_id(row, 0)?,
        lecture: lecture_id(row, 1)?,
        question: row.get(2)?,
        right_answer: row.get(3)?,
        wrong_answers: wrong,
    }))
}

fn gf_row(row: &Row<'_>) -> rusqlite::Result<Question> {
    Ok(Question::GapFill(GapFillQuestion {
        id: question_id(row, 0)?,
        lecture: lecture_id(row, 1)?,
        question: row.get(2)?,
        answer: row.get(3)?,
    }))
}

const MC_COLS: &str = "IDE, IDD, Question, RA, WA1, WA2, WA3";
const GF_COLS: &str = "IDF, IDD, Question, Answer";
const FILE_COLS: &str = "ID, IDD, name, type, size, digest, UploadedAt";

impl StoreTx<'_> {
    pub fn insert_lecture(&self, title: &str) -> Result<LectureRecord> {
        let exists: bool = self.conn().query_row(
            "SELECT EXISTS (SELECT 1 FROM lectures WHERE Lecture = ?1)",
            [title],
            |r| r.get(0),
        )?;
        if exists {
            return Err(Error::DuplicateTitle);
        }
        self.conn()
            .execute("INSERT INTO lectures (Lecture) VALUES (?1)", [title])?;
        Ok(LectureRecord {
            id: LectureId::new(self.conn().last_insert_rowid())?,
            title: title.to_owned(),
        })
    }

    pub fn get_lecture(&self, id: LectureId) -> Result<Option<LectureRecord>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT IDD, Lecture FROM lectures WHERE IDD = ?1",
                [id.get()],
                |r| {
                    Ok(LectureRecord {
                        id: lecture_id(r, 0)?,
                        title: r.get(1)?,
                    })
                },
            )
            .optional()?)
    }

    pub fn require_lecture(&self, id: LectureId) -> Result<LectureRecord> {
        self.get_lecture(id)?
            .ok_or_else(|| Error::not_found(format!("lecture {id}")))
    }

    pub fn list_lectures(&self) -> Result<Vec<LectureRecord>> {
        let mut stmt = self
            .conn()
            .prepare("SELECT IDD, Lecture FROM lectures ORDER BY IDD")?;
        let rows = stmt.query_map([], |r| {
            Ok(LectureRecord {
                id: lecture_id(r, 0)?,
                title: r.get(1)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    fn lecture_in_open_test(&self, id: LectureId) -> Result<bool> {
        Ok(self.conn().query_row(
            "SELECT EXISTS (SELECT 1 FROM test_instances ti WHERE ti.State = 'open' AND (
                EXISTS (SELECT 1 FROM user_mult_test m JOIN multiple_questions q ON q.IDE = m.IDE
                        WHERE m.IDUM = ti.IDUM AND q.IDD = ?1)
             OR EXISTS (SELECT 1 FROM user_fill_test f JOIN filling_questions q ON q.IDF = f.IDF
                        WHERE f.IDUF = ti.IDUF AND q.IDD = ?1)))",
            [id.get()],
            |r| r.get(0),
        )?)
    }

    /// Deletes a lecture with its files, questions and schedule. Stored
    /// objects are not touched; the report lists digests that became
    /// unreferenced so the caller can collect them in the same transaction.
    pub fn delete_lecture_cascade(&self, id: LectureId) -> Result<CascadeReport> {
        self.require_lecture(id)?;
        if self.lecture_in_open_test(id)? {
            return Err(Error::ReferencedByActiveExam);
        }
        let conn = self.conn();
        let mut digests = Vec::new();
        {
            let mut stmt =
                conn.prepare("SELECT DISTINCT digest FROM lecture_files WHERE IDD = ?1")?;
            for d in stmt.query_map([id.get()], |r| r.get::<_, String>(0))? {
                digests.push(d?);
            }
        }
        let files_removed = conn.execute("DELETE FROM lecture_files WHERE IDD = ?1", [id.get()])?;
        let mc_removed =
            conn.execute("DELETE FROM multiple_questions WHERE IDD = ?1", [id.get()])?;
        let gf_removed =
            conn.execute("DELETE FROM filling_questions WHERE IDD = ?1", [id.get()])?;
        conn.execute("DELETE FROM lectures WHERE IDD = ?1", [id.get()])?;
        let mut orphaned_digests = Vec::new();
        for d in digests {
            if !self.digest_in_use(&d)? {
                orphaned_digests.push(d);
            }
        }
        Ok(CascadeReport {
            files_removed,
            mc_removed,
            gf_removed,
            orphaned_digests,
        })
    }

    pub fn insert_file(
        &self,
        lecture: LectureId,
        name: &str,
        media_type: &str,
        size: u64,
        digest: &str,
        now: DateTime<Utc>,
    ) -> Result<StoredFileRecord> {
        self.conn().execute(
            "INSERT INTO lecture_files (IDD, name, type, size, digest, UploadedAt) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![lecture.get(), name, media_type, size as i64, digest, fmt_ts(now)],
        )?;
        let id = self.conn().last_insert_rowid();
        Ok(self.get_file(id)?.expect("row just inserted"))
    }

    pub fn get_file(&self, id: i64) -> Result<Option<StoredFileRecord>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT {FILE_COLS} FROM lecture_files WHERE ID = ?1"),
                [id],
                file_row,
            )
            .optional()?)
    }

    pub fn list_files(&self, lecture: LectureId) -> Result<Vec<StoredFileRecord>> {
        let mut stmt = self.conn().prepare(&format!(
            "SELECT {FILE_COLS} FROM lecture_files WHERE IDD = ?1 ORDER BY ID"
        ))?;
        let rows = stmt.query_map([lecture.get()], file_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn all_files(&self) -> Result<Vec<StoredFileRecord>> {
        let mut stmt = self.conn().prepare(&format!(
            "SELECT {FILE_COLS} FROM lecture_files ORDER BY ID"
        ))?;
        let rows = stmt.query_map([], file_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn delete_file(&self, id: i64) -> Result<Option<StoredFileRecord>> {
        let Some(rec) = self.get_file(id)? else {
            return Ok(None);
        };
        self.conn()
            .execute("DELETE FROM lecture_files WHERE ID = ?1", [id])?;
        Ok(Some(rec))
    }

    pub fn digest_in_use(&self, digest: &str) -> Result<bool> {
        Ok(self.conn().query_row(
            "SELECT EXISTS (SELECT 1 FROM lecture_files WHERE digest = ?1)",
            [digest],
            |r| r.get(0),
        )?)
    }

    pub fn insert_question(&self, draft: &QuestionDraft) -> Result<Question> {
        self.require_lecture(draft.lecture())?;
        let conn = self.conn();
        match draft {
            QuestionDraft::MultipleChoice {
                lecture,
                question,
                right_answer,
                wrong_answers,
            } => {
                conn.execute(
                    "INSERT INTO multiple_questions (IDD, Question, RA, WA1, WA2, WA3) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                    params![
                        lecture.get(),
                        question,
                        right_answer,
                        wrong_answers.first(),
                        wrong_answers.get(1),
                        wrong_answers.get(2)
                    ],
                )?;
            }
            QuestionDraft::GapFill {
                lecture,
                question,
                answer,
            } => {
                conn.execute(
                    "INSERT INTO filling_questions (IDD, Question, Answer) VALUES (?1, ?2, ?3)",
                    params![lecture.get(), question, answer],
                )?;
            }
        }
        let id = QuestionId::new(conn.last_insert_rowid())?;
        Ok(Question::from_draft(id, draft.clone()))
    }

    pub fn get_question(&self, kind: QuestionKind, id: QuestionId) -> Result<Option<Question>> {
        let conn = self.conn();
        Ok(match kind {
            QuestionKind::MultipleChoice => conn
                .query_row(
                    &format!("SELECT {MC_COLS} FROM multiple_questions WHERE IDE = ?1"),
                    [id.get()],
                    mc_row,
                )
                .optional()?,
            QuestionKind::GapFill => conn
                .query_row(
                    &format!("SELECT {GF_COLS} FROM filling_questions WHERE IDF = ?1"),
                    [id.get()],
                    gf_row,
                )
                .optional()?,
        })
    }

    pub fn update_question(&self, id: QuestionId, draft: &QuestionDraft) -> Result<Question> {
        self.require_lecture(draft.lecture())?;
        let changed = match draft {
            QuestionDraft::MultipleChoice {
                lecture,
                question,
                right_answer,
                wrong_answers,
            } => self.conn().execute(
                "UPDATE multiple_questions SET IDD = ?1, Question = ?2, RA = ?3, WA1 = ?4, WA2 = ?5, WA3 = ?6 WHERE IDE = ?7",
                params![
                    lecture.get(),
                    question,
                    right_answer,
                    wrong_answers.first(),
                    wrong_answers.get(1),
                    wrong_answers.get(2),
                    id.get()
                ],
            )?,
            QuestionDraft::GapFill { lecture, question, answer } => self.conn().execute(
                "UPDATE filling_questions SET IDD = ?1, Question = ?2, Answer = ?3 WHERE IDF = ?4",
                params![lecture.get(), question, answer, id.get()],
            )?,
        };
        if changed == 0 {
            return Err(Error::not_found(format!("{} question {id}", draft.kind())));
        }
        Ok(Question::from_draft(id, draft.clone()))
    }

    pub fn delete_question(&self, kind: QuestionKind, id: QuestionId) -> Result<bool> {
        let sql = match kind {
            QuestionKind::MultipleChoice => "DELETE FROM multiple_questions WHERE IDE = ?1",
            QuestionKind::GapFill => "DELETE FROM filling_questions WHERE IDF = ?1",
        };
        Ok(self.conn().execute(sql, [id.get()])? > 0)
    }

    /// All questions of a kind, by id.
    pub fn list_questions(&self, kind: QuestionKind) -> Result<Vec<Question>> {
        let (sql, map): (String, fn(&Row<'_>) -> rusqlite::Result<Question>) = match kind {
            QuestionKind::MultipleChoice => (
                format!("SELECT {MC_COLS} FROM multiple_questions ORDER BY IDE"),
                mc_row,
            ),
            QuestionKind::GapFill => (
                format!("SELECT {GF_COLS} FROM filling_questions ORDER BY IDF"),
                gf_row,
            ),
        };
        let mut stmt = self.conn().prepare(&sql)?;
        let rows = stmt.query_map([], map)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Question ids of one kind within a scope, ascending.
    pub fn question_pool(&self, kind: QuestionKind, scope: Scope) -> Result<Vec<QuestionId>> {
        let (table, id_col) = match kind {
            QuestionKind::MultipleChoice => ("multiple_questions", "IDE"),
            QuestionKind::GapFill => ("filling_questions", "IDF"),
        };
        let (sql, lecture) = match scope {
            Scope::AllLectures => (
                format!("SELECT {id_col} FROM {table} ORDER BY {id_col}"),
                None,
            ),
            Scope::SingleLecture(l) => (
                format!("SELECT {id_col} FROM {table} WHERE IDD = ?1 ORDER BY {id_col}"),
                Some(l.get()),
            ),
        };
        let mut stmt = self.conn().prepare(&sql)?;
        let rows = match lecture {
            Some(l) => stmt
                .query_map([l], |r| question_id(r, 0))?
                .collect::<rusqlite::Result<Vec<_>>>()?,
            None => stmt
                .query_map([], |r| question_id(r, 0))?
                .collect::<rusqlite::Result<Vec<_>>>()?,
        };
        Ok(rows)
    }

    pub fn count_questions(&self, lecture: LectureId) -> Result<(usize, usize)> {
        let mc = self
            .question_pool(QuestionKind::MultipleChoice, Scope::SingleLecture(lecture))?
            .len();
        let gf = self
            .question_pool(QuestionKind::GapFill, Scope::SingleLecture(lecture))?
            .len();
        Ok((mc, gf))
    }
}
