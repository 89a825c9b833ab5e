use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Utc};
use rusqlite::{params, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use super::{fmt_ts, ts_col, StoreTx};
use crate::domain::{
    GroupId, PresentedQuestion, QuestionId, QuestionKind, QuestionRef, RegisterNumber, TestGroup,
    TestKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub id: i64,
    pub kind: TestKind,
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub duration_minutes: u32,
}

impl ScheduleRecord {
    /// Schedules are wall-clock UTC.
    pub fn starts_at(&self) -> DateTime<Utc> {
        self.date.and_time(self.time).and_utc()
    }

    pub fn ends_at(&self) -> DateTime<Utc> {
        self.starts_at() + self.duration()
    }

    pub fn duration(&self) -> Duration {
        Duration::minutes(i64::from(self.duration_minutes))
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.starts_at() <= t && t <= self.ends_at()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub id: i64,
    pub am: RegisterNumber,
    pub date: NaiveDate,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedTestRecord {
    pub idum: GroupId,
    pub iduf: GroupId,
    pub am: RegisterNumber,
    pub kind: TestKind,
    pub date: NaiveDate,
    pub percent: f64,
    pub completed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceState {
    Open,
    Submitted,
    Expired,
}

impl InstanceState {
    fn as_str(self) -> &'static str {
        match self {
            InstanceState::Open => "open",
            InstanceState::Submitted => "submitted",
            InstanceState::Expired => "expired",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "open" => Some(InstanceState::Open),
            "submitted" => Some(InstanceState::Submitted),
            "expired" => Some(InstanceState::Expired),
            _ => None,
        }
    }
}

/// One sitting as stored. The answer key is a server-side snapshot taken at
/// start so grading is unaffected by later question edits.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRow {
    pub instance_id: String,
    pub am: RegisterNumber,
    pub kind: TestKind,
    pub mc_group: GroupId,
    pub gf_group: GroupId,
    pub opened_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    pub presented: Vec<PresentedQuestion>,
    pub answer_key: Vec<(QuestionRef, String)>,
    pub state: InstanceState,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultFilter {
    pub am: Option<RegisterNumber>,
    pub kind: Option<TestKind>,
}

fn conv<E: std::error::Error + Send + Sync + 'static>(
    idx: usize,
) -> impl FnOnce(E) -> rusqlite::Error {
    move |e| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    }
}

fn kind_col(row: &Row<'_>, idx: usize) -> rusqlite::Result<TestKind> {
    let s: String = row.get(idx)?;
    s.parse::<TestKind>()
        .map_err(|e| conv(idx)(std::io::Error::other(e)))
}

fn date_col(row: &Row<'_>, idx: usize) -> rusqlite::Result<NaiveDate> {
    let s: String = row.get(idx)?;
    NaiveDate::parse_from_str(&s, "%Y-%m-%d").map_err(conv(idx))
}

fn am_col(row: &Row<'_>, idx: usize) -> rusqlite::Result<RegisterNumber> {
    RegisterNumber::new(row.get(idx)?).map_err(conv(idx))
}

fn completed_row(row: &Row<'_>) -> rusqlite::Result<CompletedTestRecord> {
    Ok(CompletedTestRecord {
        idum: GroupId(row.get(0)?),
        iduf: GroupId(row.get(1)?),
        am: am_col(row, 2)?,
        kind: kind_col(row, 3)?,
        date: date_col(row, 4)?,
        percent: row.get(5)?,
        completed_at: ts_col(row, 6)?,
    })
}

fn schedule_row(row: &Row<'_>) -> rusqlite::Result<ScheduleRecord> {
    let time: String = row.get(3)?;
    Ok(ScheduleRecord {
        id: row.get(0)?,
        kind: kind_col(row, 1)?,
        date: date_col(row, 2)?,
        time: NaiveTime::parse_from_str(&time, "%H:%M:%S").map_err(conv(3))?,
        duration_minutes: row.get(4)?,
    })
}

fn instance_row(row: &Row<'_>) -> rusqlite::Result<InstanceRow> {
    let presented: String = row.get(7)?;
    let key: String = row.get(8)?;
    let state: String = row.get(9)?;
    Ok(InstanceRow {
        instance_id: row.get(0)?,
        am: am_col(row, 1)?,
        kind: kind_col(row, 2)?,
        mc_group: GroupId(row.get(3)?),
        gf_group: GroupId(row.get(4)?),
        opened_at: ts_col(row, 5)?,
        deadline: ts_col(row, 6)?,
        presented: serde_json::from_str(&presented).map_err(conv(7))?,
        answer_key: serde_json::from_str(&key).map_err(conv(8))?,
        state: InstanceState::parse(&state)
            .ok_or_else(|| conv(9)(std::io::Error::other(state.clone())))?,
        percent: row.get(10)?,
    })
}

const COMPLETED_COLS: &str = "IDUM, IDUF, AM, Kind, Date, Percent, CompletedAt";
const INSTANCE_COLS: &str =
    "InstanceId, AM, Kind, IDUM, IDUF, OpenedAt, Deadline, Presented, AnswerKey, State, Percent";

impl StoreTx<'_> {
    /// Writes both groups and returns their ids. An empty group maps to the
    /// reserved [`GroupId::EMPTY`] whose sentinel row already exists.
    pub fn persist_test_groups(
        &self,
        mc: &TestGroup,
        gf: &TestGroup,
        now: DateTime<Utc>,
    ) -> Result<(GroupId, GroupId)> {
        if mc.kind() != QuestionKind::MultipleChoice || gf.kind() != QuestionKind::GapFill {
            return Err(Error::Internal(
                "test groups passed in the wrong order".into(),
            ));
        }
        Ok((self.persist_group(mc, now)?, self.persist_group(gf, now)?))
    }

    fn persist_group(&self, group: &TestGroup, now: DateTime<Utc>) -> Result<GroupId> {
        if group.is_empty() {
            return Ok(GroupId::EMPTY);
        }
        for r in group.refs() {
            if self.get_question(r.kind, r.id)?.is_none() {
                return Err(Error::UnknownQuestion(r.to_string()));
            }
        }
        let (header, rows) = match group.kind() {
            QuestionKind::MultipleChoice => (
                "INSERT INTO user_mult_test_groups (CreatedAt) VALUES (?1)",
                "INSERT INTO user_mult_test (IDUM, Position, IDE) VALUES (?1, ?2, ?3)",
            ),
            QuestionKind::GapFill => (
                "INSERT INTO user_fill_test_groups (CreatedAt) VALUES (?1)",
                "INSERT INTO user_fill_test (IDUF, Position, IDF) VALUES (?1, ?2, ?3)",
            ),
        };
        let conn = self.conn();
        conn.execute(header, [fmt_ts(now)])?;
        let gid = conn.last_insert_rowid();
        let mut stmt = conn.prepare(rows)?;
        for (pos, id) in group.question_ids().iter().enumerate() {
            stmt.execute(params![gid, pos as i64 + 1, id.get()])?;
        }
        Ok(GroupId(gid))
    }

    /// Question ids of a stored group in presentation order.
    pub fn load_group(&self, kind: QuestionKind, id: GroupId) -> Result<Vec<QuestionId>> {
        let sql = match kind {
            QuestionKind::MultipleChoice => {
                "SELECT IDE FROM user_mult_test WHERE IDUM = ?1 AND Position > 0 ORDER BY Position"
            }
            QuestionKind::GapFill => {
                "SELECT IDF FROM user_fill_test WHERE IDUF = ?1 AND Position > 0 ORDER BY Position"
            }
        };
        let mut stmt = self.conn().prepare(sql)?;
        let rows = stmt.query_map([id.0], |r| QuestionId::new(r.get(0)?).map_err(conv(0)))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn group_exists(&self, kind: QuestionKind, id: GroupId) -> Result<bool> {
        let sql = match kind {
            QuestionKind::MultipleChoice => {
                "SELECT EXISTS (SELECT 1 FROM user_mult_test_groups WHERE IDUM = ?1)"
            }
            QuestionKind::GapFill => {
                "SELECT EXISTS (SELECT 1 FROM user_fill_test_groups WHERE IDUF = ?1)"
            }
        };
        Ok(self.conn().query_row(sql, [id.0], |r| r.get(0))?)
    }

    /// Writes a user_complete_test row, plus a history row for final exams.
    #[allow(clippy::too_many_arguments)]
    pub fn record_completed_test(
        &self,
        idum: GroupId,
        iduf: GroupId,
        am: RegisterNumber,
        kind: TestKind,
        date: NaiveDate,
        percent: f64,
        now: DateTime<Utc>,
    ) -> Result<CompletedTestRecord> {
        if !(0.0..=100.0).contains(&percent) {
            return Err(Error::invalid("percent", "must be within [0, 100]"));
        }
        let taken: bool = self.conn().query_row(
            "SELECT EXISTS (SELECT 1 FROM user_complete_test WHERE IDUM = ?1 AND IDUF = ?2 AND AM = ?3)",
            params![idum.0, iduf.0, am.get()],
            |r| r.get(0),
        )?;
        if taken {
            return Err(Error::DuplicateKey(format!(
                "user_complete_test ({idum}, {iduf}, {am})"
            )));
        }
        let date_text = date.format("%Y-%m-%d").to_string();
        self.conn().execute(
            &format!("INSERT INTO user_complete_test ({COMPLETED_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)"),
            params![idum.0, iduf.0, am.get(), kind.to_string(), date_text, percent, fmt_ts(now)],
        )?;
        if kind.is_final() {
            self.conn().execute(
                "INSERT INTO history (AM, Date, Percent) VALUES (?1, ?2, ?3)",
                params![am.get(), date_text, percent],
            )?;
        }
        Ok(CompletedTestRecord {
            idum,
            iduf,
            am,
            kind,
            date,
            percent,
            completed_at: now,
        })
    }

    /// Completed tests, newest first.
    pub fn completed_tests(&self, filter: &ResultFilter) -> Result<Vec<CompletedTestRecord>> {
        let mut stmt = self.conn().prepare(&format!(
            "SELECT {COMPLETED_COLS} FROM user_complete_test
             WHERE (?1 IS NULL OR AM = ?1) AND (?2 IS NULL OR Kind = ?2)
             ORDER BY Date DESC, CompletedAt DESC, IDUM DESC, IDUF DESC"
        ))?;
        let rows = stmt.query_map(
            params![
                filter.am.map(|a| a.get()),
                filter.kind.map(|k| k.to_string())
            ],
            completed_row,
        )?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn history(&self, am: Option<RegisterNumber>) -> Result<Vec<HistoryRecord>> {
        let mut stmt = self
            .conn()
            .prepare("SELECT ID_GEN, AM, Date, Percent FROM history WHERE (?1 IS NULL OR AM = ?1) ORDER BY ID_GEN")?;
        let rows = stmt.query_map([am.map(|a| a.get())], |r| {
            Ok(HistoryRecord {
                id: r.get(0)?,
                am: am_col(r, 1)?,
                date: date_col(r, 2)?,
                percent: r.get(3)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Replaces the schedule of `kind`, keeping at most one per kind.
    pub fn upsert_schedule(
        &self,
        kind: TestKind,
        date: NaiveDate,
        time: NaiveTime,
        duration_minutes: u32,
    ) -> Result<ScheduleRecord> {
        if duration_minutes == 0 {
            return Err(Error::InvalidSchedule(
                "duration must be at least one minute".into(),
            ));
        }
        let lecture = match kind {
            TestKind::LectureTest(l) => {
                self.require_lecture(l)?;
                Some(l.get())
            }
            TestKind::FinalExam => None,
        };
        self.conn().execute(
            "INSERT INTO misc (Kind, IDD, Date, Time, DurationMinutes) VALUES (?1, ?2, ?3, ?4, ?5)
             ON CONFLICT (Kind) DO UPDATE SET Date = excluded.Date, Time = excluded.Time,
                 DurationMinutes = excluded.DurationMinutes",
            params![
                kind.to_string(),
                lecture,
                date.format("%Y-%m-%d").to_string(),
                time.format("%H:%M:%S").to_string(),
                duration_minutes
            ],
        )?;
        Ok(self.get_schedule(kind)?.expect("row just written"))
    }

    pub fn get_schedule(&self, kind: TestKind) -> Result<Option<ScheduleRecord>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT IDMisc, Kind, Date, Time, DurationMinutes FROM misc WHERE Kind = ?1",
                [kind.to_string()],
                schedule_row,
            )
            .optional()?)
    }

    pub fn list_schedules(&self) -> Result<Vec<ScheduleRecord>> {
        let mut stmt = self.conn().prepare(
            "SELECT IDMisc, Kind, Date, Time, DurationMinutes FROM misc ORDER BY IDMisc",
        )?;
        let rows = stmt.query_map([], schedule_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn insert_instance(&self, row: &InstanceRow) -> Result<()> {
        let open_exists: bool = self.conn().query_row(
            "SELECT EXISTS (SELECT 1 FROM test_instances WHERE AM = ?1 AND Kind = ?2 AND State = 'open')",
            params![row.am.get(), row.kind.to_string()],
            |r| r.get(0),
        )?;
        if open_exists {
            return Err(Error::AlreadyOpen);
        }
        self.conn().execute(
            &format!("INSERT INTO test_instances ({INSTANCE_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)"),
            params![
                row.instance_id,
                row.am.get(),
                row.kind.to_string(),
                row.mc_group.0,
                row.gf_group.0,
                fmt_ts(row.opened_at),
                fmt_ts(row.deadline),
                serde_json::to_string(&row.presented)?,
                serde_json::to_string(&row.answer_key)?,
                row.state.as_str(),
                row.percent
            ],
        )
        .map_err(|e| match Error::from(e) {
            // The partial unique index (AM, Kind) WHERE open.
            Error::DuplicateKey(_) => Error::AlreadyOpen,
            other => other,
        })?;
        Ok(())
    }

    pub fn get_instance(&self, id: &str) -> Result<Option<InstanceRow>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT {INSTANCE_COLS} FROM test_instances WHERE InstanceId = ?1"),
                [id],
                instance_row,
            )
            .optional()?)
    }

    pub fn open_instance(&self, am: RegisterNumber, kind: TestKind) -> Result<Option<InstanceRow>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT {INSTANCE_COLS} FROM test_instances WHERE AM = ?1 AND Kind = ?2 AND State = 'open'"),
                params![am.get(), kind.to_string()],
                instance_row,
            )
            .optional()?)
    }

    pub fn all_instances(&self) -> Result<Vec<InstanceRow>> {
        let mut stmt = self.conn().prepare(&format!(
            "SELECT {INSTANCE_COLS} FROM test_instances ORDER BY OpenedAt, InstanceId"
        ))?;
        let rows = stmt.query_map([], instance_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Closes an open instance. Fails if it is no longer open.
    pub fn close_instance(&self, id: &str, state: InstanceState, percent: f64) -> Result<()> {
        let n = self.conn().execute(
            "UPDATE test_instances SET State = ?1, Percent = ?2 WHERE InstanceId = ?3 AND State = 'open'",
            params![state.as_str(), percent, id],
        )?;
        if n == 0 {
            return Err(Error::AlreadySubmitted);
        }
        Ok(())
    }
}
