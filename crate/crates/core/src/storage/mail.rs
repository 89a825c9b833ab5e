use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Timelike, Utc};
use rusqlite::{params, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use super::{fmt_ts, ts_col, StoreTx};
use crate::domain::{AdminId, Principal, RegisterNumber};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub id: i64,
    pub sender: Principal,
    pub sender_name: String,
    pub body: String,
    pub sent_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub id: i64,
    pub am: RegisterNumber,
    pub name: String,
    pub email: String,
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutboxStatus {
    Pending,
    Sent,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxRecord {
    pub id: i64,
    pub recipient: String,
    pub subject: String,
    pub body: String,
    pub enqueued_at: DateTime<Utc>,
    pub status: OutboxStatus,
    pub attempts: u32,
    pub last_error: Option<String>,
}

fn bad(idx: usize, what: String) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(
        idx,
        rusqlite::types::Type::Text,
        Box::new(std::io::Error::other(what)),
    )
}

fn chat_row(row: &Row<'_>) -> rusqlite::Result<ChatRecord> {
    let kind: String = row.get(1)?;
    let id: i64 = row.get(2)?;
    let sender = match kind.as_str() {
        "user" => Principal::User(RegisterNumber::new(id).map_err(|e| bad(2, e.to_string()))?),
        _ => Principal::Admin(AdminId::new(id).map_err(|e| bad(2, e.to_string()))?),
    };
    Ok(ChatRecord {
        id: row.get(0)?,
        sender,
        sender_name: row.get::<_, Option<String>>(5)?.unwrap_or_default(),
        body: row.get(3)?,
        sent_at: ts_col(row, 4)?,
    })
}

fn outbox_row(row: &Row<'_>) -> rusqlite::Result<OutboxRecord> {
    let status: String = row.get(5)?;
    Ok(OutboxRecord {
        id: row.get(0)?,
        recipient: row.get(1)?,
        subject: row.get(2)?,
        body: row.get(3)?,
        enqueued_at: ts_col(row, 4)?,
        status: match status.as_str() {
            "pending" => OutboxStatus::Pending,
            "sent" => OutboxStatus::Sent,
            "failed" => OutboxStatus::Failed,
            other => return Err(bad(5, other.to_string())),
        },
        attempts: row.get(6)?,
        last_error: row.get(7)?,
    })
}

const CHAT_SELECT: &str = "SELECT m.ID, m.SenderKind, m.SenderId, m.Body, m.SentAt,
        CASE m.SenderKind
          WHEN 'user' THEN (SELECT Name || ' ' || Surname FROM users WHERE AM = m.SenderId)
          ELSE (SELECT Name || ' ' || Surname FROM admins WHERE IDadm = m.SenderId)
        END
     FROM messages m";
const OUTBOX_COLS: &str = "ID, Recipient, Subject, Body, EnqueuedAt, Status, Attempts, LastError";

impl StoreTx<'_> {
    pub fn insert_chat(
        &self,
        sender: Principal,
        body: &str,
        now: DateTime<Utc>,
    ) -> Result<ChatRecord> {
        self.conn().execute(
            "INSERT INTO messages (SenderKind, SenderId, Body, SentAt) VALUES (?1, ?2, ?3, ?4)",
            params![sender.kind(), sender.raw_id(), body, fmt_ts(now)],
        )?;
        let id = self.conn().last_insert_rowid();
        Ok(self
            .conn()
            .query_row(&format!("{CHAT_SELECT} WHERE m.ID = ?1"), [id], chat_row)?)
    }

    /// Messages with id greater than `after_id`, ascending, at most `limit`.
    pub fn fetch_chat(&self, after_id: i64, limit: usize) -> Result<Vec<ChatRecord>> {
        let mut stmt = self.conn().prepare(&format!(
            "{CHAT_SELECT} WHERE m.ID > ?1 ORDER BY m.ID LIMIT ?2"
        ))?;
        let rows = stmt.query_map(params![after_id, limit as i64], chat_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn insert_contact(
        &self,
        am: RegisterNumber,
        name: &str,
        email: &str,
        body: &str,
        now: DateTime<Utc>,
    ) -> Result<ContactRecord> {
        let date = now.date_naive();
        let time =
            NaiveTime::from_num_seconds_from_midnight_opt(now.num_seconds_from_midnight(), 0)
                .expect("valid time of day");
        self.conn().execute(
            "INSERT INTO contact (AM, Name, Email, Date, Time, Body) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                am.get(),
                name,
                email,
                date.format("%Y-%m-%d").to_string(),
                time.format("%H:%M:%S").to_string(),
                body
            ],
        )?;
        Ok(ContactRecord {
            id: self.conn().last_insert_rowid(),
            am,
            name: name.to_owned(),
            email: email.to_owned(),
            date,
            time,
            body: body.to_owned(),
        })
    }

    pub fn list_contacts(&self) -> Result<Vec<ContactRecord>> {
        let mut stmt = self.conn().prepare(
            "SELECT ID, AM, Name, Email, Date, Time, Body FROM contact ORDER BY ID DESC",
        )?;
        let rows = stmt.query_map([], |r| {
            let date: String = r.get(4)?;
            let time: String = r.get(5)?;
            Ok(ContactRecord {
                id: r.get(0)?,
                am: RegisterNumber::new(r.get(1)?).map_err(|e| bad(1, e.to_string()))?,
                name: r.get(2)?,
                email: r.get(3)?,
                date: NaiveDate::parse_from_str(&date, "%Y-%m-%d")
                    .map_err(|e| bad(4, e.to_string()))?,
                time: NaiveTime::parse_from_str(&time, "%H:%M:%S")
                    .map_err(|e| bad(5, e.to_string()))?,
                body: r.get(6)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Queues an email. `sensitive` bodies are blanked once delivered.
    pub fn enqueue_email(
        &self,
        recipient: &str,
        subject: &str,
        body: &str,
        sensitive: bool,
        now: DateTime<Utc>,
    ) -> Result<i64> {
        self.conn().execute(
            "INSERT INTO outbox (Recipient, Subject, Body, EnqueuedAt, Sensitive) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![recipient, subject, body, fmt_ts(now), sensitive],
        )?;
        Ok(self.conn().last_insert_rowid())
    }

    pub fn pending_outbox(&self) -> Result<Vec<OutboxRecord>> {
        let mut stmt = self.conn().prepare(&format!(
            "SELECT {OUTBOX_COLS} FROM outbox WHERE Status = 'pending' ORDER BY ID"
        ))?;
        let rows = stmt.query_map([], outbox_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn all_outbox(&self) -> Result<Vec<OutboxRecord>> {
        let mut stmt = self
            .conn()
            .prepare(&format!("SELECT {OUTBOX_COLS} FROM outbox ORDER BY ID"))?;
        let rows = stmt.query_map([], outbox_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn mark_sent(&self, id: i64, now: DateTime<Utc>) -> Result<()> {
        self.conn().execute(
            "UPDATE outbox SET Status = 'sent', Attempts = Attempts + 1, SentAt = ?1, LastError = NULL,
                 Body = CASE WHEN Sensitive = 1 THEN '' ELSE Body END
             WHERE ID = ?2 AND Status = 'pending'",
            params![fmt_ts(now), id],
        )?;
        Ok(())
    }

    /// Records a failed attempt; the message turns `failed` once it has used
    /// `max_attempts`. Returns the new status.
    pub fn mark_attempt_failed(
        &self,
        id: i64,
        error: &str,
        max_attempts: u32,
    ) -> Result<OutboxStatus> {
        self.conn().execute(
            "UPDATE outbox SET Attempts = Attempts + 1, LastError = ?1,
                 Status = CASE WHEN Attempts + 1 >= ?2 THEN 'failed' ELSE 'pending' END
             WHERE ID = ?3 AND Status = 'pending'",
            params![error, max_attempts, id],
        )?;
        let status: String =
            self.conn()
                .query_row("SELECT Status FROM outbox WHERE ID = ?1", [id], |r| {
                    r.get(0)
                })?;
        Ok(if status == "failed" {
            OutboxStatus::Failed
        } else {
            OutboxStatus::Pending
        })
    }

    /// Takes a named advisory lock. A holder older than `stale_after` is
    /// presumed dead and replaced.
    pub fn try_lock(
        &self,
        name: &str,
        holder: &str,
        now: DateTime<Utc>,
        stale_after: Duration,
    ) -> Result<bool> {
        let current: Option<(String, DateTime<Utc>)> = self
            .conn()
            .query_row(
                "SELECT Holder, AcquiredAt FROM advisory_locks WHERE Name = ?1",
                [name],
                |r| Ok((r.get(0)?, ts_col(r, 1)?)),
            )
            .optional()?;
        match current {
            Some((_, at)) if now - at < stale_after => Ok(false),
            _ => {
                self.conn().execute(
                    "INSERT INTO advisory_locks (Name, Holder, AcquiredAt) VALUES (?1, ?2, ?3)
                     ON CONFLICT (Name) DO UPDATE SET Holder = excluded.Holder, AcquiredAt = excluded.AcquiredAt",
                    params![name, holder, fmt_ts(now)],
                )?;
                Ok(true)
            }
        }
    }

    pub fn unlock(&self, name: &str, holder: &str) -> Result<()> {
        let n = self.conn().execute(
            "DELETE FROM advisory_locks WHERE Name = ?1 AND Holder = ?2",
            params![name, holder],
        )?;
        if n == 0 {
            return Err(Error::Internal(format!("lock {name} not held by {holder}")));
        }
        Ok(())
    }
}
