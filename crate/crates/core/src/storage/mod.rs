//! Transactional persistence on SQLite.
//!
//! A single connection sits behind a mutex, so every [`StoreTx`] is
//! serialized with respect to the others. Foreign keys are enforced by the
//! engine; cross-table rules the engine cannot express (identity uniqueness
//! across `register`/`users`/`admins`, group question references) are checked
//! inside the same transaction that writes.

mod identity;
mod library;
mod mail;
mod migrate;
mod objects;
mod search;
mod sittings;

use std::fmt::Write as _;
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, NaiveDateTime, Utc};
use rusqlite::{Connection, OpenFlags};

use crate::error::{Error, Result};

pub use identity::{AdminRecord, PendingRegistration, SessionRecord, UserRecord};
pub use library::{CascadeReport, LectureRecord, StoredFileRecord};
pub use mail::{ChatRecord, ContactRecord, OutboxRecord, OutboxStatus};
pub use migrate::{embedded_migrations, Migration};
pub use objects::ObjectStore;
pub use search::{paginate, Page, SearchField, SearchScope};
pub use sittings::{
    CompletedTestRecord, HistoryRecord, InstanceRow, InstanceState, ResultFilter, ScheduleRecord,
};

pub struct Store {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

impl Store {
    /// Opens a database file, or an in-memory database for `":memory:"`.
    pub fn open(location: &str) -> Result<Self> {
        let conn = if location == ":memory:" {
            Connection::open_in_memory()
        } else {
            Connection::open_with_flags(
                location,
                OpenFlags::SQLITE_OPEN_READ_WRITE
                    | OpenFlags::SQLITE_OPEN_CREATE
                    | OpenFlags::SQLITE_OPEN_NO_MUTEX,
            )
        }
        .map_err(|e| Error::Storage(format!("cannot open database {location:?}: {e}")))?;
        conn.execute_batch("PRAGMA foreign_keys = ON; PRAGMA busy_timeout = 5000;")?;
        if location != ":memory:" {
            conn.query_row("PRAGMA journal_mode = WAL", [], |_| Ok(()))?;
        }
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::open(":memory:")
    }

    /// Opens and applies every embedded migration.
    pub fn open_migrated(location: &str) -> Result<Self> {
        let store = Self::open(location)?;
        store.migrate(&embedded_migrations())?;
        Ok(store)
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        // A panic inside a transaction leaves the guard poisoned, but
        // StoreTx's Drop has already rolled back, so the connection is clean.
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn begin(&self) -> Result<StoreTx<'_>> {
        let conn = self.lock();
        conn.execute_batch("BEGIN IMMEDIATE")?;
        Ok(StoreTx {
            conn,
            finished: false,
        })
    }

    /// Runs `f` in a transaction: commit on `Ok`, roll back on `Err`.
    pub fn transaction<T>(&self, f: impl FnOnce(&StoreTx<'_>) -> Result<T>) -> Result<T> {
        let tx = self.begin()?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    pub fn migrate(&self, migrations: &[Migration]) -> Result<Vec<Migration>> {
        migrate::apply(&mut self.lock(), migrations)
    }

    pub fn pending_migrations(&self, migrations: &[Migration]) -> Result<Vec<i64>> {
        migrate::pending(&self.lock(), migrations)
    }

    /// A deterministic text rendering of every table, used to check that
    /// reads don't write and that secrets never land in storage.
    pub fn dump(&self) -> Result<String> {
        let conn = self.lock();
        let mut tables = Vec::new();
        {
            let mut stmt =
                conn.prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name")?;
            let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
            for t in rows {
                tables.push(t?);
            }
        }
        let mut out = String::new();
        for table in tables {
            let _ = writeln!(out, "## {table}");
            let mut stmt = conn.prepare(&format!("SELECT * FROM \"{table}\" ORDER BY 1, 2"))?;
            let cols = stmt.column_count();
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                let mut cells = Vec::with_capacity(cols);
                for i in 0..cols {
                    let v: rusqlite::types::Value = row.get(i)?;
                    cells.push(match v {
                        rusqlite::types::Value::Null => "NULL".to_string(),
                        rusqlite::types::Value::Integer(n) => n.to_string(),
                        rusqlite::types::Value::Real(x) => x.to_string(),
                        rusqlite::types::Value::Text(s) => s,
                        rusqlite::types::Value::Blob(b) => hex::encode(b),
                    });
                }
                let _ = writeln!(out, "{}", cells.join(" | "));
            }
        }
        Ok(out)
    }

    pub fn integrity_report(&self) -> Result<IntegrityReport> {
        self.transaction(|tx| tx.integrity_report())
    }
}

/// An open transaction holding the connection. Dropping it without
/// [`commit`](Self::commit) rolls back.
pub struct StoreTx<'a> {
    conn: MutexGuard<'a, Connection>,
    finished: bool,
}

impl StoreTx<'_> {
    pub fn commit(mut self) -> Result<()> {
        self.finished = true;
        self.conn.execute_batch("COMMIT")?;
        Ok(())
    }

    pub fn rollback(mut self) -> Result<()> {
        self.finished = true;
        self.conn.execute_batch("ROLLBACK")?;
        Ok(())
    }

    pub(crate) fn conn(&self) -> &Connection {
        &self.conn
    }

    pub fn integrity_report(&self) -> Result<IntegrityReport> {
        let conn = self.conn();
        let mut report = IntegrityReport::default();
        {
            let mut stmt = conn.prepare("PRAGMA foreign_key_check")?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                let table: String = row.get(0)?;
                let parent: String = row.get(2)?;
                report.orphans.push(format!("{table} -> {parent}"));
            }
        }
        let dup_triples: i64 = conn.query_row(
            "SELECT COUNT(*) FROM (SELECT IDUM, IDUF, AM FROM user_complete_test GROUP BY 1, 2, 3 HAVING COUNT(*) > 1)",
            [],
            |r| r.get(0),
        )?;
        report.duplicate_triples = dup_triples as usize;
        let dup_pairs: i64 = conn.query_row(
            "SELECT (SELECT COUNT(*) FROM (SELECT 1 FROM user_mult_test WHERE IDE IS NOT NULL GROUP BY IDUM, IDE HAVING COUNT(*) > 1))
                  + (SELECT COUNT(*) FROM (SELECT 1 FROM user_fill_test WHERE IDF IS NOT NULL GROUP BY IDUF, IDF HAVING COUNT(*) > 1))",
            [],
            |r| r.get(0),
        )?;
        report.duplicate_group_pairs = dup_pairs as usize;
        // AM, username and email must each live in at most one identity table.
        let cross: i64 = conn.query_row(
            "SELECT
               (SELECT COUNT(*) FROM users u JOIN register r ON r.AM = u.AM)
             + (SELECT COUNT(*) FROM (SELECT 1 FROM (SELECT Username FROM users UNION ALL SELECT Username FROM register UNION ALL SELECT Username FROM admins)
                  GROUP BY Username COLLATE NOCASE HAVING COUNT(*) > 1))
             + (SELECT COUNT(*) FROM (SELECT 1 FROM (SELECT Email FROM users UNION ALL SELECT Email FROM register UNION ALL SELECT Email FROM admins)
                  GROUP BY Email COLLATE NOCASE HAVING COUNT(*) > 1))",
            [],
            |r| r.get(0),
        )?;
        report.identity_collisions = cross as usize;
        let dangling_sessions: i64 = conn.query_row(
            "SELECT COUNT(*) FROM sessions s WHERE
               (s.PrincipalKind = 'user' AND NOT EXISTS (SELECT 1 FROM users u WHERE u.AM = s.PrincipalId))
            OR (s.PrincipalKind = 'admin' AND NOT EXISTS (SELECT 1 FROM admins a WHERE a.IDadm = s.PrincipalId))",
            [],
            |r| r.get(0),
        )?;
        if dangling_sessions > 0 {
            report
                .orphans
                .push(format!("sessions -> principal ({dangling_sessions})"));
        }
        Ok(report)
    }
}

impl Drop for StoreTx<'_> {
    fn drop(&mut self) {
        if !self.finished {
            let _ = self.conn.execute_batch("ROLLBACK");
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IntegrityReport {
    pub orphans: Vec<String>,
    pub duplicate_triples: usize,
    pub duplicate_group_pairs: usize,
    pub identity_collisions: usize,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.orphans.is_empty()
            && self.duplicate_triples == 0
            && self.duplicate_group_pairs == 0
            && self.identity_collisions == 0
    }
}

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.6fZ";

/// Fixed-width UTC timestamps so text order is time order.
pub(crate) fn fmt_ts(t: DateTime<Utc>) -> String {
    t.format(TS_FORMAT).to_string()
}

pub(crate) fn parse_ts(s: &str) -> rusqlite::Result<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, TS_FORMAT)
        .map(|n| n.and_utc())
        .map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
        })
}

pub(crate) fn ts_col(row: &rusqlite::Row<'_>, idx: usize) -> rusqlite::Result<DateTime<Utc>> {
    parse_ts(&row.get::<_, String>(idx)?)
}
