use std::path::Path;

use rusqlite::{params, Connection, OptionalExtension};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Migration {
    pub version: i64,
    pub name: String,
    pub sql: String,
}

impl Migration {
    pub fn new(version: i64, name: impl Into<String>, sql: impl Into<String>) -> Self {
        Self {
            version,
            name: name.into(),
            sql: sql.into(),
        }
    }

    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.sql.as_bytes()))
    }

    /// Reads `NNNN_name.sql` files from a directory, sorted by version.
    pub fn load_dir(dir: &Path) -> Result<Vec<Migration>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("sql") {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default();
            let (num, name) = stem.split_once('_').ok_or_else(|| {
                Error::Config(format!(
                    "migration file {} lacks NNNN_ prefix",
                    path.display()
                ))
            })?;
            let version = num.parse::<i64>().map_err(|_| {
                Error::Config(format!(
                    "migration file {} has a non-numeric version",
                    path.display()
                ))
            })?;
            out.push(Migration::new(
                version,
                name,
                std::fs::read_to_string(&path)?,
            ));
        }
        out.sort_by_key(|m| m.version);
        Ok(out)
    }
}

pub fn embedded_migrations() -> Vec<Migration> {
    vec![Migration::new(
        1,
        "initial_schema",
        include_str!("../../migrations/0001_initial_schema.sql"),
    )]
}

fn ensure_table(conn: &Connection) -> Result<()> {
    conn.execute_batch(
        "CREATE TABLE IF NOT EXISTS schema_migrations (
            version INTEGER PRIMARY KEY,
            name TEXT NOT NULL,
            checksum TEXT NOT NULL
        )",
    )?;
    Ok(())
}

fn recorded(conn: &Connection, version: i64) -> Result<Option<String>> {
    Ok(conn
        .query_row(
            "SELECT checksum FROM schema_migrations WHERE version = ?1",
            [version],
            |r| r.get(0),
        )
        .optional()?)
}

pub(super) fn pending(conn: &Connection, migrations: &[Migration]) -> Result<Vec<i64>> {
    ensure_table(conn)?;
    let mut out = Vec::new();
    for m in migrations {
        match recorded(conn, m.version)? {
            Some(sum) if sum != m.checksum() => {
                return Err(Error::MigrationConflict { version: m.version })
            }
            Some(_) => {}
            None => out.push(m.version),
        }
    }
    Ok(out)
}

/// Applies unapplied migrations in version order, each in its own
/// transaction. Returns the ones applied by this call.
pub(super) fn apply(conn: &mut Connection, migrations: &[Migration]) -> Result<Vec<Migration>> {
    let mut sorted = migrations.to_vec();
    sorted.sort_by_key(|m| m.version);
    // Checksums are verified for everything before anything runs.
    let todo = pending(conn, &sorted)?;
    let mut applied = Vec::new();
    for m in sorted.into_iter().filter(|m| todo.contains(&m.version)) {
        let tx = conn.transaction()?;
        tx.execute_batch(&m.sql).map_err(|e| {
            Error::Storage(format!("migration {} ({}) failed: {e}", m.version, m.name))
        })?;
        tx.execute(
            "INSERT INTO schema_migrations (version, name, checksum) VALUES (?1, ?2, ?3)",
            params![m.version, m.name, m.checksum()],
        )?;
        tx.commit()?;
        log::info!("applied migration {} {}", m.version, m.name);
        applied.push(m);
    }
    Ok(applied)
}
