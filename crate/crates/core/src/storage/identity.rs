use chrono::{DateTime, Utc};
use rusqlite::{params, OptionalExtension, Row};

use super::{fmt_ts, ts_col, StoreTx};
use crate::domain::{AdminId, Credential, GroupId, PersonProfile, Principal, RegisterNumber};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub am: RegisterNumber,
    pub profile: PersonProfile,
    pub credential: Credential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingRegistration {
    pub am: RegisterNumber,
    pub profile: PersonProfile,
    pub credential: Credential,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdminRecord {
    pub id: AdminId,
    pub profile: PersonProfile,
    pub credential: Credential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub principal: Principal,
    pub expires_at: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
}

const PERSON_COLS: &str = "Name, Surname, Username, Password, Salt, Email, Department";

fn person(row: &Row<'_>, offset: usize) -> rusqlite::Result<(PersonProfile, Credential)> {
    Ok((
        PersonProfile {
            name: row.get(offset)?,
            surname: row.get(offset + 1)?,
            username: row.get(offset + 2)?,
            email: row.get(offset + 5)?,
            department: row.get(offset + 6)?,
        },
        Credential {
            password_digest: row.get(offset + 3)?,
            salt: row.get(offset + 4)?,
        },
    ))
}

fn register_number(row: &Row<'_>, idx: usize) -> rusqlite::Result<RegisterNumber> {
    let v: i64 = row.get(idx)?;
    RegisterNumber::new(v).map_err(|e| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Integer, Box::new(e))
    })
}

fn user_row(row: &Row<'_>) -> rusqlite::Result<UserRecord> {
    let (profile, credential) = person(row, 1)?;
    Ok(UserRecord {
        am: register_number(row, 0)?,
        profile,
        credential,
    })
}

fn admin_row(row: &Row<'_>) -> rusqlite::Result<AdminRecord> {
    let (profile, credential) = person(row, 1)?;
    let id: i64 = row.get(0)?;
    Ok(AdminRecord {
        id: AdminId::new(id).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(
                0,
                rusqlite::types::Type::Integer,
                Box::new(e),
            )
        })?,
        profile,
        credential,
    })
}

impl StoreTx<'_> {
    /// Checks AM, username and email against register, users and admins.
    /// `except` excludes the caller's own row when editing.
    pub fn identity_conflict(
        &self,
        am: Option<RegisterNumber>,
        username: Option<&str>,
        email: Option<&str>,
        except: Option<Principal>,
    ) -> Result<()> {
        let (skip_user, skip_admin) = match except {
            Some(Principal::User(am)) => (am.get(), 0),
            Some(Principal::Admin(id)) => (0, id.get()),
            None => (0, 0),
        };
        let conn = self.conn();
        if let Some(am) = am {
            let n: i64 = conn.query_row(
                "SELECT (SELECT COUNT(*) FROM users WHERE AM = ?1 AND AM != ?2) + (SELECT COUNT(*) FROM register WHERE AM = ?1)",
                params![am.get(), skip_user],
                |r| r.get(0),
            )?;
            if n > 0 {
                return Err(Error::DuplicateRegisterNumber);
            }
        }
        let taken = |col: &str, value: &str| -> Result<bool> {
            let sql = format!(
                "SELECT (SELECT COUNT(*) FROM users WHERE {col} = ?1 AND AM != ?2)
                      + (SELECT COUNT(*) FROM register WHERE {col} = ?1)
                      + (SELECT COUNT(*) FROM admins WHERE {col} = ?1 AND IDadm != ?3)"
            );
            let n: i64 =
                conn.query_row(&sql, params![value, skip_user, skip_admin], |r| r.get(0))?;
            Ok(n > 0)
        };
        if let Some(u) = username {
            if taken("Username", u)? {
                return Err(Error::DuplicateUsername);
            }
        }
        if let Some(e) = email {
            if taken("Email", e)? {
                return Err(Error::DuplicateEmail);
            }
        }
        Ok(())
    }

    pub fn insert_registration(&self, reg: &PendingRegistration) -> Result<()> {
        self.identity_conflict(
            Some(reg.am),
            Some(&reg.profile.username),
            Some(&reg.profile.email),
            None,
        )?;
        let p = &reg.profile;
        self.conn().execute(
            &format!("INSERT INTO register (AM, {PERSON_COLS}, SubmittedAt) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)"),
            params![
                reg.am.get(),
                p.name,
                p.surname,
                p.username,
                reg.credential.password_digest,
                reg.credential.salt,
                p.email,
                p.department,
                fmt_ts(reg.submitted_at)
            ],
        )?;
        Ok(())
    }

    pub fn list_registrations(&self) -> Result<Vec<PendingRegistration>> {
        let mut stmt = self.conn().prepare(&format!(
            "SELECT AM, {PERSON_COLS}, SubmittedAt FROM register ORDER BY AM"
        ))?;
        let rows = stmt.query_map([], |row| {
            let (profile, credential) = person(row, 1)?;
            Ok(PendingRegistration {
                am: register_number(row, 0)?,
                profile,
                credential,
                submitted_at: ts_col(row, 8)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Moves a pending row into users verbatim. `None` when nothing was pending.
    pub fn approve_registration(&self, am: RegisterNumber) -> Result<Option<UserRecord>> {
        let moved = self.conn().execute(
            &format!("INSERT INTO users (AM, {PERSON_COLS}) SELECT AM, {PERSON_COLS} FROM register WHERE AM = ?1"),
            [am.get()],
        )?;
        if moved == 0 {
            return Ok(None);
        }
        self.conn()
            .execute("DELETE FROM register WHERE AM = ?1", [am.get()])?;
        self.get_user(am)
    }

    pub fn delete_registration(&self, am: RegisterNumber) -> Result<bool> {
        Ok(self
            .conn()
            .execute("DELETE FROM register WHERE AM = ?1", [am.get()])?
            > 0)
    }

    pub fn insert_admin(
        &self,
        profile: &PersonProfile,
        credential: &Credential,
    ) -> Result<AdminId> {
        self.identity_conflict(None, Some(&profile.username), Some(&profile.email), None)?;
        self.conn().execute(
            &format!("INSERT INTO admins ({PERSON_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)"),
            params![
                profile.name,
                profile.surname,
                profile.username,
                credential.password_digest,
                credential.salt,
                profile.email,
                profile.department
            ],
        )?;
        Ok(AdminId::new(self.conn().last_insert_rowid())?)
    }

    pub fn get_user(&self, am: RegisterNumber) -> Result<Option<UserRecord>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT AM, {PERSON_COLS} FROM users WHERE AM = ?1"),
                [am.get()],
                user_row,
            )
            .optional()?)
    }

    pub fn user_by_username(&self, username: &str) -> Result<Option<UserRecord>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT AM, {PERSON_COLS} FROM users WHERE Username = ?1"),
                [username],
                user_row,
            )
            .optional()?)
    }

    pub fn list_users(&self) -> Result<Vec<UserRecord>> {
        let mut stmt = self
            .conn()
            .prepare(&format!("SELECT AM, {PERSON_COLS} FROM users ORDER BY AM"))?;
        let rows = stmt.query_map([], user_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn get_admin(&self, id: AdminId) -> Result<Option<AdminRecord>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT IDadm, {PERSON_COLS} FROM admins WHERE IDadm = ?1"),
                [id.get()],
                admin_row,
            )
            .optional()?)
    }

    pub fn admin_by_username(&self, username: &str) -> Result<Option<AdminRecord>> {
        Ok(self
            .conn()
            .query_row(
                &format!("SELECT IDadm, {PERSON_COLS} FROM admins WHERE Username = ?1"),
                [username],
                admin_row,
            )
            .optional()?)
    }

    pub fn count_admins(&self) -> Result<usize> {
        let n: i64 = self
            .conn()
            .query_row("SELECT COUNT(*) FROM admins", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Self-service update of the three user-editable columns.
    pub fn update_user_self(
        &self,
        am: RegisterNumber,
        username: Option<&str>,
        email: Option<&str>,
        credential: Option<&Credential>,
    ) -> Result<()> {
        let conn = self.conn();
        if let Some(u) = username {
            conn.execute(
                "UPDATE users SET Username = ?1 WHERE AM = ?2",
                params![u, am.get()],
            )?;
        }
        if let Some(e) = email {
            conn.execute(
                "UPDATE users SET Email = ?1 WHERE AM = ?2",
                params![e, am.get()],
            )?;
        }
        if let Some(c) = credential {
            conn.execute(
                "UPDATE users SET Password = ?1, Salt = ?2 WHERE AM = ?3",
                params![c.password_digest, c.salt, am.get()],
            )?;
        }
        Ok(())
    }

    /// Admin update of AM / name / surname. An AM change cascades through
    /// every referencing table: FK-declared ones by the engine, sessions and
    /// chat messages here.
    pub fn update_user_admin(
        &self,
        am: RegisterNumber,
        new_am: Option<RegisterNumber>,
        name: Option<&str>,
        surname: Option<&str>,
    ) -> Result<RegisterNumber> {
        let conn = self.conn();
        if let Some(n) = name {
            conn.execute(
                "UPDATE users SET Name = ?1 WHERE AM = ?2",
                params![n, am.get()],
            )?;
        }
        if let Some(s) = surname {
            conn.execute(
                "UPDATE users SET Surname = ?1 WHERE AM = ?2",
                params![s, am.get()],
            )?;
        }
        match new_am {
            Some(new) if new != am => {
                conn.execute(
                    "UPDATE users SET AM = ?1 WHERE AM = ?2",
                    params![new.get(), am.get()],
                )?;
                conn.execute(
                    "UPDATE sessions SET PrincipalId = ?1 WHERE PrincipalKind = 'user' AND PrincipalId = ?2",
                    params![new.get(), am.get()],
                )?;
                conn.execute(
                    "UPDATE messages SET SenderId = ?1 WHERE SenderKind = 'user' AND SenderId = ?2",
                    params![new.get(), am.get()],
                )?;
                Ok(new)
            }
            _ => Ok(am),
        }
    }

    pub fn set_user_credential(&self, am: RegisterNumber, credential: &Credential) -> Result<()> {
        self.update_user_self(am, None, None, Some(credential))
    }

    /// Removes a user with everything hanging off them: history, completed
    /// tests, open instances, the groups those referenced, contact messages,
    /// chat messages and sessions.
    pub fn delete_user(&self, am: RegisterNumber) -> Result<bool> {
        let conn = self.conn();
        let mut mc_groups: Vec<i64> = Vec::new();
        let mut gf_groups: Vec<i64> = Vec::new();
        {
            let mut stmt = conn.prepare(
                "SELECT IDUM, IDUF FROM user_complete_test WHERE AM = ?1
                 UNION SELECT IDUM, IDUF FROM test_instances WHERE AM = ?1",
            )?;
            let rows = stmt.query_map([am.get()], |r| {
                Ok((r.get::<_, i64>(0)?, r.get::<_, i64>(1)?))
            })?;
            for row in rows {
                let (m, g) = row?;
                mc_groups.push(m);
                gf_groups.push(g);
            }
        }
        let removed = conn.execute("DELETE FROM users WHERE AM = ?1", [am.get()])? > 0;
        if !removed {
            return Ok(false);
        }
        conn.execute(
            "DELETE FROM sessions WHERE PrincipalKind = 'user' AND PrincipalId = ?1",
            [am.get()],
        )?;
        conn.execute(
            "DELETE FROM messages WHERE SenderKind = 'user' AND SenderId = ?1",
            [am.get()],
        )?;
        for g in mc_groups.into_iter().filter(|&g| g != GroupId::EMPTY.0) {
            conn.execute("DELETE FROM user_mult_test_groups WHERE IDUM = ?1", [g])?;
        }
        for g in gf_groups.into_iter().filter(|&g| g != GroupId::EMPTY.0) {
            conn.execute("DELETE FROM user_fill_test_groups WHERE IDUF = ?1", [g])?;
        }
        Ok(true)
    }

    pub fn insert_session(
        &self,
        token_hash: &str,
        principal: Principal,
        expires_at: DateTime<Utc>,
        now: DateTime<Utc>,
    ) -> Result<()> {
        self.conn().execute(
            "INSERT INTO sessions (TokenHash, PrincipalKind, PrincipalId, ExpiresAt, LastSeen) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![token_hash, principal.kind(), principal.raw_id(), fmt_ts(expires_at), fmt_ts(now)],
        )?;
        Ok(())
    }

    pub fn get_session(&self, token_hash: &str) -> Result<Option<SessionRecord>> {
        self
            .conn()
            .query_row(
                "SELECT PrincipalKind, PrincipalId, ExpiresAt, LastSeen FROM sessions WHERE TokenHash = ?1",
                [token_hash],
                |r| {
                    let kind: String = r.get(0)?;
                    let id: i64 = r.get(1)?;
                    Ok((kind, id, ts_col(r, 2)?, ts_col(r, 3)?))
                },
            )
            .optional()?
            .map(|(kind, id, expires_at, last_seen)| -> Result<SessionRecord> {
                let principal = match kind.as_str() {
                    "user" => Principal::User(RegisterNumber::new(id)?),
                    _ => Principal::Admin(AdminId::new(id)?),
                };
                Ok(SessionRecord {
                    principal,
                    expires_at,
                    last_seen,
                })
            })
            .transpose()
    }

    pub fn touch_session(
        &self,
        token_hash: &str,
        expires_at: DateTime<Utc>,
        now: DateTime<Utc>,
    ) -> Result<()> {
        self.conn().execute(
            "UPDATE sessions SET ExpiresAt = ?1, LastSeen = ?2 WHERE TokenHash = ?3",
            params![fmt_ts(expires_at), fmt_ts(now), token_hash],
        )?;
        Ok(())
    }

    pub fn delete_session(&self, token_hash: &str) -> Result<bool> {
        Ok(self
            .conn()
            .execute("DELETE FROM sessions WHERE TokenHash = ?1", [token_hash])?
            > 0)
    }

    pub fn purge_expired_sessions(&self, now: DateTime<Utc>) -> Result<usize> {
        Ok(self
            .conn()
            .execute("DELETE FROM sessions WHERE ExpiresAt < ?1", [fmt_ts(now)])?)
    }

    pub fn insert_captcha(
        &self,
        token: &str,
        answer_digest: &str,
        expires_at: DateTime<Utc>,
    ) -> Result<()> {
        self.conn().execute(
            "INSERT INTO captchas (Token, AnswerDigest, ExpiresAt) VALUES (?1, ?2, ?3)",
            params![token, answer_digest, fmt_ts(expires_at)],
        )?;
        Ok(())
    }

    /// Removes and returns a challenge; every token is good for one attempt.
    pub fn take_captcha(&self, token: &str) -> Result<Option<(String, DateTime<Utc>)>> {
        let found = self
            .conn()
            .query_row(
                "SELECT AnswerDigest, ExpiresAt FROM captchas WHERE Token = ?1",
                [token],
                |r| Ok((r.get::<_, String>(0)?, ts_col(r, 1)?)),
            )
            .optional()?;
        if found.is_some() {
            self.conn()
                .execute("DELETE FROM captchas WHERE Token = ?1", [token])?;
        }
        Ok(found)
    }
}
