//! Chat, contact messages, mass email and outbox delivery.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::domain::Principal;
use crate::error::{Error, Result};
use crate::platform::{require_admin, require_user, Platform};
use crate::storage::{ChatRecord, ContactRecord};

pub const MAX_CHAT_CHARS: usize = 2000;
pub const MAX_CHAT_FETCH: usize = 500;
const DRAIN_LOCK: &str = "outbox-drain";
const DRAIN_LOCK_STALE_MINUTES: i64 = 10;

/// Where outgoing mail goes.
pub trait MailTransport: Send + Sync {
    fn deliver(
        &self,
        recipient: &str,
        subject: &str,
        body: &str,
    ) -> std::result::Result<(), String>;
}

/// Writes each message to its own UTF-8 file: `To`, `Subject` and `Date`
/// headers, a blank line, then the body.
pub struct FileSink {
    dir: PathBuf,
    clock: Arc<dyn Clock>,
    seq: AtomicU64,
}

impl FileSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        Self::with_clock(dir, Arc::new(SystemClock))
    }

    pub fn with_clock(dir: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let existing = fs::read_dir(&dir)?.count() as u64;
        Ok(Self {
            dir,
            clock,
            seq: AtomicU64::new(existing + 1),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Files written so far, in name order.
    pub fn messages(&self) -> Result<Vec<PathBuf>> {
        let mut out: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "eml"))
            .collect();
        out.sort();
        Ok(out)
    }
}

impl MailTransport for FileSink {
    fn deliver(
        &self,
        recipient: &str,
        subject: &str,
        body: &str,
    ) -> std::result::Result<(), String> {
        let text = format!(
            "To: {recipient}\nSubject: {subject}\nDate: {}\n\n{body}",
            self.clock.now().to_rfc2822()
        );
        loop {
            let n = self.seq.fetch_add(1, Ordering::Relaxed);
            let path = self.dir.join(format!("{n:08}.eml"));
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => return f.write_all(text.as_bytes()).map_err(|e| e.to_string()),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(format!("{}: {e}", path.display())),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtpSettings {
    pub host: String,
    pub port: u16,
    pub user: String,
    pub secret: String,
    pub from: String,
}

pub struct SmtpRelay {
    transport: lettre::SmtpTransport,
    from: lettre::message::Mailbox,
}

impl SmtpRelay {
    pub fn new(s: &SmtpSettings) -> Result<Self> {
        use lettre::transport::smtp::authentication::Credentials;
        let mut builder = lettre::SmtpTransport::starttls_relay(&s.host)
            .map_err(|e| Error::Config(format!("smtp host {}: {e}", s.host)))?
            .port(s.port);
        if !s.user.is_empty() {
            builder = builder.credentials(Credentials::new(s.user.clone(), s.secret.clone()));
        }
        let from = s
            .from
            .parse()
            .map_err(|e| Error::Config(format!("smtp sender {:?}: {e}", s.from)))?;
        Ok(Self {
            transport: builder.build(),
            from,
        })
    }
}

impl MailTransport for SmtpRelay {
    fn deliver(
        &self,
        recipient: &str,
        subject: &str,
        body: &str,
    ) -> std::result::Result<(), String> {
        use lettre::Transport;
        let to = recipient
            .parse()
            .map_err(|e| format!("recipient {recipient:?}: {e}"))?;
        let msg = lettre::Message::builder()
            .from(self.from.clone())
            .to(to)
            .subject(subject)
            .body(body.to_owned())
            .map_err(|e| e.to_string())?;
        self.transport
            .send(&msg)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainReport {
    pub sent: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MassEmailReport {
    pub recipients: usize,
}

fn check_body(body: &str, max: Option<usize>) -> Result<()> {
    if body.trim().is_empty() {
        return Err(Error::EmptyBody);
    }
    if let Some(max) = max {
        if body.chars().count() > max {
            return Err(Error::BodyTooLong { max });
        }
    }
    Ok(())
}

impl Platform {
    pub fn post_chat(&self, actor: Principal, body: &str) -> Result<ChatRecord> {
        check_body(body, Some(MAX_CHAT_CHARS))?;
        let now = self.now();
        self.transaction(|tx| {
            let exists = match actor {
                Principal::User(am) => tx.get_user(am)?.is_some(),
                Principal::Admin(id) => tx.get_admin(id)?.is_some(),
            };
            if !exists {
                return Err(Error::Unauthenticated);
            }
            tx.insert_chat(actor, body, now)
        })
    }

    /// Messages after `after_id`, oldest first.
    pub fn fetch_chat(
        &self,
        _actor: Principal,
        after_id: i64,
        limit: usize,
    ) -> Result<Vec<ChatRecord>> {
        if limit == 0 {
            return Err(Error::invalid("limit", "must be at least 1"));
        }
        self.transaction(|tx| tx.fetch_chat(after_id, limit.min(MAX_CHAT_FETCH)))
    }

    /// Name, email and timestamp come from the account and the clock.
    pub fn send_contact(&self, actor: Principal, body: &str) -> Result<ContactRecord> {
        let am = require_user(actor)?;
        check_body(body, None)?;
        let now = self.now();
        self.transaction(|tx| {
            let user = tx.get_user(am)?.ok_or(Error::Unauthenticated)?;
            let name = format!("{} {}", user.profile.name, user.profile.surname);
            tx.insert_contact(am, &name, &user.profile.email, body, now)
        })
    }

    pub fn list_contacts(&self, actor: Principal) -> Result<Vec<ContactRecord>> {
        require_admin(actor)?;
        self.transaction(|tx| tx.list_contacts())
    }

    /// One message per approved user; pending registrations are skipped.
    pub fn mass_email(
        &self,
        actor: Principal,
        subject: &str,
        body: &str,
    ) -> Result<MassEmailReport> {
        require_admin(actor)?;
        if subject.trim().is_empty() {
            return Err(Error::invalid("subject", "must not be empty"));
        }
        check_body(body, None)?;
        let now = self.now();
        self.transaction(|tx| {
            let users = tx.list_users()?;
            if users.is_empty() {
                return Err(Error::NoRecipients);
            }
            for u in &users {
                tx.enqueue_email(&u.profile.email, subject, body, false, now)?;
            }
            Ok(MassEmailReport {
                recipients: users.len(),
            })
        })
    }

    /// Hands every pending email to `transport` once. Only one drain runs at
    /// a time; a second caller gets `DrainInProgress`.
    pub fn drain_outbox(&self, transport: &dyn MailTransport) -> Result<DrainReport> {
        let holder = self.random_hex(8);
        let stale = Duration::minutes(DRAIN_LOCK_STALE_MINUTES);
        if !self.transaction(|tx| tx.try_lock(DRAIN_LOCK, &holder, self.now(), stale))? {
            return Err(Error::DrainInProgress);
        }
        let result = self.drain_locked(transport);
        let released = self.transaction(|tx| tx.unlock(DRAIN_LOCK, &holder));
        let report = result?;
        released?;
        Ok(report)
    }

    fn drain_locked(&self, transport: &dyn MailTransport) -> Result<DrainReport> {
        let max = self.settings().max_delivery_attempts;
        let pending = self.transaction(|tx| tx.pending_outbox())?;
        let mut report = DrainReport::default();
        for mail in pending {
            match transport.deliver(&mail.recipient, &mail.subject, &mail.body) {
                Ok(()) => {
                    self.transaction(|tx| tx.mark_sent(mail.id, self.now()))?;
                    report.sent += 1;
                }
                Err(e) => {
                    log::warn!("delivery to {} failed: {e}", mail.recipient);
                    self.transaction(|tx| tx.mark_attempt_failed(mail.id, &e, max))?;
                    report.failed += 1;
                }
            }
        }
        Ok(report)
    }
}
