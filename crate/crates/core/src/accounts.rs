//! Registration with captcha, approval, sessions, password recovery and
//! user management.

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AdminId, Credential, PersonProfile, Principal, RegisterNumber};
use crate::error::{Error, Result};
use crate::platform::{require_admin, require_user, sha256_hex, ItemOutcome, ItemStatus, Platform};
use crate::storage::{Page, PendingRegistration, SearchField, UserRecord};

/// Sessions are only re-stamped when this much time has passed since the
/// last stamp, keeping most authenticated reads free of writes.
const TOUCH_INTERVAL_SECS: i64 = 60;
const RECOVERY_PASSWORD_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptchaChallenge {
    pub token: String,
    pub prompt: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationForm {
    pub am: RegisterNumber,
    pub name: String,
    pub surname: String,
    pub username: String,
    pub email: String,
    pub department: String,
    pub password: String,
    pub captcha_token: String,
    pub captcha_answer: String,
}

impl RegistrationForm {
    fn profile(&self) -> PersonProfile {
        PersonProfile {
            name: self.name.trim().to_owned(),
            surname: self.surname.trim().to_owned(),
            username: self.username.trim().to_owned(),
            email: self.email.trim().to_owned(),
            department: self.department.trim().to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub am: RegisterNumber,
    pub decision: Decision,
}

/// A user as shown through the API. Credentials never leave storage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub am: RegisterNumber,
    pub name: String,
    pub surname: String,
    pub username: String,
    pub email: String,
    pub department: String,
}

impl From<&UserRecord> for UserView {
    fn from(u: &UserRecord) -> Self {
        Self::from_parts(u.am, &u.profile)
    }
}

impl UserView {
    fn from_parts(am: RegisterNumber, p: &PersonProfile) -> Self {
        Self {
            am,
            name: p.name.clone(),
            surname: p.surname.clone(),
            username: p.username.clone(),
            email: p.email.clone(),
            department: p.department.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingView {
    #[serde(flatten)]
    pub user: UserView,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Me {
    #[serde(flatten)]
    pub principal: Principal,
    pub name: String,
    pub surname: String,
    pub username: String,
    pub email: String,
    pub department: String,
}

/// What a new session hands back. The token is shown exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionGrant {
    pub token: String,
    #[serde(flatten)]
    pub principal: Principal,
    pub expires_at: DateTime<Utc>,
}

/// Fields a user may change about themself. Anything else in the request
/// is accepted and dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfChanges {
    pub username: Option<String>,
    pub email: Option<String>,
    pub password: Option<String>,
    #[serde(default, skip_serializing)]
    pub am: Option<serde_json::Value>,
    #[serde(default, skip_serializing)]
    pub name: Option<serde_json::Value>,
    #[serde(default, skip_serializing)]
    pub surname: Option<serde_json::Value>,
    #[serde(default, skip_serializing)]
    pub department: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdminUserChanges {
    pub am: Option<RegisterNumber>,
    pub name: Option<String>,
    pub surname: Option<String>,
}

pub type UserDeletion = ItemOutcome<RegisterNumber>;

fn nonempty(field: &'static str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        return Err(Error::invalid(field, "must not be empty"));
    }
    Ok(())
}

fn check_profile(p: &PersonProfile) -> Result<()> {
    p.check()
        .map_err(|(field, reason)| Error::invalid(field, reason))
}

fn token_hash(token: &str) -> String {
    sha256_hex(&[token.as_bytes()])
}

fn captcha_digest(token: &str, answer: &str) -> String {
    sha256_hex(&[token.as_bytes(), b":", answer.trim().as_bytes()])
}

/// 12 characters with at least one lowercase, uppercase, digit and symbol.
pub fn generate_password<R: Rng + ?Sized>(rng: &mut R) -> String {
    const LOWER: &[u8] = b"abcdefghijkmnopqrstuvwxyz";
    const UPPER: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ";
    const DIGIT: &[u8] = b"23456789";
    const SYMBOL: &[u8] = b"!#%+-=?@_";
    let classes = [LOWER, UPPER, DIGIT, SYMBOL];
    let mut chars: Vec<u8> = classes.iter().map(|c| *c.choose(rng).unwrap()).collect();
    let all: Vec<u8> = classes.concat();
    while chars.len() < RECOVERY_PASSWORD_LEN {
        chars.push(*all.choose(rng).unwrap());
    }
    chars.shuffle(rng);
    String::from_utf8(chars).expect("ascii")
}

impl Platform {
    pub fn issue_captcha(&self) -> Result<CaptchaChallenge> {
        let token = self.random_hex(16);
        let (a, b) = self.with_rng(|r| (r.gen_range(1..=9u32), r.gen_range(1..=9u32)));
        let expires_at = self.now() + self.settings().captcha_ttl;
        let digest = captcha_digest(&token, &(a + b).to_string());
        self.transaction(|tx| tx.insert_captcha(&token, &digest, expires_at))?;
        Ok(CaptchaChallenge {
            token,
            prompt: format!("What is {a} + {b}?"),
            expires_at,
        })
    }

    /// Consumes the challenge whatever the outcome.
    fn redeem_captcha(&self, token: &str, answer: &str) -> Result<()> {
        let now = self.now();
        let stored = self.transaction(|tx| tx.take_captcha(token))?;
        match stored {
            Some((digest, expires_at))
                if now <= expires_at && digest == captcha_digest(token, answer) =>
            {
                Ok(())
            }
            _ => Err(Error::CaptchaFailed),
        }
    }

    pub fn submit_registration(&self, form: &RegistrationForm) -> Result<RegisterNumber> {
        self.redeem_captcha(&form.captcha_token, &form.captcha_answer)?;
        let profile = form.profile();
        check_profile(&profile)?;
        nonempty("password", &form.password)?;
        let credential = self
            .with_rng(|r| Credential::derive(&form.password, self.settings().password_rounds, r));
        let reg = PendingRegistration {
            am: form.am,
            profile,
            credential,
            submitted_at: self.now(),
        };
        self.transaction(|tx| tx.insert_registration(&reg))?;
        Ok(form.am)
    }

    pub fn list_registrations(&self, actor: Principal) -> Result<Vec<PendingView>> {
        require_admin(actor)?;
        let regs = self.transaction(|tx| tx.list_registrations())?;
        Ok(regs
            .iter()
            .map(|r| PendingView {
                user: UserView::from_parts(r.am, &r.profile),
                submitted_at: r.submitted_at,
            })
            .collect())
    }

    pub fn decide_registration(
        &self,
        actor: Principal,
        am: RegisterNumber,
        decision: Decision,
    ) -> Result<DecisionOutcome> {
        require_admin(actor)?;
        self.transaction(|tx| {
            let found = match decision {
                Decision::Approve => tx.approve_registration(am)?.is_some(),
                Decision::Reject => tx.delete_registration(am)?,
            };
            if !found {
                return Err(Error::not_found(format!("registration {am}")));
            }
            Ok(DecisionOutcome { am, decision })
        })
    }

    /// Creates an administrator with a generated password, returned once.
    pub fn seed_admin(&self, profile: &PersonProfile) -> Result<(AdminId, String)> {
        check_profile(profile)?;
        let password = self.with_rng(generate_password);
        let credential =
            self.with_rng(|r| Credential::derive(&password, self.settings().password_rounds, r));
        let id = self.transaction(|tx| tx.insert_admin(profile, &credential))?;
        Ok((id, password))
    }

    /// Both unknown usernames and wrong passwords are `InvalidCredentials`.
    pub fn login(&self, username: &str, password: &str) -> Result<SessionGrant> {
        let username = username.trim();
        let principal = self.transaction(|tx| {
            if let Some(a) = tx.admin_by_username(username)? {
                return Ok(a
                    .credential
                    .verify(password)
                    .then_some(Principal::Admin(a.id)));
            }
            if let Some(u) = tx.user_by_username(username)? {
                return Ok(u
                    .credential
                    .verify(password)
                    .then_some(Principal::User(u.am)));
            }
            Ok(None)
        })?;
        let principal = principal.ok_or(Error::InvalidCredentials)?;
        let token = self.random_hex(32);
        let now = self.now();
        let expires_at = now + self.settings().session_ttl;
        self.transaction(|tx| tx.insert_session(&token_hash(&token), principal, expires_at, now))?;
        Ok(SessionGrant {
            token,
            principal,
            expires_at,
        })
    }

    /// Resolves a bearer token. Expiry slides with activity.
    pub fn authenticate(&self, token: &str) -> Result<Principal> {
        let hash = token_hash(token);
        let now = self.now();
        let session = self
            .transaction(|tx| tx.get_session(&hash))?
            .ok_or(Error::Unauthenticated)?;
        if now > session.expires_at {
            self.transaction(|tx| tx.delete_session(&hash))?;
            return Err(Error::Unauthenticated);
        }
        if now - session.last_seen >= Duration::seconds(TOUCH_INTERVAL_SECS) {
            let expires_at = now + self.settings().session_ttl;
            self.transaction(|tx| tx.touch_session(&hash, expires_at, now))?;
        }
        Ok(session.principal)
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        self.transaction(|tx| tx.delete_session(&token_hash(token)))?;
        Ok(())
    }

    /// Replaces the password of a known user and mails it. The caller learns
    /// nothing about whether the username exists.
    pub fn recover_password(&self, username: &str) -> Result<()> {
        let username = username.trim();
        let password = self.with_rng(generate_password);
        let credential =
            self.with_rng(|r| Credential::derive(&password, self.settings().password_rounds, r));
        let now = self.now();
        self.transaction(|tx| {
            let Some(user) = tx.user_by_username(username)? else {
                return Ok(());
            };
            tx.set_user_credential(user.am, &credential)?;
            let body = format!(
                "Hello {},\n\nA new password was generated for the account {}:\n\n    {password}\n\nSign in and change it from your profile page.\n",
                user.profile.name, user.profile.username
            );
            tx.enqueue_email(&user.profile.email, "Your new password", &body, true, now)?;
            Ok(())
        })
    }

    pub fn me(&self, actor: Principal) -> Result<Me> {
        let profile = self.transaction(|tx| match actor {
            Principal::User(am) => Ok(tx.get_user(am)?.map(|u| u.profile)),
            Principal::Admin(id) => Ok(tx.get_admin(id)?.map(|a| a.profile)),
        })?;
        let p = profile.ok_or(Error::Unauthenticated)?;
        Ok(Me {
            principal: actor,
            name: p.name,
            surname: p.surname,
            username: p.username,
            email: p.email,
            department: p.department,
        })
    }

    /// Changes username, email and password only; AM, name, surname and
    /// department are kept whatever the request says.
    pub fn edit_own_profile(&self, actor: Principal, changes: &SelfChanges) -> Result<UserView> {
        let am = require_user(actor)?;
        let username = changes.username.as_deref().map(str::trim);
        let email = changes.email.as_deref().map(str::trim);
        if let Some(u) = username {
            nonempty("username", u)?;
        }
        if let Some(e) = email {
            if !crate::domain::is_plausible_email(e) {
                return Err(Error::invalid("email", "not a valid address"));
            }
        }
        if let Some(p) = &changes.password {
            nonempty("password", p)?;
        }
        let credential = changes
            .password
            .as_deref()
            .map(|p| self.with_rng(|r| Credential::derive(p, self.settings().password_rounds, r)));
        self.transaction(|tx| {
            tx.get_user(am)?.ok_or(Error::Unauthenticated)?;
            tx.identity_conflict(None, username, email, Some(actor))?;
            tx.update_user_self(am, username, email, credential.as_ref())?;
            let user = tx.get_user(am)?.expect("user checked above");
            Ok(UserView::from(&user))
        })
    }

    pub fn search_users(
        &self,
        actor: Principal,
        field: SearchField,
        needle: &str,
        page: usize,
        page_size: usize,
    ) -> Result<Page<UserView>> {
        require_admin(actor)?;
        let page = self.transaction(|tx| tx.search_users(field, needle, page, page_size))?;
        Ok(page.map(|u| UserView::from(&u)))
    }

    pub fn admin_edit_user(
        &self,
        actor: Principal,
        am: RegisterNumber,
        changes: &AdminUserChanges,
    ) -> Result<UserView> {
        require_admin(actor)?;
        if let Some(n) = &changes.name {
            nonempty("name", n)?;
        }
        if let Some(s) = &changes.surname {
            nonempty("surname", s)?;
        }
        self.transaction(|tx| {
            tx.get_user(am)?
                .ok_or_else(|| Error::not_found(format!("user {am}")))?;
            if let Some(new_am) = changes.am.filter(|n| *n != am) {
                tx.identity_conflict(Some(new_am), None, None, None)?;
            }
            let current = tx.update_user_admin(
                am,
                changes.am,
                changes.name.as_deref().map(str::trim),
                changes.surname.as_deref().map(str::trim),
            )?;
            let user = tx.get_user(current)?.expect("user just updated");
            Ok(UserView::from(&user))
        })
    }

    /// Deletes each listed user with everything that references them.
    pub fn admin_delete_users(
        &self,
        actor: Principal,
        ams: &[RegisterNumber],
    ) -> Result<Vec<UserDeletion>> {
        require_admin(actor)?;
        self.transaction(|tx| {
            ams.iter()
                .map(|&am| {
                    let status = if tx.delete_user(am)? {
                        ItemStatus::Deleted { detail: () }
                    } else {
                        ItemStatus::NotFound
                    };
                    Ok(ItemOutcome { id: am, status })
                })
                .collect()
        })
    }
}
