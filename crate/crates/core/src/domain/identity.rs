use pbkdf2::pbkdf2_hmac;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{AdminId, RegisterNumber};

pub const SALT_LEN: usize = 16;

/// Who an authenticated session acts as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", content = "id", rename_all = "snake_case")]
pub enum Principal {
    User(RegisterNumber),
    Admin(AdminId),
}

impl Principal {
    pub fn kind(&self) -> &'static str {
        match self {
            Principal::User(_) => "user",
            Principal::Admin(_) => "admin",
        }
    }

    pub fn raw_id(&self) -> i64 {
        match self {
            Principal::User(am) => am.get(),
            Principal::Admin(id) => id.get(),
        }
    }
}

pub const DEFAULT_DIGEST_ROUNDS: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub name: String,
    pub surname: String,
    pub username: String,
    pub email: String,
    pub department: String,
}

impl PersonProfile {
    /// Returns the first offending field name and why.
    pub fn check(&self) -> Result<(), (&'static str, &'static str)> {
        let fields = [
            ("name", &self.name),
            ("surname", &self.surname),
            ("username", &self.username),
            ("email", &self.email),
            ("department", &self.department),
        ];
        for (field, value) in fields {
            if value.trim().is_empty() {
                return Err((field, "must not be empty"));
            }
        }
        if !is_plausible_email(&self.email) {
            return Err(("email", "not a valid address"));
        }
        Ok(())
    }
}

/// `local@domain.tld` shape: one `@`, no whitespace, a dot inside the domain.
pub fn is_plausible_email(s: &str) -> bool {
    if s.chars().any(char::is_whitespace) {
        return false;
    }
    let Some((local, domain)) = s.split_once('@') else {
        return false;
    };
    if local.is_empty() || domain.contains('@') {
        return false;
    }
    match domain.rsplit_once('.') {
        Some((host, tld)) => !host.is_empty() && !tld.is_empty() && !domain.starts_with('.'),
        None => false,
    }
}

/// A salted PBKDF2-SHA256 password digest. The digest string carries its own
/// round count so the work factor can change without invalidating old rows.
#[derive(Clone, PartialEq, Eq)]
pub struct Credential {
    pub password_digest: String,
    pub salt: Vec<u8>,
}

impl std::fmt::Debug for Credential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Credential")
            .field("password_digest", &"<redacted>")
            .finish()
    }
}

impl Credential {
    pub fn derive<R: Rng + ?Sized>(password: &str, rounds: u32, rng: &mut R) -> Self {
        let mut salt = vec![0u8; SALT_LEN];
        rng.fill(salt.as_mut_slice());
        Self::with_salt(password, salt, rounds)
    }

    pub fn with_salt(password: &str, salt: Vec<u8>, rounds: u32) -> Self {
        let digest = digest(password, &salt, rounds);
        Self {
            password_digest: format!("pbkdf2-sha256${rounds}${}", hex::encode(digest)),
            salt,
        }
    }

    pub fn verify(&self, password: &str) -> bool {
        let mut parts = self.password_digest.splitn(3, '$');
        let (Some("pbkdf2-sha256"), Some(rounds), Some(expected)) =
            (parts.next(), parts.next(), parts.next())
        else {
            return false;
        };
        let Ok(rounds) = rounds.parse::<u32>() else {
            return false;
        };
        let Ok(expected) = hex::decode(expected) else {
            return false;
        };
        let actual = digest(password, &self.salt, rounds);
        // Constant-time compare.
        expected.len() == actual.len()
            && expected
                .iter()
                .zip(actual.iter())
                .fold(0u8, |acc, (a, b)| acc | (a ^ b))
                == 0
    }
}

fn digest(password: &str, salt: &[u8], rounds: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, rounds.max(1), &mut out);
    out
}
