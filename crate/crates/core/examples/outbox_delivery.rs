//! Mail is queued in the database and delivered by a drain. A transport
//! that fails leaves messages queued until the attempt limit.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use satep::accounts::{Decision, RegistrationForm};
use satep::domain::{PersonProfile, Principal, RegisterNumber};
use satep::messaging::{FileSink, MailTransport};
use satep::{Platform, Settings, SystemClock};

/// Refuses everything while `down` is set.
struct FlakyRelay {
    down: AtomicBool,
    inner: FileSink,
}

impl MailTransport for FlakyRelay {
    fn deliver(&self, recipient: &str, subject: &str, body: &str) -> Result<(), String> {
        if self.down.load(Ordering::SeqCst) {
            return Err("connection refused".into());
        }
        self.inner.deliver(recipient, subject, body)
    }
}

fn solve(prompt: &str) -> String {
    let n: Vec<u64> = prompt
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|s| s.parse().ok())
        .collect();
    (n[0] + n[1]).to_string()
}

fn main() -> satep::Result<()> {
    let dir = tempfile::tempdir().unwrap();
    let settings = Settings {
        password_rounds: 1000,
        ..Settings::default()
    };
    let platform = Platform::ephemeral(dir.path(), Arc::new(SystemClock), None, settings)?;
    let (id, _) = platform.seed_admin(&PersonProfile {
        name: "Ada".into(),
        surname: "Admin".into(),
        username: "root".into(),
        email: "root@admin.example".into(),
        department: "Informatics".into(),
    })?;
    let admin = Principal::Admin(id);
    for (am, username) in [(2001, "maria"), (2002, "giorgos")] {
        let c = platform.issue_captcha()?;
        let am = platform.submit_registration(&RegistrationForm {
            am: RegisterNumber::new(am).unwrap(),
            name: username.into(),
            surname: "Example".into(),
            username: username.into(),
            email: format!("{username}@uni.example"),
            department: "Informatics".into(),
            password: "a long passphrase".into(),
            captcha_token: c.token,
            captcha_answer: solve(&c.prompt),
        })?;
        platform.decide_registration(admin, am, Decision::Approve)?;
    }

    let report = platform.mass_email(admin, "Room change", "Thursday's lab moves to room B2.")?;
    println!("queued for {} recipients", report.recipients);
    platform.recover_password("maria")?;

    let relay = FlakyRelay {
        down: AtomicBool::new(true),
        inner: FileSink::new(dir.path().join("mail"))?,
    };
    let r = platform.drain_outbox(&relay)?;
    println!("relay down: sent {} failed {}", r.sent, r.failed);
    for m in platform.store().transaction(|tx| tx.all_outbox())? {
        println!(
            "  #{} to {} {:?} after {} attempts ({:?})",
            m.id, m.recipient, m.status, m.attempts, m.last_error
        );
    }

    relay.down.store(false, Ordering::SeqCst);
    let r = platform.drain_outbox(&relay)?;
    println!("relay up: sent {} failed {}", r.sent, r.failed);
    for path in relay.inner.messages()? {
        let text = std::fs::read_to_string(&path).unwrap();
        println!(
            "--- {}\n{}",
            path.file_name().unwrap().to_string_lossy(),
            text.lines().take(2).collect::<Vec<_>>().join("\n")
        );
    }
    Ok(())
}
