//! The shared chat room is polled with a cursor; the contact form files a
//! message under the sender's stored identity.

use std::sync::Arc;

use satep::accounts::{Decision, RegistrationForm};
use satep::domain::{PersonProfile, Principal, RegisterNumber};
use satep::{Platform, Settings, SystemClock};

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
    let c = platform.issue_captcha()?;
    let am = platform.submit_registration(&RegistrationForm {
        am: RegisterNumber::new(3003).unwrap(),
        name: "Kostas".into(),
        surname: "Nikolaou".into(),
        username: "kostas".into(),
        email: "kostas@uni.example".into(),
        department: "Mathematics".into(),
        password: "a long passphrase".into(),
        captcha_token: c.token,
        captcha_answer: solve(&c.prompt),
    })?;
    platform.decide_registration(admin, am, Decision::Approve)?;
    let student = Principal::User(am);

    platform.post_chat(student, "Is the lab open on Friday?")?;
    platform.post_chat(admin, "Yes, from 10:00.")?;
    let mut cursor = 0;
    for m in platform.fetch_chat(student, cursor, 100)? {
        println!("[{}] {}: {}", m.id, m.sender_name, m.body);
        cursor = m.id;
    }
    platform.post_chat(student, "Thanks!")?;
    let fresh = platform.fetch_chat(student, cursor, 100)?;
    println!("{} new since cursor {cursor}", fresh.len());

    if let Err(e) = platform.post_chat(student, "   ") {
        println!("blank message: {e}");
    }

    platform.send_contact(student, "My results for lecture 2 are missing.")?;
    for c in platform.list_contacts(admin)? {
        println!(
            "contact from {} {} <{}> on {} {}: {}",
            c.am, c.name, c.email, c.date, c.time, c.body
        );
    }
    Ok(())
}
