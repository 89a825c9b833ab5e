//! A student registers behind the captcha, waits for an administrator and
//! then signs in.

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

    let (admin_id, admin_password) = platform.seed_admin(&PersonProfile {
        name: "Ada".into(),
        surname: "Admin".into(),
        username: "root".into(),
        email: "root@admin.example".into(),
        department: "Informatics".into(),
    })?;
    let admin = Principal::Admin(admin_id);
    println!("administrator password (shown once): {admin_password}");

    let captcha = platform.issue_captcha()?;
    println!("captcha: {}", captcha.prompt);
    let form = RegistrationForm {
        am: RegisterNumber::new(4021).unwrap(),
        name: "Eleni".into(),
        surname: "Papadopoulou".into(),
        username: "eleni".into(),
        email: "eleni@uni.example".into(),
        department: "Informatics".into(),
        password: "correct horse".into(),
        captcha_token: captcha.token.clone(),
        captcha_answer: solve(&captcha.prompt),
    };
    let am = platform.submit_registration(&form)?;

    match platform.login("eleni", "correct horse") {
        Err(e) => println!("before approval: {e}"),
        Ok(_) => unreachable!("pending accounts cannot sign in"),
    }

    for p in platform.list_registrations(admin)? {
        println!(
            "pending: {} {} {}",
            p.user.am, p.user.surname, p.submitted_at
        );
    }
    platform.decide_registration(admin, am, Decision::Approve)?;

    let grant = platform.login("eleni", "correct horse")?;
    let me = platform.me(platform.authenticate(&grant.token)?)?;
    println!(
        "signed in as {} {} until {}",
        me.name, me.surname, grant.expires_at
    );
    platform.logout(&grant.token)?;
    println!(
        "after logout: {}",
        platform.authenticate(&grant.token).unwrap_err()
    );
    Ok(())
}
