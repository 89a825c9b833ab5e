//! Administrator listings: substring search over one user field, question
//! search by text, and fixed-size pages.

use std::sync::Arc;

use satep::accounts::{Decision, RegistrationForm};
use satep::domain::{PersonProfile, Principal, QuestionDraft, QuestionKind, RegisterNumber};
use satep::storage::SearchField;
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

    let surnames = [
        "Papadakis",
        "Georgiou",
        "Papanikolaou",
        "Ioannou",
        "Papas",
        "Dimitriou",
        "Karapapas",
    ];
    for (i, surname) in surnames.iter().enumerate() {
        let c = platform.issue_captcha()?;
        let username = surname.to_lowercase();
        let am = platform.submit_registration(&RegistrationForm {
            am: RegisterNumber::new(5000 + i as i64).unwrap(),
            name: "Student".into(),
            surname: (*surname).into(),
            username: username.clone(),
            email: format!("{username}@uni.example"),
            department: "Informatics".into(),
            password: "a long passphrase".into(),
            captcha_token: c.token,
            captcha_answer: solve(&c.prompt),
        })?;
        platform.decide_registration(admin, am, Decision::Approve)?;
    }

    for page in 1..=2 {
        let hits = platform.search_users(admin, SearchField::Surname, "PAPA", page, 2)?;
        let names: Vec<_> = hits.items.iter().map(|u| u.surname.as_str()).collect();
        println!(
            "surname ~ papa, page {page} of {} hits: {names:?}",
            hits.total
        );
    }
    let by_am = platform.search_users(admin, SearchField::Am, "500", 1, 20)?;
    println!("am ~ 500: {} hits", by_am.total);

    let lecture = platform.create_lecture(admin, "Algorithms")?.id;
    for topic in ["binary search", "merge sort", "Binary heaps", "quick sort"] {
        platform.insert_question(
            admin,
            &QuestionDraft::GapFill {
                lecture,
                question: format!("The running time of {topic} is ___"),
                answer: "n log n".into(),
            },
        )?;
    }
    let hits = platform.list_questions(admin, QuestionKind::GapFill, Some("binary"), 1, 20)?;
    for q in hits.items {
        println!("question {}: {}", q.id(), q.text());
    }
    Ok(())
}
