//! Scheduling the final exam notifies every student; one student sits it
//! inside the window and another submits after the deadline.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Timelike, Utc};
use satep::accounts::{Decision, RegistrationForm};
use satep::domain::{
    PersonProfile, Principal, QuestionDraft, RegisterNumber, SubmittedAnswer, TestKind,
};
use satep::examinations::ScheduleForm;
use satep::{ManualClock, Platform, Settings};

fn solve(prompt: &str) -> String {
    let n: Vec<u64> = prompt
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|s| s.parse().ok())
        .collect();
    (n[0] + n[1]).to_string()
}

fn enrol(p: &Platform, admin: Principal, am: i64, username: &str) -> satep::Result<Principal> {
    let c = p.issue_captcha()?;
    let am = p.submit_registration(&RegistrationForm {
        am: RegisterNumber::new(am).unwrap(),
        name: "Student".into(),
        surname: username.into(),
        username: username.into(),
        email: format!("{username}@uni.example"),
        department: "Informatics".into(),
        password: format!("pw-{username}"),
        captcha_token: c.token,
        captcha_answer: solve(&c.prompt),
    })?;
    p.decide_registration(admin, am, Decision::Approve)?;
    Ok(Principal::User(am))
}

fn main() -> satep::Result<()> {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(
        Utc.with_ymd_and_hms(2025, 6, 1, 9, 0, 0).unwrap(),
    ));
    let settings = Settings {
        password_rounds: 1000,
        final_blueprint: (4, 2),
        ..Settings::default()
    };
    let platform = Platform::ephemeral(dir.path(), clock.clone(), Some(11), settings)?;
    let (id, _) = platform.seed_admin(&PersonProfile {
        name: "Ada".into(),
        surname: "Admin".into(),
        username: "root".into(),
        email: "root@admin.example".into(),
        department: "Informatics".into(),
    })?;
    let admin = Principal::Admin(id);

    let lecture = platform.create_lecture(admin, "Operating Systems")?.id;
    let mut key = HashMap::new();
    for n in 0..6 {
        let q = platform.insert_question(
            admin,
            &QuestionDraft::MultipleChoice {
                lecture,
                question: format!("Scheduler question {n}"),
                right_answer: format!("right {n}"),
                wrong_answers: vec![
                    format!("wrong {n}a"),
                    format!("wrong {n}b"),
                    format!("wrong {n}c"),
                ],
            },
        )?;
        key.insert((q.kind(), q.id()), q.canonical_answer().to_owned());
    }
    for n in 0..3 {
        let q = platform.insert_question(
            admin,
            &QuestionDraft::GapFill {
                lecture,
                question: format!("A process in state {n} is ___"),
                answer: format!("state {n}"),
            },
        )?;
        key.insert((q.kind(), q.id()), q.canonical_answer().to_owned());
    }
    let punctual = enrol(&platform, admin, 1001, "punctual")?;
    let late = enrol(&platform, admin, 1002, "late")?;

    let start = platform.now() + Duration::hours(1);
    let outcome = platform.set_schedule(
        admin,
        TestKind::FinalExam,
        &ScheduleForm {
            date: start.date_naive(),
            time: start.time().with_nanosecond(0).unwrap(),
            duration_minutes: 45,
        },
    )?;
    println!(
        "final exam at {} for {} min, {} students notified",
        start, outcome.schedule.duration_minutes, outcome.notified
    );

    match platform.start_test(punctual, TestKind::FinalExam) {
        Err(e) => println!("too early: {e}"),
        Ok(_) => unreachable!(),
    }
    clock.advance(Duration::minutes(61));

    let mut sheets = Vec::new();
    for (name, who) in [("punctual", punctual), ("late", late)] {
        let view = platform.start_test(who, TestKind::FinalExam)?;
        println!(
            "{name} opened {} with {} questions, deadline {}",
            view.instance_id,
            view.questions.len(),
            view.deadline
        );
        let answers: Vec<SubmittedAnswer> = view
            .questions
            .iter()
            .map(|q| {
                SubmittedAnswer::new(q.kind, q.question_id, key[&(q.kind, q.question_id)].clone())
            })
            .collect();
        sheets.push((name, who, view.instance_id, answers));
    }
    for ((name, who, instance, answers), wait) in sheets.iter().zip([20, 30]) {
        clock.advance(Duration::minutes(wait));
        match platform.submit_test(*who, instance, answers) {
            Ok(g) => println!(
                "{name} scored {}/{} = {:.0}%",
                g.correct_count, g.total_count, g.percent
            ),
            Err(e) => println!("{name} rejected: {e}"),
        }
    }

    clock.advance(Duration::hours(2));
    platform.expire_overdue(None)?;
    for row in platform
        .admin_results(admin, &Default::default(), 1, 20)?
        .items
    {
        println!(
            "result: {} {} {} {:.0}%",
            row.am, row.kind, row.date, row.percent
        );
    }
    Ok(())
}
