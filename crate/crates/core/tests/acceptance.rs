//! Acceptance criteria 1-7. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::time::{Duration as StdDuration, Instant};

use axum::http::StatusCode;
use chrono::{Duration, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::{fast_settings, sheet, solve, t0, Harness};
use satep::accounts::{Decision, RegistrationForm};
use satep::content::UploadedFile;
use satep::domain::{
    assemble_test, grade, LectureId, Principal, QuestionDraft, QuestionId, QuestionKind,
    QuestionRef, RegisterNumber, Scope, SubmittedAnswer, TestBlueprint, TestKind,
};
use satep::examinations::{ScheduleForm, ScheduleOutcome};
use satep::messaging::FileSink;
use satep::platform::seeded_rng;
use satep::storage::{InstanceState, OutboxStatus};
use satep::{ManualClock, Platform};

// Pinned tolerances.
const C1_RUNS: u64 = 100;
const C1_BUDGET: StdDuration = StdDuration::from_secs(10);
const C2_PAIRS: usize = 1000;
const C2_MIN_DISTINCT: f64 = 0.99;
const C2_INCLUSION_TOLERANCE: f64 = 0.05;
const C2_BUDGET: StdDuration = StdDuration::from_secs(30);
const C3_SHEETS: usize = 500;
const C3_PERCENT_TOLERANCE: f64 = 1e-9;
const C4_OPERATIONS: usize = 200;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Lib {
    platform: Platform,
    clock: Arc<ManualClock>,
    admin: Principal,
    _dir: tempfile::TempDir,
}

fn lib(seed: u64) -> Lib {
    lib_with(seed, fast_settings())
}

fn lib_with(seed: u64, settings: satep::Settings) -> Lib {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let platform = Platform::ephemeral(dir.path(), clock.clone(), Some(seed), settings).unwrap();
    let (id, _) = platform
        .seed_admin(&satep::domain::PersonProfile {
            name: "Ada".into(),
            surname: "Admin".into(),
            username: "root".into(),
            email: "root@admin.example".into(),
            department: "Informatics".into(),
        })
        .unwrap();
    Lib {
        platform,
        clock,
        admin: Principal::Admin(id),
        _dir: dir,
    }
}

fn registration(p: &Platform, am: i64) -> RegistrationForm {
    let c = p.issue_captcha().unwrap();
    RegistrationForm {
        am: RegisterNumber::new(am).unwrap(),
        name: "Nikos".into(),
        surname: format!("Student{am}"),
        username: format!("student{am}"),
        email: format!("student{am}@uni.example"),
        department: "Informatics".into(),
        password: format!("pw-{am}"),
        captcha_token: c.token.clone(),
        captcha_answer: solve(&c.prompt),
    }
}

fn enrol(l: &Lib, am: i64) -> Principal {
    let am = l
        .platform
        .submit_registration(&registration(&l.platform, am))
        .unwrap();
    l.platform
        .decide_registration(l.admin, am, Decision::Approve)
        .unwrap();
    Principal::User(am)
}

fn mc_draft(lecture: LectureId, n: usize) -> QuestionDraft {
    QuestionDraft::MultipleChoice {
        lecture,
        question: format!("mc {n}"),
        right_answer: format!("right {n}"),
        wrong_answers: vec![
            format!("wrong {n} a"),
            format!("wrong {n} b"),
            format!("wrong {n} c"),
        ],
    }
}

fn gf_draft(lecture: LectureId, n: usize) -> QuestionDraft {
    QuestionDraft::GapFill {
        lecture,
        question: format!("gf {n} ___"),
        answer: format!("Answer {n}"),
    }
}

fn schedule_from_now(l: &Lib, kind: TestKind, lead: Duration, minutes: u32) -> ScheduleOutcome {
    let start = l.platform.now() + lead;
    l.platform
        .set_schedule(
            l.admin,
            kind,
            &ScheduleForm {
                date: start.date_naive(),
                time: start.time().with_nanosecond(0).unwrap(),
                duration_minutes: minutes,
            },
        )
        .unwrap()
}

/// 1. Final-exam composition over 100 seeded platforms.
fn criterion_1() -> Outcome {
    let started = Instant::now();
    for seed in 0..C1_RUNS {
        let l = lib(seed);
        let lectures: Vec<LectureId> = (1..=3)
            .map(|i| {
                l.platform
                    .create_lecture(l.admin, &format!("Lecture {i}"))
                    .unwrap()
                    .id
            })
            .collect();
        let mut mc_pool = HashMap::new();
        let mut gf_pool = HashSet::new();
        for n in 0..30 {
            let q = l
                .platform
                .insert_question(l.admin, &mc_draft(lectures[n % 3], n))
                .unwrap();
            if let QuestionDraft::MultipleChoice {
                right_answer,
                wrong_answers,
                ..
            } = q.to_draft()
            {
                let mut all = wrong_answers;
                all.push(right_answer);
                all.sort();
                mc_pool.insert(q.id(), all);
            }
        }
        for n in 0..15 {
            gf_pool.insert(
                l.platform
                    .insert_question(l.admin, &gf_draft(lectures[n % 3], n))
                    .unwrap()
                    .id(),
            );
        }
        let user = enrol(&l, 100 + seed as i64);
        schedule_from_now(&l, TestKind::FinalExam, Duration::minutes(1), 60);
        l.clock.advance(Duration::minutes(2));
        let view = l
            .platform
            .start_test(user, TestKind::FinalExam)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let kinds: Vec<QuestionKind> = view.questions.iter().map(|q| q.kind).collect();
        let mc: Vec<_> = view
            .questions
            .iter()
            .filter(|q| q.kind == QuestionKind::MultipleChoice)
            .collect();
        let gf: Vec<_> = view
            .questions
            .iter()
            .filter(|q| q.kind == QuestionKind::GapFill)
            .collect();
        ensure!(
            mc.len() == 20 && gf.len() == 10,
            "seed {seed}: {} MC + {} GF",
            mc.len(),
            gf.len()
        );
        ensure!(
            kinds[..20]
                .iter()
                .all(|k| *k == QuestionKind::MultipleChoice),
            "seed {seed}: multiple choice block is not first"
        );
        let mc_ids: HashSet<_> = mc.iter().map(|q| q.question_id).collect();
        let gf_ids: HashSet<_> = gf.iter().map(|q| q.question_id).collect();
        ensure!(
            mc_ids.len() == 20 && gf_ids.len() == 10,
            "seed {seed}: repeated question"
        );
        ensure!(
            gf_ids.is_subset(&gf_pool),
            "seed {seed}: gap fill outside the pool"
        );
        for q in &mc {
            let mut shown = q.options.clone().unwrap_or_default();
            shown.sort();
            ensure!(
                mc_pool.get(&q.question_id) == Some(&shown),
                "seed {seed}: options of {} differ",
                q.question_id
            );
        }
    }
    let elapsed = started.elapsed();
    ensure!(
        elapsed < C1_BUDGET,
        "took {elapsed:?}, budget {C1_BUDGET:?}"
    );
    Ok(format!(
        "{C1_RUNS} runs all 20 MC + 10 GF in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

/// 2. Pairwise distinctness and uniform inclusion over a 30-question pool.
fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mc_pool: Vec<QuestionId> = (1..=30).map(|n| QuestionId::new(n).unwrap()).collect();
    let gf_pool: Vec<QuestionId> = (1..=15).map(|n| QuestionId::new(n).unwrap()).collect();
    let bp = TestBlueprint::new(20, 10, Scope::AllLectures).unwrap();
    let mut inclusion: BTreeMap<QuestionId, usize> = BTreeMap::new();
    let mut distinct = 0usize;
    let mut draw = |seed: u64| {
        let mut rng = seeded_rng(Some(seed));
        let (mc, _) = assemble_test(&bp, &mc_pool, &gf_pool, &mut rng).unwrap();
        let ids = mc.question_ids().to_vec();
        for id in &ids {
            *inclusion.entry(*id).or_default() += 1;
        }
        ids
    };
    for i in 0..C2_PAIRS as u64 {
        let a = draw(2 * i + 1_000_000);
        let b = draw(2 * i + 1_000_001);
        if a != b {
            distinct += 1;
        }
    }
    let draws = (2 * C2_PAIRS) as f64;
    let expected = 20.0 / 30.0;
    let worst = mc_pool
        .iter()
        .map(|id| (inclusion.get(id).copied().unwrap_or(0) as f64 / draws - expected).abs())
        .fold(0.0, f64::max);
    let share = distinct as f64 / C2_PAIRS as f64;
    let elapsed = started.elapsed();
    ensure!(
        share >= C2_MIN_DISTINCT,
        "only {:.1}% of pairs differ",
        share * 100.0
    );
    ensure!(
        worst <= C2_INCLUSION_TOLERANCE,
        "inclusion deviates by {:.2} pp",
        worst * 100.0
    );
    ensure!(elapsed < C2_BUDGET, "took {elapsed:?}");
    Ok(format!(
        "{:.1}% of pairs differ; worst inclusion deviation {:.2} pp; {:.2}s",
        share * 100.0,
        worst * 100.0,
        elapsed.as_secs_f64()
    ))
}

/// Independent reference: per key entry, scan the sheet for its answer.
fn brute_force(answers: &[SubmittedAnswer], key: &HashMap<QuestionRef, String>) -> u32 {
    fn canon(s: &str) -> String {
        let mut out = String::new();
        for word in s.split(char::is_whitespace).filter(|w| !w.is_empty()) {
            if !out.is_empty() {
                out.push(' ');
            }
            out.extend(word.chars().flat_map(char::to_lowercase));
        }
        out
    }
    let mut correct = 0;
    for (r, answer) in key {
        for a in answers {
            if a.kind == r.kind && a.question_id == r.id && canon(&a.response) == canon(answer) {
                correct += 1;
            }
        }
    }
    correct
}

/// 3. Grading equals the brute-force counter on random sheets.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let words = ["alpha", "Beta", "GAMMA", "delta", "Ελλάδα", "x"];
    for n in 0..C3_SHEETS {
        let size = rng.gen_range(1..=40);
        let mut key = HashMap::new();
        let mut answers = Vec::new();
        for i in 0..size {
            let kind = if rng.gen_bool(0.5) {
                QuestionKind::MultipleChoice
            } else {
                QuestionKind::GapFill
            };
            let r = QuestionRef::new(kind, QuestionId::new(i + 1).unwrap());
            let len = rng.gen_range(1..=3);
            let answer: Vec<&str> = (0..len)
                .map(|_| words[rng.gen_range(0..words.len())])
                .collect();
            let answer = answer.join(" ");
            key.insert(r, answer.clone());
            let response = match rng.gen_range(0..5) {
                0 => continue,
                1 => answer.clone(),
                2 => format!("  {}\t", answer.to_uppercase().replace(' ', "   ")),
                3 => format!("{answer} extra"),
                _ => words[rng.gen_range(0..words.len())].to_owned(),
            };
            answers.push(SubmittedAnswer::new(kind, r.id, response));
        }
        // shuffle sheet order
        for i in (1..answers.len()).rev() {
            answers.swap(i, rng.gen_range(0..=i));
        }
        let got = grade(&answers, &key).map_err(|e| format!("sheet {n}: {e}"))?;
        let want = brute_force(&answers, &key);
        ensure!(
            got.correct_count == want,
            "sheet {n}: {} vs {want}",
            got.correct_count
        );
        ensure!(
            got.total_count as usize == key.len(),
            "sheet {n}: total {}",
            got.total_count
        );
        let pct = 100.0 * f64::from(want) / key.len() as f64;
        ensure!(
            (got.percent - pct).abs() <= C3_PERCENT_TOLERANCE,
            "sheet {n}: {} vs {pct}",
            got.percent
        );
    }
    Ok(format!(
        "{C3_SHEETS} sheets match the reference counter, percent within {C3_PERCENT_TOLERANCE:e}"
    ))
}

/// 4. Integrity sweep after a scripted mixed session.
fn criterion_4() -> Outcome {
    // Content is spread thin over many lectures; a 2+2 lecture test keeps sittings possible.
    let l = lib_with(
        4,
        satep::Settings {
            lecture_blueprint: (2, 2),
            ..fast_settings()
        },
    );
    let p = &l.platform;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lectures: Vec<LectureId> = Vec::new();
    let mut users: Vec<Principal> = Vec::new();
    let mut pending: Vec<RegisterNumber> = Vec::new();
    let mut next_am = 1000;
    let mut counter = 0usize;
    let mut cascades = 0usize;
    let mut sittings = 0usize;
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();

    for _ in 0..3 {
        lectures.push(
            p.create_lecture(l.admin, &format!("Seed lecture {}", lectures.len()))
                .unwrap()
                .id,
        );
    }

    for op in 0..C4_OPERATIONS {
        counter += 1;
        let choice = rng.gen_range(0..100);
        let name = match choice {
            0..=11 => {
                next_am += 1;
                let am = p
                    .submit_registration(&registration(p, next_am))
                    .map_err(|e| format!("op {op}: {e}"))?;
                pending.push(am);
                "register"
            }
            12..=21 if !pending.is_empty() => {
                let am = pending.remove(rng.gen_range(0..pending.len()));
                let d = if rng.gen_bool(0.8) {
                    Decision::Approve
                } else {
                    Decision::Reject
                };
                p.decide_registration(l.admin, am, d)
                    .map_err(|e| format!("op {op}: {e}"))?;
                if d == Decision::Approve {
                    users.push(Principal::User(am));
                }
                "decide"
            }
            22..=29 => {
                lectures.push(
                    p.create_lecture(l.admin, &format!("Lecture {counter}"))
                        .unwrap()
                        .id,
                );
                "lecture"
            }
            30..=39 if !lectures.is_empty() => {
                let lec = lectures[rng.gen_range(0..lectures.len())];
                // Small content range so identical bytes are shared between files.
                let bytes = format!("file body {}", rng.gen_range(0..6)).into_bytes();
                p.upload_file(
                    l.admin,
                    lec,
                    &UploadedFile {
                        logical_name: format!("notes-{counter}.txt"),
                        media_type: "text/plain".into(),
                        bytes,
                    },
                )
                .map_err(|e| format!("op {op}: {e}"))?;
                "upload"
            }
            40..=59 if !lectures.is_empty() => {
                let lec = lectures[rng.gen_range(0..lectures.len())];
                let draft = if rng.gen_bool(0.5) {
                    mc_draft(lec, counter)
                } else {
                    gf_draft(lec, counter)
                };
                p.insert_question(l.admin, &draft)
                    .map_err(|e| format!("op {op}: {e}"))?;
                "question insert"
            }
            60..=65 => {
                let kind = if rng.gen_bool(0.5) {
                    QuestionKind::MultipleChoice
                } else {
                    QuestionKind::GapFill
                };
                let all = p
                    .list_questions(l.admin, kind, None, 1, 100_000)
                    .unwrap()
                    .items;
                if let Some(q) = all.first() {
                    let lec = lectures.first().copied().unwrap_or(q.lecture());
                    let draft = match kind {
                        QuestionKind::MultipleChoice => mc_draft(lec, counter),
                        QuestionKind::GapFill => gf_draft(lec, counter),
                    };
                    p.edit_question(l.admin, kind, q.id(), &draft)
                        .map_err(|e| format!("op {op}: {e}"))?;
                }
                "question edit"
            }
            66..=71 => {
                let kind = if rng.gen_bool(0.5) {
                    QuestionKind::MultipleChoice
                } else {
                    QuestionKind::GapFill
                };
                let all = p
                    .list_questions(l.admin, kind, None, 1, 100_000)
                    .unwrap()
                    .items;
                if let Some(q) = all.last() {
                    let out = p.delete_questions(l.admin, kind, &[q.id()]).unwrap();
                    ensure!(out[0].is_deleted(), "op {op}: question not deleted");
                }
                "question delete"
            }
            72..=77 if lectures.len() > 1 => {
                let lec = lectures[rng.gen_range(0..lectures.len())];
                let files = p.list_files(l.admin, lec).unwrap().len();
                let count = |kind| {
                    p.list_questions(l.admin, kind, None, 1, 100_000)
                        .unwrap()
                        .items
                        .iter()
                        .filter(|q| q.lecture() == lec)
                        .count()
                };
                let (mc, gf) = (
                    count(QuestionKind::MultipleChoice),
                    count(QuestionKind::GapFill),
                );
                let out = p.delete_lectures(l.admin, &[lec]).unwrap();
                match &out[0].status {
                    satep::platform::ItemStatus::Deleted { detail } => {
                        ensure!(
                            (detail.files_removed, detail.mc_removed, detail.gf_removed) == (files, mc, gf),
                            "op {op}: cascade reported {detail:?}, expected files {files} mc {mc} gf {gf}"
                        );
                        lectures.retain(|x| *x != lec);
                        cascades += 1;
                    }
                    satep::platform::ItemStatus::Refused { .. } => {}
                    other => return Err(format!("op {op}: lecture delete gave {other:?}")),
                }
                "lecture delete"
            }
            78..=97 if !users.is_empty() && !lectures.is_empty() => {
                let user = users[rng.gen_range(0..users.len())];
                let per_lecture = |kind| {
                    let mut n: HashMap<LectureId, usize> = HashMap::new();
                    for q in p
                        .list_questions(l.admin, kind, None, 1, 100_000)
                        .unwrap()
                        .items
                    {
                        *n.entry(q.lecture()).or_default() += 1;
                    }
                    n
                };
                let (mc, gf) = (
                    per_lecture(QuestionKind::MultipleChoice),
                    per_lecture(QuestionKind::GapFill),
                );
                let ready: Vec<LectureId> = lectures
                    .iter()
                    .copied()
                    .filter(|x| {
                        mc.get(x).copied().unwrap_or(0) >= 2 && gf.get(x).copied().unwrap_or(0) >= 2
                    })
                    .collect();
                let lec = if ready.is_empty() {
                    lectures[rng.gen_range(0..lectures.len())]
                } else {
                    ready[rng.gen_range(0..ready.len())]
                };
                match p.start_test(user, TestKind::LectureTest(lec)) {
                    Ok(view) => {
                        let answers: Vec<SubmittedAnswer> = view
                            .questions
                            .iter()
                            .map(|q| {
                                SubmittedAnswer::new(
                                    q.kind,
                                    q.question_id,
                                    if rng.gen_bool(0.5) { "x" } else { "y" },
                                )
                            })
                            .collect();
                        if rng.gen_bool(0.85) {
                            p.submit_test(user, &view.instance_id, &answers)
                                .map_err(|e| format!("op {op}: {e}"))?;
                        }
                        sittings += 1;
                    }
                    Err(satep::Error::PoolTooSmall { .. } | satep::Error::AlreadyOpen) => {}
                    Err(e) => return Err(format!("op {op}: start_test: {e}")),
                }
                "sitting"
            }
            98..=99 if users.len() > 2 => {
                let Principal::User(am) = users.remove(rng.gen_range(0..users.len())) else {
                    unreachable!()
                };
                p.admin_delete_users(l.admin, &[am]).unwrap();
                "user delete"
            }
            _ => {
                l.clock.advance(Duration::minutes(rng.gen_range(1..45)));
                "clock"
            }
        };
        *tally.entry(name).or_default() += 1;
    }

    let report = p.store().integrity_report().map_err(|e| e.to_string())?;
    ensure!(report.is_clean(), "integrity report {report:?}");
    // No stored object without a file record, and no record without its object.
    let mut digests = HashSet::new();
    p.store()
        .transaction(|tx| {
            for lec in tx.list_lectures()? {
                for f in tx.list_files(lec.id)? {
                    digests.insert(f.digest);
                }
            }
            Ok(())
        })
        .unwrap();
    let objects = p.objects().len().unwrap();
    ensure!(
        objects == digests.len(),
        "{objects} objects for {} referenced digests",
        digests.len()
    );
    ensure!(
        digests.iter().all(|d| p.objects().contains(d)),
        "a file record lost its object"
    );
    ensure!(
        cascades > 0 && sittings > 0,
        "session exercised too little: {cascades} cascades, {sittings} sittings, {tally:?}"
    );
    Ok(format!(
        "{C4_OPERATIONS} ops ({cascades} cascades, {sittings} sittings): 0 orphans, 0 duplicate triples, cascade counts match"
    ))
}

async fn expect(step: &str, r: &common::Reply, status: StatusCode) -> Result<(), String> {
    if r.status == status {
        Ok(())
    } else {
        Err(format!(
            "{step}: expected {status}, got {} {}",
            r.status, r.body
        ))
    }
}

/// 5. The documented workflow end to end over HTTP.
async fn criterion_5() -> Outcome {
    let h = Harness::new(5);
    let admin = h.admin("root").await;

    let r = h.get("/api/lectures", None).await;
    expect("guest catalogue", &r, StatusCode::OK).await?;

    let c = h.post("/api/captcha", None, json!({})).await;
    expect("captcha", &c, StatusCode::CREATED).await?;
    let mut body = h.registration_body(c.data(), 501, "maria");
    body["captcha_answer"] = json!("-1");
    let r = h.post("/api/register", None, body).await;
    expect("wrong captcha", &r, StatusCode::UNPROCESSABLE_ENTITY).await?;
    ensure!(
        r.code() == "CAPTCHA_FAILED",
        "wrong captcha code {}",
        r.code()
    );

    let r = h.register(501, "maria").await;
    expect("register", &r, StatusCode::CREATED).await?;
    let r = h.login("maria", "pw-maria").await;
    expect("login before approval", &r, StatusCode::UNAUTHORIZED).await?;
    let r = h.get("/api/registrations", Some(&admin)).await;
    expect("pending list", &r, StatusCode::OK).await?;
    ensure!(
        r.data().as_array().unwrap().len() == 1,
        "pending list {}",
        r.data()
    );
    let r = h
        .post(
            "/api/registrations/501/decision",
            Some(&admin),
            json!({ "decision": "approve" }),
        )
        .await;
    expect("approve", &r, StatusCode::OK).await?;
    let r = h.login("maria", "pw-maria").await;
    expect("login", &r, StatusCode::OK).await?;
    let maria = r.data()["token"].as_str().unwrap().to_owned();
    let others = [
        h.student(&admin, 502, "kostas").await,
        h.student(&admin, 503, "sofia").await,
    ];

    let lecture = h.lecture(&admin, "Databases").await;
    let bytes: Vec<u8> = (0..=255u8).cycle().take(70_000).collect();
    let r = h
        .upload(&admin, lecture, "slides.pdf", "application/pdf", &bytes)
        .await;
    expect("upload", &r, StatusCode::CREATED).await?;
    let file_id = r.data()["id"].as_i64().unwrap();
    let r = h.get("/api/lectures", None).await;
    ensure!(
        r.data()[0]["files"] == json!(["slides.pdf"]) && r.data()[0].get("digest").is_none(),
        "guest catalogue {}",
        r.data()
    );
    let r = h
        .get(&format!("/api/lectures/{lecture}/files"), Some(&maria))
        .await;
    expect("file list", &r, StatusCode::OK).await?;
    let r = h.get(&format!("/api/files/{file_id}"), Some(&maria)).await;
    expect("download", &r, StatusCode::OK).await?;
    ensure!(r.raw == bytes, "downloaded bytes differ");
    ensure!(
        r.headers["content-type"] == "application/pdf",
        "content type {:?}",
        r.headers["content-type"]
    );
    let r = h.get(&format!("/api/files/{file_id}"), None).await;
    expect("guest download", &r, StatusCode::UNAUTHORIZED).await?;

    let second = h.lecture(&admin, "Networks").await;
    for n in 0..16 {
        h.mc(&admin, lecture, n).await;
        h.mc(&admin, second, n).await;
    }
    for n in 0..8 {
        h.gf(&admin, lecture, n).await;
        h.gf(&admin, second, n).await;
    }
    let key = h.answer_key(&admin).await;

    let r = h
        .post(
            &format!("/api/tests/lecture_{lecture}/start"),
            Some(&maria),
            json!({}),
        )
        .await;
    expect("lecture test start", &r, StatusCode::CREATED).await?;
    let view = r.data().clone();
    ensure!(
        view["questions"].as_array().unwrap().len() == 10,
        "lecture test size"
    );
    let id = view["instance_id"].as_str().unwrap().to_owned();
    let r = h
        .post(
            &format!("/api/tests/{id}/submit"),
            Some(&maria),
            sheet(&view, &key, |i| i % 5 != 0),
        )
        .await;
    expect("lecture test submit", &r, StatusCode::OK).await?;
    ensure!(
        (r.data()["percent"].as_f64().unwrap() - 80.0).abs() < 1e-9,
        "lecture percent {}",
        r.data()
    );
    let r = h
        .post(
            &format!("/api/tests/{id}/submit"),
            Some(&maria),
            sheet(&view, &key, |_| true),
        )
        .await;
    expect("resubmit", &r, StatusCode::CONFLICT).await?;

    let r = h
        .post("/api/tests/final_exam/start", Some(&maria), json!({}))
        .await;
    expect("final without schedule", &r, StatusCode::CONFLICT).await?;
    let outbox_before = h
        .platform
        .store()
        .transaction(|tx| tx.all_outbox())
        .unwrap()
        .len();
    let start = t0() + Duration::hours(2);
    let r = h
        .call(
            "PUT",
            "/api/schedule/final_exam",
            Some(&admin),
            Some(json!({ "date": start.format("%Y-%m-%d").to_string(), "time": start.format("%H:%M:%S").to_string(), "duration_minutes": 60 })),
        )
        .await;
    expect("schedule", &r, StatusCode::OK).await?;
    let outbox = h
        .platform
        .store()
        .transaction(|tx| tx.all_outbox())
        .unwrap();
    ensure!(
        outbox.len() - outbox_before == 3 && r.data()["notified"] == 3,
        "outbox grew by {} for 3 users",
        outbox.len() - outbox_before
    );
    let sink = FileSink::new(h.dir.path().join("mail")).unwrap();
    let drained = h.platform.drain_outbox(&sink).unwrap();
    ensure!(
        drained.sent == 3 && sink.messages().unwrap().len() == 3,
        "drain {drained:?}"
    );
    ensure!(
        h.platform
            .store()
            .transaction(|tx| tx.all_outbox())
            .unwrap()
            .iter()
            .all(|m| m.status == OutboxStatus::Sent),
        "outbox not fully sent"
    );

    let r = h
        .post("/api/tests/final_exam/start", Some(&maria), json!({}))
        .await;
    expect("final before window", &r, StatusCode::CONFLICT).await?;
    ensure!(
        r.code() == "OUTSIDE_WINDOW",
        "before window code {}",
        r.code()
    );
    h.clock.set(start + Duration::minutes(5));
    let r = h
        .post("/api/tests/final_exam/start", Some(&maria), json!({}))
        .await;
    expect("final inside window", &r, StatusCode::CREATED).await?;
    let fview = r.data().clone();
    ensure!(
        fview["questions"].as_array().unwrap().len() == 30,
        "final size"
    );
    let fid = fview["instance_id"].as_str().unwrap().to_owned();
    let r = h.get(&format!("/api/tests/{fid}"), Some(&maria)).await;
    expect("refetch", &r, StatusCode::OK).await?;
    ensure!(r.data() == &fview, "refetched view differs");
    let r = h.get(&format!("/api/tests/{fid}"), Some(&others[0])).await;
    expect("other user's sitting", &r, StatusCode::FORBIDDEN).await?;
    let r = h
        .post(
            &format!("/api/tests/{fid}/submit"),
            Some(&maria),
            sheet(&fview, &key, |i| i < 27),
        )
        .await;
    expect("final submit", &r, StatusCode::OK).await?;
    ensure!(
        (r.data()["percent"].as_f64().unwrap() - 90.0).abs() < 1e-9,
        "final percent {}",
        r.data()
    );

    h.clock.set(start + Duration::minutes(61));
    let r = h
        .post("/api/tests/final_exam/start", Some(&others[1]), json!({}))
        .await;
    expect("final after window", &r, StatusCode::CONFLICT).await?;

    let r = h.get("/api/results/me", Some(&maria)).await;
    expect("my results", &r, StatusCode::OK).await?;
    let kinds: HashSet<String> = r
        .data()
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["kind"].as_str().unwrap().to_owned())
        .collect();
    ensure!(
        kinds == HashSet::from([format!("lecture_{lecture}"), "final_exam".to_owned()]),
        "my results {}",
        r.data()
    );
    let r = h.get("/api/results?am=501", Some(&admin)).await;
    expect("admin results", &r, StatusCode::OK).await?;
    ensure!(r.data()["total"] == 2, "admin results {}", r.data());
    let r = h.get("/api/results?kind=final_exam", Some(&admin)).await;
    ensure!(
        r.data()["total"] == 1
            && (r.data()["items"][0]["percent"].as_f64().unwrap() - 90.0).abs() < 1e-9,
        "final results {}",
        r.data()
    );
    Ok("register, approve, login, download, lecture test, schedule+mail, window gate, results: all statuses as documented".into())
}

fn fill(path: &str) -> String {
    path.replace("{id}", "1")
        .replace("{am}", "1")
        .replace(
            "{kind}",
            if path.starts_with("/api/schedule") {
                "final_exam"
            } else {
                "multiple_choice"
            },
        )
        .replace(
            "{key}",
            if path.ends_with("/start") {
                "final_exam"
            } else {
                "0000"
            },
        )
}

/// 6. Every route against guest, user and admin.
async fn criterion_6() -> Outcome {
    use satep::api::{Access, ROUTES};
    let h = Harness::new(6);
    let admin_pw = h.seed_admin("root");
    let admin = h.login("root", &admin_pw).await.data()["token"]
        .as_str()
        .unwrap()
        .to_owned();
    h.student(&admin, 601, "matrix").await;
    let mut cells = 0;
    let mut deviations = Vec::new();
    for route in ROUTES {
        // Fresh sessions per route so logout cannot leak into later cells.
        let admin = h.login("root", &admin_pw).await.data()["token"]
            .as_str()
            .map(str::to_owned);
        let user = h.login("matrix", "pw-matrix").await.data()["token"]
            .as_str()
            .map(str::to_owned);
        for (who, token) in [
            ("guest", None),
            ("user", user.as_deref()),
            ("admin", admin.as_deref()),
        ] {
            let body = (route.method != "GET").then(|| json!({}));
            let r = h.call(route.method, &fill(route.path), token, body).await;
            let expected = match (route.access, who) {
                (Access::Public, _) => None,
                (_, "guest") => Some(StatusCode::UNAUTHORIZED),
                (Access::User, "admin") | (Access::Admin, "user") => Some(StatusCode::FORBIDDEN),
                _ => None,
            };
            let ok = match expected {
                Some(s) => r.status == s && r.body["ok"] == false,
                None => {
                    !matches!(
                        r.status,
                        StatusCode::UNAUTHORIZED
                            | StatusCode::FORBIDDEN
                            | StatusCode::METHOD_NOT_ALLOWED
                    ) && !r.status.is_server_error()
                        && (r.body["ok"].is_boolean() || r.status == StatusCode::OK)
                }
            };
            cells += 1;
            if !ok {
                deviations.push(format!(
                    "{} {} as {who}: {}",
                    route.method, route.path, r.status
                ));
            }
        }
    }
    ensure!(
        deviations.is_empty(),
        "{} deviations: {deviations:?}",
        deviations.len()
    );
    Ok(format!(
        "{cells} cells ({} routes x 3 roles), 0 deviations",
        ROUTES.len()
    ))
}

/// 7. Late submission records 0% expired; on time records the oracle percent.
async fn criterion_7() -> Outcome {
    async fn sit(late: bool) -> Result<(StatusCode, Value, Value, Value), String> {
        let h = Harness::new(7);
        let admin = h.admin("root").await;
        let user = h.student(&admin, 701, "late").await;
        let lecture = h.lecture(&admin, "Operating Systems").await;
        for n in 0..5 {
            h.mc(&admin, lecture, n).await;
            h.gf(&admin, lecture, n).await;
        }
        let key = h.answer_key(&admin).await;
        let r = h
            .post(
                &format!("/api/tests/lecture_{lecture}/start"),
                Some(&user),
                json!({}),
            )
            .await;
        if r.status != StatusCode::CREATED {
            return Err(format!("start: {}", r.body));
        }
        let view = r.data().clone();
        let deadline: chrono::DateTime<chrono::Utc> =
            view["deadline"].as_str().unwrap().parse().unwrap();
        let grace = h.platform.settings().submission_grace;
        h.clock.set(if late {
            deadline + grace + Duration::seconds(1)
        } else {
            deadline + grace
        });
        let id = view["instance_id"].as_str().unwrap();
        let r = h
            .post(
                &format!("/api/tests/{id}/submit"),
                Some(&user),
                sheet(&view, &key, |i| i % 3 != 2),
            )
            .await;
        let state = h
            .platform
            .store()
            .transaction(|tx| tx.get_instance(id))
            .unwrap()
            .map(|row| serde_json::to_value(row.state).unwrap())
            .unwrap_or(Value::Null);
        let results = h.get("/api/results/me", Some(&user)).await.data().clone();
        Ok((r.status, r.body, json!(state), results))
    }
    let (late_status, late_body, late_state, late_results) = sit(true).await?;
    let (ok_status, ok_body, ok_state, ok_results) = sit(false).await?;
    // Questions at positions 0,1,3,4,6,7,9 are answered correctly: 7 of 10.
    let oracle = 100.0 * 7.0 / 10.0;
    ensure!(
        late_status == StatusCode::CONFLICT && late_body["error"]["code"] == "TEST_EXPIRED",
        "late submit gave {late_status} {late_body}"
    );
    ensure!(
        late_state == json!(InstanceState::Expired),
        "late state {late_state}"
    );
    ensure!(
        late_results.as_array().unwrap().len() == 1
            && late_results[0]["percent"].as_f64() == Some(0.0),
        "late results {late_results}"
    );
    ensure!(
        ok_status == StatusCode::OK,
        "on-time submit gave {ok_status} {ok_body}"
    );
    ensure!(
        ok_state == json!(InstanceState::Submitted),
        "on-time state {ok_state}"
    );
    let got = ok_results[0]["percent"].as_f64().unwrap();
    ensure!(
        (got - oracle).abs() < 1e-9,
        "on-time percent {got}, oracle {oracle}"
    );
    Ok(format!(
        "late: 0% expired; at deadline+grace: {got}% submitted (oracle {oracle}%)"
    ))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 final-exam composition", Box::new(criterion_1)),
        ("2 randomization distinctness", Box::new(criterion_2)),
        ("3 grading oracle equivalence", Box::new(criterion_3)),
        ("4 schema integrity sweep", Box::new(criterion_4)),
        (
            "5 workflow reproduction",
            Box::new(|| rt.block_on(criterion_5())),
        ),
        (
            "6 authorization matrix",
            Box::new(|| rt.block_on(criterion_6())),
        ),
        ("7 expiry behavior", Box::new(|| rt.block_on(criterion_7()))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
