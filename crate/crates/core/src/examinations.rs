//! Scheduling, opening sittings, grading submissions and result views.

use std::collections::HashMap;

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{
    assemble_test, grade, shuffle_options, GradeResult, PresentedQuestion, Principal, Question,
    QuestionKind, RegisterNumber, Scope, SubmittedAnswer, TestBlueprint, TestKind,
};
use crate::error::{Error, Result};
use crate::platform::{require_admin, require_user, Platform};
use crate::storage::{
    paginate, InstanceRow, InstanceState, Page, ResultFilter, ScheduleRecord, StoreTx,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleForm {
    pub date: NaiveDate,
    #[serde(with = "hms")]
    pub time: NaiveTime,
    pub duration_minutes: u32,
}

/// `HH:MM:SS`, nothing else.
mod hms {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&t.format("%H:%M:%S"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let s = String::deserialize(d)?;
        NaiveTime::parse_from_str(&s, "%H:%M:%S")
            .map_err(|_| serde::de::Error::custom(format!("time {s:?} is not HH:MM:SS")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub schedule: ScheduleRecord,
    pub notified: usize,
}

/// A sitting as the examinee sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestView {
    pub instance_id: String,
    pub kind: TestKind,
    pub opened_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    pub state: InstanceState,
    pub percent: Option<f64>,
    pub questions: Vec<PresentedQuestion>,
}

impl From<InstanceRow> for TestView {
    fn from(r: InstanceRow) -> Self {
        Self {
            instance_id: r.instance_id,
            kind: r.kind,
            opened_at: r.opened_at,
            deadline: r.deadline,
            state: r.state,
            percent: r.percent,
            questions: r.presented,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub am: RegisterNumber,
    pub kind: TestKind,
    pub date: NaiveDate,
    pub percent: f64,
}

impl Platform {
    pub fn blueprint_for(&self, kind: TestKind) -> Result<TestBlueprint> {
        let s = self.settings();
        Ok(match kind {
            TestKind::FinalExam => {
                TestBlueprint::new(s.final_blueprint.0, s.final_blueprint.1, Scope::AllLectures)?
            }
            TestKind::LectureTest(l) => TestBlueprint::new(
                s.lecture_blueprint.0,
                s.lecture_blueprint.1,
                Scope::SingleLecture(l),
            )?,
        })
    }

    /// Replaces the schedule for `kind` and mails every registered user in
    /// the same transaction.
    pub fn set_schedule(
        &self,
        actor: Principal,
        kind: TestKind,
        form: &ScheduleForm,
    ) -> Result<ScheduleOutcome> {
        require_admin(actor)?;
        if form.duration_minutes == 0 {
            return Err(Error::InvalidSchedule(
                "duration must be at least one minute".into(),
            ));
        }
        let now = self.now();
        let starts_at = form.date.and_time(form.time).and_utc();
        if starts_at < now {
            return Err(Error::InvalidSchedule(format!(
                "start {starts_at} is in the past"
            )));
        }
        self.transaction(|tx| {
            let what = match kind {
                TestKind::FinalExam => "The final exam".to_string(),
                TestKind::LectureTest(l) => {
                    format!("The test for \"{}\"", tx.require_lecture(l)?.title)
                }
            };
            let schedule = tx.upsert_schedule(kind, form.date, form.time, form.duration_minutes)?;
            let subject = format!("{what} has been scheduled");
            let body = format!(
                "{what} takes place on {} at {} (UTC) and lasts {} minutes.\n",
                form.date.format("%Y-%m-%d"),
                form.time.format("%H:%M:%S"),
                form.duration_minutes
            );
            let users = tx.list_users()?;
            for u in &users {
                tx.enqueue_email(&u.profile.email, &subject, &body, false, now)?;
            }
            Ok(ScheduleOutcome {
                schedule,
                notified: users.len(),
            })
        })
    }

    pub fn schedules(&self) -> Result<Vec<ScheduleRecord>> {
        self.transaction(|tx| tx.list_schedules())
    }

    /// Opens a sitting: checks the window, draws groups, persists them and
    /// snapshots the presented questions and the answer key.
    pub fn start_test(&self, actor: Principal, kind: TestKind) -> Result<TestView> {
        let am = require_user(actor)?;
        let now = self.now();
        self.expire_overdue(Some(am))?;
        let blueprint = self.blueprint_for(kind)?;
        let instance_id = self.random_hex(16);
        self.transaction(|tx| {
            if let TestKind::LectureTest(l) = kind {
                tx.require_lecture(l)?;
            }
            if tx.open_instance(am, kind)?.is_some() {
                return Err(Error::AlreadyOpen);
            }
            let duration = match (kind, tx.get_schedule(kind)?) {
                (_, Some(s)) if s.contains(now) => s.duration(),
                (_, Some(_)) | (TestKind::FinalExam, None) => return Err(Error::OutsideWindow),
                (TestKind::LectureTest(_), None) => {
                    Duration::minutes(i64::from(self.settings().lecture_test_minutes))
                }
            };
            let mc_pool = tx.question_pool(QuestionKind::MultipleChoice, blueprint.scope)?;
            let gf_pool = tx.question_pool(QuestionKind::GapFill, blueprint.scope)?;
            let (mc, gf) = self.with_rng(|r| assemble_test(&blueprint, &mc_pool, &gf_pool, r))?;
            let (mc_group, gf_group) = tx.persist_test_groups(&mc, &gf, now)?;

            let mut presented = Vec::with_capacity(blueprint.total());
            let mut answer_key = Vec::with_capacity(blueprint.total());
            for r in mc.refs().chain(gf.refs()) {
                let q = tx
                    .get_question(r.kind, r.id)?
                    .ok_or_else(|| Error::UnknownQuestion(r.to_string()))?;
                answer_key.push((r, q.canonical_answer().to_owned()));
                presented.push(match &q {
                    Question::MultipleChoice(m) => self.with_rng(|rng| shuffle_options(m, rng)),
                    Question::GapFill(g) => PresentedQuestion::gap_fill(g),
                });
            }
            let row = InstanceRow {
                instance_id: instance_id.clone(),
                am,
                kind,
                mc_group,
                gf_group,
                opened_at: now,
                deadline: now + duration,
                presented,
                answer_key,
                state: InstanceState::Open,
                percent: None,
            };
            tx.insert_instance(&row)?;
            Ok(TestView::from(row))
        })
    }

    /// Re-fetches a sitting. Refused once any of its questions is deleted.
    pub fn get_test(&self, actor: Principal, instance_id: &str) -> Result<TestView> {
        let am = require_user(actor)?;
        self.transaction(|tx| {
            let row = owned_instance(tx, am, instance_id)?;
            for q in &row.presented {
                if tx.get_question(q.kind, q.question_id)?.is_none() {
                    return Err(Error::GroupUnavailable);
                }
            }
            Ok(TestView::from(row))
        })
    }

    /// Grades and records a submission. After deadline plus grace the sitting
    /// is recorded at 0% and closed as expired, and `Expired` is returned.
    pub fn submit_test(
        &self,
        actor: Principal,
        instance_id: &str,
        answers: &[SubmittedAnswer],
    ) -> Result<GradeResult> {
        let am = require_user(actor)?;
        let now = self.now();
        let grace = self.settings().submission_grace;
        let outcome = self.transaction(|tx| {
            let row = owned_instance(tx, am, instance_id)?;
            if row.state != InstanceState::Open {
                return Err(Error::AlreadySubmitted);
            }
            let total = row.answer_key.len() as u32;
            if now > row.deadline + grace {
                close(tx, &row, InstanceState::Expired, 0.0, now)?;
                return Ok(Err(GradeResult::zero(total)));
            }
            let key: HashMap<_, _> = row.answer_key.iter().cloned().collect();
            let result = grade(answers, &key)?;
            close(tx, &row, InstanceState::Submitted, result.percent, now)?;
            Ok(Ok(result))
        })?;
        outcome.map_err(|zero| Error::Expired {
            percent: zero.percent,
        })
    }

    /// Closes open sittings past deadline plus grace at 0%, for one user or
    /// everyone. Returns how many were closed.
    pub fn expire_overdue(&self, am: Option<RegisterNumber>) -> Result<usize> {
        let now = self.now();
        let grace = self.settings().submission_grace;
        self.transaction(|tx| {
            let mut n = 0;
            for row in tx.all_instances()? {
                if row.state == InstanceState::Open
                    && now > row.deadline + grace
                    && am.is_none_or(|a| a == row.am)
                {
                    close(tx, &row, InstanceState::Expired, 0.0, now)?;
                    n += 1;
                }
            }
            Ok(n)
        })
    }

    /// The caller's completed sittings, newest first.
    pub fn my_results(&self, actor: Principal) -> Result<Vec<ResultRow>> {
        let am = require_user(actor)?;
        let filter = ResultFilter {
            am: Some(am),
            kind: None,
        };
        self.results(&filter)
    }

    pub fn admin_results(
        &self,
        actor: Principal,
        filter: &ResultFilter,
        page: usize,
        page_size: usize,
    ) -> Result<Page<ResultRow>> {
        require_admin(actor)?;
        paginate(self.results(filter)?, page, page_size)
    }

    fn results(&self, filter: &ResultFilter) -> Result<Vec<ResultRow>> {
        let rows = self.transaction(|tx| tx.completed_tests(filter))?;
        Ok(rows
            .into_iter()
            .map(|r| ResultRow {
                am: r.am,
                kind: r.kind,
                date: r.date,
                percent: r.percent,
            })
            .collect())
    }
}

fn owned_instance(tx: &StoreTx<'_>, am: RegisterNumber, id: &str) -> Result<InstanceRow> {
    let row = tx
        .get_instance(id)?
        .ok_or_else(|| Error::not_found(format!("test {id}")))?;
    if row.am != am {
        return Err(Error::NotOwner);
    }
    Ok(row)
}

fn close(
    tx: &StoreTx<'_>,
    row: &InstanceRow,
    state: InstanceState,
    percent: f64,
    now: DateTime<Utc>,
) -> Result<()> {
    tx.close_instance(&row.instance_id, state, percent)?;
    tx.record_completed_test(
        row.mc_group,
        row.gf_group,
        row.am,
        row.kind,
        now.date_naive(),
        percent,
        now,
    )?;
    Ok(())
}
