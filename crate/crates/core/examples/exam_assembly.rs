//! Draws a final-exam sheet from fixed pools and grades one answer sheet,
//! without touching storage.

use std::collections::HashMap;

use satep::domain::{
    assemble_test, grade, normalize_response, QuestionId, QuestionKind, QuestionRef, Scope,
    SubmittedAnswer, TestBlueprint,
};
use satep::platform::seeded_rng;

fn main() {
    let mc_pool: Vec<QuestionId> = (1..=30).map(|n| QuestionId::new(n).unwrap()).collect();
    let gf_pool: Vec<QuestionId> = (1..=15).map(|n| QuestionId::new(n).unwrap()).collect();
    let blueprint = TestBlueprint::new(20, 10, Scope::AllLectures).unwrap();

    let mut rng = seeded_rng(Some(7));
    let (mc, gf) = assemble_test(&blueprint, &mc_pool, &gf_pool, &mut rng).unwrap();
    println!(
        "multiple choice: {:?}",
        mc.question_ids()
            .iter()
            .map(|q| q.get())
            .collect::<Vec<_>>()
    );
    println!(
        "gap fill:        {:?}",
        gf.question_ids()
            .iter()
            .map(|q| q.get())
            .collect::<Vec<_>>()
    );

    let key: HashMap<QuestionRef, String> = mc
        .refs()
        .chain(gf.refs())
        .map(|r| (r, format!("answer {}", r.id.get())))
        .collect();

    // Right on every even id; gap-fill answers differ only in case and spacing.
    let answers: Vec<SubmittedAnswer> = mc
        .refs()
        .chain(gf.refs())
        .map(|r| {
            let response = match (r.kind, r.id.get() % 2) {
                (_, 1) => "something else".to_owned(),
                (QuestionKind::GapFill, _) => format!("  ANSWER   {} ", r.id.get()),
                _ => format!("answer {}", r.id.get()),
            };
            SubmittedAnswer::new(r.kind, r.id, response)
        })
        .collect();
    let result = grade(&answers, &key).unwrap();
    println!(
        "graded {}/{} = {:.1}% (normalized {:?})",
        result.correct_count,
        result.total_count,
        result.percent,
        normalize_response("  ANSWER   4 ")
    );
}
