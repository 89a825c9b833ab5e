use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    DomainError, MultipleChoiceQuestion, PresentedQuestion, QuestionId, QuestionKind,
    TestBlueprint, TestGroup,
};

/// Draws `count` distinct ids uniformly without replacement, in random order.
pub fn select_questions<R: Rng + ?Sized>(
    pool: &[QuestionId],
    count: usize,
    rng: &mut R,
) -> Result<Vec<QuestionId>, DomainError> {
    let mut seen = HashSet::with_capacity(pool.len());
    if let Some(dup) = pool.iter().find(|id| !seen.insert(**id)) {
        return Err(DomainError::DuplicateInPool(dup.get()));
    }
    if count > pool.len() {
        // The caller knows which side it is drawing for and re-tags this.
        return Err(DomainError::PoolTooSmall {
            side: QuestionKind::MultipleChoice,
            needed: count,
            available: pool.len(),
        });
    }
    let mut working = pool.to_vec();
    let (chosen, _) = working.partial_shuffle(rng, count);
    Ok(chosen.to_vec())
}

pub fn shuffle_options<R: Rng + ?Sized>(
    q: &MultipleChoiceQuestion,
    rng: &mut R,
) -> PresentedQuestion {
    let mut options: Vec<String> = q.answers().map(str::to_owned).collect();
    options.shuffle(rng);
    PresentedQuestion {
        question_id: q.id,
        kind: QuestionKind::MultipleChoice,
        prompt: q.question.clone(),
        options: Some(options),
    }
}

/// Builds the two groups for one sitting. Pools must already be filtered to
/// the blueprint's scope. The multiple-choice side is drawn first.
pub fn assemble_test<R: Rng + ?Sized>(
    blueprint: &TestBlueprint,
    mc_pool: &[QuestionId],
    gf_pool: &[QuestionId],
    rng: &mut R,
) -> Result<(TestGroup, TestGroup), DomainError> {
    let mc = draw_side(
        QuestionKind::MultipleChoice,
        mc_pool,
        blueprint.mc_count,
        rng,
    )?;
    let gf = draw_side(QuestionKind::GapFill, gf_pool, blueprint.gf_count, rng)?;
    Ok((mc, gf))
}

fn draw_side<R: Rng + ?Sized>(
    kind: QuestionKind,
    pool: &[QuestionId],
    count: usize,
    rng: &mut R,
) -> Result<TestGroup, DomainError> {
    if count == 0 {
        return Ok(TestGroup::empty(kind));
    }
    let ids = select_questions(pool, count, rng).map_err(|e| match e {
        DomainError::PoolTooSmall {
            needed, available, ..
        } => DomainError::PoolTooSmall {
            side: kind,
            needed,
            available,
        },
        other => other,
    })?;
    TestGroup::new(kind, ids)
}
