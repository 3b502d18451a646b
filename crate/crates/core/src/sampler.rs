//! Seeded sampling of steps for prompt evaluation, and contiguous lesson
//! partitioning across authors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::content_pool::{ContentPool, StepRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Textbook,
    Lesson,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("unknown lesson {0:?}")]
    UnknownLesson(String),
    #[error("lesson scope needs a lesson id")]
    MissingLesson,
    #[error("nothing to sample in scope")]
    EmptyScope,
    #[error("sample size must be at least 1")]
    ZeroSample,
    #[error("lessons and authors must both be non-empty")]
    EmptyInput,
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws up to `n` distinct steps uniformly without replacement. A scope
/// with fewer than `n` steps is returned whole, shuffled.
pub fn sample_steps(
    pool: &ContentPool,
    scope: Scope,
    lesson_id: Option<&str>,
    n: usize,
    seed: u64,
) -> Result<Vec<StepRef>, SampleError> {
    if n == 0 {
        return Err(SampleError::ZeroSample);
    }
    let candidates: Vec<StepRef> = match scope {
        Scope::Textbook => pool.steps().map(|c| c.step_ref()).collect(),
        Scope::Lesson => {
            let id = lesson_id.ok_or(SampleError::MissingLesson)?;
            let lesson = pool
                .get_lesson(id)
                .map_err(|_| SampleError::UnknownLesson(id.to_string()))?;
            lesson
                .problems
                .iter()
                .flat_map(|p| p.steps.iter().map(|s| StepRef::new(&p.problem_id, &s.step_id)))
                .collect()
        }
    };
    if candidates.is_empty() {
        return Err(SampleError::EmptyScope);
    }
    let mut rng = rng_for(seed);
    let take = n.min(candidates.len());
    Ok(candidates.choose_multiple(&mut rng, take).cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorSlice {
    pub author: String,
    pub lessons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LessonAssignment {
    /// One entry per author, in the order authors were given.
    pub slices: Vec<AuthorSlice>,
}

impl LessonAssignment {
    /// Authors left without lessons (more authors than lessons).
    pub fn idle_authors(&self) -> Vec<&str> {
        self.slices
            .iter()
            .filter(|s| s.lessons.is_empty())
            .map(|s| s.author.as_str())
            .collect()
    }

    pub fn slice_for(&self, author: &str) -> Option<&[String]> {
        self.slices
            .iter()
            .find(|s| s.author == author)
            .map(|s| s.lessons.as_slice())
    }
}

/// Cuts `lesson_ids` into `authors.len()` contiguous slices whose sizes
/// differ by at most one (larger slices first), then pairs slices with
/// authors by a seeded shuffle.
pub fn assign_lessons(
    lesson_ids: &[String],
    authors: &[String],
    seed: u64,
) -> Result<LessonAssignment, SampleError> {
    if lesson_ids.is_empty() || authors.is_empty() {
        return Err(SampleError::EmptyInput);
    }
    let parts = authors.len();
    let base = lesson_ids.len() / parts;
    let extra = lesson_ids.len() % parts;

    let mut slices: Vec<&[String]> = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        slices.push(&lesson_ids[start..start + len]);
        start += len;
    }

    let mut order: Vec<usize> = (0..parts).collect();
    order.shuffle(&mut rng_for(seed));

    let slices = authors
        .iter()
        .zip(order)
        .map(|(author, slot)| AuthorSlice {
            author: author.clone(),
            lessons: slices[slot].to_vec(),
        })
        .collect();
    Ok(LessonAssignment { slices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content_pool::ingest_csv_at;
    use chrono::DateTime;
    use proptest::prelude::*;

    fn pool_with(lessons: &[(&str, usize)]) -> ContentPool {
        let mut csv = String::from(
            "lesson_id,lesson_title,problem_id,problem_body,step_id,step_body,answer,answer_type,choices,human_hints\n",
        );
        for (lesson, steps) in lessons {
            if *steps == 0 {
                csv.push_str(&format!("{lesson},T,,,,,,,,\n"));
            }
            for s in 0..*steps {
                csv.push_str(&format!("{lesson},T,P{lesson}-{},b,s{s},b,1,numeric,,\n", s / 2));
            }
        }
        ingest_csv_at(csv.as_bytes(), "p", DateTime::from_timestamp(0, 0).unwrap()).unwrap()
    }

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("L{i}")).collect()
    }

    #[test]
    fn exhaustion_returns_whole_scope() {
        let pool = pool_with(&[("1.1", 5)]);
        let got = sample_steps(&pool, Scope::Textbook, None, 10, 1).unwrap();
        assert_eq!(got.len(), 5);
        let mut sorted = got.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
    }

    #[test]
    fn deterministic_for_seed() {
        let pool = pool_with(&[("1.1", 6), ("1.2", 6)]);
        let a = sample_steps(&pool, Scope::Textbook, None, 4, 42).unwrap();
        let b = sample_steps(&pool, Scope::Textbook, None, 4, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lesson_scope_errors() {
        let pool = pool_with(&[("1.1", 2), ("1.2", 0)]);
        assert_eq!(
            sample_steps(&pool, Scope::Lesson, Some("7.7"), 1, 0),
            Err(SampleError::UnknownLesson("7.7".into()))
        );
        assert_eq!(
            sample_steps(&pool, Scope::Lesson, Some("1.2"), 1, 0),
            Err(SampleError::EmptyScope)
        );
        assert_eq!(sample_steps(&pool, Scope::Lesson, None, 1, 0), Err(SampleError::MissingLesson));
        assert_eq!(sample_steps(&pool, Scope::Textbook, None, 0, 0), Err(SampleError::ZeroSample));
        let got = sample_steps(&pool, Scope::Lesson, Some("1.1"), 5, 0).unwrap();
        assert!(got.iter().all(|r| r.problem_id.starts_with("P1.1")));
    }

    #[test]
    fn uniform_single_draws() {
        // Each of 4 steps should appear 2500 ± 3σ times in 10,000 n=1 draws,
        // σ = sqrt(10000 · 1/4 · 3/4) ≈ 43.3.
        let pool = pool_with(&[("1.1", 4)]);
        let mut counts = std::collections::HashMap::new();
        for seed in 0..10_000u64 {
            let r = sample_steps(&pool, Scope::Textbook, None, 1, seed).unwrap();
            *counts.entry(r[0].clone()).or_insert(0u32) += 1;
        }
        let sigma = (10_000f64 * 0.25 * 0.75).sqrt();
        assert_eq!(counts.len(), 4);
        let mut chi2 = 0.0;
        for (r, c) in &counts {
            let dev = (*c as f64 - 2500.0).abs();
            assert!(dev <= 3.0 * sigma, "{r}: {c}");
            chi2 += (*c as f64 - 2500.0).powi(2) / 2500.0;
        }
        // 3 degrees of freedom, p = 0.001 critical value.
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn fifty_nine_lessons_ten_authors() {
        let authors: Vec<String> = (1..=10).map(|i| format!("P{i}")).collect();
        let a = assign_lessons(&ids(59), &authors, 7).unwrap();
        let mut sizes: Vec<usize> = a.slices.iter().map(|s| s.lessons.len()).collect();
        sizes.sort();
        assert_eq!(sizes, [5, 6, 6, 6, 6, 6, 6, 6, 6, 6]);
    }

    #[test]
    fn one_each_and_idle_authors() {
        let authors: Vec<String> = (1..=10).map(|i| format!("P{i}")).collect();
        let a = assign_lessons(&ids(10), &authors, 3).unwrap();
        assert!(a.slices.iter().all(|s| s.lessons.len() == 1));

        let authors: Vec<String> = (1..=5).map(|i| format!("P{i}")).collect();
        let a = assign_lessons(&ids(3), &authors, 3).unwrap();
        assert_eq!(a.idle_authors().len(), 2);
        assert_eq!(a.slices.iter().filter(|s| s.lessons.len() == 1).count(), 3);

        assert_eq!(assign_lessons(&[], &authors, 0), Err(SampleError::EmptyInput));
        assert_eq!(assign_lessons(&ids(3), &[], 0), Err(SampleError::EmptyInput));
    }

    proptest! {
        #[test]
        fn partition_properties(lessons in 1usize..80, authors in 1usize..15, seed: u64) {
            let lesson_ids = ids(lessons);
            let author_ids: Vec<String> = (0..authors).map(|i| format!("a{i}")).collect();
            let a = assign_lessons(&lesson_ids, &author_ids, seed).unwrap();
            prop_assert_eq!(a.slices.len(), authors);

            let sizes: Vec<usize> = a.slices.iter().map(|s| s.lessons.len()).collect();
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);

            // Every slice is a contiguous run of the input, and reassembling
            // the non-empty slices by first index reproduces the input.
            let mut runs: Vec<(usize, &Vec<String>)> = Vec::new();
            for s in a.slices.iter().filter(|s| !s.lessons.is_empty()) {
                let start = lesson_ids.iter().position(|l| *l == s.lessons[0]).unwrap();
                prop_assert_eq!(&lesson_ids[start..start + s.lessons.len()], s.lessons.as_slice());
                runs.push((start, &s.lessons));
            }
            runs.sort();
            let joined: Vec<String> = runs.into_iter().flat_map(|(_, l)| l.clone()).collect();
            prop_assert_eq!(joined, lesson_ids);
        }

        #[test]
        fn no_duplicates_in_a_draw(steps in 1usize..30, n in 1usize..40, seed: u64) {
            let pool = pool_with(&[("1.1", steps)]);
            let got = sample_steps(&pool, Scope::Textbook, None, n, seed).unwrap();
            prop_assert_eq!(got.len(), n.min(steps));
            let mut dedup = got.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), got.len());
        }
    }
}
