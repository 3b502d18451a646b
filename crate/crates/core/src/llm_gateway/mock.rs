use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{GenerationRequest, GenerationStep, Provider, ProviderError};
use crate::answer::AnswerType;
use crate::content_pool::StepRef;
use crate::digest::hash64;

/// Fault injection knobs for [`MockProvider`].
#[derive(Debug, Clone, Default)]
pub struct MockFaults {
    /// Keys left out of every response.
    pub drop_keys: BTreeSet<StepRef>,
    /// Keys whose value is text the pathway parser rejects.
    pub malformed_keys: BTreeSet<StepRef>,
    /// Calls numbered above this (1-based) fail with a transport error.
    pub fail_after_calls: Option<usize>,
    /// Every call fails with a transport error.
    pub unavailable: bool,
}

/// Offline provider. Each value is a pure function of a 64-bit hash of
/// (system preamble, user prompt, step ref, seed), so identical requests give
/// byte-identical responses and distinct seeds give varied candidates.
#[derive(Debug, Default)]
pub struct MockProvider {
    faults: MockFaults,
    calls: AtomicUsize,
}

const OPENERS: [&str; 6] = [
    "Read carefully",
    "Start here",
    "Get oriented",
    "First look",
    "Big picture",
    "Set up",
];

const OPENER_BODIES: [&str; 6] = [
    "Reread the step and underline what it asks you to find.",
    "Write down the quantities the problem gives you before doing anything else.",
    "Decide which rule or formula connects the given information to the goal.",
    "Think about what a reasonable answer should look like before you compute.",
    "Identify the unknown and name it with a variable.",
    "Look for a similar example you have already solved.",
];

const STRATEGIES: [&str; 5] = [
    "Work one operation at a time and keep both sides balanced.",
    "Simplify each expression before combining them.",
    "Substitute the known values and check the units.",
    "Undo the operations in reverse order to isolate the unknown.",
    "Sketch the situation to see how the pieces relate.",
];

const CHECKS: [&str; 4] = [
    "Plug your result back in to confirm it works.",
    "Compare your result with your earlier estimate.",
    "Make sure you answered the question that was asked.",
    "Check the sign of your result.",
];

impl MockProvider {
    pub fn with_faults(faults: MockFaults) -> Self {
        MockProvider {
            faults,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Pathway text the mock produces for one step.
    pub fn pathway_text(request: &GenerationRequest, step: &GenerationStep) -> String {
        let key = step.step_ref.to_string();
        let seed = request.seed.to_string();
        let h = hash64(&[&request.system_preamble, &request.user_prompt, &key, &seed]);
        let pick = |shift: u32, n: usize| ((h >> shift) % n as u64) as usize;

        let mut lines = Vec::new();
        let o = pick(0, OPENERS.len());
        lines.push(format!("HINT {} :: {}", OPENERS[o], OPENER_BODIES[pick(8, OPENER_BODIES.len())]));
        lines.push(format!("HINT Strategy :: {}", STRATEGIES[pick(16, STRATEGIES.len())]));
        if let Some(scaffold) = scaffold_line(step) {
            lines.push(scaffold);
        }
        if (h >> 24) & 1 == 1 {
            lines.push(format!("HINT Check :: {}", CHECKS[pick(32, CHECKS.len())]));
        }
        lines.join("\n")
    }
}

fn scaffold_line(step: &GenerationStep) -> Option<String> {
    let clean = |s: &str| !s.contains("::") && !s.contains('\n') && !s.trim().is_empty();
    if !clean(&step.answer) {
        return None;
    }
    match step.answer_type {
        AnswerType::Numeric => Some(format!(
            "SCAFFOLD Compute :: What value do you get for this step? :: {} :: numeric",
            step.answer.trim()
        )),
        AnswerType::MultipleChoice => {
            let choices = step.choices.as_ref()?;
            if choices.iter().any(|c| !clean(c) || c.contains('|')) {
                return None;
            }
            Some(format!(
                "SCAFFOLD Choose :: Which option matches this step? :: {} :: multiple_choice :: {}",
                step.answer.trim(),
                choices.join("|")
            ))
        }
        AnswerType::StringExact => Some(format!(
            "SCAFFOLD Finish :: What do you get for this step? :: {} :: string_exact",
            step.answer.trim()
        )),
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &GenerationRequest, _attempt: u32) -> Result<String, ProviderError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if self.faults.unavailable {
            return Err(ProviderError::Transport("mock provider unavailable".into()));
        }
        if self.faults.fail_after_calls.is_some_and(|n| call > n) {
            return Err(ProviderError::Transport(format!("mock provider failed on call {call}")));
        }
        let mut out = serde_json::Map::new();
        for step in &request.steps {
            if self.faults.drop_keys.contains(&step.step_ref) {
                continue;
            }
            let text = if self.faults.malformed_keys.contains(&step.step_ref) {
                "OOPS this is not a pathway".to_string()
            } else {
                Self::pathway_text(request, step)
            };
            out.insert(step.step_ref.to_string(), text.into());
        }
        Ok(serde_json::Value::Object(out).to_string())
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("provider".to_string(), "mock".to_string())])
    }
}
