//! k-draw generation over a set of steps: gateway calls, parsing, and
//! centroid selection per step.
//!
//! Steps are split into batches of `batch_size` keys; every batch is sent `k`
//! times with seeds `seed, seed + 1, …`, so a run makes `k × batches` calls.
//! A provider error stops new calls from being issued; whatever arrived
//! before it is still parsed and selected.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::consistency::{select_representative, Embedder};
use crate::content_pool::StepRef;
use crate::llm_gateway::{
    default_temperature, Gateway, GatewayError, GenerationRequest, GenerationStep, PayloadSink,
};
use crate::validator::{parse_pathway, HintPathway};

#[derive(Debug, Clone)]
pub struct GenerationPlan {
    pub prompt_body: String,
    pub steps: Vec<GenerationStep>,
    pub provider: String,
    pub k: usize,
    pub seed: u64,
    /// Keys per gateway call; 0 sends every step in one call.
    pub batch_size: usize,
    /// Calls in flight at once from this run.
    pub jobs: usize,
    /// Defaults to [`default_temperature`] of `k`.
    pub temperature: Option<f64>,
}

impl GenerationPlan {
    pub fn new(prompt_body: impl Into<String>, steps: Vec<GenerationStep>, provider: impl Into<String>, k: usize, seed: u64) -> Self {
        GenerationPlan {
            prompt_body: prompt_body.into(),
            steps,
            provider: provider.into(),
            k,
            seed,
            batch_size: 0,
            jobs: 1,
            temperature: None,
        }
    }

    fn batches(&self) -> Vec<&[GenerationStep]> {
        let size = if self.batch_size == 0 { self.steps.len().max(1) } else { self.batch_size };
        self.steps.chunks(size).collect()
    }

    pub fn total_calls(&self) -> usize {
        self.k * self.batches().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// No draw returned this key.
    MissingOutput,
    /// Every returned text failed to parse as a pathway.
    Unparseable,
    /// The provider failed before this key was ever returned.
    ProviderError,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub reason: FailureReason,
    pub message: String,
    /// Raw text of the first unparseable draw, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Draw index (0-based) of the chosen candidate.
    pub chosen_index: usize,
    pub similarity_to_centroid: f64,
    /// Parseable candidates the choice was made from.
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub raw: String,
    pub pathway: HintPathway,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Ok(StepResult),
    Failed(GenerationFailure),
}

impl StepOutcome {
    pub fn pathway(&self) -> Option<&HintPathway> {
        match self {
            StepOutcome::Ok(r) => Some(&r.pathway),
            StepOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub outcomes: BTreeMap<StepRef, StepOutcome>,
    /// Candidate texts received across all draws and steps.
    pub generations: usize,
    pub calls_completed: usize,
    pub calls_total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
}

impl GenerationRun {
    pub fn failures(&self) -> usize {
        self.outcomes.values().filter(|o| matches!(o, StepOutcome::Failed(_))).count()
    }

    pub fn pathways(&self) -> BTreeMap<StepRef, HintPathway> {
        self.outcomes
            .iter()
            .filter_map(|(k, o)| o.pathway().map(|p| (k.clone(), p.clone())))
            .collect()
    }
}

/// Runs the plan. `progress(done, total)` is called after each call
/// finishes. Request-level errors (unknown provider, bad temperature) are
/// returned before anything is sent.
pub fn run_generation(
    gateway: &Gateway,
    embedder: &dyn Embedder,
    plan: &GenerationPlan,
    sink: &dyn PayloadSink,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<GenerationRun, GatewayError> {
    if plan.k == 0 {
        return Err(GatewayError::InvalidRequest("k must be at least 1".into()));
    }
    let temperature = plan.temperature.unwrap_or_else(|| default_temperature(plan.k));
    let batches = plan.batches();
    let mut calls = Vec::with_capacity(plan.k * batches.len());
    for draw in 0..plan.k {
        for batch in &batches {
            let req = GenerationRequest::new(
                plan.prompt_body.clone(),
                batch.to_vec(),
                plan.provider.clone(),
                temperature,
                plan.seed.wrapping_add(draw as u64),
            );
            req.check()?;
            calls.push((draw, req));
        }
    }
    if !gateway.has_provider(&plan.provider) {
        return Err(GatewayError::UnknownProvider(plan.provider.clone()));
    }

    let total = calls.len();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    // Results per call index, so the outcome does not depend on thread timing.
    let results: Mutex<Vec<Option<Result<BTreeMap<StepRef, String>, GatewayError>>>> =
        Mutex::new(vec![None; total]);

    let worker = || loop {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= total {
            break;
        }
        let outcome = match gateway.generate(&calls[i].1, sink) {
            Ok(resp) => Ok(resp.per_key),
            Err(GatewayError::SchemaViolation(v)) => Ok(v.partial),
            Err(e) => {
                stop.store(true, Ordering::SeqCst);
                Err(e)
            }
        };
        results.lock().expect("results poisoned")[i] = Some(outcome);
        let d = done.fetch_add(1, Ordering::SeqCst) + 1;
        progress(d, total);
    };
    let jobs = plan.jobs.clamp(1, total.max(1));
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(worker);
            }
        });
    }

    let results = results.into_inner().expect("results poisoned");
    let mut draws: BTreeMap<StepRef, Vec<(usize, String)>> = BTreeMap::new();
    let mut provider_error = None;
    let mut calls_completed = 0;
    let mut generations = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(Ok(per_key)) => {
                calls_completed += 1;
                for (key, text) in per_key {
                    generations += 1;
                    draws.entry(key).or_default().push((calls[i].0, text));
                }
            }
            Some(Err(e)) => {
                calls_completed += 1;
                if provider_error.is_none() {
                    provider_error = Some(e.to_string());
                }
            }
            None => {}
        }
    }

    let outcomes = plan
        .steps
        .iter()
        .map(|s| {
            let got = draws.remove(&s.step_ref).unwrap_or_default();
            (s.step_ref.clone(), select_step(got, plan.k, embedder, provider_error.as_deref()))
        })
        .collect();
    Ok(GenerationRun {
        outcomes,
        generations,
        calls_completed,
        calls_total: total,
        provider_error,
    })
}

fn select_step(
    draws: Vec<(usize, String)>,
    k: usize,
    embedder: &dyn Embedder,
    provider_error: Option<&str>,
) -> StepOutcome {
    if draws.is_empty() {
        return StepOutcome::Failed(match provider_error {
            Some(e) => GenerationFailure {
                reason: FailureReason::ProviderError,
                message: e.to_string(),
                raw: None,
            },
            None => GenerationFailure {
                reason: FailureReason::MissingOutput,
                message: "the provider never returned this key".into(),
                raw: None,
            },
        });
    }
    let mut parsed = Vec::new();
    let mut first_error = None;
    for (draw, raw) in draws {
        match parse_pathway(&raw) {
            Ok(p) => parsed.push((draw, raw, p)),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some((e.to_string(), raw));
                }
            }
        }
    }
    if parsed.is_empty() {
        let (message, raw) = first_error.expect("a draw failed to parse");
        return StepOutcome::Failed(GenerationFailure {
            reason: FailureReason::Unparseable,
            message,
            raw: Some(raw),
        });
    }
    if k == 1 {
        let (_, raw, pathway) = parsed.remove(0);
        return StepOutcome::Ok(StepResult {
            raw,
            pathway,
            selection: None,
        });
    }
    let texts: Vec<&str> = parsed.iter().map(|(_, raw, _)| raw.as_str()).collect();
    match select_representative(&texts, embedder) {
        Ok(sel) => {
            let candidates = parsed.len();
            let (draw, raw, pathway) = parsed.swap_remove(sel.chosen_index);
            StepOutcome::Ok(StepResult {
                raw,
                pathway,
                selection: Some(Selection {
                    chosen_index: draw,
                    similarity_to_centroid: sel.similarity_to_centroid,
                    candidates,
                }),
            })
        }
        Err(e) => StepOutcome::Failed(GenerationFailure {
            reason: FailureReason::Embedding,
            message: e.to_string(),
            raw: None,
        }),
    }
}
