//! Provider-agnostic batch generation.
//!
//! A request carries the system preamble, the author's prompt and a batch of
//! steps. The provider must answer with one flat JSON object whose keys are
//! exactly the requested `<problem_id>:<step_id>` refs and whose values are
//! non-empty pathway strings. Anything else is a schema violation and the
//! call is retried, up to [`GatewayConfig::max_attempts`] attempts in total.
//!
//! Every raw provider payload, failed or not, is handed to the caller's
//! [`PayloadSink`] before it is parsed.

mod http;
mod mock;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::answer::AnswerType;
use crate::content_pool::{ContentPool, StepRef};

pub use http::{HttpProvider, SecretRef};
pub use mock::{MockFaults, MockProvider};

/// Formatting guidelines sent as the system message, version 1.
pub const DEFAULT_PREAMBLE: &str = include_str!("../../assets/preamble_v1.txt");
pub const PREAMBLE_VERSION: &str = "preamble/v1";

pub const SINGLE_SHOT_TEMPERATURE: f64 = 0.2;
pub const CONSISTENCY_TEMPERATURE: f64 = 1.0;

pub fn default_temperature(k: usize) -> f64 {
    if k > 1 {
        CONSISTENCY_TEMPERATURE
    } else {
        SINGLE_SHOT_TEMPERATURE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStep {
    pub step_ref: StepRef,
    pub problem_body: String,
    pub step_body: String,
    pub answer: String,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

impl GenerationStep {
    pub fn from_pool(pool: &ContentPool, step_ref: &StepRef) -> Option<Self> {
        let ctx = pool.resolve(step_ref)?;
        Some(GenerationStep {
            step_ref: step_ref.clone(),
            problem_body: ctx.problem.body.clone(),
            step_body: ctx.step.body.clone(),
            answer: ctx.step.answer.clone(),
            answer_type: ctx.step.answer_type,
            choices: ctx.step.choices.clone(),
        })
    }
}

/// Required key set of the flat batch output object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSchema {
    pub keys: BTreeSet<StepRef>,
}

impl BatchSchema {
    pub fn for_steps(steps: &[GenerationStep]) -> Self {
        BatchSchema {
            keys: steps.iter().map(|s| s.step_ref.clone()).collect(),
        }
    }

    /// JSON Schema for providers that accept one.
    pub fn json_schema(&self) -> serde_json::Value {
        let props: serde_json::Map<String, serde_json::Value> = self
            .keys
            .iter()
            .map(|k| (k.to_string(), serde_json::json!({"type": "string", "minLength": 1})))
            .collect();
        serde_json::json!({
            "type": "object",
            "properties": props,
            "required": self.keys.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "additionalProperties": false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_preamble: String,
    pub user_prompt: String,
    pub steps: Vec<GenerationStep>,
    pub output_schema: BatchSchema,
    pub temperature: f64,
    pub provider: String,
    /// Sampling seed forwarded to the provider; distinguishes the k draws of
    /// a consistency run.
    pub seed: u64,
}

impl GenerationRequest {
    pub fn new(
        user_prompt: impl Into<String>,
        steps: Vec<GenerationStep>,
        provider: impl Into<String>,
        temperature: f64,
        seed: u64,
    ) -> Self {
        let output_schema = BatchSchema::for_steps(&steps);
        GenerationRequest {
            system_preamble: DEFAULT_PREAMBLE.to_string(),
            user_prompt: user_prompt.into(),
            steps,
            output_schema,
            temperature,
            provider: provider.into(),
            seed,
        }
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if self.steps.is_empty() {
            return Err(GatewayError::InvalidRequest("no steps".into()));
        }
        let refs: BTreeSet<StepRef> = self.steps.iter().map(|s| s.step_ref.clone()).collect();
        if refs.len() != self.steps.len() {
            return Err(GatewayError::InvalidRequest("duplicate step refs".into()));
        }
        if refs != self.output_schema.keys {
            return Err(GatewayError::InvalidRequest(
                "schema keys differ from step refs".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// The user message: the author's prompt followed by the step listing.
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        out.push_str(self.user_prompt.trim());
        out.push_str("\n\nWrite a hint pathway for each step below. Answer with one JSON object whose keys are exactly these step keys: ");
        let keys: Vec<String> = self.steps.iter().map(|s| s.step_ref.to_string()).collect();
        out.push_str(&keys.join(", "));
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "\n[{}]\nProblem: {}\nStep: {}\nAnswer: {}\nAnswer type: {}\n",
                s.step_ref, s.problem_body, s.step_body, s.answer, s.answer_type
            ));
            if let Some(choices) = &s.choices {
                out.push_str(&format!("Choices: {}\n", choices.join(" | ")));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub per_key: BTreeMap<StepRef, String>,
    pub provider_metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited,
    #[error("request timed out")]
    Timeout,
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
}

/// Details of a batch the provider never got right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub attempts: u32,
    pub missing: Vec<StepRef>,
    pub unexpected: Vec<String>,
    pub empty: Vec<StepRef>,
    pub not_an_object: bool,
    /// Raw text of the last attempt.
    pub payload: String,
    /// Well-formed entries from the last attempt.
    pub partial: BTreeMap<StepRef, String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown provider {0:?}")]
    UnknownProvider(String),
    #[error("provider {0:?} is already registered")]
    DuplicateName(String),
    #[error("invalid endpoint {0:?}")]
    InvalidEndpoint(String),
    #[error("provider error: {0}")]
    ProviderError(ProviderError),
    #[error("schema violation after {} attempt(s); missing {:?}", .0.attempts, .0.missing.iter().map(ToString::to_string).collect::<Vec<_>>())]
    SchemaViolation(Box<SchemaViolation>),
    #[error("provider timed out")]
    Timeout,
}

/// A raw provider payload, forwarded before parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadEvent {
    pub provider: String,
    pub seed: u64,
    pub attempt: u32,
    /// Raw response text, or the error description when the call failed.
    pub body: String,
    pub failed: bool,
}

pub trait PayloadSink: Send + Sync {
    fn record(&self, event: &PayloadEvent);
}

/// Drops payloads; for callers that do not log.
pub struct DiscardPayloads;

impl PayloadSink for DiscardPayloads {
    fn record(&self, _event: &PayloadEvent) {}
}

impl<F: Fn(&PayloadEvent) + Send + Sync> PayloadSink for F {
    fn record(&self, event: &PayloadEvent) {
        self(event)
    }
}

/// A generation backend. `complete` returns the raw response text, which the
/// gateway then checks against the batch schema.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &GenerationRequest, attempt: u32) -> Result<String, ProviderError>;

    fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Total attempts per batch when the provider breaks the schema.
    pub max_attempts: u32,
    pub max_in_flight: usize,
    /// Extra attempts allowed on rate-limit responses.
    pub max_rate_limit_retries: u32,
    pub backoff_base: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            max_attempts: 3,
            max_in_flight: 8,
            max_rate_limit_retries: 5,
            backoff_base: Duration::from_millis(250),
        }
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

struct ProviderSlot {
    provider: Arc<dyn Provider>,
    limiter: Semaphore,
}

pub struct Gateway {
    config: GatewayConfig,
    providers: RwLock<BTreeMap<String, Arc<ProviderSlot>>>,
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway::new(GatewayConfig::default())
    }
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Self {
        Gateway {
            config,
            providers: RwLock::new(BTreeMap::new()),
        }
    }

    /// A gateway with the deterministic `mock` provider registered.
    pub fn with_mock() -> Self {
        let g = Gateway::default();
        g.register("mock", Arc::new(MockProvider::default()))
            .expect("fresh gateway");
        g
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn register(&self, name: &str, provider: Arc<dyn Provider>) -> Result<(), GatewayError> {
        let mut map = self.providers.write().expect("registry poisoned");
        if map.contains_key(name) {
            return Err(GatewayError::DuplicateName(name.to_string()));
        }
        map.insert(
            name.to_string(),
            Arc::new(ProviderSlot {
                provider,
                limiter: Semaphore::new(self.config.max_in_flight),
            }),
        );
        Ok(())
    }

    /// Registers an HTTP chat-completions provider. The endpoint is only
    /// checked for shape here; reachability is a generate-time concern.
    pub fn register_provider(
        &self,
        name: &str,
        endpoint: &str,
        credentials: SecretRef,
    ) -> Result<(), GatewayError> {
        if self.has_provider(name) {
            return Err(GatewayError::DuplicateName(name.to_string()));
        }
        let provider = HttpProvider::new(endpoint, credentials)?;
        self.register(name, Arc::new(provider))
    }

    pub fn has_provider(&self, name: &str) -> bool {
        self.providers.read().expect("registry poisoned").contains_key(name)
    }

    pub fn provider_names(&self) -> Vec<String> {
        self.providers.read().expect("registry poisoned").keys().cloned().collect()
    }

    pub fn generate(
        &self,
        request: &GenerationRequest,
        sink: &dyn PayloadSink,
    ) -> Result<BatchResponse, GatewayError> {
        request.check()?;
        let slot = self
            .providers
            .read()
            .expect("registry poisoned")
            .get(&request.provider)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownProvider(request.provider.clone()))?;

        let mut last_violation = None;
        for attempt in 1..=self.config.max_attempts.max(1) {
            let raw = self.call_with_backoff(&slot, request, attempt, sink)?;
            match check_payload(&raw, &request.output_schema) {
                Ok(per_key) => {
                    return Ok(BatchResponse {
                        per_key,
                        provider_metadata: slot.provider.metadata(),
                    })
                }
                Err(mut violation) => {
                    violation.attempts = attempt;
                    last_violation = Some(violation);
                }
            }
        }
        Err(GatewayError::SchemaViolation(Box::new(
            last_violation.expect("at least one attempt"),
        )))
    }

    fn call_with_backoff(
        &self,
        slot: &ProviderSlot,
        request: &GenerationRequest,
        attempt: u32,
        sink: &dyn PayloadSink,
    ) -> Result<String, GatewayError> {
        let mut rate_limited = 0;
        loop {
            let result = {
                let _permit = slot.limiter.acquire();
                slot.provider.complete(request, attempt)
            };
            let event = |body: String, failed: bool| PayloadEvent {
                provider: request.provider.clone(),
                seed: request.seed,
                attempt,
                body,
                failed,
            };
            match result {
                Ok(raw) => {
                    sink.record(&event(raw.clone(), false));
                    return Ok(raw);
                }
                Err(err) => {
                    sink.record(&event(err.to_string(), true));
                    match err {
                        ProviderError::RateLimited if rate_limited < self.config.max_rate_limit_retries => {
                            let delay = self.config.backoff_base * 2u32.saturating_pow(rate_limited);
                            rate_limited += 1;
                            std::thread::sleep(delay);
                        }
                        ProviderError::Timeout => return Err(GatewayError::Timeout),
                        other => return Err(GatewayError::ProviderError(other)),
                    }
                }
            }
        }
    }
}

fn check_payload(raw: &str, schema: &BatchSchema) -> Result<BTreeMap<StepRef, String>, SchemaViolation> {
    let mut violation = SchemaViolation {
        attempts: 0,
        missing: Vec::new(),
        unexpected: Vec::new(),
        empty: Vec::new(),
        not_an_object: false,
        payload: raw.to_string(),
        partial: BTreeMap::new(),
    };
    let object = match serde_json::from_str::<serde_json::Value>(raw.trim()) {
        Ok(serde_json::Value::Object(map)) => map,
        _ => {
            violation.not_an_object = true;
            violation.missing = schema.keys.iter().cloned().collect();
            return Err(violation);
        }
    };

    let mut by_key: BTreeMap<String, &serde_json::Value> = BTreeMap::new();
    for (k, v) in &object {
        by_key.insert(k.clone(), v);
    }
    for key in &schema.keys {
        match by_key.remove(&key.to_string()) {
            Some(serde_json::Value::String(s)) if !s.trim().is_empty() => {
                violation.partial.insert(key.clone(), s.clone());
            }
            Some(_) => violation.empty.push(key.clone()),
            None => violation.missing.push(key.clone()),
        }
    }
    violation.unexpected = by_key.into_keys().collect();

    if violation.missing.is_empty() && violation.empty.is_empty() && violation.unexpected.is_empty() {
        Ok(violation.partial)
    } else {
        Err(violation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    pub(crate) fn steps(n: usize) -> Vec<GenerationStep> {
        (0..n)
            .map(|i| GenerationStep {
                step_ref: StepRef::new(format!("P{i}"), "s1"),
                problem_body: format!("Solve $x + {i} = {}$.", i + 2),
                step_body: "Find x.".into(),
                answer: "2".into(),
                answer_type: AnswerType::Numeric,
                choices: None,
            })
            .collect()
    }

    struct Scripted {
        replies: Mutex<Vec<Result<String, ProviderError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(replies: Vec<Result<String, ProviderError>>) -> Self {
            Scripted {
                replies: Mutex::new(replies),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Provider for Scripted {
        fn complete(&self, _r: &GenerationRequest, _a: u32) -> Result<String, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut r = self.replies.lock().unwrap();
            if r.len() > 1 {
                r.remove(0)
            } else {
                r[0].clone()
            }
        }
    }

    fn gateway_with(p: Arc<dyn Provider>) -> Gateway {
        let g = Gateway::new(GatewayConfig {
            backoff_base: Duration::from_millis(1),
            ..GatewayConfig::default()
        });
        g.register("p", p).unwrap();
        g
    }

    #[test]
    fn eighty_keys_in_eighty_keys_out() {
        let g = Gateway::with_mock();
        let req = GenerationRequest::new("Be kind.", steps(80), "mock", 0.2, 1);
        let resp = g.generate(&req, &DiscardPayloads).unwrap();
        assert_eq!(resp.per_key.len(), 80);
        assert!(resp.per_key.values().all(|v| !v.is_empty()));
    }

    #[test]
    fn retries_then_reports_missing_key() {
        let mut faults = MockFaults::default();
        faults.drop_keys.insert(StepRef::new("P79", "s1"));
        let mock = Arc::new(MockProvider::with_faults(faults));
        let g = gateway_with(mock.clone());
        let payloads = Mutex::new(Vec::new());
        let sink = |e: &PayloadEvent| payloads.lock().unwrap().push(e.clone());
        let req = GenerationRequest::new("x", steps(80), "p", 0.2, 1);
        match g.generate(&req, &sink) {
            Err(GatewayError::SchemaViolation(v)) => {
                assert_eq!(v.attempts, 3);
                assert_eq!(v.missing, [StepRef::new("P79", "s1")]);
                assert_eq!(v.partial.len(), 79);
                assert!(v.payload.starts_with('{'));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(mock.calls(), 3);
        assert_eq!(payloads.lock().unwrap().len(), 3);
    }

    #[test]
    fn recovers_on_retry() {
        let good = serde_json::json!({"P0:s1": "HINT a :: b"}).to_string();
        let p = Arc::new(Scripted::new(vec![Ok("not json".into()), Ok(good)]));
        let g = gateway_with(p.clone());
        let req = GenerationRequest::new("x", steps(1), "p", 0.2, 1);
        let resp = g.generate(&req, &DiscardPayloads).unwrap();
        assert_eq!(resp.per_key[&StepRef::new("P0", "s1")], "HINT a :: b");
        assert_eq!(p.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn extra_and_empty_keys_are_violations() {
        let schema = BatchSchema::for_steps(&steps(2));
        let v = check_payload(r#"{"P0:s1": "x", "P1:s1": "", "P9:s1": "y"}"#, &schema).unwrap_err();
        assert_eq!(v.empty, [StepRef::new("P1", "s1")]);
        assert_eq!(v.unexpected, ["P9:s1"]);
        let v = check_payload("[1,2]", &schema).unwrap_err();
        assert!(v.not_an_object);
        assert_eq!(v.missing.len(), 2);
    }

    #[test]
    fn rate_limits_back_off_then_succeed() {
        let good = serde_json::json!({"P0:s1": "HINT a :: b"}).to_string();
        let p = Arc::new(Scripted::new(vec![
            Err(ProviderError::RateLimited),
            Err(ProviderError::RateLimited),
            Ok(good),
        ]));
        let g = gateway_with(p.clone());
        let req = GenerationRequest::new("x", steps(1), "p", 0.2, 1);
        assert!(g.generate(&req, &DiscardPayloads).is_ok());
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transport_and_timeout_errors_surface() {
        let g = gateway_with(Arc::new(Scripted::new(vec![Err(ProviderError::Transport("down".into()))])));
        let req = GenerationRequest::new("x", steps(1), "p", 0.2, 1);
        assert!(matches!(
            g.generate(&req, &DiscardPayloads),
            Err(GatewayError::ProviderError(ProviderError::Transport(_)))
        ));
        let g = gateway_with(Arc::new(Scripted::new(vec![Err(ProviderError::Timeout)])));
        assert_eq!(g.generate(&req, &DiscardPayloads), Err(GatewayError::Timeout));
    }

    #[test]
    fn request_checks() {
        let g = Gateway::with_mock();
        let mut req = GenerationRequest::new("x", steps(2), "mock", 0.2, 1);
        req.temperature = 2.5;
        assert!(matches!(g.generate(&req, &DiscardPayloads), Err(GatewayError::InvalidRequest(_))));
        let req = GenerationRequest::new("x", vec![], "mock", 0.2, 1);
        assert!(matches!(g.generate(&req, &DiscardPayloads), Err(GatewayError::InvalidRequest(_))));
        let mut req = GenerationRequest::new("x", steps(2), "mock", 0.2, 1);
        req.output_schema.keys.pop_first();
        assert!(matches!(g.generate(&req, &DiscardPayloads), Err(GatewayError::InvalidRequest(_))));
        let req = GenerationRequest::new("x", steps(2), "nope", 0.2, 1);
        assert_eq!(
            g.generate(&req, &DiscardPayloads),
            Err(GatewayError::UnknownProvider("nope".into()))
        );
    }

    #[test]
    fn registration_rules() {
        let g = Gateway::with_mock();
        assert_eq!(
            g.register("mock", Arc::new(MockProvider::default())),
            Err(GatewayError::DuplicateName("mock".into()))
        );
        assert!(matches!(
            g.register_provider("remote", "not a url", SecretRef::None),
            Err(GatewayError::InvalidEndpoint(_))
        ));
        assert!(matches!(
            g.register_provider("remote", "ftp://example.com", SecretRef::None),
            Err(GatewayError::InvalidEndpoint(_))
        ));
        g.register_provider("remote", "http://127.0.0.1:9", SecretRef::None).unwrap();
        assert_eq!(
            g.register_provider("remote", "http://127.0.0.1:9", SecretRef::None),
            Err(GatewayError::DuplicateName("remote".into()))
        );
    }

    #[test]
    fn in_flight_limit_is_respected() {
        struct Slow {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Provider for Slow {
            fn complete(&self, r: &GenerationRequest, _a: u32) -> Result<String, ProviderError> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.now.fetch_sub(1, Ordering::SeqCst);
                let obj: serde_json::Map<_, _> = r
                    .steps
                    .iter()
                    .map(|s| (s.step_ref.to_string(), serde_json::Value::from("HINT a :: b")))
                    .collect();
                Ok(serde_json::Value::Object(obj).to_string())
            }
        }
        let slow = Arc::new(Slow {
            now: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let g = Gateway::new(GatewayConfig {
            max_in_flight: 2,
            ..GatewayConfig::default()
        });
        g.register("slow", slow.clone()).unwrap();
        std::thread::scope(|s| {
            for seed in 0..8 {
                let g = &g;
                s.spawn(move || {
                    let req = GenerationRequest::new("x", steps(1), "slow", 0.2, seed);
                    g.generate(&req, &DiscardPayloads).unwrap();
                });
            }
        });
        assert!(slow.peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn user_message_lists_every_key() {
        let req = GenerationRequest::new("Be brief.", steps(3), "mock", 0.2, 0);
        let msg = req.user_message();
        assert!(msg.starts_with("Be brief."));
        for k in ["[P0:s1]", "[P1:s1]", "[P2:s1]"] {
            assert!(msg.contains(k), "{k}");
        }
        assert!(DEFAULT_PREAMBLE.contains("SCAFFOLD <title>"));
    }

    #[test]
    fn json_schema_lists_required_keys() {
        let schema = BatchSchema::for_steps(&steps(2)).json_schema();
        assert_eq!(schema["required"], serde_json::json!(["P0:s1", "P1:s1"]));
        assert_eq!(schema["additionalProperties"], false);
    }
}
