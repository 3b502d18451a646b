//! The engine behind the HTTP service and the CLI: pools, the prompt
//! library, scratchpad sessions, batch generation jobs, and the event log,
//! optionally persisted under a state directory:
//!
//! ```text
//! <state>/pools/<pool_id>.json
//! <state>/library.jsonl
//! <state>/log/log.jsonl, <state>/log/blobs/
//! <state>/sessions.json
//! <state>/jobs/<job_id>.json
//! ```
//!
//! Commits and executions append their log node before returning.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::consistency::{Embedder, HashedTfEmbedder, HttpEmbedder};
use crate::content_pool::{ingest_csv, ingest_uri, ContentPool, PoolError, PoolSummary, StepRef};
use crate::digest::hash64;
use crate::llm_gateway::{Gateway, GatewayError, GenerationStep, SecretRef};
use crate::log_engine::{
    influence_graph, influence_summary, BlobPayloadSink, BlobStore, CommitData, EventLog, ExecutionData, ExportOptions,
    InfluenceReport, LogError, LogNode, NodeData, SourceInfluence, UserStats,
};
use crate::pipeline::{run_generation, GenerationPlan, GenerationRun, StepOutcome};
use crate::prompt_library::{Level, Library, LibraryError, NewPrompt, Prompt, QueryOrder};
use crate::sampler::{sample_steps, SampleError, Scope};
use crate::scratchpad::{diff, ExecutionEnv, ExecutionRecord, PromptDiff, ScratchpadError, Session, Variant};
use crate::validator::{
    normalize_answer_type, parse_pathway, render_content, validate, ContentDocument, HintPathway,
    PathwayParseError, ValidationReport,
};

pub const DEFAULT_K: usize = 30;
pub const MOCK_PROVIDER: &str = "mock";
pub const HTTP_PROVIDER: &str = "http";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkbenchConfig {
    pub state_dir: Option<PathBuf>,
    pub default_k: usize,
    /// Steps per gateway call; 0 puts every step in one call.
    pub batch_size: usize,
    /// Concurrent gateway calls per run.
    pub jobs: usize,
    /// Generation jobs running at once.
    pub max_running_jobs: usize,
    pub provider_url: Option<String>,
    /// Name of the environment variable holding the provider key.
    pub provider_key_env: Option<String>,
    pub embedding_url: Option<String>,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        WorkbenchConfig {
            state_dir: None,
            default_k: DEFAULT_K,
            batch_size: 0,
            jobs: 4,
            max_running_jobs: 2,
            provider_url: None,
            provider_key_env: None,
            embedding_url: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error("unknown {kind} {id:?}")]
    NotFound { kind: &'static str, id: String },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Scratchpad(#[from] ScratchpadError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("state directory: {0}")]
    Io(#[from] std::io::Error),
}

impl WorkbenchError {
    fn not_found(kind: &'static str, id: &str) -> Self {
        WorkbenchError::NotFound { kind, id: id.to_string() }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            WorkbenchError::NotFound { .. } => "NOT_FOUND",
            WorkbenchError::Invalid(_) => "INVALID_REQUEST",
            WorkbenchError::Pool(_) => "POOL_ERROR",
            WorkbenchError::Library(LibraryError::UnknownPrompt(_)) => "NOT_FOUND",
            WorkbenchError::Library(_) => "LIBRARY_ERROR",
            WorkbenchError::Log(LogError::UnknownRoot(_)) => "NOT_FOUND",
            WorkbenchError::Log(_) => "LOG_ERROR",
            WorkbenchError::Scratchpad(ScratchpadError::UnknownVariant(_)) => "NOT_FOUND",
            WorkbenchError::Scratchpad(ScratchpadError::GatewayUnavailable(_)) => "GATEWAY_UNAVAILABLE",
            WorkbenchError::Scratchpad(_) => "SCRATCHPAD_ERROR",
            WorkbenchError::Sample(_) => "SAMPLE_ERROR",
            WorkbenchError::Gateway(_) => "GATEWAY_ERROR",
            WorkbenchError::Io(_) => "IO_ERROR",
        }
    }
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub pool_id: String,
    #[serde(default)]
    pub prompt_id: Option<String>,
    /// Ad-hoc prompt text, used when no `prompt_id` is given.
    #[serde(default)]
    pub prompt_body: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub provider: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub author: String,
    /// Defaults to every step in the pool.
    #[serde(default)]
    pub steps: Option<Vec<StepRef>>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub outcomes: BTreeMap<StepRef, StepOutcome>,
    /// Normalized pathways for steps that generated.
    pub pathways: BTreeMap<StepRef, HintPathway>,
    /// Validation of each normalized pathway, normalization warnings included.
    pub reports: BTreeMap<StepRef, ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<ContentDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: JobState,
    pub pool_id: String,
    pub prompt_id: Option<String>,
    pub provider: String,
    pub k: usize,
    pub seed: u64,
    pub author: String,
    pub steps: usize,
    /// Completed gateway calls over total, in [0, 1].
    pub progress: f64,
    pub calls_completed: usize,
    pub calls_total: usize,
    pub generations: usize,
    pub representatives: usize,
    pub failures: usize,
    pub invalid: usize,
    pub error: Option<String>,
    pub log_node_id: Option<String>,
    pub created_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub result: Option<JobResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub author: String,
    pub pool_id: String,
    pub level: Option<Level>,
    pub lesson_id: Option<String>,
    pub variants: Vec<Variant>,
    pub executions: usize,
}

impl From<&Session> for SessionSummary {
    fn from(s: &Session) -> Self {
        SessionSummary {
            session_id: s.session_id.clone(),
            author: s.author.clone(),
            pool_id: s.pool_id.clone(),
            level: s.level,
            lesson_id: s.lesson_id.clone(),
            variants: s.variants.clone(),
            executions: s.executions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteRequest {
    pub session_id: String,
    pub variant_label: String,
    /// Explicit steps; when absent, `sample_n` steps are drawn.
    #[serde(default)]
    pub step_refs: Option<Vec<StepRef>>,
    #[serde(default)]
    pub sample_n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub provider: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub text: String,
    /// With both set, the pathway is normalized against that step first.
    #[serde(default)]
    pub pool_id: Option<String>,
    #[serde(default)]
    pub step_ref: Option<StepRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathway: Option<HintPathway>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub code: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationChain {
    pub author: String,
    pub level: Level,
    pub root: String,
    pub bodies: Vec<String>,
    pub diffs: Vec<PromptDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceAnalysis {
    pub edges: usize,
    pub verbatim: usize,
    pub orphans: usize,
    pub report: InfluenceReport,
    pub sources: Vec<SourceInfluence>,
}

/// Counting gate for running jobs.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn enter(&self) {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
    }

    fn leave(&self) {
        *self.free.lock().expect("gate poisoned") += 1;
        self.cv.notify_one();
    }
}

pub struct Workbench {
    config: WorkbenchConfig,
    pools: RwLock<BTreeMap<String, Arc<ContentPool>>>,
    library: Mutex<Library>,
    log: Mutex<EventLog>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    session_seq: AtomicUsize,
    jobs: Mutex<BTreeMap<String, Arc<Mutex<JobStatus>>>>,
    job_seq: AtomicUsize,
    job_gate: Gate,
    gateway: Gateway,
    embedder: Arc<dyn Embedder>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("state serializes");
    bytes.push(b'\n');
    bytes
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

impl Workbench {
    /// In-memory engine with the mock provider only.
    pub fn in_memory() -> Self {
        Workbench::open(WorkbenchConfig::default()).expect("in-memory workbench cannot fail")
    }

    pub fn open(config: WorkbenchConfig) -> Result<Self> {
        let gateway = Gateway::with_mock();
        if let Some(url) = &config.provider_url {
            let creds = config.provider_key_env.clone().map_or(SecretRef::None, SecretRef::Env);
            gateway.register_provider(HTTP_PROVIDER, url, creds)?;
        }
        let embedder: Arc<dyn Embedder> = match &config.embedding_url {
            Some(url) => Arc::new(HttpEmbedder::new(url.clone(), None)),
            None => Arc::new(HashedTfEmbedder::default()),
        };

        let (library, log, pools, sessions, jobs_seen) = match &config.state_dir {
            None => (Library::new(), EventLog::new(), BTreeMap::new(), BTreeMap::new(), 0),
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let library = Library::open(&dir.join("library.jsonl"))?;
                let log = EventLog::open(&dir.join("log"))?;
                let mut pools = BTreeMap::new();
                let pool_dir = dir.join("pools");
                if pool_dir.is_dir() {
                    for entry in std::fs::read_dir(&pool_dir)? {
                        let path = entry?.path();
                        if path.extension().is_some_and(|e| e == "json") {
                            let pool: ContentPool = serde_json::from_slice(&std::fs::read(&path)?)
                                .map_err(|e| WorkbenchError::Invalid(format!("{}: {e}", path.display())))?;
                            pools.insert(pool.pool_id.clone(), Arc::new(pool));
                        }
                    }
                }
                let sessions_path = dir.join("sessions.json");
                let sessions: BTreeMap<String, Session> = if sessions_path.exists() {
                    serde_json::from_slice(&std::fs::read(&sessions_path)?)
                        .map_err(|e| WorkbenchError::Invalid(format!("{}: {e}", sessions_path.display())))?
                } else {
                    BTreeMap::new()
                };
                let jobs_dir = dir.join("jobs");
                let jobs_seen = if jobs_dir.is_dir() { std::fs::read_dir(&jobs_dir)?.count() } else { 0 };
                (library, log, pools, sessions, jobs_seen)
            }
        };
        let session_seq = sessions.len();
        let gate = Gate::new(config.max_running_jobs);
        Ok(Workbench {
            config,
            pools: RwLock::new(pools),
            library: Mutex::new(library),
            log: Mutex::new(log),
            sessions: Mutex::new(sessions.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            session_seq: AtomicUsize::new(session_seq),
            jobs: Mutex::new(BTreeMap::new()),
            job_seq: AtomicUsize::new(jobs_seen),
            job_gate: gate,
            gateway,
            embedder,
        })
    }

    pub fn config(&self) -> &WorkbenchConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn default_provider(&self) -> &'static str {
        if self.gateway.has_provider(HTTP_PROVIDER) {
            HTTP_PROVIDER
        } else {
            MOCK_PROVIDER
        }
    }

    // ---- pools ----

    pub fn ingest_csv(&self, pool_id: &str, csv: &[u8]) -> Result<PoolSummary> {
        let pool = ingest_csv(csv, pool_id)?;
        self.store_pool(pool)
    }

    pub fn ingest_uri(&self, pool_id: &str, uri: &str) -> Result<PoolSummary> {
        let pool = ingest_uri(uri, pool_id)?;
        self.store_pool(pool)
    }

    fn store_pool(&self, pool: ContentPool) -> Result<PoolSummary> {
        if !valid_id(&pool.pool_id) {
            return Err(WorkbenchError::Invalid(format!("bad pool id {:?}", pool.pool_id)));
        }
        if let Some(dir) = &self.config.state_dir {
            write_atomic(&dir.join("pools").join(format!("{}.json", pool.pool_id)), &to_json_bytes(&pool))?;
        }
        let summary = pool.summary();
        self.pools.write().expect("pools poisoned").insert(pool.pool_id.clone(), Arc::new(pool));
        Ok(summary)
    }

    pub fn pool(&self, pool_id: &str) -> Result<Arc<ContentPool>> {
        self.pools
            .read()
            .expect("pools poisoned")
            .get(pool_id)
            .cloned()
            .ok_or_else(|| WorkbenchError::not_found("pool", pool_id))
    }

    pub fn pool_ids(&self) -> Vec<String> {
        self.pools.read().expect("pools poisoned").keys().cloned().collect()
    }

    pub fn sample(&self, pool_id: &str, scope: Scope, lesson_id: Option<&str>, n: usize, seed: u64) -> Result<Vec<StepRef>> {
        let pool = self.pool(pool_id)?;
        Ok(sample_steps(&pool, scope, lesson_id, n, seed)?)
    }

    // ---- library ----

    /// Commits a prompt. The commit node hangs under the given session
    /// variant's latest node, else under the parent prompt's commit node.
    pub fn commit_prompt(&self, new: NewPrompt, from_variant: Option<(&str, &str)>) -> Result<Prompt> {
        let variant_parent = match from_variant {
            Some((session_id, label)) => {
                let session = self.session_handle(session_id)?;
                let s = session.lock().expect("session poisoned");
                if s.variant(label).is_none() {
                    return Err(ScratchpadError::UnknownVariant(label.to_string()).into());
                }
                s.commit_parent(label)
            }
            None => None,
        };
        let mut library = self.library.lock().expect("library poisoned");
        let prompt = library.commit(new)?;
        let node_id = self.log_commit(&prompt, variant_parent)?;
        drop(library);
        if let (Some((session_id, label)), Some(node_id)) = (from_variant, node_id) {
            let session = self.session_handle(session_id)?;
            session.lock().expect("session poisoned").note_node(label, &node_id);
            self.save_sessions()?;
        }
        Ok(prompt)
    }

    pub fn clone_prompt(&self, prompt_id: &str, author: &str, level: Level, lesson_id: Option<&str>) -> Result<Prompt> {
        let mut library = self.library.lock().expect("library poisoned");
        let prompt = library.clone_prompt(prompt_id, author, level, lesson_id)?;
        self.log_commit(&prompt, None)?;
        Ok(prompt)
    }

    fn log_commit(&self, prompt: &Prompt, parent: Option<String>) -> Result<Option<String>> {
        let mut log = self.log.lock().expect("log poisoned");
        let parent = parent.or_else(|| {
            let pid = prompt.parent_id.as_deref()?;
            log.commit_node_for(pid).map(|n| n.node.node_id.clone())
        });
        let data = NodeData::Commit(CommitData {
            prompt_id: prompt.prompt_id.clone(),
            level: prompt.level,
            lesson_id: prompt.lesson_id.clone(),
            body: prompt.body.clone(),
            parent_prompt_id: prompt.parent_id.clone(),
        });
        let id = log.append_with(|node_id| LogNode {
            node_id,
            parent_id: parent,
            author: prompt.author.clone(),
            timestamp: prompt.committed_at,
            data,
        })?;
        Ok(Some(id))
    }

    pub fn upvote(&self, prompt_id: &str, voter: &str) -> Result<u64> {
        Ok(self.library.lock().expect("library poisoned").upvote(prompt_id, voter)?)
    }

    pub fn prompt(&self, prompt_id: &str) -> Result<Prompt> {
        self.library
            .lock()
            .expect("library poisoned")
            .get(prompt_id)
            .cloned()
            .ok_or_else(|| WorkbenchError::not_found("prompt", prompt_id))
    }

    pub fn prompts(&self, level: Option<Level>, lesson_id: Option<&str>, order: QueryOrder) -> Vec<Prompt> {
        self.library.lock().expect("library poisoned").query(level, lesson_id, order)
    }

    /// Runs `f` against the library under its lock.
    pub fn with_library<T>(&self, f: impl FnOnce(&Library) -> T) -> T {
        f(&self.library.lock().expect("library poisoned"))
    }

    // ---- sessions ----

    fn session_handle(&self, session_id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| WorkbenchError::not_found("session", session_id))
    }

    fn save_sessions(&self) -> Result<()> {
        let Some(dir) = &self.config.state_dir else { return Ok(()) };
        let handles: Vec<(String, Arc<Mutex<Session>>)> = self
            .sessions
            .lock()
            .expect("sessions poisoned")
            .iter()
            .map(|(k, v)| (k.clone(), Arc::clone(v)))
            .collect();
        let snapshot: BTreeMap<String, Session> = handles
            .into_iter()
            .map(|(k, v)| (k, v.lock().expect("session poisoned").clone()))
            .collect();
        write_atomic(&dir.join("sessions.json"), &to_json_bytes(&snapshot))?;
        Ok(())
    }

    pub fn create_session(&self, author: &str, pool_id: &str, level: Option<Level>, lesson_id: Option<&str>) -> Result<SessionSummary> {
        if author.trim().is_empty() {
            return Err(WorkbenchError::Invalid("author is required".into()));
        }
        let pool = self.pool(pool_id)?;
        if let Some(l) = lesson_id {
            pool.get_lesson(l)?;
        }
        let n = self.session_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let mut session = Session::new(format!("ses-{n:06}"), author, pool_id);
        session.level = level;
        session.lesson_id = lesson_id.map(String::from);
        let summary = SessionSummary::from(&session);
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        self.save_sessions()?;
        Ok(summary)
    }

    pub fn session(&self, session_id: &str) -> Result<Session> {
        Ok(self.session_handle(session_id)?.lock().expect("session poisoned").clone())
    }

    pub fn create_variant(&self, session_id: &str, body: &str, derived_from: Option<&str>) -> Result<Variant> {
        let handle = self.session_handle(session_id)?;
        let v = handle.lock().expect("session poisoned").create_variant(body, derived_from)?;
        self.save_sessions()?;
        Ok(v)
    }

    pub fn delete_variant(&self, session_id: &str, label: &str) -> Result<Variant> {
        let handle = self.session_handle(session_id)?;
        let v = handle.lock().expect("session poisoned").delete_variant(label)?;
        self.save_sessions()?;
        Ok(v)
    }

    pub fn execute(&self, req: &ExecuteRequest) -> Result<ExecutionRecord> {
        let handle = self.session_handle(&req.session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        let pool = self.pool(&session.pool_id)?;
        let k = req.k.unwrap_or(1);
        // Without a caller seed, derive one from the session's execution count.
        let seed = req
            .seed
            .unwrap_or_else(|| hash64(&[&session.session_id, &session.executions.len().to_string()]));
        let step_refs = match (&req.step_refs, req.sample_n) {
            (Some(refs), _) => refs.clone(),
            (None, Some(n)) => {
                let scope = if session.lesson_id.is_some() { Scope::Lesson } else { Scope::Textbook };
                sample_steps(&pool, scope, session.lesson_id.as_deref(), n, seed)?
            }
            (None, None) => return Err(WorkbenchError::Invalid("give step_refs or sample_n".into())),
        };
        let provider = req.provider.clone().unwrap_or_else(|| self.default_provider().to_string());
        let env = ExecutionEnv {
            pool: &pool,
            gateway: &self.gateway,
            embedder: self.embedder.as_ref(),
            provider: &provider,
            jobs: self.config.jobs,
        };
        let record = session.execute(&req.variant_label, &step_refs, &env, &self.log, k, seed)?;
        drop(session);
        self.save_sessions()?;
        Ok(record)
    }

    // ---- jobs ----

    fn prepare_job(&self, req: &JobRequest) -> Result<(Arc<ContentPool>, String, Vec<GenerationStep>, JobStatus)> {
        let pool = self.pool(&req.pool_id)?;
        let body = match (&req.prompt_id, &req.prompt_body) {
            (Some(id), _) => self.prompt(id)?.body,
            (None, Some(body)) if !body.trim().is_empty() => body.clone(),
            _ => return Err(WorkbenchError::Invalid("give prompt_id or a non-empty prompt_body".into())),
        };
        let k = req.k.unwrap_or(self.config.default_k);
        if k == 0 {
            return Err(WorkbenchError::Invalid("k must be at least 1".into()));
        }
        let provider = req.provider.clone().unwrap_or_else(|| self.default_provider().to_string());
        if !self.gateway.has_provider(&provider) {
            return Err(GatewayError::UnknownProvider(provider).into());
        }
        let refs: Vec<StepRef> = match &req.steps {
            Some(r) => r.clone(),
            None => pool.steps().map(|s| s.step_ref()).collect(),
        };
        let mut steps = Vec::with_capacity(refs.len());
        let mut unresolved = Vec::new();
        for r in &refs {
            match GenerationStep::from_pool(&pool, r) {
                Some(s) => steps.push(s),
                None => unresolved.push(r.clone()),
            }
        }
        if !unresolved.is_empty() {
            return Err(ScratchpadError::UnresolvedStepRef(unresolved).into());
        }
        if steps.is_empty() {
            return Err(WorkbenchError::Invalid("pool has no steps".into()));
        }
        let n = self.job_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let status = JobStatus {
            job_id: format!("job-{n:06}"),
            state: JobState::Queued,
            pool_id: req.pool_id.clone(),
            prompt_id: req.prompt_id.clone(),
            provider,
            k,
            seed: req.seed,
            author: req.author.clone(),
            steps: steps.len(),
            progress: 0.0,
            calls_completed: 0,
            calls_total: 0,
            generations: 0,
            representatives: 0,
            failures: 0,
            invalid: 0,
            error: None,
            log_node_id: None,
            created_at: Utc::now(),
            finished_at: None,
            result: None,
        };
        Ok((pool, body, steps, status))
    }

    /// Validates the request and queues a job on a background thread.
    pub fn start_job(self: &Arc<Self>, req: JobRequest) -> Result<JobStatus> {
        let (pool, body, steps, status) = self.prepare_job(&req)?;
        let handle = Arc::new(Mutex::new(status.clone()));
        self.jobs.lock().expect("jobs poisoned").insert(status.job_id.clone(), Arc::clone(&handle));
        let wb = Arc::clone(self);
        std::thread::spawn(move || {
            wb.job_gate.enter();
            wb.run_job(&handle, &pool, body, steps, &req);
            wb.job_gate.leave();
        });
        Ok(status)
    }

    /// Runs a job to completion on the calling thread.
    pub fn run_job_blocking(&self, req: &JobRequest) -> Result<JobStatus> {
        let (pool, body, steps, status) = self.prepare_job(req)?;
        let handle = Arc::new(Mutex::new(status.clone()));
        self.jobs.lock().expect("jobs poisoned").insert(status.job_id.clone(), Arc::clone(&handle));
        self.run_job(&handle, &pool, body, steps, req);
        let done = handle.lock().expect("job poisoned").clone();
        Ok(done)
    }

    pub fn job(&self, job_id: &str) -> Result<JobStatus> {
        if let Some(h) = self.jobs.lock().expect("jobs poisoned").get(job_id) {
            return Ok(h.lock().expect("job poisoned").clone());
        }
        if let Some(dir) = &self.config.state_dir {
            if valid_id(job_id) {
                let path = dir.join("jobs").join(format!("{job_id}.json"));
                if path.exists() {
                    return serde_json::from_slice(&std::fs::read(&path)?)
                        .map_err(|e| WorkbenchError::Invalid(format!("{}: {e}", path.display())));
                }
            }
        }
        Err(WorkbenchError::not_found("job", job_id))
    }

    fn run_job(&self, handle: &Arc<Mutex<JobStatus>>, pool: &ContentPool, body: String, steps: Vec<GenerationStep>, req: &JobRequest) {
        let (k, seed, provider) = {
            let mut s = handle.lock().expect("job poisoned");
            s.state = JobState::Running;
            (s.k, s.seed, s.provider.clone())
        };
        let mut plan = GenerationPlan::new(body.clone(), steps, provider.clone(), k, seed);
        plan.batch_size = req.batch_size.unwrap_or(self.config.batch_size);
        plan.jobs = req.jobs.unwrap_or(self.config.jobs);
        {
            let mut s = handle.lock().expect("job poisoned");
            s.calls_total = plan.total_calls();
        }
        let blobs = Arc::clone(self.log.lock().expect("log poisoned").blobs());
        let sink = BlobPayloadSink::new(blobs.clone());
        let progress = |done: usize, total: usize| {
            let mut s = handle.lock().expect("job poisoned");
            if done > s.calls_completed {
                s.calls_completed = done;
                s.progress = done as f64 / total.max(1) as f64;
            }
        };
        let outcome = run_generation(&self.gateway, self.embedder.as_ref(), &plan, &sink, &progress);
        let run = match outcome {
            Ok(run) => run,
            Err(e) => {
                self.finish_job(handle, Err(e.to_string()), None);
                return;
            }
        };

        let (result, invalid) = assess(pool, &run);
        let node = self.log_job(handle, &body, &plan, &run, sink, &blobs);
        let error = if let Some(e) = &run.provider_error {
            Some(format!("provider failed after {} of {} calls: {e}", run.calls_completed, run.calls_total))
        } else if run.failures() > 0 {
            Some(format!("{} step(s) failed to generate", run.failures()))
        } else if invalid > 0 {
            Some(format!("{invalid} pathway(s) failed validation"))
        } else {
            node.as_ref().err().cloned()
        };
        {
            let mut s = handle.lock().expect("job poisoned");
            s.generations = run.generations;
            s.representatives = run.outcomes.len() - run.failures();
            s.failures = run.failures();
            s.invalid = invalid;
            s.log_node_id = node.ok();
        }
        self.finish_job(handle, error.map_or(Ok(()), Err), Some(result));
    }

    fn log_job(
        &self,
        handle: &Arc<Mutex<JobStatus>>,
        body: &str,
        plan: &GenerationPlan,
        run: &GenerationRun,
        sink: BlobPayloadSink,
        blobs: &BlobStore,
    ) -> std::result::Result<String, String> {
        let (job_id, author) = {
            let s = handle.lock().expect("job poisoned");
            (s.job_id.clone(), s.author.clone())
        };
        let mut output_digests = BTreeMap::new();
        for (key, o) in &run.outcomes {
            if let StepOutcome::Ok(r) = o {
                let d = blobs.put(r.raw.as_bytes()).map_err(|e| e.to_string())?;
                output_digests.insert(key.clone(), d);
            }
        }
        let payload_digests = sink.into_digests();
        let data = NodeData::Execution(ExecutionData {
            session_id: job_id.clone(),
            execution_id: job_id,
            variant_label: "batch".into(),
            prompt_snapshot: body.to_string(),
            level: None,
            lesson_id: None,
            provider: plan.provider.clone(),
            k: plan.k,
            step_refs: plan.steps.iter().map(|s| s.step_ref.clone()).collect(),
            output_digests,
            payload_digests,
            generations: run.generations,
            failures: run.failures(),
        });
        let author = if author.is_empty() { "anonymous".to_string() } else { author };
        self.log
            .lock()
            .expect("log poisoned")
            .append_with(|node_id| LogNode {
                node_id,
                parent_id: None,
                author,
                timestamp: Utc::now(),
                data,
            })
            .map_err(|e| e.to_string())
    }

    fn finish_job(&self, handle: &Arc<Mutex<JobStatus>>, outcome: std::result::Result<(), String>, result: Option<JobResult>) {
        let snapshot = {
            let mut s = handle.lock().expect("job poisoned");
            match outcome {
                Ok(()) => {
                    s.state = JobState::Succeeded;
                    s.progress = 1.0;
                }
                Err(e) => {
                    s.state = JobState::Failed;
                    s.error = Some(e);
                }
            }
            s.result = result;
            s.finished_at = Some(Utc::now());
            s.clone()
        };
        if let Some(dir) = &self.config.state_dir {
            // A job that cannot be persisted is still visible in memory.
            let _ = write_atomic(&dir.join("jobs").join(format!("{}.json", snapshot.job_id)), &to_json_bytes(&snapshot));
        }
    }

    // ---- log and analytics ----

    pub fn export_log(&self, options: &ExportOptions) -> Vec<u8> {
        self.log.lock().expect("log poisoned").export_json(options)
    }

    /// Runs `f` against the log under its lock.
    pub fn with_log<T>(&self, f: impl FnOnce(&EventLog) -> T) -> T {
        f(&self.log.lock().expect("log poisoned"))
    }

    /// Prompt bodies from `root` to the author's final node, with the
    /// sentence diff between each consecutive pair.
    pub fn iteration_chain(&self, author: &str, level: Level, root: &str) -> Result<IterationChain> {
        let bodies = self.log.lock().expect("log poisoned").iteration_chain(author, level, root)?;
        let diffs = bodies.windows(2).map(|w| diff(&w[0], &w[1])).collect();
        Ok(IterationChain {
            author: author.to_string(),
            level,
            root: root.to_string(),
            bodies,
            diffs,
        })
    }

    pub fn user_stats(&self) -> BTreeMap<String, UserStats> {
        self.log.lock().expect("log poisoned").user_stats()
    }

    pub fn influence(&self) -> InfluenceAnalysis {
        let library = self.library.lock().expect("library poisoned");
        let report = influence_graph(&library);
        let sources = influence_summary(&library, &report);
        InfluenceAnalysis {
            edges: report.edges.len(),
            verbatim: report.verbatim_count(),
            orphans: report.orphans.len(),
            report,
            sources,
        }
    }

    pub fn validate_text(&self, req: &ValidateRequest) -> Result<ValidateResponse> {
        let pathway = match parse_pathway(&req.text) {
            Ok(p) => p,
            Err(e) => {
                let (code, line) = match &e {
                    PathwayParseError::EmptyPathway => ("EMPTY_PATHWAY", None),
                    PathwayParseError::ParseError { line, .. } => ("PARSE_ERROR", Some(*line)),
                };
                return Ok(ValidateResponse {
                    ok: false,
                    parse_error: Some(ParseFailure { code: code.into(), line, message: e.to_string() }),
                    pathway: None,
                    report: None,
                });
            }
        };
        let (pathway, mut extra) = match (&req.pool_id, &req.step_ref) {
            (Some(pool_id), Some(step_ref)) => {
                let pool = self.pool(pool_id)?;
                let ctx = pool
                    .resolve(step_ref)
                    .ok_or_else(|| WorkbenchError::not_found("step", &step_ref.to_string()))?;
                let n = normalize_answer_type(ctx.step, &pathway);
                (n.pathway, n.issues)
            }
            _ => (pathway, Vec::new()),
        };
        let mut report = validate(&pathway);
        report.issues.append(&mut extra);
        Ok(ValidateResponse { ok: report.ok, parse_error: None, pathway: Some(pathway), report: Some(report) })
    }
}

/// Normalizes and validates every generated pathway; renders the content
/// document when every step generated and validated.
fn assess(pool: &ContentPool, run: &GenerationRun) -> (JobResult, usize) {
    let mut pathways = BTreeMap::new();
    let mut reports = BTreeMap::new();
    let mut invalid = 0;
    for (key, outcome) in &run.outcomes {
        let StepOutcome::Ok(r) = outcome else { continue };
        let Some(ctx) = pool.resolve(key) else { continue };
        let n = normalize_answer_type(ctx.step, &r.pathway);
        let mut report = validate(&n.pathway);
        report.issues.extend(n.issues);
        if !report.ok {
            invalid += 1;
        }
        pathways.insert(key.clone(), n.pathway);
        reports.insert(key.clone(), report);
    }
    let artifact = if run.failures() == 0 && invalid == 0 && run.provider_error.is_none() {
        render_content(pool, &pathways).ok()
    } else {
        None
    };
    (
        JobResult {
            outcomes: run.outcomes.clone(),
            pathways,
            reports,
            artifact,
        },
        invalid,
    )
}
