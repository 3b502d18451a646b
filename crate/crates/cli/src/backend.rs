use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;

use hintforge_core::content_pool::PoolSummary;
use hintforge_core::log_engine::{ExportFilter, ExportOptions, UserStats};
use hintforge_core::prompt_library::Level;
use hintforge_core::workbench::{
    InfluenceAnalysis, IterationChain, JobRequest, JobState, JobStatus, ValidateRequest, ValidateResponse, Workbench,
    WorkbenchConfig,
};

use crate::{Cli, CliError, CliResult, LogExportArgs};

pub enum Backend {
    Local(Box<Workbench>),
    Remote(Remote),
}

pub struct Remote {
    base: String,
    user: String,
    client: Client,
}

const POLL: Duration = Duration::from_millis(50);

fn parse_time(flag: &str, v: &Option<String>) -> CliResult<Option<chrono::DateTime<chrono::Utc>>> {
    v.as_deref()
        .map(|s| {
            chrono::DateTime::parse_from_rfc3339(s)
                .map(|t| t.with_timezone(&chrono::Utc))
                .map_err(|e| CliError::new("USAGE", format!("--{flag} {s:?}: {e}")))
        })
        .transpose()
}

impl Backend {
    pub fn connect(cli: &Cli) -> CliResult<Backend> {
        if let Some(server) = &cli.server {
            return Ok(Backend::Remote(Remote {
                base: server.trim_end_matches('/').to_string(),
                user: cli.user.clone(),
                client: Client::builder()
                    .timeout(Duration::from_secs(600))
                    .build()
                    .map_err(|e| CliError::new("SERVER_UNREACHABLE", e.to_string()))?,
            }));
        }
        let defaults = WorkbenchConfig::default();
        let config = WorkbenchConfig {
            state_dir: Some(cli.state.clone()),
            default_k: cli.default_k.unwrap_or(defaults.default_k),
            jobs: cli.jobs.map_or(defaults.jobs, |j| j as usize),
            provider_url: cli.provider_url.clone(),
            provider_key_env: cli.provider_key_env.clone(),
            ..defaults
        };
        Ok(Backend::Local(Box::new(Workbench::open(config)?)))
    }

    pub fn ingest_file(&self, pool_id: &str, path: &Path) -> CliResult<PoolSummary> {
        match self {
            Backend::Local(wb) => Ok(wb.ingest_uri(pool_id, &path.display().to_string())?),
            Backend::Remote(r) => {
                let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
                let req = r
                    .client
                    .post(r.url("/pools"))
                    .query(&[("pool_id", pool_id)])
                    .header("content-type", "text/csv")
                    .body(bytes);
                r.send(req)
            }
        }
    }

    pub fn ingest_url(&self, pool_id: &str, url: &str) -> CliResult<PoolSummary> {
        match self {
            Backend::Local(wb) => Ok(wb.ingest_uri(pool_id, url)?),
            Backend::Remote(r) => r.post("/pools", &serde_json::json!({"url": url, "pool_id": pool_id})),
        }
    }

    /// Runs a generation job to completion.
    pub fn generate(&self, req: JobRequest) -> CliResult<JobStatus> {
        match self {
            Backend::Local(wb) => Ok(wb.run_job_blocking(&req)?),
            Backend::Remote(r) => {
                let started: JobStatus = r.post("/jobs/generate", &req)?;
                loop {
                    let s = self.job(&started.job_id)?;
                    if matches!(s.state, JobState::Succeeded | JobState::Failed) {
                        return Ok(s);
                    }
                    std::thread::sleep(POLL);
                }
            }
        }
    }

    pub fn job(&self, job_id: &str) -> CliResult<JobStatus> {
        match self {
            Backend::Local(wb) => Ok(wb.job(job_id)?),
            Backend::Remote(r) => r.get(&format!("/jobs/{job_id}"), &[]),
        }
    }

    pub fn validate(&self, req: ValidateRequest) -> CliResult<ValidateResponse> {
        match self {
            Backend::Local(wb) => Ok(wb.validate_text(&req)?),
            Backend::Remote(r) => r.post("/validate", &req),
        }
    }

    pub fn export_log(&self, a: &LogExportArgs) -> CliResult<Vec<u8>> {
        let from = parse_time("from", &a.from)?;
        let to = parse_time("to", &a.to)?;
        match self {
            Backend::Local(wb) => Ok(wb.export_log(&ExportOptions {
                filter: ExportFilter { author: a.author.clone(), kind: a.kind, from, to },
                inline_outputs: a.inline_outputs,
            })),
            Backend::Remote(r) => {
                let mut q: Vec<(&str, String)> = Vec::new();
                if let Some(v) = &a.author {
                    q.push(("author", v.clone()));
                }
                if let Some(v) = a.kind {
                    q.push(("kind", v.to_string()));
                }
                if let Some(v) = from {
                    q.push(("from", v.to_rfc3339()));
                }
                if let Some(v) = to {
                    q.push(("to", v.to_rfc3339()));
                }
                if a.inline_outputs {
                    q.push(("inline_outputs", "true".into()));
                }
                let resp = r.exchange(r.client.get(r.url("/logs/export")).query(&q))?;
                resp.bytes()
                    .map(|b| b.to_vec())
                    .map_err(|e| CliError::new("SERVER_UNREACHABLE", e.to_string()))
            }
        }
    }

    pub fn chain(&self, author: &str, level: Level, root: &str) -> CliResult<IterationChain> {
        match self {
            Backend::Local(wb) => Ok(wb.iteration_chain(author, level, root)?),
            Backend::Remote(r) => r.get(
                "/logs/chain",
                &[("author", author.to_string()), ("level", level.to_string()), ("root", root.to_string())],
            ),
        }
    }

    pub fn influence(&self) -> CliResult<InfluenceAnalysis> {
        match self {
            Backend::Local(wb) => Ok(wb.influence()),
            Backend::Remote(r) => r.get("/analytics/influence", &[]),
        }
    }

    pub fn users(&self) -> CliResult<BTreeMap<String, UserStats>> {
        match self {
            Backend::Local(wb) => Ok(wb.user_stats()),
            Backend::Remote(r) => r.get("/analytics/users", &[]),
        }
    }
}

impl Remote {
    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn exchange(&self, req: RequestBuilder) -> CliResult<Response> {
        let resp = req
            .header("x-user", &self.user)
            .send()
            .map_err(|e| CliError::new("SERVER_UNREACHABLE", e.to_string()))?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        let parsed: Option<serde_json::Value> = serde_json::from_str(&text).ok();
        let field = |k: &str| parsed.as_ref().and_then(|v| v["error"][k].as_str()).map(String::from);
        Err(CliError::new(
            field("code").unwrap_or_else(|| format!("HTTP_{}", status.as_u16())),
            field("message").unwrap_or(text),
        ))
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> CliResult<T> {
        self.exchange(req)?
            .json()
            .map_err(|e| CliError::new("BAD_RESPONSE", e.to_string()))
    }

    fn get<T: DeserializeOwned>(&self, path: &str, query: &[(&str, String)]) -> CliResult<T> {
        self.send(self.client.get(self.url(path)).query(query))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> CliResult<T> {
        self.send(self.client.post(self.url(path)).json(body))
    }
}
