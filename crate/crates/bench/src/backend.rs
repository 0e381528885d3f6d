//! Client for a JSON completion endpoint and the LLM-backed assigner.
//!
//! Requests are `POST {model, prompt, max_tokens, temperature: 0}`; the
//! completion is `choices[0].text` of the response.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use triage_core::promptgen::render_eval_prompt;
use triage_core::ranker::parse_ranked_output;
use triage_core::{CandidateSet, IssueReport, PromptTemplate, Ranking};

use crate::error::{BenchError, Result};
use crate::formats;

pub const BACKEND_URL_ENV: &str = "TRIAGE_BACKEND_URL";
pub const LLM_SOURCE: &str = "llm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub max_new_tokens: u32,
    /// Must stay 0; kept in the file so the request is fully described.
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First retry delay; doubles on every further retry.
    pub backoff_base_ms: u64,
    /// A run aborts when more than this fraction of its requests fail.
    pub max_failure_fraction: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8000/v1/completions".into(),
            model_name: "lia".into(),
            max_new_tokens: 256,
            temperature: 0.0,
            timeout_secs: 60.0,
            max_retries: 3,
            max_in_flight: 4,
            backoff_base_ms: 500,
            max_failure_fraction: 0.25,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Usage(format!("backend: {m}")));
        if self.temperature != 0.0 {
            return bad("temperature must be 0");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad("timeout_secs must be positive");
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return bad("max_failure_fraction must lie in [0, 1]");
        }
        if self.endpoint_url.trim().is_empty() {
            return bad("endpoint_url is empty");
        }
        Ok(())
    }

    /// Applies the `TRIAGE_BACKEND_URL` override when it is set and
    /// non-empty.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            if !url.trim().is_empty() {
                self.endpoint_url = url.trim().to_string();
            }
        }
        self
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << (retry.saturating_sub(1)).min(20);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor))
    }
}

#[derive(Debug, Serialize)]
pub struct CompletionRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub max_tokens: u32,
    pub temperature: f64,
}

/// Audit record of one completion call. `raw_output` is present exactly
/// when a response was delivered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub issue_id: String,
    pub prompt: String,
    pub raw_output: Option<String>,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub run_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

/// Shareable across threads; every call is independent.
#[derive(Debug, Clone)]
pub struct BackendClient {
    config: BackendConfig,
    agent: ureq::Agent,
}

impl BackendClient {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn attempt(&self, prompt: &str) -> std::result::Result<String, Failure> {
        let body = CompletionRequest {
            model: &self.config.model_name,
            prompt,
            max_tokens: self.config.max_new_tokens,
            temperature: 0.0,
        };
        let mut resp = self
            .agent
            .post(&self.config.endpoint_url)
            .send_json(&body)
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string();
        if status >= 500 {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if status >= 300 {
            return Err(Failure::Fatal(format!("HTTP {status}")));
        }
        let text = text.map_err(|e| Failure::Retryable(e.to_string()))?;
        extract_text(&text).map_err(Failure::Fatal)
    }

    /// One completion with retries on transport failures and 5xx replies.
    pub fn complete(&self, issue_id: &str, prompt: &str) -> Result<Completion> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt) {
                Ok(text) => return Ok(Completion { text, attempts }),
                Err(Failure::Fatal(message)) => {
                    return Err(BenchError::Protocol {
                        issue_id: issue_id.into(),
                        message,
                    })
                }
                Err(Failure::Retryable(message)) => {
                    if attempts > self.config.max_retries {
                        return Err(BenchError::BackendUnavailable {
                            issue_id: issue_id.into(),
                            attempts,
                            message,
                        });
                    }
                    std::thread::sleep(self.config.backoff(attempts));
                }
            }
        }
    }
}

/// `choices[0].text` of a completion response body.
pub fn extract_text(body: &str) -> std::result::Result<String, String> {
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| format!("malformed body: {e}"))?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("text"))
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .ok_or_else(|| "response lacks choices[0].text".to_string())
}

/// Ranking parsed from a delivered completion, cut to `k`.
pub fn ranking_from_output(issue_id: &str, raw_output: &str, candidates: &CandidateSet, k: usize) -> Ranking {
    let mut ranking = parse_ranked_output(issue_id, LLM_SOURCE, raw_output, candidates);
    ranking.truncate(k);
    ranking
}

/// Renders the evaluation prompt, queries the backend and parses the reply.
/// The record is returned on failure too, carrying the error text.
pub fn llm_rank(
    client: &BackendClient,
    report: &IssueReport,
    candidates: &CandidateSet,
    k: usize,
    template: &PromptTemplate,
    run_index: usize,
) -> (Result<Ranking>, CompletionRecord) {
    let prompt = match render_eval_prompt(report, template) {
        Ok(p) => p,
        Err(e) => {
            let record = CompletionRecord {
                issue_id: report.id.clone(),
                prompt: String::new(),
                raw_output: None,
                latency_ms: 0,
                attempt_count: 0,
                run_index,
                error: Some(e.to_string()),
            };
            return (Err(e.into()), record);
        }
    };
    let start = Instant::now();
    let outcome = client.complete(&report.id, &prompt);
    let latency_ms = start.elapsed().as_millis() as u64;
    let mut record = CompletionRecord {
        issue_id: report.id.clone(),
        prompt,
        raw_output: None,
        latency_ms,
        attempt_count: 0,
        run_index,
        error: None,
    };
    match outcome {
        Ok(c) => {
            record.attempt_count = c.attempts;
            let ranking = ranking_from_output(&report.id, &c.text, candidates, k);
            record.raw_output = Some(c.text);
            (Ok(ranking), record)
        }
        Err(e) => {
            record.attempt_count = match &e {
                BenchError::BackendUnavailable { attempts, .. } => *attempts,
                _ => 1,
            };
            record.error = Some(e.to_string());
            (Err(e), record)
        }
    }
}

/// Rebuilds rankings from archived records without contacting the backend.
/// Records without output become empty rankings.
pub fn replay(records: &[CompletionRecord], candidates: &CandidateSet, k: usize) -> Vec<Ranking> {
    records
        .iter()
        .map(|r| match &r.raw_output {
            Some(out) => ranking_from_output(&r.issue_id, out, candidates, k),
            None => Ranking::empty(r.issue_id.clone(), LLM_SOURCE),
        })
        .collect()
}

/// Result of one evaluation run over the test split.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_index: usize,
    pub rankings: Vec<Ranking>,
    pub records: Vec<CompletionRecord>,
    pub failed: usize,
}

/// Queries every test issue once per run. See [`evaluate_run`].
pub fn batch_evaluate(
    client: &BackendClient,
    test: &[&IssueReport],
    candidates: &CandidateSet,
    k: usize,
    template: &PromptTemplate,
    runs: usize,
    archive: Option<&dyn Fn(usize) -> PathBuf>,
) -> Result<Vec<RunResult>> {
    if runs == 0 {
        return Err(triage_core::Error::InvalidRuns.into());
    }
    (0..runs)
        .map(|run_index| {
            let dir = archive.map(|f| f(run_index));
            evaluate_run(client, test, candidates, k, template, run_index, dir.as_deref())
        })
        .collect()
}

/// Queries every report in `test` once with at most `max_in_flight`
/// requests outstanding. Results keep the order of `test`. When
/// `archive_dir` is given the records are written to
/// `archive_dir/completions.jsonl` before the run is judged. Failed requests
/// yield empty rankings; more than `max_failure_fraction` failures abort the
/// run.
pub fn evaluate_run(
    client: &BackendClient,
    test: &[&IssueReport],
    candidates: &CandidateSet,
    k: usize,
    template: &PromptTemplate,
    run_index: usize,
    archive_dir: Option<&Path>,
) -> Result<RunResult> {
    let slots: Vec<Mutex<Option<(Ranking, CompletionRecord, bool)>>> =
        test.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = client.config().max_in_flight.min(test.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(report) = test.get(i) else { break };
                let (ranking, record) = llm_rank(client, report, candidates, k, template, run_index);
                let failed = ranking.is_err();
                let ranking = ranking.unwrap_or_else(|_| Ranking::empty(report.id.clone(), LLM_SOURCE));
                *slots[i].lock().unwrap() = Some((ranking, record, failed));
            });
        }
    });
    let mut rankings = Vec::with_capacity(test.len());
    let mut records = Vec::with_capacity(test.len());
    let mut failed = 0;
    for slot in slots {
        let (r, rec, f) = slot.into_inner().unwrap().expect("every issue is visited");
        rankings.push(r);
        records.push(rec);
        failed += f as usize;
    }
    if let Some(dir) = archive_dir {
        write_completions(dir, &records)?;
    }
    let limit = client.config().max_failure_fraction;
    if failed as f64 > limit * test.len() as f64 {
        return Err(BenchError::RunAborted {
            run_index,
            failed,
            total: test.len(),
            limit,
        });
    }
    Ok(RunResult {
        run_index,
        rankings,
        records,
        failed,
    })
}

pub fn completions_path(run_dir: &Path) -> PathBuf {
    run_dir.join("completions.jsonl")
}

pub fn write_completions(run_dir: &Path, records: &[CompletionRecord]) -> Result<()> {
    formats::write_jsonl(&completions_path(run_dir), records).map(|_| ())
}

pub fn read_completions(run_dir: &Path) -> Result<Vec<CompletionRecord>> {
    formats::read_jsonl(&completions_path(run_dir))
}
