use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{dataset_digest, AnswerFormat, BenchItem, Task};
use crate::prompt::{render_with, InterventionKind, RenderOptions};

use super::{
    extract_message, parse_choice, parse_numeric, parse_text, request_digest, BackendError,
    ChatBackend, ChatRequest, ClientConfig, EvalError, ResponseCache,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub cache_hit: bool,
    pub retries: u32,
}

/// Cached completion, or a request with exponential backoff on transient
/// failures (at most `max_retries` retries).
pub fn complete(
    config: &ClientConfig,
    backend: &dyn ChatBackend,
    cache: Option<&ResponseCache>,
    prompt: &str,
) -> Result<Completion, EvalError> {
    let req = ChatRequest {
        model: config.model.clone(),
        prompt: prompt.to_string(),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
    };
    let digest = request_digest(&req);
    let finish = |body: &str, cache_hit: bool, retries: u32| {
        let (text, prompt_tokens, completion_tokens) =
            extract_message(body).map_err(EvalError::Response)?;
        Ok(Completion {
            text,
            prompt_tokens,
            completion_tokens,
            cache_hit,
            retries,
        })
    };
    if let Some(body) = cache.and_then(|c| c.get(&digest)) {
        return finish(&body, true, 0);
    }
    let mut retries = 0;
    loop {
        match backend.send(&req) {
            Ok(body) => {
                let done = finish(&body, false, retries)?;
                if let Some(c) = cache {
                    c.put(&digest, &body)?;
                }
                return Ok(done);
            }
            Err(BackendError::Fatal { status, why }) => {
                return Err(EvalError::Endpoint { status, why })
            }
            Err(BackendError::Transient(why)) => {
                if retries >= config.max_retries {
                    return Err(EvalError::Transport { retries, why });
                }
                let wait = config.backoff_base_ms.saturating_mul(1 << retries.min(16));
                tracing::debug!(retries, wait, "transient failure: {why}");
                std::thread::sleep(Duration::from_millis(wait));
                retries += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum ParsedAnswer {
    Choice(String),
    Numeric(i64),
    Text(String),
}

impl ParsedAnswer {
    /// Compares with a gold answer string in the item's own format.
    pub fn matches(&self, gold: &str) -> bool {
        match self {
            ParsedAnswer::Choice(c) => c == gold,
            ParsedAnswer::Numeric(n) => gold.trim().parse::<i64>().is_ok_and(|g| g == *n),
            ParsedAnswer::Text(t) => t.trim().eq_ignore_ascii_case(gold.trim()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub kind: InterventionKind,
    pub model: String,
    pub prompt_digest: String,
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<ParsedAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_failure: Option<String>,
    pub fallback: bool,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
    pub cache_hit: bool,
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn is_correct(&self, gold: &str) -> bool {
        self.answer.as_ref().is_some_and(|a| a.matches(gold))
    }
}

pub fn prompt_digest(prompt: &str) -> String {
    format!("{:x}", Sha256::digest(prompt.as_bytes()))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn parse_answer(
    text: &str,
    item: &BenchItem,
    format: AnswerFormat,
) -> (Option<ParsedAnswer>, Option<String>, bool) {
    let out = match format {
        AnswerFormat::Choice => {
            parse_choice(text, &item.labels()).map(|p| (ParsedAnswer::Choice(p.value), p.fallback))
        }
        AnswerFormat::Numeric => {
            parse_numeric(text).map(|p| (ParsedAnswer::Numeric(p.value), p.fallback))
        }
        AnswerFormat::Text => parse_text(text).map(|p| (ParsedAnswer::Text(p.value), p.fallback)),
    };
    match out {
        Ok((a, fallback)) => (Some(a), None, fallback),
        Err(why) => (None, Some(why), false),
    }
}

fn evaluate_one(
    item: &BenchItem,
    kind: InterventionKind,
    opts: RenderOptions,
    config: &ClientConfig,
    backend: &dyn ChatBackend,
    cache: Option<&ResponseCache>,
) -> EvalRecord {
    let mut rec = EvalRecord {
        item_id: item.id.clone(),
        kind,
        model: config.model.clone(),
        prompt_digest: String::new(),
        response: None,
        answer: None,
        parse_failure: None,
        fallback: false,
        prompt_tokens: None,
        completion_tokens: None,
        latency_ms: 0,
        timestamp_ms: now_ms(),
        cache_hit: false,
        retries: 0,
        error: None,
    };
    let prompt = match render_with(item, kind, opts) {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(e.to_string());
            rec.parse_failure = Some(format!("not rendered: {e}"));
            return rec;
        }
    };
    rec.prompt_digest = prompt_digest(&prompt.text);
    let start = Instant::now();
    let result = complete(config, backend, cache, &prompt.text);
    rec.latency_ms = start.elapsed().as_millis() as u64;
    match result {
        Ok(c) => {
            let (answer, failure, fallback) = parse_answer(&c.text, item, prompt.format);
            rec.answer = answer;
            rec.parse_failure = failure;
            rec.fallback = fallback;
            rec.response = Some(c.text);
            rec.prompt_tokens = c.prompt_tokens;
            rec.completion_tokens = c.completion_tokens;
            rec.cache_hit = c.cache_hit;
            rec.retries = c.retries;
        }
        Err(e) => {
            if let EvalError::Transport { retries, .. } = &e {
                rec.retries = *retries;
            }
            rec.parse_failure = Some(format!("no response: {e}"));
            rec.error = Some(e.to_string());
        }
    }
    rec
}

/// One record per item, in item order, with at most `max_in_flight`
/// requests outstanding. Per-item failures are recorded, never raised.
pub fn run_batch(
    items: &[BenchItem],
    kind: InterventionKind,
    opts: RenderOptions,
    config: &ClientConfig,
    backend: &dyn ChatBackend,
    cache: Option<&ResponseCache>,
) -> Result<Vec<EvalRecord>, EvalError> {
    config.validate()?;
    if items.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<EvalRecord>>> = Mutex::new(vec![None; items.len()]);
    let workers = config.max_in_flight.min(items.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let rec = evaluate_one(item, kind, opts, config, backend, cache);
                slots.lock().expect("record slots poisoned")[i] = Some(rec);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("record slots poisoned")
        .into_iter()
        .map(|r| r.expect("every item evaluated"))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest: u32,
    pub task: Option<Task>,
    pub kind: InterventionKind,
    pub model: String,
    pub dataset_digest: String,
    pub item_count: usize,
    pub think_prefix: bool,
    pub cot_suffix: bool,
    pub config: ClientConfig,
}

impl RunManifest {
    pub fn new(
        items: &[BenchItem],
        kind: InterventionKind,
        opts: RenderOptions,
        config: &ClientConfig,
    ) -> Self {
        Self {
            manifest: 1,
            task: items.first().map(|i| i.task),
            kind,
            model: config.model.clone(),
            dataset_digest: dataset_digest(items),
            item_count: items.len(),
            think_prefix: opts.think_prefix,
            cot_suffix: opts.cot_suffix,
            config: config.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunFile {
    pub manifest: RunManifest,
    pub records: Vec<EvalRecord>,
}

pub fn write_run<W: Write>(
    mut out: W,
    manifest: &RunManifest,
    records: &[EvalRecord],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, manifest)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_run(path: &Path) -> Result<RunFile, EvalError> {
    let file =
        std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let mut manifest = None;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| EvalError::RunFile {
            line: i + 1,
            why: e.to_string(),
        };
        if manifest.is_none() {
            manifest = Some(serde_json::from_str::<RunManifest>(&line).map_err(bad)?);
        } else {
            records.push(serde_json::from_str::<EvalRecord>(&line).map_err(bad)?);
        }
    }
    let manifest = manifest.ok_or(EvalError::RunFile {
        line: 1,
        why: "missing manifest".into(),
    })?;
    Ok(RunFile { manifest, records })
}
