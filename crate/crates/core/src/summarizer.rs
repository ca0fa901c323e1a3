//! Zero-shot summarization with a completion model under a prompt budget.
//!
//! Every prompt is the input text followed by `"\nTL;DR"`. Long inputs are
//! packed into budget-sized chunks of whole sentences; a single sentence
//! longer than the budget is cut at token boundaries. Per-part summaries are
//! joined in document order with a single space.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Range};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CaseDocument;
use crate::error::{Error, Result};
use crate::labeler::SegmentLabel;
use crate::parallel::bounded_map;
use crate::segmenter::Segmentation;
use crate::tokenize::{Tokenizer, WordPunctTokenizer};

pub const PROMPT_SUFFIX: &str = "\nTL;DR";
pub const PART_SEPARATOR: &str = " ";

/// `text + "\nTL;DR"`, nothing else.
pub fn build_prompt(text: &str) -> Result<String> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(format!("{text}{PROMPT_SUFFIX}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudgetPolicy {
    pub budget_tokens: usize,
}

impl TokenBudgetPolicy {
    pub fn new(budget_tokens: usize) -> Result<Self> {
        if budget_tokens == 0 {
            return Err(Error::Config("token budget must be positive".into()));
        }
        Ok(Self { budget_tokens })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChunkSpan {
    /// Whole sentences `[start, end)`.
    Sentences { start: usize, end: usize },
    /// Tokens `[start, end)` of a single oversized sentence.
    Tokens { sentence: usize, start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub span: ChunkSpan,
    pub text: String,
    pub token_count: usize,
}

/// Greedy in-order packing of whole sentences into chunks of at most
/// `budget` tokens. Sentences with no tokens ride along with their
/// neighbours.
pub fn chunk_by_budget(sentences: &[&str], policy: &TokenBudgetPolicy, tokenizer: &dyn Tokenizer) -> Vec<Chunk> {
    let budget = policy.budget_tokens.max(1);
    let mut chunks = Vec::new();
    let mut open: Option<(usize, usize)> = None; // (first sentence, tokens)
    let flush = |chunks: &mut Vec<Chunk>, first: usize, end: usize, tokens: usize| {
        chunks.push(Chunk {
            span: ChunkSpan::Sentences { start: first, end },
            text: sentences[first..end].join(" "),
            token_count: tokens,
        });
    };
    for (i, sentence) in sentences.iter().enumerate() {
        let spans = tokenizer.spans(sentence);
        let n = spans.len();
        if n > budget {
            if let Some((first, tokens)) = open.take() {
                flush(&mut chunks, first, i, tokens);
            }
            for (k, piece) in spans.chunks(budget).enumerate() {
                let start = k * budget;
                chunks.push(Chunk {
                    span: ChunkSpan::Tokens {
                        sentence: i,
                        start,
                        end: start + piece.len(),
                    },
                    text: sentence[piece[0].start..piece[piece.len() - 1].end].to_string(),
                    token_count: piece.len(),
                });
            }
            continue;
        }
        match open {
            Some((first, tokens)) if tokens + n > budget => {
                flush(&mut chunks, first, i, tokens);
                open = Some((i, n));
            }
            Some((first, tokens)) => open = Some((first, tokens + n)),
            None => open = Some((i, n)),
        }
    }
    if let Some((first, tokens)) = open {
        flush(&mut chunks, first, sentences.len(), tokens);
    }
    chunks
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedSegment {
    pub segment_index: usize,
    pub span: Range<usize>,
    pub text: String,
}

/// Texts of the segments labelled argumentative, in document order. May be
/// empty.
pub fn select_argumentative_text(
    doc: &CaseDocument,
    segmentation: &Segmentation,
    labels: &[SegmentLabel],
) -> Result<Vec<SelectedSegment>> {
    let segments = segmentation.segments();
    if segments.len() != labels.len() {
        return Err(Error::LabelSegmentMismatch {
            labels: labels.len(),
            segments: segments.len(),
        });
    }
    if segmentation.n != doc.len() {
        return Err(Error::SpanOutOfRange {
            start: 0,
            end: segmentation.n,
            len: doc.len(),
        });
    }
    let selected: Vec<SelectedSegment> = segments
        .into_iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (_, l))| l.is_argumentative())
        .map(|(i, (span, _))| SelectedSegment {
            segment_index: i,
            text: doc.span_text(span.start, span.end),
            span,
        })
        .collect();
    if selected.is_empty() {
        warn!("document `{}` has no argumentative segments", doc.case_id);
    }
    Ok(selected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
}

impl CompletionRequest {
    pub fn new(prompt: String, temperature: f64, max_tokens: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&temperature) {
            return Err(Error::Config(format!("temperature {temperature} outside [0, 1]")));
        }
        if max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(Self {
            prompt,
            temperature,
            max_tokens,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Add for Usage {
    type Output = Usage;

    fn add(self, o: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
        }
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, o: Usage) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub usage: Usage,
    pub provider: String,
}

/// A failed completion call. Retryable failures (rate limits, server errors,
/// transport problems) are retried by [`CompletionClient`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderError {
    pub retryable: bool,
    pub message: String,
}

impl ProviderError {
    pub fn retryable(message: impl Into<String>) -> Self {
        Self {
            retryable: true,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            retryable: false,
            message: message.into(),
        }
    }
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> String;

    /// Total tokens (prompt plus completion) the provider accepts, if known.
    fn context_window(&self) -> Option<usize> {
        None
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for Arc<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        (**self).complete(request)
    }
}

/// Deterministic offline provider: echoes the first `max_tokens` tokens of
/// the prompt body (the text before the `TL;DR` suffix). Temperature is
/// ignored.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    pub context_window: Option<usize>,
}

impl CompletionProvider for MockProvider {
    fn id(&self) -> String {
        "mock".into()
    }

    fn context_window(&self) -> Option<usize> {
        self.context_window
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let tok = WordPunctTokenizer;
        let body = request.prompt.strip_suffix(PROMPT_SUFFIX).unwrap_or(&request.prompt);
        let spans = tok.spans(body);
        let text = match spans.get(..request.max_tokens.min(spans.len())) {
            Some([first, .., last]) => &body[first.start..last.end],
            Some([only]) => &body[only.clone()],
            _ => "",
        };
        Ok(CompletionResponse {
            text: text.to_string(),
            usage: Usage {
                prompt_tokens: tok.count(&request.prompt) as u64,
                completion_tokens: tok.count(text) as u64,
            },
            provider: self.id(),
        })
    }
}

/// Wraps a provider and records every request it sees.
pub struct RecordingProvider<P> {
    inner: P,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl<P> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().expect("request log poisoned").len()
    }
}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn context_window(&self) -> Option<usize> {
        self.inner.context_window()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        self.requests
            .lock()
            .expect("request log poisoned")
            .push(request.clone());
        self.inner.complete(request)
    }
}

#[derive(Serialize)]
struct HttpRequestBody<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct HttpUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct HttpResponseBody {
    text: String,
    usage: HttpUsage,
}

/// Completion endpoint speaking
/// `{"prompt", "temperature", "max_tokens"}` →
/// `{"text", "usage": {"prompt_tokens", "completion_tokens"}}`.
#[derive(Debug, Clone)]
pub struct HttpCompletionProvider {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub context_window: Option<usize>,
}

pub const API_KEY_ENV: &str = "ARGPIPE_API_KEY";

impl HttpCompletionProvider {
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            url: url.into(),
            api_key,
            timeout: Duration::from_secs(120),
            context_window: None,
        }
    }

    /// Reads the API key from `ARGPIPE_API_KEY` when set.
    pub fn from_env(url: impl Into<String>) -> Self {
        Self::new(url, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }
}

impl CompletionProvider for HttpCompletionProvider {
    fn id(&self) -> String {
        format!("http:{}", self.url)
    }

    fn context_window(&self) -> Option<usize> {
        self.context_window
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = HttpRequestBody {
            prompt: &request.prompt,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) => {
                let msg = format!("HTTP status {code}");
                return Err(if code == 429 || code >= 500 || code == 408 {
                    ProviderError::retryable(msg)
                } else {
                    ProviderError::fatal(msg)
                });
            }
            Err(e) => return Err(ProviderError::retryable(e.to_string())),
        };
        let parsed: HttpResponseBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::fatal(format!("bad response body: {e}")))?;
        Ok(CompletionResponse {
            text: parsed.text,
            usage: Usage {
                prompt_tokens: parsed.usage.prompt_tokens,
                completion_tokens: parsed.usage.completion_tokens,
            },
            provider: self.id(),
        })
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Exponential backoff with full jitter: before attempt `k + 1` the client
/// sleeps a uniform random time in `[0, initial · 2^(k−1)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_delay: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_delay: Duration::from_secs(1),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the jittered delay after failed attempt `attempt` (1-based).
    pub fn delay_cap(&self, attempt: u32) -> Duration {
        self.initial_delay
            .mul_f64(self.multiplier.powi(attempt.saturating_sub(1) as i32))
    }
}

/// Provider plus retry, in-flight limit and context-window checks.
pub struct CompletionClient {
    provider: Arc<dyn CompletionProvider>,
    retry: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    jitter: Mutex<ChaCha8Rng>,
    pub max_in_flight: usize,
    tokenizer: Arc<dyn Tokenizer>,
}

impl CompletionClient {
    pub fn new(provider: Arc<dyn CompletionProvider>) -> Self {
        Self {
            provider,
            retry: RetryPolicy::default(),
            sleeper: Arc::new(ThreadSleeper),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
            max_in_flight: 4,
            tokenizer: Arc::new(WordPunctTokenizer),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_seed(self, seed: u64) -> Self {
        *self.jitter.lock().expect("jitter rng poisoned") = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn with_tokenizer(mut self, tokenizer: Arc<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        if let Some(limit) = self.provider.context_window() {
            let tokens = self.tokenizer.count(&request.prompt) + request.max_tokens;
            if tokens > limit {
                return Err(Error::RequestTooLarge { tokens, limit });
            }
        }
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.provider.complete(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.retryable && attempt < self.retry.max_attempts => {
                    let cap = self.retry.delay_cap(attempt);
                    let frac: f64 = self.jitter.lock().expect("jitter rng poisoned").gen();
                    let delay = cap.mul_f64(frac);
                    debug!("attempt {attempt} failed ({e}); retrying in {delay:?}");
                    self.sleeper.sleep(delay);
                }
                Err(e) => {
                    return Err(Error::CompletionFailed {
                        attempts: attempt,
                        message: e.message,
                    })
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMethod {
    BaselineChunks,
    ArgSegments,
}

impl SummaryMethod {
    pub fn short_name(self) -> &'static str {
        match self {
            SummaryMethod::BaselineChunks => "baseline",
            SummaryMethod::ArgSegments => "argseg",
        }
    }
}

impl FromStr for SummaryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "baseline_chunks" => Ok(SummaryMethod::BaselineChunks),
            "argseg" | "arg_segments" => Ok(SummaryMethod::ArgSegments),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for SummaryMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// What to summarize: the whole document, or the argumentative segments of a
/// labelled segmentation.
#[derive(Debug, Clone, Copy)]
pub enum SummaryInput<'a> {
    BaselineChunks,
    ArgSegments {
        segmentation: &'a Segmentation,
        labels: &'a [SegmentLabel],
    },
}

impl SummaryInput<'_> {
    pub fn method(&self) -> SummaryMethod {
        match self {
            SummaryInput::BaselineChunks => SummaryMethod::BaselineChunks,
            SummaryInput::ArgSegments { .. } => SummaryMethod::ArgSegments,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub case_id: String,
    pub method: SummaryMethod,
    pub temperature: f64,
    pub max_tokens: usize,
    pub parts: Vec<String>,
    pub final_summary: String,
    pub usage: Usage,
    pub calls: usize,
    pub cost: Option<f64>,
    pub provider: String,
}

/// Prompt texts (before the suffix) for a document under a method.
pub fn part_texts(
    doc: &CaseDocument,
    input: &SummaryInput<'_>,
    policy: &TokenBudgetPolicy,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<String>> {
    match input {
        SummaryInput::BaselineChunks => {
            let sentences: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
            Ok(chunk_by_budget(&sentences, policy, tokenizer)
                .into_iter()
                .map(|c| c.text)
                .collect())
        }
        SummaryInput::ArgSegments { segmentation, labels } => {
            let selected = select_argumentative_text(doc, segmentation, labels)?;
            if selected.is_empty() {
                return Err(Error::NoArgumentativeSegments(doc.case_id.clone()));
            }
            let mut parts = Vec::new();
            for seg in selected {
                if tokenizer.count(&seg.text) <= policy.budget_tokens {
                    parts.push(seg.text);
                } else {
                    let sentences: Vec<&str> = doc.sentences[seg.span].iter().map(|s| s.text.as_str()).collect();
                    parts.extend(
                        chunk_by_budget(&sentences, policy, tokenizer)
                            .into_iter()
                            .map(|c| c.text),
                    );
                }
            }
            Ok(parts)
        }
    }
}

/// One completion per part, issued with bounded concurrency and reassembled
/// by index.
pub fn summarize_document(
    doc: &CaseDocument,
    input: &SummaryInput<'_>,
    client: &CompletionClient,
    params: &DecodeParams,
    policy: &TokenBudgetPolicy,
    pricing: Option<&Pricing>,
) -> Result<SummaryRecord> {
    let texts = part_texts(doc, input, policy, client.tokenizer())?;
    let requests = texts
        .iter()
        .map(|t| CompletionRequest::new(build_prompt(t)?, params.temperature, params.max_tokens))
        .collect::<Result<Vec<_>>>()?;
    let responses = bounded_map(&requests, client.max_in_flight, |r| client.complete(r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let usage = responses.iter().fold(Usage::default(), |acc, r| acc + r.usage);
    let parts: Vec<String> = responses.into_iter().map(|r| r.text.trim().to_string()).collect();
    Ok(SummaryRecord {
        case_id: doc.case_id.clone(),
        method: input.method(),
        temperature: params.temperature,
        max_tokens: params.max_tokens,
        final_summary: parts.join(PART_SEPARATOR),
        calls: parts.len(),
        parts,
        cost: pricing.map(|p| p.cost(&usage)),
        usage,
        provider: client.provider_id(),
    })
}

/// Dollars per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

impl Pricing {
    pub fn cost(&self, usage: &Usage) -> f64 {
        usage.prompt_tokens as f64 / 1000.0 * self.prompt_per_1k
            + usage.completion_tokens as f64 / 1000.0 * self.completion_per_1k
    }
}

/// Named defaults for a completion model class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    pub name: String,
    pub budget_tokens: usize,
    pub context_window: usize,
    pub pricing: Pricing,
    pub max_tokens_grid: Vec<usize>,
}

impl ProviderProfile {
    /// 4,097-token context, 2,500-token prompt budget, $0.02 / 1k tokens.
    pub fn small() -> Self {
        Self {
            name: "small".into(),
            budget_tokens: 2500,
            context_window: 4097,
            pricing: Pricing {
                prompt_per_1k: 0.02,
                completion_per_1k: 0.02,
            },
            max_tokens_grid: vec![32, 64, 128],
        }
    }

    /// 8,192-token context, 7,500-token prompt budget, $0.03 / $0.06 per 1k.
    pub fn large() -> Self {
        Self {
            name: "large".into(),
            budget_tokens: 7500,
            context_window: 8192,
            pricing: Pricing {
                prompt_per_1k: 0.03,
                completion_per_1k: 0.06,
            },
            max_tokens_grid: vec![128, 256, 512],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "small" | "gpt-3.5" => Ok(Self::small()),
            "large" | "gpt-4" => Ok(Self::large()),
            other => Err(Error::UnknownProfile(other.into())),
        }
    }
}

/// Per-profile prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable(pub BTreeMap<String, Pricing>);

impl Default for PricingTable {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for p in [ProviderProfile::small(), ProviderProfile::large()] {
            m.insert(p.name, p.pricing);
        }
        Self(m)
    }
}

pub fn estimate_cost(usage: &Usage, pricing: &PricingTable, profile: &str) -> Result<f64> {
    pricing
        .0
        .get(profile)
        .map(|p| p.cost(usage))
        .ok_or_else(|| Error::UnknownProfile(profile.into()))
}
