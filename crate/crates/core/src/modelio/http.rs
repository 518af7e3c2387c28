//! HTTP clients speaking the OpenAI-compatible inference-server dialect.
//!
//! Paths: `POST {base}/v1/embeddings` and `POST {base}/v1/completions`.
//! Scoring uses the completions route with `echo` and `logprobs` so the
//! server returns per-token log-probabilities of the prompt itself.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    check_embeddings, Capability, Completer, Embedder, InflightGate, ModelEndpoint, RetryPolicy,
    ScoreMode, ScoreRequest, ScoreSpec, Scorer, ServiceError,
};

/// Shared transport: agent, auth, concurrency bound and retries.
struct Client {
    endpoint: ModelEndpoint,
    agent: ureq::Agent,
    api_key: Option<String>,
    gate: Arc<InflightGate>,
    retry: RetryPolicy,
}

impl Client {
    fn new(endpoint: ModelEndpoint, capability: Capability) -> Result<Self, ServiceError> {
        endpoint.require(capability)?;
        let agent = ureq::AgentBuilder::new().timeout(endpoint.timeout).build();
        let api_key = std::env::var(endpoint.auth_env_var()).ok();
        let gate = Arc::new(InflightGate::new(endpoint.max_inflight));
        Ok(Self {
            endpoint,
            agent,
            api_key,
            gate,
            retry: RetryPolicy::default(),
        })
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
        idempotent: bool,
    ) -> Result<Resp, ServiceError> {
        let url = format!("{}{}", self.endpoint.base_url, path);
        let name = &self.endpoint.name;
        self.retry.run(idempotent, || {
            let _permit = self.gate.acquire();
            let mut req = self.agent.post(&url);
            if let Some(key) = &self.api_key {
                req = req.set("Authorization", &format!("Bearer {key}"));
            }
            let resp = match req.send_json(body) {
                Ok(r) => r,
                Err(ureq::Error::Status(status, r)) => {
                    return Err(ServiceError::Status {
                        endpoint: name.clone(),
                        status,
                        body: r.into_string().unwrap_or_default(),
                    })
                }
                Err(ureq::Error::Transport(t)) => {
                    return Err(ServiceError::Transport {
                        endpoint: name.clone(),
                        message: t.to_string(),
                    })
                }
            };
            resp.into_json::<Resp>().map_err(|e| ServiceError::Malformed {
                endpoint: name.clone(),
                reason: e.to_string(),
            })
        })
    }

    fn malformed(&self, reason: impl Into<String>) -> ServiceError {
        ServiceError::Malformed {
            endpoint: self.endpoint.name.clone(),
            reason: reason.into(),
        }
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

pub struct HttpEmbedder {
    client: Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, ServiceError> {
        Ok(Self {
            client: Client::new(endpoint, Capability::Embed)?,
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client.retry = retry;
        self
    }

    pub fn gate(&self) -> &InflightGate {
        &self.client.gate
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.client.endpoint.name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ServiceError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(ServiceError::InvalidRequest("empty text".into()).at_text(i));
        }
        let resp: EmbeddingResponse = self
            .client
            .post(
                "/v1/embeddings",
                &EmbeddingRequest {
                    model: self.client.endpoint.model_id(),
                    input: texts,
                },
                true,
            )
            .map_err(|e| e.at_text(0))?;
        // Match by the response's index field, not by position.
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for d in resp.data {
            let slot = slots
                .get_mut(d.index)
                .ok_or_else(|| self.client.malformed(format!("index {} out of range", d.index)))?;
            if slot.is_some() {
                return Err(self
                    .client
                    .malformed(format!("duplicate index {}", d.index))
                    .at_text(d.index));
            }
            *slot = Some(d.embedding);
        }
        let mut out = Vec::with_capacity(texts.len());
        for (i, s) in slots.into_iter().enumerate() {
            out.push(s.ok_or_else(|| self.client.malformed("missing embedding").at_text(i))?);
        }
        check_embeddings(&out, None)?;
        Ok(out)
    }
}

#[derive(Serialize)]
struct EchoRequest<'a> {
    model: &'a str,
    prompt: String,
    max_tokens: u32,
    echo: bool,
    logprobs: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    text: String,
    #[serde(default)]
    logprobs: Option<LogProbs>,
}

#[derive(Deserialize)]
struct LogProbs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    text_offset: Vec<usize>,
}

pub struct HttpScorer {
    client: Client,
}

impl HttpScorer {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, ServiceError> {
        Ok(Self {
            client: Client::new(endpoint, Capability::Score)?,
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client.retry = retry;
        self
    }

    pub fn gate(&self) -> &InflightGate {
        &self.client.gate
    }
}

/// Reduces echoed prompt log-probs to a score.
///
/// `boundary` is the character offset where the continuation starts. In
/// continuation mode only tokens starting at or after it are summed, and a
/// token straddling it is an error. The first prompt token has no
/// conditional log-prob and is skipped in full-sequence mode.
pub fn reduce_logprobs(
    tokens: &[String],
    logprobs: &[Option<f64>],
    offsets: &[usize],
    boundary: usize,
    spec: ScoreSpec,
) -> Result<f64, ServiceError> {
    if tokens.len() != logprobs.len() || tokens.len() != offsets.len() {
        return Err(ServiceError::InvalidRequest(
            "logprobs arrays have different lengths".into(),
        ));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut continuation_tokens = 0usize;
    for ((tok, lp), &off) in tokens.iter().zip(logprobs).zip(offsets) {
        let end = off + tok.chars().count();
        let in_continuation = off >= boundary;
        if !in_continuation && end > boundary {
            return Err(ServiceError::TokenBoundary {
                boundary,
                token_offset: off,
                token: tok.clone(),
            });
        }
        if in_continuation {
            continuation_tokens += 1;
        }
        let counted = match spec.mode {
            ScoreMode::Continuation => in_continuation,
            ScoreMode::FullSequence => true,
        };
        if counted {
            if let Some(v) = lp {
                sum += v;
                n += 1;
            } else if in_continuation {
                return Err(ServiceError::InvalidRequest(
                    "missing log-prob for continuation token".into(),
                ));
            }
        }
    }
    if continuation_tokens == 0 {
        return Err(ServiceError::EmptyContinuation);
    }
    if spec.per_token_mean && n > 0 {
        sum /= n as f64;
    }
    Ok(sum)
}

impl Scorer for HttpScorer {
    fn id(&self) -> &str {
        &self.client.endpoint.name
    }

    fn score(&self, req: &ScoreRequest, spec: ScoreSpec) -> Result<f64, ServiceError> {
        let body = EchoRequest {
            model: self.client.endpoint.model_id(),
            prompt: format!("{}{}", req.context, req.continuation),
            max_tokens: 0,
            echo: true,
            logprobs: 1,
            temperature: 0.0,
        };
        let resp: CompletionResponse = self.client.post("/v1/completions", &body, true)?;
        let lp = resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .ok_or_else(|| self.client.malformed("no logprobs in response"))?;
        let score = reduce_logprobs(
            &lp.tokens,
            &lp.token_logprobs,
            &lp.text_offset,
            req.context.chars().count(),
            spec,
        )?;
        if !score.is_finite() {
            return Err(self.client.malformed("non-finite score"));
        }
        Ok(score)
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    seed: u64,
    temperature: f64,
    max_tokens: u32,
}

pub struct HttpCompleter {
    client: Client,
    max_tokens: u32,
}

impl HttpCompleter {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, ServiceError> {
        Ok(Self {
            client: Client::new(endpoint, Capability::Complete)?,
            max_tokens: 2048,
        })
    }

    pub fn with_max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client.retry = retry;
        self
    }
}

impl Completer for HttpCompleter {
    fn id(&self) -> &str {
        &self.client.endpoint.name
    }

    fn complete(&self, prompt: &str, seed: u64, temperature: f64) -> Result<String, ServiceError> {
        if !(temperature >= 0.0) {
            return Err(ServiceError::InvalidRequest(format!(
                "temperature {temperature} is negative"
            )));
        }
        let body = GenerateRequest {
            model: self.client.endpoint.model_id(),
            prompt,
            seed,
            temperature,
            max_tokens: self.max_tokens,
        };
        // Sampling is not guaranteed reproducible server-side, so generation
        // is never retried.
        let resp: CompletionResponse = self.client.post("/v1/completions", &body, false)?;
        let text = resp
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| self.client.malformed("no choices in response"))?;
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyCompletion);
        }
        Ok(text)
    }
}
