//! Clients for the external model capabilities: embedding, option scoring
//! and free-text completion.
//!
//! Each capability is a trait so the evaluation code can run against HTTP
//! services ([`http`]) or the deterministic in-process mocks ([`mock`]).
//! The wire contract for the HTTP clients is documented in
//! `docs/protocol.md`.

mod gate;
pub mod http;
pub mod mock;
mod retry;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use gate::{InflightGate, Permit};
pub use retry::RetryPolicy;

/// Prefix of the environment variables holding endpoint API keys.
pub const API_KEY_ENV_PREFIX: &str = "INJECTBENCH_API_KEY_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Embed,
    Score,
    Complete,
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Capability::Embed => "embed",
            Capability::Score => "score",
            Capability::Complete => "complete",
        })
    }
}

impl FromStr for Capability {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, ServiceError> {
        match s {
            "embed" => Ok(Capability::Embed),
            "score" => Ok(Capability::Score),
            "complete" => Ok(Capability::Complete),
            other => Err(ServiceError::InvalidRequest(format!(
                "unknown capability `{other}`"
            ))),
        }
    }
}

/// A named model service reachable over HTTP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelEndpoint {
    pub name: String,
    pub base_url: String,
    pub capability: Capability,
    /// Name of the environment variable holding the API key. Defaults to
    /// `INJECTBENCH_API_KEY_<NAME>` when unset.
    pub auth: Option<String>,
    /// Model id sent in request bodies; defaults to the endpoint name.
    pub model: Option<String>,
    pub timeout: Duration,
    pub max_inflight: usize,
}

impl ModelEndpoint {
    pub fn new(
        name: impl Into<String>,
        base_url: impl Into<String>,
        capability: Capability,
    ) -> Result<Self, ServiceError> {
        let name = name.into();
        let base_url = base_url.into();
        if name.is_empty() {
            return Err(ServiceError::InvalidRequest("endpoint name is empty".into()));
        }
        let parsed = url::Url::parse(&base_url).map_err(|e| {
            ServiceError::InvalidRequest(format!("endpoint `{name}`: bad url `{base_url}`: {e}"))
        })?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(ServiceError::InvalidRequest(format!(
                "endpoint `{name}`: unsupported scheme `{}`",
                parsed.scheme()
            )));
        }
        Ok(Self {
            name,
            base_url: base_url.trim_end_matches('/').to_string(),
            capability,
            auth: None,
            model: None,
            timeout: Duration::from_secs(60),
            max_inflight: 4,
        })
    }

    /// Parses `name=url:capability`, e.g. `bge=http://localhost:8080:embed`.
    pub fn parse_spec(spec: &str) -> Result<Self, ServiceError> {
        let bad = || {
            ServiceError::InvalidRequest(format!(
                "endpoint spec `{spec}` is not of the form name=url:capability"
            ))
        };
        let (name, rest) = spec.split_once('=').ok_or_else(bad)?;
        let (url, cap) = rest.rsplit_once(':').ok_or_else(bad)?;
        Self::new(name.trim(), url.trim(), cap.trim().parse()?)
    }

    pub fn with_max_inflight(mut self, n: usize) -> Self {
        self.max_inflight = n.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    /// Value of the `model` field in request bodies.
    pub fn model_id(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.name)
    }

    pub fn with_auth_env(mut self, var: impl Into<String>) -> Self {
        self.auth = Some(var.into());
        self
    }

    /// Environment variable consulted for the bearer token.
    pub fn auth_env_var(&self) -> String {
        self.auth.clone().unwrap_or_else(|| {
            let suffix: String = self
                .name
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() {
                        c.to_ascii_uppercase()
                    } else {
                        '_'
                    }
                })
                .collect();
            format!("{API_KEY_ENV_PREFIX}{suffix}")
        })
    }

    pub fn require(&self, capability: Capability) -> Result<(), ServiceError> {
        if self.capability == capability {
            Ok(())
        } else {
            Err(ServiceError::Capability {
                endpoint: self.name.clone(),
                expected: capability,
                actual: self.capability,
            })
        }
    }
}

/// Context plus the continuation whose likelihood is wanted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub context: String,
    pub continuation: String,
}

impl ScoreRequest {
    pub fn new(
        context: impl Into<String>,
        continuation: impl Into<String>,
    ) -> Result<Self, ServiceError> {
        let continuation = continuation.into();
        if continuation.is_empty() {
            return Err(ServiceError::EmptyContinuation);
        }
        Ok(Self {
            context: context.into(),
            continuation,
        })
    }
}

/// Which log-probability is returned for a scoring request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Sum of continuation token log-probs conditioned on the context.
    #[default]
    Continuation,
    /// Log-probability of the whole `context ∥ continuation` sequence.
    FullSequence,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Continuation => "continuation",
            ScoreMode::FullSequence => "full-sequence",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, ServiceError> {
        match s {
            "continuation" => Ok(ScoreMode::Continuation),
            "full-sequence" => Ok(ScoreMode::FullSequence),
            other => Err(ServiceError::InvalidRequest(format!(
                "unknown score mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub mode: ScoreMode,
    /// Divide by the number of scored tokens.
    #[serde(default)]
    pub per_token_mean: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("transport error calling `{endpoint}`: {message}")]
    Transport { endpoint: String, message: String },

    #[error("`{endpoint}` returned status {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },

    #[error("malformed response from `{endpoint}`: {reason}")]
    Malformed { endpoint: String, reason: String },

    #[error("embedding has dimension {actual}, expected {expected}")]
    Dimension { expected: usize, actual: usize },

    /// The context/continuation split does not fall on a token boundary.
    #[error("continuation starts inside token `{token}` at offset {token_offset} (boundary {boundary})")]
    TokenBoundary {
        boundary: usize,
        token_offset: usize,
        token: String,
    },

    #[error("continuation has no tokens")]
    EmptyContinuation,

    #[error("completion was empty")]
    EmptyCompletion,

    #[error("endpoint `{endpoint}` has capability {actual}, needed {expected}")]
    Capability {
        endpoint: String,
        expected: Capability,
        actual: Capability,
    },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    /// Failure attributed to one input of a batch.
    #[error("text {index}: {source}")]
    AtText {
        index: usize,
        #[source]
        source: Box<ServiceError>,
    },
}

impl ServiceError {
    /// Transport failures and 429/5xx statuses may succeed on retry.
    pub fn is_transient(&self) -> bool {
        match self {
            ServiceError::Transport { .. } => true,
            ServiceError::Status { status, .. } => *status == 429 || *status >= 500,
            ServiceError::AtText { source, .. } => source.is_transient(),
            _ => false,
        }
    }

    pub fn at_text(self, index: usize) -> Self {
        match self {
            e @ ServiceError::AtText { .. } => e,
            e => ServiceError::AtText {
                index,
                source: Box::new(e),
            },
        }
    }

    /// Index of the offending input, when known.
    pub fn text_index(&self) -> Option<usize> {
        match self {
            ServiceError::AtText { index, .. } => Some(*index),
            _ => None,
        }
    }
}

/// Maps texts to dense vectors.
pub trait Embedder: Send + Sync {
    /// Identifier recorded in built indexes.
    fn id(&self) -> &str;

    /// One vector per text, in input order, all of the same dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ServiceError>;
}

/// Returns log-probability scores for continuations.
pub trait Scorer: Send + Sync {
    fn id(&self) -> &str;

    fn score(&self, req: &ScoreRequest, spec: ScoreSpec) -> Result<f64, ServiceError>;
}

/// Generates free text.
pub trait Completer: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, prompt: &str, seed: u64, temperature: f64) -> Result<String, ServiceError>;
}

/// Checks that every vector has dimension `dim` (or the first vector's
/// dimension when `dim` is `None`) and that all components are finite.
pub fn check_embeddings(
    vectors: &[Vec<f64>],
    dim: Option<usize>,
) -> Result<usize, ServiceError> {
    let expected = dim.or_else(|| vectors.first().map(Vec::len)).unwrap_or(0);
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != expected || v.is_empty() {
            return Err(ServiceError::Dimension {
                expected,
                actual: v.len(),
            }
            .at_text(i));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ServiceError::InvalidRequest("non-finite embedding component".into()).at_text(i));
        }
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_spec_parsing() {
        let e = ModelEndpoint::parse_spec("bge=http://localhost:8080:embed").unwrap();
        assert_eq!(e.name, "bge");
        assert_eq!(e.base_url, "http://localhost:8080");
        assert_eq!(e.capability, Capability::Embed);
        assert!(ModelEndpoint::parse_spec("bge=http://localhost:8080").is_err());
        assert!(ModelEndpoint::parse_spec("x=notaurl:score").is_err());
        assert!(ModelEndpoint::parse_spec("x=http://h/v1/:frobnicate").is_err());
    }

    #[test]
    fn auth_env_name() {
        let e = ModelEndpoint::parse_spec("mistral-ft=http://h:1:score").unwrap();
        assert_eq!(e.auth_env_var(), "INJECTBENCH_API_KEY_MISTRAL_FT");
        assert_eq!(e.with_auth_env("MY_KEY").auth_env_var(), "MY_KEY");
    }

    #[test]
    fn capability_check() {
        let e = ModelEndpoint::parse_spec("m=http://h:1:score").unwrap();
        assert!(e.require(Capability::Score).is_ok());
        assert!(matches!(
            e.require(Capability::Embed),
            Err(ServiceError::Capability { .. })
        ));
    }

    #[test]
    fn empty_continuation_rejected() {
        assert!(matches!(
            ScoreRequest::new("Q", ""),
            Err(ServiceError::EmptyContinuation)
        ));
    }

    #[test]
    fn embedding_checks_report_index() {
        let e = check_embeddings(&[vec![1.0, 2.0], vec![1.0]], None).unwrap_err();
        assert_eq!(e.text_index(), Some(1));
        let e = check_embeddings(&[vec![1.0, f64::NAN]], Some(2)).unwrap_err();
        assert_eq!(e.text_index(), Some(0));
        assert_eq!(check_embeddings(&[], Some(3)).unwrap(), 3);
    }
}
