use serde::{Deserialize, Serialize};

use crate::corpus::Topic;
use crate::modelio::{ScoreMode, ScoreSpec};
use crate::{Error, Result};

/// Largest number of retrieved documents in the grid.
pub const MAX_K: usize = 5;
/// Allowed exemplar counts.
pub const SHOT_COUNTS: [usize; 2] = [0, 5];

fn default_true() -> bool {
    true
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalConfig {
    pub task: Topic,
    /// Display name of the model family, e.g. `Mistral 7B`.
    pub model: String,
    /// Name of the scoring endpoint serving this model variant.
    pub endpoint: String,
    /// Injection variant: `base`, `FT`, `FT-reg`, `FT-par`, ...
    pub variant: String,
    pub use_rag: bool,
    pub k: usize,
    pub shots: usize,
    #[serde(default)]
    pub score: ScoreSpec,
    /// Prefix each continuation with a single space.
    #[serde(default = "default_true")]
    pub leading_space: bool,
}

impl EvalConfig {
    pub fn new(
        task: Topic,
        model: impl Into<String>,
        endpoint: impl Into<String>,
        variant: impl Into<String>,
    ) -> Self {
        Self {
            task,
            model: model.into(),
            endpoint: endpoint.into(),
            variant: variant.into(),
            use_rag: false,
            k: 0,
            shots: 0,
            score: ScoreSpec::default(),
            leading_space: true,
        }
    }

    /// Enables retrieval with `k` documents; `k = 0` disables it.
    pub fn with_rag(mut self, k: usize) -> Self {
        self.use_rag = k > 0;
        self.k = k;
        self
    }

    pub fn with_shots(mut self, shots: usize) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_score(mut self, score: ScoreSpec) -> Self {
        self.score = score;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.is_empty() || self.endpoint.is_empty() || self.variant.is_empty() {
            return Err(Error::invalid("config needs model, endpoint and variant"));
        }
        if self.use_rag && !(1..=MAX_K).contains(&self.k) {
            return Err(Error::invalid(format!(
                "config `{}`: K must be in 1..={MAX_K} with retrieval, got {}",
                self.id(),
                self.k
            )));
        }
        if !self.use_rag && self.k != 0 {
            return Err(Error::invalid(format!(
                "config `{}`: K = {} without retrieval",
                self.id(),
                self.k
            )));
        }
        if !SHOT_COUNTS.contains(&self.shots) {
            return Err(Error::invalid(format!(
                "config `{}`: shots must be 0 or 5, got {}",
                self.id(),
                self.shots
            )));
        }
        Ok(())
    }

    /// Stable identifier, safe as a file name.
    pub fn id(&self) -> String {
        let rag = if self.use_rag {
            format!("rag-k{}", self.k)
        } else {
            "norag".to_string()
        };
        let mode = match self.score.mode {
            ScoreMode::Continuation => "cont",
            ScoreMode::FullSequence => "full",
        };
        let mean = if self.score.per_token_mean { "-mean" } else { "" };
        let space = if self.leading_space { "" } else { "-nospace" };
        let raw = format!(
            "{}.{}.{}.{}.{}shot.{mode}{mean}{space}",
            self.task.slug(),
            self.endpoint,
            self.variant,
            rag,
            self.shots
        );
        raw.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }

    /// Column heading in the approach tables.
    pub fn approach_label(&self) -> String {
        let base = match self.variant.as_str() {
            "base" => "Base model",
            "FT" => "Fine-tuned",
            other => other,
        };
        if self.use_rag {
            format!("{base} + RAG")
        } else {
            base.to_string()
        }
    }

    /// Row heading: task with shot count.
    pub fn task_label(&self) -> String {
        format!("{} ({}-shot)", self.task.display_name(), self.shots)
    }
}

/// Copies of `base` for each K; `K = 0` is the no-retrieval cell.
pub fn ablation_configs(base: &EvalConfig, ks: &[usize]) -> Vec<EvalConfig> {
    ks.iter().map(|&k| base.clone().with_rag(k)).collect()
}
