use std::collections::HashMap;
use std::sync::Arc;

use super::config::EvalConfig;
use super::prompt::assemble_prompt;
use super::question::Question;
use crate::corpus::ChunkLookup;
use crate::modelio::{Embedder, ScoreRequest, Scorer, ServiceError};
use crate::retrieval::{embed_query, Embedding, RetrievalResult, VectorIndex};
use crate::{Error, Result, Scalar};

/// Index plus what is needed to query it.
pub struct Retriever<'a, T> {
    pub index: &'a VectorIndex<T>,
    pub embedder: &'a dyn Embedder,
    pub lookup: &'a dyn ChunkLookup,
    /// Prepended to question stems before embedding.
    pub query_prefix: String,
    pub normalize_query: bool,
}

impl<T: Scalar> Retriever<'_, T> {
    pub fn embed_stem(&self, stem: &str) -> Result<Embedding<T>> {
        embed_query(self.embedder, stem, &self.query_prefix, self.normalize_query)
    }
}

/// Everything an evaluation needs besides the config and the question.
pub struct EvalContext<'a, T> {
    pub scorers: HashMap<String, Arc<dyn Scorer>>,
    pub retriever: Option<Retriever<'a, T>>,
    /// Exemplar pool; the first `shots` of the question's topic are used.
    pub exemplars: &'a [Question],
    /// Precomputed stem embeddings by question id.
    pub query_cache: HashMap<String, Embedding<T>>,
}

impl<'a, T: Scalar> EvalContext<'a, T> {
    pub fn new(exemplars: &'a [Question]) -> Self {
        Self {
            scorers: HashMap::new(),
            retriever: None,
            exemplars,
            query_cache: HashMap::new(),
        }
    }

    pub fn with_scorer(mut self, name: impl Into<String>, scorer: Arc<dyn Scorer>) -> Self {
        self.scorers.insert(name.into(), scorer);
        self
    }

    pub fn with_retriever(mut self, retriever: Retriever<'a, T>) -> Self {
        self.retriever = Some(retriever);
        self
    }

    fn scorer(&self, name: &str) -> Result<&dyn Scorer> {
        self.scorers
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::invalid(format!("no scoring endpoint named `{name}`")))
    }

    /// Exemplars for `question`: the first `n` of its topic, excluding itself.
    pub fn shots_for(&self, question: &Question, n: usize) -> Result<Vec<Question>> {
        let picked: Vec<Question> = self
            .exemplars
            .iter()
            .filter(|e| e.topic == question.topic && e.question_id != question.question_id)
            .take(n)
            .cloned()
            .collect();
        if picked.len() < n {
            return Err(Error::invalid(format!(
                "{} exemplars available for topic {}, need {n}",
                picked.len(),
                question.topic
            )));
        }
        Ok(picked)
    }

    fn retrieve(&self, config: &EvalConfig, question: &Question) -> Result<RetrievalResult> {
        if !config.use_rag {
            return Ok(RetrievalResult::empty());
        }
        let r = self
            .retriever
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("config `{}` needs an index", config.id())))?;
        let owned;
        let query = match self.query_cache.get(&question.question_id) {
            Some(q) => q,
            None => {
                owned = r.embed_stem(&question.stem)?;
                &owned
            }
        };
        r.index.top_k(query, config.k)
    }

    fn lookup(&self) -> &dyn ChunkLookup {
        match &self.retriever {
            Some(r) => r.lookup,
            None => &NoChunks,
        }
    }
}

struct NoChunks;

impl ChunkLookup for NoChunks {
    fn chunk_text(&self, _: &str) -> Option<&str> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub chosen_index: usize,
    pub scores: Vec<f64>,
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some(b) if s <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Scores every option and picks the argmax.
pub fn answer_question<T: Scalar>(
    config: &EvalConfig,
    question: &Question,
    ctx: &EvalContext<'_, T>,
) -> Result<Answer> {
    let attach = |e: Error| match e {
        Error::Service(source) => Error::Question {
            question_id: question.question_id.clone(),
            source,
        },
        other => other,
    };
    let scorer = ctx.scorer(&config.endpoint)?;
    let shots = ctx.shots_for(question, config.shots)?;
    let hits = ctx.retrieve(config, question).map_err(attach)?;
    let prompt = assemble_prompt(question, &shots, &hits, ctx.lookup())?;
    let mut scores = Vec::with_capacity(prompt.continuations.len());
    for option in &prompt.continuations {
        let continuation = if config.leading_space {
            format!(" {option}")
        } else {
            option.clone()
        };
        let req = ScoreRequest::new(prompt.context.clone(), continuation)
            .and_then(|r| scorer.score(&r, config.score))
            .and_then(|s| {
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(ServiceError::InvalidRequest(format!("non-finite score {s}")))
                }
            });
        scores.push(req.map_err(|source| Error::Question {
            question_id: question.question_id.clone(),
            source,
        })?);
    }
    let chosen_index = argmax(&scores).expect("questions have at least two options");
    Ok(Answer {
        chosen_index,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::question::sample;
    use crate::modelio::mock::MockScorer;
    use crate::modelio::ScoreSpec;
    use proptest::prelude::*;

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[-5.2, -3.1, -7.0, -3.1]), Some(1));
        assert_eq!(argmax(&[-4.0, -3.0, -2.0, -1.0]), Some(3));
        assert_eq!(argmax(&[]), None);
    }

    struct Table(Vec<f64>);

    impl Scorer for Table {
        fn id(&self) -> &str {
            "table"
        }
        fn score(&self, req: &ScoreRequest, _: ScoreSpec) -> std::result::Result<f64, ServiceError> {
            let i = ["w", "x", "y", "z"]
                .iter()
                .position(|o| req.continuation.trim() == *o)
                .unwrap();
            Ok(self.0[i])
        }
    }

    #[test]
    fn answer_uses_scorer() {
        let q = sample("q", &["w", "x", "y", "z"], 1);
        let ctx = EvalContext::<f64>::new(&[])
            .with_scorer("m", Arc::new(Table(vec![-5.2, -3.1, -7.0, -3.1])));
        let cfg = EvalConfig::new(q.topic, "M", "m", "base");
        let a = answer_question(&cfg, &q, &ctx).unwrap();
        assert_eq!(a.chosen_index, 1);
        assert_eq!(a.scores, vec![-5.2, -3.1, -7.0, -3.1]);
    }

    #[test]
    fn missing_pieces_are_errors() {
        let q = sample("q", &["w", "x"], 0);
        let ctx = EvalContext::<f64>::new(&[]).with_scorer("m", Arc::new(MockScorer::new("m", 0)));
        let cfg = EvalConfig::new(q.topic, "M", "nope", "base");
        assert!(answer_question(&cfg, &q, &ctx).is_err());
        let rag = EvalConfig::new(q.topic, "M", "m", "base").with_rag(2);
        assert!(answer_question(&rag, &q, &ctx).is_err());
        let five = EvalConfig::new(q.topic, "M", "m", "base").with_shots(5);
        assert!(answer_question(&five, &q, &ctx).is_err());
    }

    proptest! {
        #[test]
        fn argmax_permutation_equivariant(
            scores in proptest::collection::hash_set(-1000i32..1000, 2..8),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let mut perm: Vec<usize> = (0..scores.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
            let a = argmax(&scores).unwrap();
            let b = argmax(&permuted).unwrap();
            prop_assert_eq!(perm[b], a);
        }
    }
}
