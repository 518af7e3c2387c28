//! Dataset generation through a completion service: multiple-choice
//! questions (create four, keep the two most specific) and paraphrases.

use std::collections::{BTreeSet, HashSet};
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Chunk;
use crate::evaluation::{Question, OPTION_LABELS};
use crate::modelio::Completer;
use crate::{Error, Result};

pub const QUESTION_GEN_PROMPT: &str = include_str!("../assets/prompts/question_gen_v1.txt");
pub const QUESTION_SELECT_PROMPT: &str = include_str!("../assets/prompts/question_select_v1.txt");
pub const PARAPHRASE_PROMPT: &str = include_str!("../assets/prompts/paraphrase_v1.txt");
pub const PROMPT_VERSION: &str = "v1";

/// Candidates requested per chunk.
pub const CANDIDATES: usize = 4;
/// Candidates kept per chunk.
pub const SELECTED: usize = 2;
pub const OPTIONS: usize = 4;
/// Paraphrase attempts allowed per requested paraphrase.
pub const ATTEMPTS_PER_PARAPHRASE: usize = 3;
pub const DEFAULT_VALIDATION_COUNT: usize = 240;
pub const DEFAULT_VALIDATION_PER_CHUNK: usize = 2;

const TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    #[default]
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuestionSet {
    pub source_chunk: String,
    pub candidates: Vec<Question>,
    pub selected: Vec<String>,
    pub review_status: ReviewStatus,
}

impl GeneratedQuestionSet {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.len() != CANDIDATES {
            return Err(Error::invalid(format!(
                "candidate count {} ≠ {CANDIDATES}",
                self.candidates.len()
            )));
        }
        for q in &self.candidates {
            q.validate()?;
        }
        let distinct: BTreeSet<&String> = self.selected.iter().collect();
        if self.selected.len() != SELECTED || distinct.len() != SELECTED {
            return Err(Error::invalid(format!(
                "{}: expected {SELECTED} distinct selected questions",
                self.source_chunk
            )));
        }
        for id in &self.selected {
            if !self.candidates.iter().any(|q| &q.question_id == id) {
                return Err(Error::invalid(format!("selected `{id}` is not a candidate")));
            }
        }
        Ok(())
    }

    pub fn selected_questions(&self) -> impl Iterator<Item = &Question> {
        self.candidates
            .iter()
            .filter(|q| self.selected.contains(&q.question_id))
    }
}

#[derive(Debug, Deserialize)]
struct CandidatePayload {
    questions: Vec<CandidateItem>,
}

#[derive(Debug, Deserialize)]
struct CandidateItem {
    question: String,
    options: Vec<String>,
    correct: usize,
}

#[derive(Debug, Deserialize)]
struct SelectionPayload {
    selected: Vec<usize>,
}

#[derive(Debug, Deserialize)]
struct ParaphrasePayload {
    paraphrases: Vec<String>,
}

/// Parses the outermost JSON object in a response, tolerating surrounding
/// prose or code fences.
fn parse_payload<T: for<'de> Deserialize<'de>>(raw: &str) -> Result<T> {
    let payload_err = |reason: String| Error::Payload {
        reason,
        raw: raw.to_string(),
    };
    let start = raw.find('{').ok_or_else(|| payload_err("no JSON object".into()))?;
    let end = raw.rfind('}').ok_or_else(|| payload_err("no JSON object".into()))?;
    if end < start {
        return Err(payload_err("no JSON object".into()));
    }
    serde_json::from_str(&raw[start..=end]).map_err(|e| payload_err(e.to_string()))
}

fn candidate_block(qs: &[Question]) -> String {
    let mut out = String::new();
    for (i, q) in qs.iter().enumerate() {
        out.push_str(&format!("{i}. {}\n", q.stem));
        for (label, o) in OPTION_LABELS.iter().zip(&q.options) {
            out.push_str(&format!("   {label}. {o}\n"));
        }
    }
    out
}

pub fn question_prompt(chunk: &Chunk) -> String {
    format!("{QUESTION_GEN_PROMPT}{}\n", chunk.text)
}

pub fn selection_prompt(candidates: &[Question]) -> String {
    format!("{QUESTION_SELECT_PROMPT}{}", candidate_block(candidates))
}

pub fn paraphrase_prompt(text: &str, count: usize) -> String {
    let head = PARAPHRASE_PROMPT.replace("NUM_PARAPHRASES", &count.to_string());
    format!("{head}{text}\n")
}

/// Two-stage generation: four candidates, then the two most specific.
pub fn generate_questions(
    chunk: &Chunk,
    svc: &dyn Completer,
    seed: u64,
) -> Result<GeneratedQuestionSet> {
    let raw = svc.complete(&question_prompt(chunk), seed, TEMPERATURE)?;
    let payload: CandidatePayload = parse_payload(&raw)?;
    if payload.questions.len() != CANDIDATES {
        return Err(Error::Payload {
            reason: format!("candidate count {} ≠ {CANDIDATES}", payload.questions.len()),
            raw,
        });
    }
    let mut candidates = Vec::with_capacity(CANDIDATES);
    for (i, item) in payload.questions.into_iter().enumerate() {
        if item.options.len() != OPTIONS {
            return Err(Error::Payload {
                reason: format!("question {i} has {} options ≠ {OPTIONS}", item.options.len()),
                raw,
            });
        }
        let q = Question {
            question_id: format!("{}/q{i}", chunk.chunk_id),
            stem: item.question.trim().to_string(),
            options: item.options.iter().map(|o| o.trim().to_string()).collect(),
            correct_index: item.correct,
            topic: chunk.topic,
            source_chunk: Some(chunk.chunk_id.clone()),
        };
        if let Err(e) = q.validate() {
            return Err(Error::Payload {
                reason: e.to_string(),
                raw,
            });
        }
        candidates.push(q);
    }

    let raw = svc.complete(&selection_prompt(&candidates), seed, TEMPERATURE)?;
    let picked: SelectionPayload = parse_payload(&raw)?;
    let distinct: BTreeSet<usize> = picked.selected.iter().copied().collect();
    if picked.selected.len() != SELECTED
        || distinct.len() != SELECTED
        || distinct.iter().any(|&i| i >= CANDIDATES)
    {
        return Err(Error::Payload {
            reason: format!("selection must be {SELECTED} distinct indices below {CANDIDATES}"),
            raw,
        });
    }
    let set = GeneratedQuestionSet {
        source_chunk: chunk.chunk_id.clone(),
        selected: distinct
            .iter()
            .map(|&i| candidates[i].question_id.clone())
            .collect(),
        candidates,
        review_status: ReviewStatus::Pending,
    };
    set.validate()?;
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseSet {
    pub source_chunk: String,
    pub paraphrases: Vec<String>,
    pub seeds: Vec<u64>,
}

impl ParaphraseSet {
    pub fn validate(&self, original: Option<&str>) -> Result<()> {
        if self.paraphrases.len() != self.seeds.len() {
            return Err(Error::invalid(format!(
                "{}: {} paraphrases but {} seeds",
                self.source_chunk,
                self.paraphrases.len(),
                self.seeds.len()
            )));
        }
        let mut seen = HashSet::new();
        for p in &self.paraphrases {
            if !seen.insert(p.as_str()) {
                return Err(Error::invalid(format!("{}: repeated paraphrase", self.source_chunk)));
            }
            if original.is_some_and(|o| o.trim() == p.trim()) {
                return Err(Error::invalid(format!(
                    "{}: paraphrase equals the original",
                    self.source_chunk
                )));
            }
        }
        Ok(())
    }
}

/// Collects `n` distinct paraphrases, one call per seed starting at
/// `base_seed`, within `n * ATTEMPTS_PER_PARAPHRASE` calls.
pub fn generate_paraphrases(
    chunk: &Chunk,
    n: usize,
    svc: &dyn Completer,
    base_seed: u64,
) -> Result<ParaphraseSet> {
    if n == 0 {
        return Err(Error::invalid("paraphrase count must be positive"));
    }
    let prompt = paraphrase_prompt(&chunk.text, 1);
    let original = chunk.text.trim();
    let mut set = ParaphraseSet {
        source_chunk: chunk.chunk_id.clone(),
        paraphrases: Vec::with_capacity(n),
        seeds: Vec::with_capacity(n),
    };
    let budget = n * ATTEMPTS_PER_PARAPHRASE;
    for attempt in 0..budget as u64 {
        if set.paraphrases.len() == n {
            break;
        }
        let seed = base_seed.wrapping_add(attempt);
        let raw = svc.complete(&prompt, seed, TEMPERATURE)?;
        let payload: ParaphrasePayload = parse_payload(&raw)?;
        let Some(p) = payload
            .paraphrases
            .into_iter()
            .map(|p| p.trim().to_string())
            .find(|p| !p.is_empty())
        else {
            log::warn!("{}: seed {seed} returned no paraphrase", chunk.chunk_id);
            continue;
        };
        if p == original || set.paraphrases.contains(&p) {
            log::debug!("{}: seed {seed} repeated an earlier text", chunk.chunk_id);
            continue;
        }
        set.paraphrases.push(p);
        set.seeds.push(seed);
    }
    if set.paraphrases.len() < n {
        return Err(Error::invalid(format!(
            "{}: obtained {} of {n} distinct paraphrases after {budget} attempts",
            chunk.chunk_id,
            set.paraphrases.len()
        )));
    }
    Ok(set)
}

/// Seeded sample of `count` chunks without replacement, kept in corpus
/// order, each with `per_chunk` paraphrases.
pub fn make_validation_split(
    chunks: &[Chunk],
    count: usize,
    per_chunk: usize,
    svc: &dyn Completer,
    seed: u64,
) -> Result<Vec<ParaphraseSet>> {
    let picked = sample_chunks(chunks.len(), count, seed)?;
    picked
        .into_iter()
        .map(|i| generate_paraphrases(&chunks[i], per_chunk, svc, seed))
        .collect()
}

/// Sorted indices of a seeded uniform sample without replacement.
pub fn sample_chunks(len: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > len {
        return Err(Error::invalid(format!(
            "cannot sample {count} chunks from {len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, len, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Selected questions of approved sets, in set order.
pub fn export_approved(sets: &[GeneratedQuestionSet]) -> Vec<Question> {
    sets.iter()
        .filter(|s| s.review_status == ReviewStatus::Approved)
        .flat_map(|s| s.selected_questions().cloned())
        .collect()
}

/// Records a review decision for the set generated from `chunk_id`.
pub fn set_review(
    sets: &mut [GeneratedQuestionSet],
    chunk_id: &str,
    status: ReviewStatus,
) -> Result<()> {
    let set = sets
        .iter_mut()
        .find(|s| s.source_chunk == chunk_id)
        .ok_or_else(|| Error::UnknownChunk(chunk_id.to_string()))?;
    set.review_status = status;
    Ok(())
}

/// Runs `f` over `items` on up to `workers` threads; results keep input
/// order.
pub fn parallel_map<I, O, F>(items: &[I], workers: usize, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(usize, &I) -> O + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    let next = Mutex::new(0usize);
    let slots: Mutex<Vec<Option<O>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("index lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= items.len() {
                    break;
                }
                let out = f(i, &items[i]);
                slots.lock().expect("slot lock")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|o| o.expect("every slot filled"))
        .collect()
}
