//! Deterministic in-process backends.
//!
//! Outputs are pure functions of the inputs and a seed; no network, clock or
//! global state is consulted. Each mock can be fitted with an
//! [`InflightGate`] and an artificial delay so tests can observe concurrency.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::{
    Completer, Embedder, InflightGate, ScoreMode, ScoreRequest, ScoreSpec, Scorer, ServiceError,
};

/// 64-bit digest of a sequence of byte strings, each length-prefixed.
pub(crate) fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn words(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+").expect("static regex"))
        .find_iter(text)
        .map(|m| m.as_str().to_lowercase())
        .collect()
}

#[derive(Clone, Default)]
struct Instrument {
    gate: Option<Arc<InflightGate>>,
    delay: Duration,
}

impl Instrument {
    fn enter(&self) -> Option<super::Permit<'_>> {
        let permit = self.gate.as_deref().map(InflightGate::acquire);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        permit
    }
}

/// Feature-hashing embedder: each word adds ±1 to a seeded bucket, and the
/// result is scaled to unit length. Texts sharing words therefore have
/// positive dot products.
#[derive(Clone)]
pub struct MockEmbedder {
    id: String,
    dim: usize,
    seed: u64,
    instrument: Instrument,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            id: format!("mock-embed-d{dim}-s{seed}"),
            dim: dim.max(1),
            seed,
            instrument: Instrument::default(),
        }
    }

    pub fn with_gate(mut self, gate: Arc<InflightGate>, delay: Duration) -> Self {
        self.instrument = Instrument {
            gate: Some(gate),
            delay,
        };
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let seed = self.seed.to_le_bytes();
        let mut v = vec![0.0f64; self.dim];
        let ws = words(text);
        if ws.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[&seed, text.as_bytes()]));
            for x in &mut v {
                *x = rng.gen_range(-1.0..1.0);
            }
        } else {
            for w in &ws {
                let h = stable_hash(&[&seed, w.as_bytes()]);
                let bucket = (h % self.dim as u64) as usize;
                let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
                v[bucket] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        } else {
            v[0] = 1.0;
        }
        v
    }
}

impl Embedder for MockEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ServiceError> {
        let _permit = self.instrument.enter();
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if t.is_empty() {
                    Err(ServiceError::InvalidRequest("empty text".into()).at_text(i))
                } else {
                    Ok(self.embed_one(t))
                }
            })
            .collect()
    }
}

/// Scorer returning tabulated values, with a seeded fallback.
///
/// The fallback rewards continuation words that occur repeatedly in the
/// context, so retrieved passages containing the answer raise its score.
#[derive(Clone)]
pub struct MockScorer {
    id: String,
    seed: u64,
    table: HashMap<(String, String), f64>,
    instrument: Instrument,
}

impl MockScorer {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        Self {
            id: id.into(),
            seed,
            table: HashMap::new(),
            instrument: Instrument::default(),
        }
    }

    pub fn with_entry(
        mut self,
        context: impl Into<String>,
        continuation: impl Into<String>,
        score: f64,
    ) -> Self {
        self.table.insert((context.into(), continuation.into()), score);
        self
    }

    pub fn with_gate(mut self, gate: Arc<InflightGate>, delay: Duration) -> Self {
        self.instrument = Instrument {
            gate: Some(gate),
            delay,
        };
        self
    }

    fn fallback(&self, req: &ScoreRequest, spec: ScoreSpec) -> Result<f64, ServiceError> {
        let cont = words(&req.continuation);
        if cont.is_empty() {
            return Err(ServiceError::EmptyContinuation);
        }
        let ctx = words(&req.context);
        let mut counts: HashMap<&str, u32> = HashMap::new();
        for w in &ctx {
            *counts.entry(w.as_str()).or_default() += 1;
        }
        let support: f64 = cont
            .iter()
            .map(|w| f64::from(counts.get(w.as_str()).copied().unwrap_or(0).min(4)))
            .sum::<f64>()
            / cont.len() as f64;
        let h = stable_hash(&[
            &self.seed.to_le_bytes(),
            self.id.as_bytes(),
            req.context.as_bytes(),
            req.continuation.as_bytes(),
        ]);
        let noise = (h >> 11) as f64 / (1u64 << 53) as f64 * 4.0;
        let mut score = -0.5 * cont.len() as f64 - noise + 2.0 * support;
        if spec.mode == ScoreMode::FullSequence {
            score -= 0.05 * ctx.len() as f64;
        }
        if spec.per_token_mean {
            let n = match spec.mode {
                ScoreMode::Continuation => cont.len(),
                ScoreMode::FullSequence => cont.len() + ctx.len(),
            };
            score /= n as f64;
        }
        Ok(score)
    }
}

impl Scorer for MockScorer {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, req: &ScoreRequest, spec: ScoreSpec) -> Result<f64, ServiceError> {
        let _permit = self.instrument.enter();
        if let Some(&v) = self
            .table
            .get(&(req.context.clone(), req.continuation.clone()))
        {
            return Ok(v);
        }
        self.fallback(req, spec)
    }
}

/// Completion mock that recognizes the harness's own prompt assets and
/// answers with well-formed payloads for them.
#[derive(Clone)]
pub struct MockCompleter {
    id: String,
}

impl Default for MockCompleter {
    fn default() -> Self {
        Self::new("mock-complete")
    }
}

const PARAPHRASE_OPENERS: &[&str] = &[
    "In other words,",
    "Put differently,",
    "To restate it,",
    "Said another way,",
    "Rephrased,",
    "Expressed differently,",
    "In summary,",
    "Stated plainly,",
    "Simply put,",
    "To put it another way,",
    "Reworded,",
    "Briefly,",
];

const DISTRACTOR_POOL: &[&str] = &[
    "basalt", "meridian", "lattice", "quorum", "cobalt", "estuary", "fulcrum", "granite",
];

impl MockCompleter {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }

    fn rng(&self, prompt: &str, seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stable_hash(&[
            self.id.as_bytes(),
            &seed.to_le_bytes(),
            prompt.as_bytes(),
        ]))
    }

    fn paraphrases(&self, prompt: &str, seed: u64) -> String {
        static NUM: OnceLock<Regex> = OnceLock::new();
        let n: usize = NUM
            .get_or_init(|| Regex::new(r"Give (\d+) different paraphrases").expect("static regex"))
            .captures(prompt)
            .and_then(|c| c[1].parse().ok())
            .unwrap_or(1);
        let text = after_marker(prompt, "Input paragraph:");
        let sentences: Vec<&str> = text
            .split_inclusive(". ")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let mut rng = self.rng(prompt, seed);
        let items: Vec<String> = (0..n)
            .map(|_| {
                let opener = PARAPHRASE_OPENERS.choose(&mut rng).copied().unwrap_or("So,");
                let mut order = sentences.clone();
                if !order.is_empty() {
                    let r = rng.gen_range(0..order.len());
                    order.rotate_left(r);
                }
                let tag: u16 = rng.gen_range(0..1000);
                format!("{opener} {} [v{tag}]", order.join(" "))
            })
            .collect();
        serde_json::json!({ "paraphrases": items }).to_string()
    }

    fn questions(&self, prompt: &str, seed: u64) -> String {
        let passage = after_marker(prompt, "INPUT PASSAGE:");
        let mut vocab: Vec<String> = Vec::new();
        for w in words(passage) {
            if w.len() >= 4 && w.chars().all(char::is_alphabetic) && !vocab.contains(&w) {
                vocab.push(w);
            }
        }
        for d in DISTRACTOR_POOL {
            if vocab.len() >= 8 {
                break;
            }
            if !vocab.iter().any(|v| v == d) {
                vocab.push((*d).to_string());
            }
        }
        let mut rng = self.rng(prompt, seed);
        let questions: Vec<serde_json::Value> = (0..4)
            .map(|_| {
                let mut picks: Vec<&String> = vocab.choose_multiple(&mut rng, 4).collect();
                picks.shuffle(&mut rng);
                let correct = rng.gen_range(0..4);
                let answer = picks[correct];
                let sentence = passage
                    .split(". ")
                    .find(|s| s.to_lowercase().contains(answer.as_str()))
                    .unwrap_or(passage);
                let blanked = blank_word(sentence, answer);
                serde_json::json!({
                    "question": format!("Which word completes the statement: \"{blanked}\"?"),
                    "options": picks,
                    "correct": correct,
                })
            })
            .collect();
        serde_json::json!({ "questions": questions }).to_string()
    }

    fn selection(&self, prompt: &str, seed: u64) -> String {
        let mut rng = self.rng(prompt, seed);
        let mut idx: Vec<usize> = (0..4).collect();
        idx.shuffle(&mut rng);
        let picked: BTreeSet<usize> = idx.into_iter().take(2).collect();
        serde_json::json!({ "selected": picked }).to_string()
    }
}

fn after_marker<'a>(prompt: &'a str, marker: &str) -> &'a str {
    prompt
        .rfind(marker)
        .map(|i| prompt[i + marker.len()..].trim())
        .unwrap_or("")
}

fn blank_word(sentence: &str, word: &str) -> String {
    let lower = sentence.to_lowercase();
    let out = match lower.find(word) {
        Some(i) if sentence.is_char_boundary(i) && sentence.is_char_boundary(i + word.len()) => {
            format!("{}____{}", &sentence[..i], &sentence[i + word.len()..])
        }
        _ => sentence.to_string(),
    };
    out.chars().take(240).collect()
}

impl Completer for MockCompleter {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, seed: u64, temperature: f64) -> Result<String, ServiceError> {
        if !(temperature >= 0.0) {
            return Err(ServiceError::InvalidRequest(format!(
                "temperature {temperature} is negative"
            )));
        }
        let out = if prompt.contains("CANDIDATE QUESTIONS:") {
            self.selection(prompt, seed)
        } else if prompt.contains("INPUT PASSAGE:") {
            self.questions(prompt, seed)
        } else if prompt.contains("Input paragraph:") {
            self.paraphrases(prompt, seed)
        } else {
            let h = stable_hash(&[self.id.as_bytes(), &seed.to_le_bytes(), prompt.as_bytes()]);
            format!("mock completion {h:016x}")
        };
        Ok(out)
    }
}
