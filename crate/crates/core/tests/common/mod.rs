//! Fixture loading shared by the core integration tests and the CLI
//! acceptance suite.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use injectbench_core::corpus::Topic;
use injectbench_core::evaluation::{EvalConfig, JournalFile, KnowledgeScore, Question, ResultRow};
use injectbench_core::retrieval::{Hit, RetrievalResult};
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    // Both crates live side by side under `crates/`.
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .join("core/tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[derive(Debug, Deserialize)]
pub struct Doc {
    pub chunk_id: String,
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct PromptCase {
    pub question: Question,
    pub exemplars: Vec<Question>,
    pub documents: Vec<Doc>,
}

impl PromptCase {
    pub fn load() -> Self {
        serde_json::from_str(&read_fixture("prompt_case.json")).unwrap()
    }

    pub fn lookup(&self) -> HashMap<String, String> {
        self.documents
            .iter()
            .map(|d| (d.chunk_id.clone(), d.text.clone()))
            .collect()
    }

    /// The first `k` documents as retrieval hits, best first.
    pub fn hits(&self, k: usize) -> RetrievalResult {
        RetrievalResult {
            hits: self.documents[..k]
                .iter()
                .enumerate()
                .map(|(i, d)| Hit {
                    chunk_id: d.chunk_id.clone(),
                    score: 1.0 - i as f64 * 0.1,
                })
                .collect(),
            k,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ArgmaxCase {
    pub scores: Vec<Vec<f64>>,
    pub expected: Vec<usize>,
    pub tie_rows: Vec<usize>,
}

pub fn argmax_case() -> ArgmaxCase {
    serde_json::from_str(&read_fixture("argmax.json")).unwrap()
}

/// One cell of a published results table.
#[derive(Debug, Clone)]
pub struct Cell {
    pub task: Topic,
    pub shots: usize,
    pub model: String,
    pub column: String,
    pub value: String,
}

/// `Anatomy (5-shot)` to its topic and shot count.
pub fn parse_task(label: &str) -> (Topic, usize) {
    let (name, rest) = label.split_once(" (").unwrap();
    let shots = rest.trim_end_matches("-shot)").parse().unwrap();
    let topic = Topic::ALL
        .into_iter()
        .find(|t| t.display_name() == name)
        .unwrap_or_else(|| panic!("unknown task {name}"));
    (topic, shots)
}

/// Cells of `approach_scores.csv` (task, model, four approach columns).
pub fn approach_cells() -> Vec<Cell> {
    let text = read_fixture("approach_scores.csv");
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut out = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (task, shots) = parse_task(f[0]);
        for (col, v) in head[2..].iter().zip(&f[2..]) {
            out.push(Cell {
                task,
                shots,
                model: f[1].to_string(),
                column: col.to_string(),
                value: v.to_string(),
            });
        }
    }
    out
}

/// Cells of `paraphrase_scores.csv` (current events, 0-shot).
pub fn paraphrase_cells() -> Vec<Cell> {
    let text = read_fixture("paraphrase_scores.csv");
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut out = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        for (col, v) in head[1..].iter().zip(&f[1..]) {
            out.push(Cell {
                task: Topic::CurrentEvents,
                shots: 0,
                model: f[0].to_string(),
                column: col.to_string(),
                value: v.to_string(),
            });
        }
    }
    out
}

/// Column label to (variant, uses retrieval).
fn column_variant(column: &str) -> (String, bool) {
    let (base, rag) = match column.strip_suffix(" + RAG") {
        Some(b) => (b, true),
        None => (column, false),
    };
    let variant = match base {
        "Base model" => "base",
        "Fine-tuned" => "FT",
        other => other,
    };
    (variant.to_string(), rag)
}

/// A journal per cell whose rows reproduce the cell's score exactly.
pub fn journals_for(cells: &[Cell]) -> Vec<JournalFile> {
    cells
        .iter()
        .map(|c| {
            let score = KnowledgeScore::from_str(&c.value).unwrap();
            let (variant, rag) = column_variant(&c.column);
            let endpoint = format!("{}-{}", c.model.replace(' ', "-").to_lowercase(), variant);
            let config = EvalConfig::new(c.task, &c.model, endpoint, variant)
                .with_rag(if rag { 3 } else { 0 })
                .with_shots(c.shots);
            let rows = (0..score.total())
                .map(|i| ResultRow {
                    config_id: config.id(),
                    question_id: format!("q{i}"),
                    correct_index: 0,
                    chosen_index: Some(if i < score.correct() { 0 } else { 1 }),
                    scores: vec![],
                    error: None,
                })
                .collect();
            JournalFile {
                header: None,
                config,
                rows,
            }
        })
        .collect()
}

pub fn model_order(cells: &[Cell]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in cells {
        if !out.contains(&c.model) {
            out.push(c.model.clone());
        }
    }
    out
}

/// Column means of relative gain per model, from the published table.
/// Computed by a script that does not use the library.
pub const APPROACH_MEAN_GAINS: [(&str, [f64; 3]); 3] = [
    ("Mistral 7B", [0.105414803713, 0.026052063289, 0.088110895178]),
    ("Llama2 7B", [0.143481925080, 0.069904408322, 0.155676795143]),
    ("Orca2 7B", [0.109727061116, 0.002217966561, 0.071006230218]),
];

/// A randomized retrieval case: vectors, query and K.
pub struct RetrievalCase {
    pub vectors: Vec<Vec<f64>>,
    pub query: Vec<f64>,
    pub k: usize,
}

/// Seeded corpus with N ≤ 1000, dim ≤ 128, K ≤ 10. Odd seeds draw small
/// integers so equal scores are common; every fourth seed also repeats
/// vectors verbatim.
pub fn retrieval_case(seed: u64) -> RetrievalCase {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=1000);
    let dim = rng.gen_range(1..=128);
    let k = rng.gen_range(1..=10);
    let ties = seed % 2 == 1;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..dim)
            .map(|_| {
                if ties {
                    f64::from(rng.gen_range(-2i32..=2))
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect()
    };
    let mut vectors: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng)).collect();
    if seed % 4 == 0 && n > 1 {
        for i in 0..n / 3 {
            let src = rng.gen_range(0..n);
            vectors[i * 3 % n] = vectors[src].clone();
        }
    }
    let query = draw(&mut rng);
    RetrievalCase { vectors, query, k }
}

/// Brute-force scan and full sort: score descending, then position.
pub fn oracle_top_k(vectors: &[Vec<f64>], query: &[f64], k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut s = 0.0;
            for (a, b) in v.iter().zip(query) {
                s += a * b;
            }
            (s, i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}
