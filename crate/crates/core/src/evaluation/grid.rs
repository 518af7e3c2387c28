//! Experiment grid runner with per-config journals.
//!
//! A journal is a line-delimited file: an optional artifact header, one
//! `{"config": ...}` record, then one row per question in question order.
//! Rows are appended as soon as every earlier question has finished, so the
//! file is identical regardless of how many workers ran.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};

use serde::{Deserialize, Serialize};

use super::answer::{answer_question, EvalContext};
use super::config::EvalConfig;
use super::metrics::KnowledgeScore;
use super::question::{validate_questions, Question};
use crate::artifact::ArtifactHeader;
use crate::retrieval::Embedding;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_id: String,
    pub question_id: String,
    pub correct_index: usize,
    pub chosen_index: Option<usize>,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_correct(&self) -> bool {
        self.chosen_index == Some(self.correct_index)
    }

    pub fn is_answered(&self) -> bool {
        self.chosen_index.is_some()
    }
}

/// Accuracy over the answered rows of one config.
pub fn knowledge_score(rows: &[ResultRow]) -> Result<KnowledgeScore> {
    KnowledgeScore::from_outcomes(rows.iter().filter(|r| r.is_answered()).map(ResultRow::is_correct))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub configs: Vec<EvalConfig>,
    pub rows: Vec<ResultRow>,
    /// Config id → score over answered questions.
    pub aggregates: BTreeMap<String, KnowledgeScore>,
    /// Config id → number of failed questions.
    pub failures: BTreeMap<String, usize>,
}

impl ResultTable {
    /// Rebuilds aggregates from rows.
    pub fn from_parts(configs: Vec<EvalConfig>, rows: Vec<ResultRow>) -> Self {
        let mut by_config: BTreeMap<String, Vec<ResultRow>> = BTreeMap::new();
        for r in &rows {
            by_config.entry(r.config_id.clone()).or_default().push(r.clone());
        }
        let mut aggregates = BTreeMap::new();
        let mut failures = BTreeMap::new();
        for (id, rs) in &by_config {
            if let Ok(s) = knowledge_score(rs) {
                aggregates.insert(id.clone(), s);
            }
            let failed = rs.iter().filter(|r| !r.is_answered()).count();
            if failed > 0 {
                failures.insert(id.clone(), failed);
            }
        }
        Self {
            configs,
            rows,
            aggregates,
            failures,
        }
    }

    pub fn from_journals(journals: Vec<JournalFile>) -> Self {
        let mut configs = Vec::new();
        let mut rows = Vec::new();
        for j in journals {
            configs.push(j.config);
            rows.extend(j.rows);
        }
        Self::from_parts(configs, rows)
    }

    pub fn total_failures(&self) -> usize {
        self.failures.values().sum()
    }

    pub fn rows_for<'a>(&'a self, config_id: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.config_id == config_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalFile {
    pub header: Option<ArtifactHeader>,
    pub config: EvalConfig,
    pub rows: Vec<ResultRow>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JournalLine {
    Header { header: ArtifactHeader },
    Config { config: EvalConfig },
    Row(ResultRow),
}

pub fn journal_path(dir: &Path, config: &EvalConfig) -> PathBuf {
    dir.join(format!("{}.jsonl", config.id()))
}

pub fn read_journal(path: &Path) -> Result<JournalFile> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut config = None;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JournalLine = serde_json::from_str(&line).map_err(|source| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        match parsed {
            JournalLine::Header { header: h } => header = Some(h),
            JournalLine::Config { config: c } => config = Some(c),
            JournalLine::Row(r) => rows.push(r),
        }
    }
    let config = config.ok_or_else(|| {
        Error::invalid(format!("{}: journal has no config record", path.display()))
    })?;
    if let Some(r) = rows.iter().find(|r| r.config_id != config.id()) {
        return Err(Error::invalid(format!(
            "{}: row for `{}` in journal of `{}`",
            path.display(),
            r.config_id,
            config.id()
        )));
    }
    Ok(JournalFile {
        header,
        config,
        rows,
    })
}

/// Reads every `*.jsonl` journal in `dir`, sorted by file name.
pub fn read_journal_dir(dir: &Path) -> Result<Vec<JournalFile>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_journal(p)).collect()
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    /// Concurrent questions per config.
    pub workers: usize,
    /// Where per-config journals are written; `None` keeps results in memory.
    pub journal_dir: Option<PathBuf>,
    pub header: Option<ArtifactHeader>,
    /// Skip questions already answered in an existing journal.
    pub resume: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            journal_dir: None,
            header: None,
            resume: false,
        }
    }
}

struct JournalWriter {
    file: Option<(PathBuf, fs::File)>,
}

impl JournalWriter {
    fn open(
        dir: Option<&Path>,
        config: &EvalConfig,
        header: Option<&ArtifactHeader>,
        append: bool,
    ) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self { file: None });
        };
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = journal_path(dir, config);
        let exists = append && path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(exists)
            .truncate(!exists)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if !exists {
            #[derive(Serialize)]
            struct ConfigLine<'a> {
                config: &'a EvalConfig,
            }
            let mut head = String::new();
            if let Some(h) = header {
                head.push_str(&h.json_line());
                head.push('\n');
            }
            head.push_str(&serde_json::to_string(&ConfigLine { config }).expect("config serializes"));
            head.push('\n');
            file.write_all(head.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(Self {
            file: Some((path, file)),
        })
    }

    fn write(&mut self, row: &ResultRow) -> Result<()> {
        if let Some((path, f)) = &mut self.file {
            let mut line = serde_json::to_string(row).expect("row serializes");
            line.push('\n');
            f.write_all(line.as_bytes()).map_err(|e| Error::io(&*path, e))?;
        }
        Ok(())
    }
}

fn check_grid<T: Scalar>(
    questions: &[Question],
    configs: &[EvalConfig],
    ctx: &EvalContext<'_, T>,
) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::invalid("grid has no configs"));
    }
    validate_questions(questions)?;
    let mut ids = HashSet::new();
    for c in configs {
        c.validate()?;
        if !ids.insert(c.id()) {
            return Err(Error::invalid(format!("duplicate config `{}`", c.id())));
        }
        if !ctx.scorers.contains_key(&c.endpoint) {
            return Err(Error::invalid(format!(
                "config `{}` needs scoring endpoint `{}`",
                c.id(),
                c.endpoint
            )));
        }
        if c.use_rag && ctx.retriever.is_none() {
            return Err(Error::invalid(format!("config `{}` needs an index", c.id())));
        }
        if c.shots > 0 {
            for q in questions {
                ctx.shots_for(q, c.shots)?;
            }
        }
    }
    Ok(())
}

/// Embeds every question stem once, in parallel, keyed by question id.
fn warm_query_cache<T: Scalar>(
    questions: &[Question],
    ctx: &EvalContext<'_, T>,
    workers: usize,
) -> HashMap<String, Embedding<T>> {
    let Some(r) = &ctx.retriever else {
        return HashMap::new();
    };
    let next = AtomicUsize::new(0);
    let out = Mutex::new(HashMap::new());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, questions.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(q) = questions.get(i) else { break };
                // failures surface per question during answering
                if let Ok(e) = r.embed_stem(&q.stem) {
                    out.lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .insert(q.question_id.clone(), e);
                }
            });
        }
    });
    out.into_inner().unwrap_or_else(|e| e.into_inner())
}

/// Evaluates every question under every config.
///
/// Per-question failures become rows with an `error` and no choice; the
/// grid carries on with the remaining questions.
pub fn run_grid<T: Scalar>(
    questions: &[Question],
    configs: &[EvalConfig],
    ctx: &mut EvalContext<'_, T>,
    opts: &GridOptions,
) -> Result<ResultTable> {
    check_grid(questions, configs, ctx)?;
    let workers = opts.workers.max(1);
    if configs.iter().any(|c| c.use_rag) {
        let cache = warm_query_cache(questions, ctx, workers);
        ctx.query_cache.extend(cache);
    }
    let ctx: &EvalContext<'_, T> = ctx;

    let mut all_rows = Vec::new();
    for config in configs {
        let config_id = config.id();
        let mut done: HashMap<String, ResultRow> = HashMap::new();
        if opts.resume {
            if let Some(dir) = &opts.journal_dir {
                let path = journal_path(dir, config);
                if path.exists() {
                    for r in read_journal(&path)?.rows {
                        if r.is_answered() {
                            done.insert(r.question_id.clone(), r);
                        }
                    }
                }
            }
        }
        let pending: Vec<&Question> = questions
            .iter()
            .filter(|q| !done.contains_key(&q.question_id))
            .collect();
        let mut writer =
            JournalWriter::open(opts.journal_dir.as_deref(), config, opts.header.as_ref(), opts.resume)?;

        let mut fresh: Vec<Option<ResultRow>> = vec![None; pending.len()];
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
        let write_result: Result<()> = std::thread::scope(|s| {
            for _ in 0..workers.min(pending.len().max(1)) {
                let tx = tx.clone();
                let next = &next;
                let pending = &pending;
                let config_id = &config_id;
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(q) = pending.get(i) else { break };
                    let row = match answer_question(config, q, ctx) {
                        Ok(a) => ResultRow {
                            config_id: config_id.clone(),
                            question_id: q.question_id.clone(),
                            correct_index: q.correct_index,
                            chosen_index: Some(a.chosen_index),
                            scores: a.scores,
                            error: None,
                        },
                        Err(e) => {
                            log::warn!("{config_id}: {e}");
                            ResultRow {
                                config_id: config_id.clone(),
                                question_id: q.question_id.clone(),
                                correct_index: q.correct_index,
                                chosen_index: None,
                                scores: Vec::new(),
                                error: Some(e.to_string()),
                            }
                        }
                    };
                    if tx.send((i, row)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            // Single consumer: flush rows in question order as the prefix completes.
            let mut next_to_write = 0;
            for (i, row) in rx {
                fresh[i] = Some(row);
                while let Some(Some(r)) = fresh.get(next_to_write) {
                    writer.write(r)?;
                    next_to_write += 1;
                }
            }
            Ok(())
        });
        write_result?;

        let mut fresh = fresh.into_iter().map(|r| r.expect("every question answered"));
        for q in questions {
            match done.remove(&q.question_id) {
                Some(r) => all_rows.push(r),
                None => all_rows.push(fresh.next().expect("pending rows in order")),
            }
        }
    }
    Ok(ResultTable::from_parts(configs.to_vec(), all_rows))
}
