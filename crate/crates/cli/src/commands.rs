//! Subcommand implementations. Inputs are read from the manifest or from
//! earlier stages under the output root; everything written goes under it.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use injectbench_core::artifact::{read_jsonl, write_jsonl, ArtifactHeader};
use injectbench_core::corpus::{
    filter_small, Chunk, Cleaner, CorpusStore, RawArticle, Tokenizer, Topic, WordPunctTokenizer,
    DEFAULT_MIN_TOKENS,
};
use injectbench_core::datagen::{
    self, export_approved, parallel_map, GeneratedQuestionSet, ParaphraseSet, ReviewStatus,
};
use injectbench_core::evaluation::{
    ablation_configs, read_journal_dir, run_grid, EvalConfig, EvalContext, GridOptions, Question,
    Retriever, MAX_K,
};
use injectbench_core::ftprep::{self, TrainParams};
use injectbench_core::modelio::{Embedder, ModelEndpoint, ScoreMode, ScoreSpec};
use injectbench_core::report::{self, ColumnKey, Format};
use injectbench_core::retrieval::{build_index, dump, read_index, write_index, BuildOptions};
use injectbench_core::VectorIndex;
use serde::{Deserialize, Serialize};

use crate::manifest::{self, Loaded, ModelConfig};
use crate::services::{Services, DEFAULT_MOCK_DIM};
use crate::{Cli, Command, ScoringArgs, ServiceFailure};

const CHUNKS: &str = "corpus/chunks.jsonl";
const INDEX: &str = "index/index.ibvx";
const INDEX_META: &str = "index/index.meta.json";
const QUESTION_SETS: &str = "datagen/question_sets.jsonl";
const QUESTION_FAILURES: &str = "datagen/question_failures.jsonl";
const REVIEWS: &str = "datagen/reviews.jsonl";
const QUESTIONS: &str = "datagen/questions.jsonl";
const PARAPHRASES: &str = "datagen/paraphrases.jsonl";
const VALIDATION: &str = "datagen/validation.jsonl";
const FT_DIR: &str = "ft";
const JOURNALS: &str = "journals";
const ABLATION: &str = "ablation";
const REPORT: &str = "report";

/// State shared by every subcommand.
struct Run {
    loaded: Loaded,
    seed: u64,
    workers: usize,
    out: PathBuf,
    report_out: Option<PathBuf>,
    services: Services,
    header: ArtifactHeader,
    scoring: ScoringArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let loaded = manifest::load(g.config.as_deref())?;
    let m = &loaded.manifest;
    let seed = g.seed.or(m.seed).unwrap_or(0);
    let workers = g.workers.or(m.workers).unwrap_or(1).max(1);
    let default_out = loaded.resolve(m.out.as_deref().unwrap_or(Path::new("out")));
    let (out, report_out) = match (&cli.command, g.out) {
        (Command::Report { .. }, Some(o)) => (default_out, Some(o)),
        (_, Some(o)) => (o, None),
        (_, None) => (default_out, None),
    };
    let mut endpoints = loaded.endpoints()?;
    for spec in &g.endpoints {
        let ep = ModelEndpoint::parse_spec(spec)?;
        endpoints.insert(ep.name.clone(), ep);
    }
    let services = Services {
        mock: g.mock,
        seed,
        mock_dim: m.mock_dim.unwrap_or(DEFAULT_MOCK_DIM),
        endpoints,
    };
    let header = ArtifactHeader::new(seed, loaded.hash.clone());
    let run = Run {
        loaded,
        seed,
        workers,
        out,
        report_out,
        services,
        header,
        scoring: ScoringArgs::default(),
    };
    match cli.command {
        Command::Ingest {
            input,
            topic,
            min_tokens,
        } => run.ingest(input, topic, min_tokens),
        Command::Index => run.index(),
        Command::Dump { index } => run.dump(index),
        Command::GenQuestions { limit } => run.gen_questions(limit),
        Command::GenParaphrases {
            n,
            validation,
            count,
            limit,
        } => run.gen_paraphrases(n, validation, count, limit),
        Command::Review {
            approve,
            reject,
            export,
        } => run.review(approve, reject, export),
        Command::PrepFt {
            n_paraphrases,
            learning_rate,
            epochs,
            batch_size,
            block_size,
        } => run.prep_ft(&n_paraphrases, learning_rate, epochs, batch_size, block_size),
        Command::Evaluate {
            dry_run,
            resume,
            k,
            scoring,
        } => run.with_scoring(scoring).evaluate(dry_run, resume, k),
        Command::Ablate {
            k,
            model,
            variant,
            shots,
            task,
            dry_run,
            scoring,
        } => run.with_scoring(scoring).ablate(&k, model, &variant, shots, task, dry_run),
        Command::Report {
            journals,
            formats,
            columns,
            base_column,
        } => run.report(journals, &formats, &columns, &base_column),
    }
}

/// Parses `a..b` (inclusive), `a..=b`, or a comma-separated list.
pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (
            a.trim().parse().with_context(|| format!("bad range `{s}`"))?,
            b.trim().parse().with_context(|| format!("bad range `{s}`"))?,
        );
        if a > b {
            bail!("empty range `{s}`");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().with_context(|| format!("bad list `{s}`")))
        .collect()
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexMeta {
    header: ArtifactHeader,
    embedder_id: String,
    tokenizer_id: String,
    dim: usize,
    count: usize,
    normalized: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Decision {
    source_chunk: String,
    status: ReviewStatus,
}

#[derive(Debug, Serialize)]
struct Failure<'a> {
    source_chunk: &'a str,
    error: String,
}

impl Run {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn write<T: Serialize>(&self, rel: &str, records: &[T]) -> Result<PathBuf> {
        let path = self.path(rel);
        ensure_parent(&path)?;
        write_jsonl(&path, Some(&self.header), records)?;
        Ok(path)
    }

    fn tokenizer(&self) -> Arc<dyn Tokenizer> {
        Arc::new(WordPunctTokenizer)
    }

    fn min_tokens(&self, flag: Option<usize>) -> Result<NonZeroUsize> {
        let n = flag
            .or(self.loaded.manifest.min_tokens)
            .unwrap_or(DEFAULT_MIN_TOKENS);
        NonZeroUsize::new(n).context("minimum token count must be positive")
    }

    fn chunks(&self) -> Result<Vec<Chunk>> {
        let path = self.path(CHUNKS);
        if !path.exists() {
            bail!("{} not found; run `ingest` first", path.display());
        }
        Ok(read_jsonl(&path)?)
    }

    fn ingest(&self, input: Option<PathBuf>, topic: Option<Topic>, min: Option<usize>) -> Result<()> {
        let input = match input {
            Some(p) => p,
            None => self.loaded.input(&self.loaded.manifest.articles, "articles")?,
        };
        let articles: Vec<RawArticle> = read_jsonl(&input)?;
        let default_topic = topic.or(self.loaded.manifest.topic);
        if default_topic.is_none() {
            if let Some(a) = articles.iter().find(|a| a.topic.is_none()) {
                bail!("article `{}` has no topic and no default was given", a.source_id);
            }
        }
        let tokenizer = self.tokenizer();
        let cleaner = Cleaner::new(tokenizer.clone(), default_topic.unwrap_or(Topic::CurrentEvents));
        let cleaned: Vec<Chunk> = articles.iter().flat_map(|a| cleaner.clean_article(a)).collect();
        let before = cleaned.len();
        let min = self.min_tokens(min)?;
        let kept = filter_small(cleaned, min);
        let store = CorpusStore::from_chunks(tokenizer.id(), kept)?;
        let path = self.write(CHUNKS, store.chunks())?;
        println!(
            "{} articles -> {} chunks ({} below {} tokens dropped) -> {}",
            articles.len(),
            store.len(),
            before - store.len(),
            min,
            path.display()
        );
        Ok(())
    }

    fn embedder(&self) -> Result<Arc<dyn Embedder>> {
        self.services.embedder(self.loaded.manifest.embedder.as_deref())
    }

    fn index(&self) -> Result<()> {
        let chunks = self.chunks()?;
        let m = &self.loaded.manifest;
        let embedder = self.embedder()?;
        let opts = BuildOptions {
            batch_size: m.batch_size.unwrap_or(BuildOptions::default().batch_size),
            parallelism: self.workers,
            normalize: m.normalize.unwrap_or(false),
        };
        let index: VectorIndex = build_index(&chunks, embedder.as_ref(), opts)?;
        let path = self.path(INDEX);
        ensure_parent(&path)?;
        write_index(&index, &path)?;
        let meta = IndexMeta {
            header: self.header.clone(),
            embedder_id: index.embedder_id().to_string(),
            tokenizer_id: self.tokenizer().id().to_string(),
            dim: index.dim(),
            count: index.len(),
            normalized: index.is_normalized(),
        };
        let meta_path = self.path(INDEX_META);
        let text = serde_json::to_string_pretty(&meta)? + "\n";
        fs::write(&meta_path, text).with_context(|| format!("writing {}", meta_path.display()))?;
        println!(
            "indexed {} chunks, dim {}, embedder {} -> {}",
            index.len(),
            index.dim(),
            index.embedder_id(),
            path.display()
        );
        Ok(())
    }

    fn load_index(&self) -> Result<VectorIndex> {
        let path = self.path(INDEX);
        if !path.exists() {
            bail!("{} not found; run `index` first", path.display());
        }
        Ok(read_index(&path)?)
    }

    fn dump(&self, index: Option<PathBuf>) -> Result<()> {
        let index: VectorIndex = match index {
            Some(p) => read_index(&p)?,
            None => self.load_index()?,
        };
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        dump(&index, &mut lock)?;
        Ok(())
    }

    fn eligible_chunks(&self, limit: Option<usize>) -> Result<Vec<Chunk>> {
        let mut chunks = filter_small(self.chunks()?, self.min_tokens(None)?);
        if let Some(n) = limit {
            chunks.truncate(n);
        }
        Ok(chunks)
    }

    fn gen_questions(&self, limit: Option<usize>) -> Result<()> {
        let chunks = self.eligible_chunks(limit)?;
        let svc = self.services.completer(self.loaded.manifest.completer.as_deref())?;
        let results = parallel_map(&chunks, self.workers, |_, c| {
            datagen::generate_questions(c, svc.as_ref(), self.seed)
        });
        let mut sets = Vec::new();
        let mut failures = Vec::new();
        let mut service_failed = false;
        for (c, r) in chunks.iter().zip(results) {
            match r {
                Ok(s) => sets.push(s),
                Err(e) => {
                    log::warn!("{}: {e}", c.chunk_id);
                    service_failed |= e.is_service();
                    failures.push(Failure {
                        source_chunk: &c.chunk_id,
                        error: e.to_string(),
                    });
                }
            }
        }
        let path = self.write(QUESTION_SETS, &sets)?;
        println!("{} question sets pending review -> {}", sets.len(), path.display());
        if !failures.is_empty() {
            let fpath = self.write(QUESTION_FAILURES, &failures)?;
            let msg = format!("{} chunk(s) failed; see {}", failures.len(), fpath.display());
            if service_failed {
                return Err(ServiceFailure(msg).into());
            }
            bail!(msg);
        }
        Ok(())
    }

    fn gen_paraphrases(
        &self,
        n: Option<usize>,
        validation: bool,
        count: Option<usize>,
        limit: Option<usize>,
    ) -> Result<()> {
        let m = &self.loaded.manifest;
        let mut chunks = self.chunks()?;
        if let Some(l) = limit {
            chunks.truncate(l);
        }
        let svc = self.services.completer(m.completer.as_deref())?;
        if validation {
            let count = count
                .or(m.validation_count)
                .unwrap_or(datagen::DEFAULT_VALIDATION_COUNT);
            let per_chunk = n
                .or(m.validation_per_chunk)
                .unwrap_or(datagen::DEFAULT_VALIDATION_PER_CHUNK);
            let split = datagen::make_validation_split(&chunks, count, per_chunk, svc.as_ref(), self.seed)?;
            let path = self.write(VALIDATION, &split)?;
            let records: usize = split.iter().map(|s| s.paraphrases.len()).sum();
            println!("{} chunks, {records} paraphrases -> {}", split.len(), path.display());
            return Ok(());
        }
        let n = n.or(m.n_paraphrases).unwrap_or(ftprep::MAX_PARAPHRASES);
        let results = parallel_map(&chunks, self.workers, |_, c| {
            datagen::generate_paraphrases(c, n, svc.as_ref(), self.seed)
        });
        let sets: Vec<ParaphraseSet> = results.into_iter().collect::<Result<_, _>>()?;
        let path = self.write(PARAPHRASES, &sets)?;
        println!("{} chunks x {n} paraphrases -> {}", sets.len(), path.display());
        Ok(())
    }

    fn question_sets(&self) -> Result<Vec<GeneratedQuestionSet>> {
        let path = self.path(QUESTION_SETS);
        if !path.exists() {
            bail!("{} not found; run `gen-questions` first", path.display());
        }
        let mut sets: Vec<GeneratedQuestionSet> = read_jsonl(&path)?;
        let reviews = self.path(REVIEWS);
        if reviews.exists() {
            for d in read_jsonl::<Decision>(&reviews)? {
                datagen::set_review(&mut sets, &d.source_chunk, d.status)?;
            }
        }
        Ok(sets)
    }

    fn review(&self, approve: Vec<String>, reject: Vec<String>, export: bool) -> Result<()> {
        let mut sets = self.question_sets()?;
        if let Some(id) = approve.iter().find(|id| reject.contains(id)) {
            bail!("`{id}` is both approved and rejected");
        }
        let decisions: Vec<Decision> = approve
            .into_iter()
            .map(|c| (c, ReviewStatus::Approved))
            .chain(reject.into_iter().map(|c| (c, ReviewStatus::Rejected)))
            .map(|(source_chunk, status)| Decision {
                source_chunk,
                status,
            })
            .collect();
        for d in &decisions {
            datagen::set_review(&mut sets, &d.source_chunk, d.status)?;
        }
        if !decisions.is_empty() {
            let path = self.path(REVIEWS);
            let fresh = !path.exists();
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .with_context(|| format!("opening {}", path.display()))?;
            if fresh {
                writeln!(f, "{}", self.header.json_line())?;
            }
            for d in &decisions {
                writeln!(f, "{}", serde_json::to_string(d)?)?;
            }
            println!("recorded {} decision(s)", decisions.len());
        }
        if export {
            let questions = export_approved(&sets);
            let path = self.write(QUESTIONS, &questions)?;
            println!("{} questions exported -> {}", questions.len(), path.display());
        }
        if decisions.is_empty() && !export {
            for s in &sets {
                println!("{}\t{:?}", s.source_chunk, s.review_status);
                for q in s.selected_questions() {
                    println!("    {}  [{}] {}", q.question_id, q.correct_option(), q.stem);
                }
            }
            let pending = sets
                .iter()
                .filter(|s| s.review_status == ReviewStatus::Pending)
                .count();
            println!("{} set(s), {pending} pending", sets.len());
        }
        Ok(())
    }

    fn prep_ft(
        &self,
        n_values: &str,
        learning_rate: Option<f64>,
        epochs: Option<u32>,
        batch_size: Option<u32>,
        block_size: Option<usize>,
    ) -> Result<()> {
        let m = &self.loaded.manifest;
        let n_values = parse_list(n_values)?;
        let chunks = self.chunks()?;
        let para_path = self.path(PARAPHRASES);
        let paraphrases: Vec<ParaphraseSet> = if n_values.iter().any(|&n| n > 0) {
            if !para_path.exists() {
                bail!("{} not found; run `gen-paraphrases` first", para_path.display());
            }
            read_jsonl(&para_path)?
        } else {
            Vec::new()
        };
        let defaults = TrainParams::default();
        let params = TrainParams {
            learning_rate: learning_rate.or(m.learning_rate).unwrap_or(defaults.learning_rate),
            epochs: epochs.or(m.epochs).unwrap_or(defaults.epochs),
            batch_size: batch_size.or(m.train_batch_size).unwrap_or(defaults.batch_size),
            block_size: block_size.or(m.block_size).unwrap_or(defaults.block_size),
        };
        let dir = self.path(FT_DIR);
        let entries = ftprep::sweep_manifest(
            &n_values,
            &chunks,
            &paraphrases,
            self.tokenizer().as_ref(),
            params,
            &dir,
            Some(&self.header),
        )?;
        self.write(&format!("{FT_DIR}/manifest.jsonl"), &entries)?;
        for e in &entries {
            println!(
                "n={:<2} {} documents, {} tokens, {} blocks -> {}",
                e.n_paraphrases,
                e.documents,
                e.tokens,
                e.blocks,
                dir.join(&e.dataset).display()
            );
        }
        Ok(())
    }

    fn questions(&self) -> Result<(Vec<Question>, Vec<Question>)> {
        let m = &self.loaded.manifest;
        let path = match &m.questions {
            Some(p) => self.loaded.resolve(p),
            None => self.path(QUESTIONS),
        };
        if !path.exists() {
            bail!("no question file: {}", path.display());
        }
        let questions: Vec<Question> = read_jsonl(&path)?;
        if questions.is_empty() {
            bail!("{} holds no questions", path.display());
        }
        let exemplars = match &m.exemplars {
            Some(p) => read_jsonl(&self.loaded.resolve(p))?,
            None => questions.clone(),
        };
        Ok((questions, exemplars))
    }

    fn models(&self) -> Result<&[ModelConfig]> {
        let models = &self.loaded.manifest.models;
        if models.is_empty() {
            bail!("manifest lists no models");
        }
        Ok(models)
    }

    fn with_scoring(self, scoring: ScoringArgs) -> Self {
        Self { scoring, ..self }
    }

    /// Command-line flags win over the manifest.
    fn score_spec(&self) -> ScoreSpec {
        let m = &self.loaded.manifest;
        let mode = if self.scoring.full_sequence {
            ScoreMode::FullSequence
        } else {
            m.score_mode.unwrap_or_default()
        };
        ScoreSpec {
            mode,
            per_token_mean: self.scoring.per_token_mean || m.per_token_mean.unwrap_or(false),
        }
    }

    fn base_config(&self, task: Topic, model: &ModelConfig, variant: &str, endpoint: &str) -> EvalConfig {
        let mut c = EvalConfig::new(task, &model.name, endpoint, variant).with_score(self.score_spec());
        c.leading_space = self.loaded.manifest.leading_space.unwrap_or(true);
        c
    }

    /// Runs `configs` over `questions`, one task at a time, journaling to
    /// `dir`.
    fn run_configs(
        &self,
        questions: &[Question],
        exemplars: &[Question],
        configs: &[EvalConfig],
        dir: &str,
        resume: bool,
    ) -> Result<()> {
        let mut ctx = EvalContext::<f64>::new(exemplars);
        let endpoints: BTreeSet<&str> = configs.iter().map(|c| c.endpoint.as_str()).collect();
        for e in endpoints {
            ctx = ctx.with_scorer(e, self.services.scorer(e)?);
        }
        let needs_index = configs.iter().any(|c| c.use_rag);
        let (index, store, embedder);
        if needs_index {
            index = self.load_index()?;
            store = CorpusStore::from_chunks(self.tokenizer().id(), self.chunks()?)?;
            embedder = self.embedder()?;
            if embedder.id() != index.embedder_id() {
                bail!(
                    "index was built with `{}` but the embedder is `{}`",
                    index.embedder_id(),
                    embedder.id()
                );
            }
            ctx = ctx.with_retriever(Retriever {
                index: &index,
                embedder: embedder.as_ref(),
                lookup: &store,
                query_prefix: self.loaded.manifest.query_prefix.clone().unwrap_or_default(),
                normalize_query: index.is_normalized(),
            });
        }
        let opts = GridOptions {
            workers: self.workers,
            journal_dir: Some(self.path(dir)),
            header: Some(self.header.clone()),
            resume,
        };
        let mut failed = 0;
        for task in Topic::ALL {
            let task_configs: Vec<EvalConfig> =
                configs.iter().filter(|c| c.task == task).cloned().collect();
            if task_configs.is_empty() {
                continue;
            }
            let task_questions: Vec<Question> =
                questions.iter().filter(|q| q.topic == task).cloned().collect();
            let table = run_grid(&task_questions, &task_configs, &mut ctx, &opts)?;
            failed += table.total_failures();
            for c in &task_configs {
                if let Some(s) = table.aggregates.get(&c.id()) {
                    println!("{}\t{}", c.id(), s);
                }
            }
        }
        if failed > 0 {
            return Err(ServiceFailure(format!(
                "{failed} question evaluation(s) failed; see journals in {}",
                self.path(dir).display()
            ))
            .into());
        }
        Ok(())
    }

    fn print_grid(configs: &[EvalConfig], questions: &[Question]) {
        let mut total = 0;
        for c in configs {
            let n = questions.iter().filter(|q| q.topic == c.task).count();
            total += n;
            println!("{}\t{n} questions", c.id());
        }
        println!("{} configs, {total} question evaluations", configs.len());
    }

    fn evaluate(&self, dry_run: bool, resume: bool, k: Option<usize>) -> Result<()> {
        let m = &self.loaded.manifest;
        let (questions, exemplars) = self.questions()?;
        let k = k.or(m.k).unwrap_or(MAX_K);
        let shots = m.shots.clone().unwrap_or_else(|| vec![0]);
        let tasks: BTreeSet<Topic> = questions.iter().map(|q| q.topic).collect();
        let mut configs = Vec::new();
        for &task in &tasks {
            for &s in &shots {
                for model in self.models()? {
                    for (variant, endpoint) in &model.variants {
                        let base = self.base_config(task, model, variant, endpoint).with_shots(s);
                        configs.push(base.clone());
                        if k > 0 {
                            configs.push(base.with_rag(k));
                        }
                    }
                }
            }
        }
        for c in &configs {
            c.validate()?;
        }
        if dry_run {
            Self::print_grid(&configs, &questions);
            return Ok(());
        }
        self.run_configs(&questions, &exemplars, &configs, JOURNALS, resume)
    }

    fn ablate(
        &self,
        ks: &str,
        model: Option<String>,
        variant: &str,
        shots: usize,
        task: Option<Topic>,
        dry_run: bool,
    ) -> Result<()> {
        let ks = parse_list(ks)?;
        let (questions, exemplars) = self.questions()?;
        let models = self.models()?;
        let model = match &model {
            Some(name) => models
                .iter()
                .find(|m| &m.name == name)
                .with_context(|| format!("no model named `{name}`"))?,
            None => &models[0],
        };
        let endpoint = model
            .variants
            .get(variant)
            .with_context(|| format!("model `{}` has no variant `{variant}`", model.name))?;
        let task = match task {
            Some(t) => t,
            None => questions.iter().map(|q| q.topic).min().expect("non-empty questions"),
        };
        let base = self.base_config(task, model, variant, endpoint).with_shots(shots);
        let configs = ablation_configs(&base, &ks);
        for c in &configs {
            c.validate()?;
        }
        if dry_run {
            Self::print_grid(&configs, &questions);
            return Ok(());
        }
        self.run_configs(&questions, &exemplars, &configs, ABLATION, false)
    }

    fn report(
        &self,
        journals: Option<PathBuf>,
        formats: &[String],
        columns: &str,
        base_column: &str,
    ) -> Result<()> {
        let key = match columns {
            "approach" => ColumnKey::Approach,
            "k" | "K" => ColumnKey::RetrievedDocs,
            other => bail!("unknown column key `{other}`; use approach or k"),
        };
        let formats: Vec<Format> = formats.iter().map(|f| f.parse()).collect::<Result<_, _>>()?;
        let dir = journals.unwrap_or_else(|| self.path(JOURNALS));
        if !dir.is_dir() {
            bail!("journal directory {} not found", dir.display());
        }
        let journals = read_journal_dir(&dir)?;
        if journals.is_empty() {
            bail!("no journals in {}", dir.display());
        }
        let order: Vec<String> = self
            .loaded
            .manifest
            .models
            .iter()
            .map(|m| m.name.clone())
            .collect();
        let table = report::aggregate(&journals, key, &order);
        let out = self.report_out.clone().unwrap_or_else(|| self.path(REPORT));
        for f in &formats {
            let path = report::render(&table, *f, &out, "results", Some(&self.header))?;
            println!("{}", path.display());
        }
        if formats.contains(&Format::Markdown) && table.column(base_column).is_some() {
            let mut text = format!("<!--{} -->\n", self.header.comment_line(""));
            for model in table.models() {
                match report::columnwise_gain::<f64>(&table.for_model(&model), base_column) {
                    Ok(g) => {
                        text.push_str(&report::render_gains(&model, &g));
                        text.push('\n');
                    }
                    Err(e) => log::warn!("gains for {model}: {e}"),
                }
            }
            let path = out.join("gains.md");
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_syntax() {
        assert_eq!(parse_list("0..5").unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(parse_list("0..=2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_list("3, 1").unwrap(), vec![3, 1]);
        assert_eq!(parse_list("4").unwrap(), vec![4]);
        assert!(parse_list("5..1").is_err());
        assert!(parse_list("a").is_err());
    }
}
