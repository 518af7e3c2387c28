//! Unsupervised fine-tuning data: marker-wrapped documents cut into
//! fixed-size token blocks, training configs, and the paraphrase-count sweep.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::artifact::{write_jsonl, ArtifactHeader};
use crate::corpus::{Chunk, Tokenizer};
use crate::datagen::ParaphraseSet;
use crate::{Error, Result};

pub const BOS: &str = "<BOS>";
pub const EOS: &str = "<EOS>";
/// Special-token ids written to the markers sidecar.
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const DEFAULT_BLOCK_SIZE: usize = 256;
pub const MAX_PARAPHRASES: usize = 10;
pub const MIN_LEARNING_RATE: f64 = 1e-6;
pub const MAX_LEARNING_RATE: f64 = 5e-5;
pub const MAX_EPOCHS: u32 = 5;
pub const DEFAULT_BATCH_SIZE: u32 = 64;

/// For each chunk: the chunk, then its first `n_paraphrases` paraphrases,
/// each wrapped in BOS/EOS.
pub fn build_stream(
    chunks: &[Chunk],
    paraphrases: &[ParaphraseSet],
    n_paraphrases: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<String>> {
    if n_paraphrases > MAX_PARAPHRASES {
        return Err(Error::invalid(format!(
            "paraphrase count {n_paraphrases} exceeds {MAX_PARAPHRASES}"
        )));
    }
    let by_chunk: HashMap<&str, &ParaphraseSet> = paraphrases
        .iter()
        .map(|p| (p.source_chunk.as_str(), p))
        .collect();
    let mut stream = Vec::new();
    let mut push_doc = |text: &str| {
        stream.push(BOS.to_string());
        stream.extend(tokenizer.tokenize(text));
        stream.push(EOS.to_string());
    };
    for c in chunks {
        let extra: &[String] = if n_paraphrases == 0 {
            &[]
        } else {
            let set = by_chunk.get(c.chunk_id.as_str()).ok_or_else(|| {
                Error::invalid(format!("no paraphrases for chunk `{}`", c.chunk_id))
            })?;
            if set.paraphrases.len() < n_paraphrases {
                return Err(Error::invalid(format!(
                    "chunk `{}` has {} paraphrases, {n_paraphrases} requested",
                    c.chunk_id,
                    set.paraphrases.len()
                )));
            }
            &set.paraphrases[..n_paraphrases]
        };
        push_doc(&c.text);
        for p in extra {
            push_doc(p);
        }
    }
    Ok(stream)
}

/// Number of BOS-opened documents, checking every BOS is closed by an EOS
/// before the next BOS.
pub fn count_documents(stream: &[String]) -> Result<usize> {
    let mut open = false;
    let mut docs = 0;
    for (i, t) in stream.iter().enumerate() {
        match t.as_str() {
            BOS if open => return Err(Error::invalid(format!("unclosed document at token {i}"))),
            BOS => {
                open = true;
                docs += 1;
            }
            EOS if !open => return Err(Error::invalid(format!("stray end marker at token {i}"))),
            EOS => open = false,
            _ => {}
        }
    }
    if open {
        return Err(Error::invalid("stream ends inside a document"));
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingBlock {
    pub block_index: usize,
    pub tokens: Vec<String>,
}

impl TrainingBlock {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Consecutive blocks of `block_size` tokens; the final block keeps the
/// remainder.
pub fn rechunk(stream: &[String], block_size: usize) -> Result<Vec<TrainingBlock>> {
    if block_size < 2 {
        return Err(Error::invalid(format!("block size {block_size} is below 2")));
    }
    Ok(stream
        .chunks(block_size)
        .enumerate()
        .map(|(block_index, t)| TrainingBlock {
            block_index,
            tokens: t.to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: u32,
    pub dataset_path: String,
    pub n_paraphrases: usize,
}

impl TrainConfig {
    pub fn new(
        learning_rate: f64,
        epochs: u32,
        batch_size: u32,
        dataset_path: impl Into<String>,
        n_paraphrases: usize,
    ) -> Result<Self> {
        let c = Self {
            learning_rate,
            epochs,
            batch_size,
            dataset_path: dataset_path.into(),
            n_paraphrases,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_LEARNING_RATE..=MAX_LEARNING_RATE).contains(&self.learning_rate) {
            return Err(Error::invalid(format!(
                "learning rate {} outside [{MIN_LEARNING_RATE:e}, {MAX_LEARNING_RATE:e}]",
                self.learning_rate
            )));
        }
        if !(1..=MAX_EPOCHS).contains(&self.epochs) {
            return Err(Error::invalid(format!(
                "epochs {} outside [1, {MAX_EPOCHS}]",
                self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if self.dataset_path.is_empty() {
            return Err(Error::invalid("empty dataset path"));
        }
        if self.n_paraphrases > MAX_PARAPHRASES {
            return Err(Error::invalid(format!(
                "paraphrase count {} exceeds {MAX_PARAPHRASES}",
                self.n_paraphrases
            )));
        }
        Ok(())
    }
}

/// Flat `key = value` rendering.
impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "learning_rate = {:e}", self.learning_rate)?;
        writeln!(f, "epochs = {}", self.epochs)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "dataset_path = {}", self.dataset_path)?;
        writeln!(f, "n_paraphrases = {}", self.n_paraphrases)
    }
}

impl FromStr for TrainConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut kv: HashMap<&str, &str> = HashMap::new();
        for line in s.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("not a key = value line: `{line}`")))?;
            kv.insert(k.trim(), v.trim());
        }
        fn get<'a>(kv: &HashMap<&str, &'a str>, key: &str) -> Result<&'a str> {
            kv.get(key)
                .copied()
                .ok_or_else(|| Error::invalid(format!("missing `{key}`")))
        }
        fn num<T: FromStr>(kv: &HashMap<&str, &str>, key: &str) -> Result<T> {
            get(kv, key)?
                .parse()
                .map_err(|_| Error::invalid(format!("bad value for `{key}`")))
        }
        TrainConfig::new(
            num(&kv, "learning_rate")?,
            num(&kv, "epochs")?,
            num(&kv, "batch_size")?,
            get(&kv, "dataset_path")?,
            num(&kv, "n_paraphrases")?,
        )
    }
}

/// Writes the config to `path`, first line a header comment.
pub fn emit_train_config(
    config: &TrainConfig,
    path: &Path,
    header: Option<&ArtifactHeader>,
) -> Result<()> {
    config.validate()?;
    let mut text = String::new();
    if let Some(h) = header {
        text.push_str(&h.comment_line("#"));
        text.push('\n');
    }
    text.push_str(&config.to_string());
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Paraphrase counts for the sweep, sorted with duplicates removed.
pub fn sweep_values(n_values: &[usize]) -> Result<Vec<usize>> {
    if n_values.is_empty() {
        return Err(Error::invalid("empty paraphrase sweep"));
    }
    let set: BTreeSet<usize> = n_values.iter().copied().collect();
    if set.len() != n_values.len() {
        log::warn!("duplicate paraphrase counts in sweep removed");
    }
    if let Some(&n) = set.iter().next_back().filter(|&&n| n > MAX_PARAPHRASES) {
        return Err(Error::invalid(format!(
            "paraphrase count {n} exceeds {MAX_PARAPHRASES}"
        )));
    }
    Ok(set.into_iter().collect())
}

/// Training hyperparameters shared by every sweep entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: u32,
    pub block_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            epochs: MAX_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub n_paraphrases: usize,
    /// File names relative to the output directory.
    pub dataset: String,
    pub config: String,
    pub documents: usize,
    pub tokens: usize,
    pub blocks: usize,
}

#[derive(Serialize)]
struct TextRecord<'a> {
    text: &'a str,
}

pub fn dataset_stem(n_paraphrases: usize) -> String {
    format!("ft-n{n_paraphrases}")
}

/// Writes one dataset and training config per paraphrase count, plus the
/// shared markers sidecar.
pub fn sweep_manifest(
    n_values: &[usize],
    chunks: &[Chunk],
    paraphrases: &[ParaphraseSet],
    tokenizer: &dyn Tokenizer,
    params: TrainParams,
    out_dir: &Path,
    header: Option<&ArtifactHeader>,
) -> Result<Vec<SweepEntry>> {
    let values = sweep_values(n_values)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let markers = out_dir.join("markers.json");
    let sidecar = serde_json::json!({ BOS: BOS_ID, EOS: EOS_ID });
    fs::write(&markers, format!("{sidecar}\n")).map_err(|e| Error::io(&markers, e))?;

    let mut entries = Vec::with_capacity(values.len());
    for n in values {
        let stream = build_stream(chunks, paraphrases, n, tokenizer)?;
        let documents = count_documents(&stream)?;
        let blocks = rechunk(&stream, params.block_size)?;
        let texts: Vec<String> = blocks.iter().map(TrainingBlock::text).collect();
        let records: Vec<TextRecord> = texts.iter().map(|t| TextRecord { text: t }).collect();
        let stem = dataset_stem(n);
        let dataset = format!("{stem}.jsonl");
        write_jsonl(&out_dir.join(&dataset), header, &records)?;
        let config = TrainConfig::new(
            params.learning_rate,
            params.epochs,
            params.batch_size,
            dataset.clone(),
            n,
        )?;
        let config_name = format!("{stem}.train.cfg");
        emit_train_config(&config, &out_dir.join(&config_name), header)?;
        entries.push(SweepEntry {
            n_paraphrases: n,
            dataset,
            config: config_name,
            documents,
            tokens: stream.len(),
            blocks: blocks.len(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Origin, Topic, WordPunctTokenizer};
    use proptest::prelude::*;

    fn chunk(i: usize, words: usize) -> Chunk {
        let text = (0..words).map(|w| format!("w{i}x{w}")).collect::<Vec<_>>().join(" ");
        Chunk {
            chunk_id: format!("c{i}"),
            text,
            token_count: words,
            origin: Origin {
                source_id: format!("c{i}"),
                section: 0,
            },
            topic: Topic::CurrentEvents,
        }
    }

    fn paraphrases(i: usize, n: usize) -> ParaphraseSet {
        ParaphraseSet {
            source_chunk: format!("c{i}"),
            paraphrases: (0..n).map(|p| format!("para {p} of {i}")).collect(),
            seeds: (0..n as u64).collect(),
        }
    }

    #[test]
    fn regular_stream_wraps_each_chunk() {
        let chunks: Vec<_> = (0..3).map(|i| chunk(i, 4)).collect();
        let s = build_stream(&chunks, &[], 0, &WordPunctTokenizer).unwrap();
        assert_eq!(count_documents(&s).unwrap(), 3);
        assert_eq!(s.len(), 3 * 6);
        assert_eq!(&s[..6], ["<BOS>", "w0x0", "w0x1", "w0x2", "w0x3", "<EOS>"]);
    }

    #[test]
    fn too_few_paraphrases_rejected() {
        let chunks = vec![chunk(0, 4)];
        let sets = vec![paraphrases(0, 2)];
        assert!(build_stream(&chunks, &sets, 3, &WordPunctTokenizer).is_err());
        assert!(build_stream(&chunks, &[], 1, &WordPunctTokenizer).is_err());
        assert!(build_stream(&chunks, &sets, 11, &WordPunctTokenizer).is_err());
    }

    #[test]
    fn rechunk_sizes() {
        let stream: Vec<String> = (0..520).map(|i| i.to_string()).collect();
        let sizes: Vec<_> = rechunk(&stream, 256).unwrap().iter().map(|b| b.tokens.len()).collect();
        assert_eq!(sizes, [256, 256, 8]);
        let short = rechunk(&stream[..10], 256).unwrap();
        assert_eq!(short.len(), 1);
        assert!(rechunk(&stream, 1).is_err());
    }

    #[test]
    fn config_bounds_and_roundtrip() {
        let c = TrainConfig::new(5e-5, 5, 64, "ft-n0.jsonl", 0).unwrap();
        assert_eq!(c.to_string().parse::<TrainConfig>().unwrap(), c);
        assert!(TrainConfig::new(1e-6, 1, 64, "d", 0).is_ok());
        assert!(TrainConfig::new(6e-5, 5, 64, "d", 0).is_err());
        assert!(TrainConfig::new(1e-5, 0, 64, "d", 0).is_err());
        assert!(TrainConfig::new(1e-5, 6, 64, "d", 0).is_err());
    }

    #[test]
    fn sweep_writes_eleven_entries() {
        let dir = tempfile::tempdir().unwrap();
        let chunks: Vec<_> = (0..3).map(|i| chunk(i, 30)).collect();
        let sets: Vec<_> = (0..3).map(|i| paraphrases(i, 10)).collect();
        let n: Vec<usize> = (0..=10).collect();
        let entries = sweep_manifest(
            &n, &chunks, &sets, &WordPunctTokenizer, TrainParams::default(), dir.path(), None,
        )
        .unwrap();
        assert_eq!(entries.len(), 11);
        for e in &entries {
            assert_eq!(e.documents, (1 + e.n_paraphrases) * 3);
            let cfg: TrainConfig = fs::read_to_string(dir.path().join(&e.config)).unwrap().parse().unwrap();
            assert_eq!(cfg.n_paraphrases, e.n_paraphrases);
        }
        assert!(dir.path().join("markers.json").exists());
        assert!(sweep_values(&[]).is_err());
        assert_eq!(sweep_values(&[2, 0, 2]).unwrap(), [0, 2]);
    }

    proptest! {
        #[test]
        fn blocks_partition_stream(len in 0usize..2000, size in 2usize..600) {
            let stream: Vec<String> = (0..len).map(|i| format!("t{i}")).collect();
            let blocks = rechunk(&stream, size).unwrap();
            let joined: Vec<String> = blocks.iter().flat_map(|b| b.tokens.clone()).collect();
            prop_assert_eq!(&joined, &stream);
            if let Some((last, rest)) = blocks.split_last() {
                prop_assert!(rest.iter().all(|b| b.tokens.len() == size));
                prop_assert!(!last.tokens.is_empty() && last.tokens.len() <= size);
            }
        }

        #[test]
        fn document_count_formula(chunks in 1usize..8, n in 0usize..=10) {
            let cs: Vec<_> = (0..chunks).map(|i| chunk(i, 3)).collect();
            let sets: Vec<_> = (0..chunks).map(|i| paraphrases(i, 10)).collect();
            let s = build_stream(&cs, &sets, n, &WordPunctTokenizer).unwrap();
            prop_assert_eq!(count_documents(&s).unwrap(), (1 + n) * chunks);
        }
    }
}
