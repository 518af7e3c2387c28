//! Experiment manifest: a TOML file of flat settings plus endpoint and
//! model tables. `${VAR}` in the file is replaced from the environment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use injectbench_core::artifact::sha256_hex;
use injectbench_core::corpus::Topic;
use injectbench_core::modelio::{Capability, ModelEndpoint, ScoreMode};
use regex::Regex;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    pub capability: Capability,
    /// Environment variable holding the API key.
    pub auth: Option<String>,
    /// Model id sent to the server; defaults to the endpoint name.
    pub model: Option<String>,
    pub max_inflight: Option<usize>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Display name, e.g. `Mistral 7B`.
    pub name: String,
    /// Variant label (`base`, `FT`, `FT-par`, ...) to scoring endpoint name.
    pub variants: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,

    pub articles: Option<PathBuf>,
    pub topic: Option<Topic>,
    pub min_tokens: Option<usize>,

    pub embedder: Option<String>,
    pub batch_size: Option<usize>,
    pub normalize: Option<bool>,
    pub query_prefix: Option<String>,
    pub mock_dim: Option<usize>,

    pub questions: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub k: Option<usize>,
    pub shots: Option<Vec<usize>>,
    pub score_mode: Option<ScoreMode>,
    pub per_token_mean: Option<bool>,
    pub leading_space: Option<bool>,

    pub completer: Option<String>,
    pub n_paraphrases: Option<usize>,
    pub validation_count: Option<usize>,
    pub validation_per_chunk: Option<usize>,

    pub learning_rate: Option<f64>,
    pub epochs: Option<u32>,
    pub train_batch_size: Option<u32>,
    pub block_size: Option<usize>,

    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointConfig>,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
}

/// Manifest plus where it came from.
#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub manifest: Manifest,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    /// SHA-256 of the manifest file bytes, `none` without a file.
    pub hash: String,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn input(&self, field: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        match field {
            Some(p) => Ok(self.resolve(p)),
            None => bail!("manifest has no `{name}` path"),
        }
    }
}

/// Replaces `${VAR}` with the variable's value, collecting unset names.
fn interpolate_str(text: &str, missing: &mut Vec<String>) -> String {
    let re = Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex");
    re.replace_all(text, |c: &regex::Captures| match std::env::var(&c[1]) {
        Ok(v) => v,
        Err(_) => {
            missing.push(c[1].to_string());
            String::new()
        }
    })
    .into_owned()
}

fn interpolate_value(value: &mut toml::Value, missing: &mut Vec<String>) {
    match value {
        toml::Value::String(s) => *s = interpolate_str(s, missing),
        toml::Value::Array(items) => items.iter_mut().for_each(|v| interpolate_value(v, missing)),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, v)| interpolate_value(v, missing)),
        _ => {}
    }
}

/// Parses manifest text, expanding `${VAR}` inside string values only.
pub fn parse(text: &str) -> Result<Manifest> {
    let mut value: toml::Value = toml::from_str(text)?;
    let mut missing = Vec::new();
    interpolate_value(&mut value, &mut missing);
    if !missing.is_empty() {
        missing.dedup();
        bail!("unset environment variable(s): {}", missing.join(", "));
    }
    Ok(value.try_into()?)
}

pub fn load(path: Option<&Path>) -> Result<Loaded> {
    let Some(path) = path else {
        return Ok(Loaded {
            manifest: Manifest::default(),
            base_dir: PathBuf::from("."),
            hash: "none".into(),
        });
    };
    let bytes = fs::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("manifest is not UTF-8")?;
    let manifest = parse(&text)
        .with_context(|| format!("malformed manifest {}", path.display()))?;
    let loaded = Loaded {
        manifest,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        hash: sha256_hex(&bytes),
    };
    loaded.validate()?;
    Ok(loaded)
}

impl Loaded {
    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        for (name, p) in [
            ("articles", &m.articles),
            ("questions", &m.questions),
            ("exemplars", &m.exemplars),
        ] {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.exists() {
                    bail!("manifest `{name}` path {} does not exist", full.display());
                }
            }
        }
        for model in &m.models {
            if model.variants.is_empty() {
                bail!("model `{}` lists no variants", model.name);
            }
        }
        if let Some(shots) = &m.shots {
            if shots.is_empty() {
                bail!("`shots` is empty");
            }
        }
        Ok(())
    }

    pub fn endpoints(&self) -> Result<BTreeMap<String, ModelEndpoint>> {
        let mut out = BTreeMap::new();
        for (name, e) in &self.manifest.endpoints {
            let mut ep = ModelEndpoint::new(name.clone(), e.url.clone(), e.capability)?;
            if let Some(a) = &e.auth {
                ep = ep.with_auth_env(a.clone());
            }
            if let Some(m) = &e.model {
                ep = ep.with_model(m.clone());
            }
            if let Some(n) = e.max_inflight {
                ep = ep.with_max_inflight(n);
            }
            if let Some(t) = e.timeout_secs {
                ep = ep.with_timeout(Duration::from_secs(t));
            }
            out.insert(name.clone(), ep);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reads_env() {
        std::env::set_var("INJECTBENCH_TEST_HOST", "example.org\"");
        let m = parse(
            "out = \"${INJECTBENCH_TEST_HOST}/runs\" # not ${INJECTBENCH_TEST_SURELY_UNSET}\n",
        )
        .unwrap();
        assert_eq!(m.out, Some(PathBuf::from("example.org\"/runs")));
        let err = parse("out = \"${INJECTBENCH_TEST_SURELY_UNSET}\"").unwrap_err();
        assert!(err.to_string().contains("INJECTBENCH_TEST_SURELY_UNSET"));
    }

    #[test]
    fn parses_tables_and_rejects_unknown_keys() {
        let m: Manifest = toml::from_str(
            r#"
            seed = 3
            shots = [0, 5]
            score_mode = "full-sequence"
            [endpoints.bge]
            url = "http://localhost:8080"
            capability = "embed"
            [[models]]
            name = "Mistral 7B"
            variants = { base = "mistral", FT = "mistral-ft" }
            "#,
        )
        .unwrap();
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.models[0].variants["FT"], "mistral-ft");
        assert!(toml::from_str::<Manifest>("sed = 3").is_err());
    }
}
