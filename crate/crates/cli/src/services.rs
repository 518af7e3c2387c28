//! Resolves endpoint names to live HTTP clients or, under `--mock`, to
//! deterministic mocks.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{bail, Result};
use injectbench_core::modelio::http::{HttpCompleter, HttpEmbedder, HttpScorer};
use injectbench_core::modelio::mock::{MockCompleter, MockEmbedder, MockScorer};
use injectbench_core::modelio::{Capability, Completer, Embedder, ModelEndpoint, Scorer};

pub const DEFAULT_MOCK_DIM: usize = 64;

pub struct Services {
    pub mock: bool,
    pub seed: u64,
    pub mock_dim: usize,
    pub endpoints: BTreeMap<String, ModelEndpoint>,
}

impl Services {
    fn endpoint(&self, name: &str, capability: Capability) -> Result<&ModelEndpoint> {
        let Some(ep) = self.endpoints.get(name) else {
            bail!("no endpoint named `{name}`");
        };
        if ep.capability != capability {
            bail!(
                "endpoint `{name}` serves `{}`, `{capability}` needed",
                ep.capability
            );
        }
        Ok(ep)
    }

    fn named<'a>(&self, name: Option<&'a str>, what: &str) -> Result<&'a str> {
        match name {
            Some(n) => Ok(n),
            None if self.mock => Ok(""),
            None => bail!("no {what} endpoint configured"),
        }
    }

    pub fn embedder(&self, name: Option<&str>) -> Result<Arc<dyn Embedder>> {
        let name = self.named(name, "embedding")?;
        if self.mock {
            return Ok(Arc::new(MockEmbedder::new(self.mock_dim, self.seed)));
        }
        let ep = self.endpoint(name, Capability::Embed)?;
        Ok(Arc::new(HttpEmbedder::new(ep.clone())?))
    }

    pub fn scorer(&self, name: &str) -> Result<Arc<dyn Scorer>> {
        if self.mock {
            return Ok(Arc::new(MockScorer::new(name, self.seed)));
        }
        let ep = self.endpoint(name, Capability::Score)?;
        Ok(Arc::new(HttpScorer::new(ep.clone())?))
    }

    pub fn completer(&self, name: Option<&str>) -> Result<Arc<dyn Completer>> {
        let name = self.named(name, "completion")?;
        if self.mock {
            let id = if name.is_empty() { "mock-complete" } else { name };
            return Ok(Arc::new(MockCompleter::new(id)));
        }
        let ep = self.endpoint(name, Capability::Complete)?;
        Ok(Arc::new(HttpCompleter::new(ep.clone())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn services(mock: bool) -> Services {
        let mut endpoints = BTreeMap::new();
        let ep = ModelEndpoint::parse_spec("bge=http://localhost:9:embed").unwrap();
        endpoints.insert(ep.name.clone(), ep);
        Services {
            mock,
            seed: 1,
            mock_dim: 8,
            endpoints,
        }
    }

    #[test]
    fn capability_mismatch_is_rejected() {
        let s = services(false);
        assert!(s.embedder(Some("bge")).is_ok());
        let err = s.scorer("bge").err().unwrap().to_string();
        assert!(err.contains("`score` needed"), "{err}");
        assert!(s.completer(None).is_err());
    }

    #[test]
    fn mock_needs_no_endpoints() {
        let s = services(true);
        assert!(s.scorer("anything").is_ok());
        assert!(s.completer(None).is_ok());
        assert!(s.embedder(None).is_ok());
    }
}
