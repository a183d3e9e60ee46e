use std::path::Path;
use std::sync::Arc;

use factoid_core::embedding::{parse_gazetteer, EmbeddingTable};
use factoid_core::oracle::{
    CachedProvider, EntailmentOracle, EntityRecognizer, GazetteerNer, HttpProvider, OracleClient, Provider,
    RecordingProvider, ReplayProvider, StubEntailment,
};

use crate::args::{EntailmentSource, ProviderArgs};
use crate::config::{CliConfig, Patch};
use crate::error::CliError;

pub type Shared = Arc<dyn Provider>;

/// The provider chain: replay or http, then an optional disk cache, then an
/// optional recorder on top.
pub struct Stack {
    pub provider: Shared,
    recorder: Option<Arc<RecordingProvider<Shared>>>,
}

pub fn provider_flags(p: &ProviderArgs, patch: &mut Patch) {
    patch.opt("provider.endpoint", p.endpoint.clone());
    patch.opt("provider.model", p.model.clone());
    patch.opt("provider.cache_dir", p.cache_dir.clone());
    patch.opt("provider.max_in_flight", p.max_in_flight);
    patch.opt("provider.retry_budget", p.retry_budget);
    patch.opt("provider.requests_per_second", p.requests_per_second);
    patch.opt("provider.timeout_secs", p.timeout_secs);
}

impl Stack {
    pub fn build(args: &ProviderArgs, cfg: &CliConfig) -> Result<Self, CliError> {
        let mut provider: Shared = match &args.replay {
            Some(path) => Arc::new(ReplayProvider::load(path).map_err(|e| CliError::input(path.display(), e))?),
            None => Arc::new(HttpProvider::new(cfg.provider.clone())?),
        };
        if let Some(dir) = &cfg.provider.cache_dir {
            provider = Arc::new(CachedProvider::new(provider, dir)?);
        }
        let mut recorder = None;
        if args.record.is_some() {
            let r = Arc::new(RecordingProvider::new(provider));
            provider = r.clone();
            recorder = Some(r);
        }
        Ok(Self { provider, recorder })
    }

    pub fn client(&self, model: &str) -> OracleClient<Shared> {
        OracleClient::new(self.provider.clone(), model)
    }

    /// Flush recorded fixtures, if recording.
    pub fn finish(&self, args: &ProviderArgs) -> Result<(), CliError> {
        if let (Some(r), Some(path)) = (&self.recorder, &args.record) {
            crate::output::atomic_write(path, r.to_jsonl().as_bytes())?;
            log::info!("recorded {} fixtures to {}", r.recorded(), path.display());
        }
        Ok(())
    }

    pub fn log_metrics(&self) {
        let m = self.provider.metrics();
        log::info!(
            "oracle calls: {} requests, {} network, {} retries, {} cache hits, {} replay hits",
            m.requests,
            m.network_calls,
            m.retries,
            m.cache_hits,
            m.replay_hits
        );
    }
}

pub fn entailment(source: EntailmentSource, stack: &Stack, model: &str) -> Box<dyn EntailmentOracle> {
    match source {
        EntailmentSource::Stub => Box::new(StubEntailment::default()),
        EntailmentSource::Provider => Box::new(stack.client(model)),
    }
}

/// Load the embedding table with an optional gazetteer sidecar.
pub fn load_table(embeddings: &Path, gazetteer: Option<&Path>) -> Result<EmbeddingTable, CliError> {
    let mut table = EmbeddingTable::load_word2vec(embeddings).map_err(|e| CliError::input(embeddings.display(), e))?;
    if let Some(g) = gazetteer {
        let text = std::fs::read_to_string(g).map_err(|e| CliError::input(g.display(), e))?;
        table = table.with_gazetteer_tsv(&text).map_err(|e| CliError::input(g.display(), e))?;
    }
    Ok(table)
}

/// Offline NER when a gazetteer is available, the provider otherwise.
pub fn ner(
    table: Option<&EmbeddingTable>,
    gazetteer: Option<&Path>,
    stack: &Stack,
    model: &str,
) -> Result<Box<dyn EntityRecognizer>, CliError> {
    if let Some(t) = table {
        if !t.gazetteer().is_empty() {
            return Ok(Box::new(GazetteerNer::from_table(t)));
        }
    }
    if let Some(g) = gazetteer {
        let text = std::fs::read_to_string(g).map_err(|e| CliError::input(g.display(), e))?;
        let entries = parse_gazetteer(&text).map_err(|e| CliError::input(g.display(), e))?;
        return Ok(Box::new(GazetteerNer::new(entries)));
    }
    Ok(Box::new(stack.client(model)))
}
