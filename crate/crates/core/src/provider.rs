//! Embedding acquisition for unit surfaces missing from local stores.
//!
//! Remote protocol: `POST {endpoint}/embed` with body
//! `{"kind": "text"|"image", "modelTag": ..., "payloads": [...]}`, answered by
//! `{"dim": D, "vectors": [[f32; D], ...]}`. Any non-200 status is an error.
//! Responses are cached in an FGRN store keyed by model tag, kind and payload.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{open_store, EmbeddingStore, StoreError};
use crate::tagger::TextUnit;

pub const ENDPOINT_ENV: &str = "FGRAIN_EMBED_URL";
pub const MAX_RETRIES: u32 = 5;
pub const MIN_TIMEOUT_MS: u64 = 100;
const BODY_EXCERPT_LEN: usize = 200;
const KEY_SEP: char = '\u{1f}';

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("embedding request has no payloads")]
    EmptyBatch,
    #[error("batch of {size} exceeds max batch {max}")]
    BatchTooLarge { size: usize, max: usize },
    #[error("embedding service timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("embedding service returned status {status}: {body}")]
    RemoteError { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed service response: {0}")]
    MalformedResponse(String),
    #[error("inconsistent dimensions: {0}")]
    DimensionInconsistent(String),
    #[error("embedding cache is corrupt: {0}")]
    CacheCorrupt(String),
    #[error("unresolved surface(s): {}", .0.join(", "))]
    UnknownId(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedKind {
    Text,
    Image,
}

impl EmbedKind {
    fn as_str(self) -> &'static str {
        match self {
            EmbedKind::Text => "text",
            EmbedKind::Image => "image",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmbeddingRequest {
    pub kind: EmbedKind,
    pub model_tag: String,
    pub payloads: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub timeout_ms: u64,
    pub max_batch: usize,
    pub cache_path: Option<PathBuf>,
    pub retries: u32,
    /// Model tag sent with requests built by [`resolve_unit_embeddings`].
    pub model_tag: String,
    pub bearer_token: Option<String>,
    /// Base delay of the exponential backoff between retries.
    pub backoff_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint_url: "http://127.0.0.1:8080".into(),
            timeout_ms: 30_000,
            max_batch: 64,
            cache_path: None,
            retries: 2,
            model_tag: "default".into(),
            bearer_token: None,
            backoff_ms: 200,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.endpoint_url.trim().is_empty() {
            return Err(ProviderError::InvalidConfig("endpoint url is empty".into()));
        }
        if self.timeout_ms < MIN_TIMEOUT_MS {
            return Err(ProviderError::InvalidConfig(format!(
                "timeoutMs must be at least {MIN_TIMEOUT_MS}, got {}",
                self.timeout_ms
            )));
        }
        if self.max_batch == 0 {
            return Err(ProviderError::InvalidConfig("maxBatch must be positive".into()));
        }
        if self.retries > MAX_RETRIES {
            return Err(ProviderError::InvalidConfig(format!(
                "retries must be at most {MAX_RETRIES}, got {}",
                self.retries
            )));
        }
        Ok(())
    }

    /// Replaces the endpoint with `FGRAIN_EMBED_URL` when that is set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(url) = std::env::var(ENDPOINT_ENV) {
            if !url.trim().is_empty() {
                self.endpoint_url = url;
            }
        }
        self
    }

    fn embed_url(&self) -> String {
        format!("{}/embed", self.endpoint_url.trim_end_matches('/'))
    }
}

/// Anything that turns payloads into vectors, one per payload, in order.
pub trait Embedder: Send + Sync {
    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f32>>, ProviderError>;

    fn max_batch(&self) -> usize {
        usize::MAX
    }

    fn model_tag(&self) -> &str {
        "default"
    }
}

struct Cache {
    dim: Option<usize>,
    keys: Vec<String>,
    vectors: HashMap<String, Vec<f32>>,
}

impl Cache {
    fn load(path: Option<&PathBuf>) -> Result<Self, ProviderError> {
        let mut cache = Cache {
            dim: None,
            keys: Vec::new(),
            vectors: HashMap::new(),
        };
        let Some(path) = path.filter(|p| p.exists()) else {
            return Ok(cache);
        };
        let store = open_store(path).map_err(|e| ProviderError::CacheCorrupt(e.to_string()))?;
        cache.dim = Some(store.dim());
        for (id, v) in store.iter() {
            if id.split(KEY_SEP).count() != 3 {
                return Err(ProviderError::CacheCorrupt(format!("malformed cache key {id:?}")));
            }
            cache.keys.push(id.to_string());
            cache.vectors.insert(id.to_string(), v.to_vec());
        }
        Ok(cache)
    }

    fn persist(&self, path: &PathBuf) -> Result<(), ProviderError> {
        let Some(dim) = self.dim else { return Ok(()) };
        let entries = self
            .keys
            .iter()
            .map(|k| (k.clone(), self.vectors[k].clone()));
        EmbeddingStore::new(dim, entries, false)
            .and_then(|s| s.write(path))
            .map_err(|e| match e {
                StoreError::Io { .. } => ProviderError::Transport(e.to_string()),
                other => ProviderError::CacheCorrupt(other.to_string()),
            })
    }
}

fn cache_key(tag: &str, kind: EmbedKind, payload: &str) -> String {
    format!("{tag}{KEY_SEP}{}{KEY_SEP}{payload}", kind.as_str())
}

/// Blocking HTTP client for the embedding service, with a write-through cache.
pub struct HttpEmbedder {
    cfg: ProviderConfig,
    client: reqwest::blocking::Client,
    cache: Mutex<Cache>,
    network_calls: AtomicUsize,
}

impl HttpEmbedder {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let cache = Cache::load(cfg.cache_path.as_ref())?;
        Ok(HttpEmbedder {
            cfg,
            client,
            cache: Mutex::new(cache),
            network_calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    /// Number of HTTP requests issued so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    fn post(&self, req: &EmbeddingRequest) -> Result<EmbeddingResponse, ProviderError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let mut builder = self.client.post(self.cfg.embed_url()).json(req);
            if let Some(token) = &self.cfg.bearer_token {
                builder = builder.bearer_auth(token);
            }
            let err = match builder.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let body = resp
                            .text()
                            .map_err(|e| ProviderError::Transport(e.to_string()))?;
                        return serde_json::from_str(&body)
                            .map_err(|e| ProviderError::MalformedResponse(e.to_string()));
                    }
                    let body = resp.text().unwrap_or_default();
                    let excerpt: String = body.chars().take(BODY_EXCERPT_LEN).collect();
                    let err = ProviderError::RemoteError {
                        status: status.as_u16(),
                        body: excerpt,
                    };
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(err);
                    }
                    err
                }
                Err(e) if e.is_timeout() => ProviderError::Timeout { attempts: attempt },
                Err(e) if e.is_connect() => ProviderError::Transport(e.to_string()),
                Err(e) => return Err(ProviderError::Transport(e.to_string())),
            };
            if attempt > self.cfg.retries {
                return Err(err);
            }
            let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
            std::thread::sleep(Duration::from_millis(delay));
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f32>>, ProviderError> {
        if req.payloads.is_empty() {
            return Err(ProviderError::EmptyBatch);
        }
        if req.payloads.len() > self.cfg.max_batch {
            return Err(ProviderError::BatchTooLarge {
                size: req.payloads.len(),
                max: self.cfg.max_batch,
            });
        }
        let keys: Vec<String> = req
            .payloads
            .iter()
            .map(|p| cache_key(&req.model_tag, req.kind, p))
            .collect();
        let misses: Vec<usize> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = HashSet::new();
            (0..keys.len())
                .filter(|&i| !cache.vectors.contains_key(&keys[i]) && seen.insert(&keys[i]))
                .collect()
        };

        if !misses.is_empty() {
            let sub = EmbeddingRequest {
                kind: req.kind,
                model_tag: req.model_tag.clone(),
                payloads: misses.iter().map(|&i| req.payloads[i].clone()).collect(),
            };
            let resp = self.post(&sub)?;
            if resp.dim == 0 || resp.vectors.iter().any(|v| v.len() != resp.dim) {
                return Err(ProviderError::DimensionInconsistent(format!(
                    "declared dim {} but vector lengths {:?}",
                    resp.dim,
                    resp.vectors.iter().map(Vec::len).collect::<Vec<_>>()
                )));
            }
            if resp.vectors.len() != sub.payloads.len() {
                return Err(ProviderError::DimensionInconsistent(format!(
                    "{} vectors for {} payloads",
                    resp.vectors.len(),
                    sub.payloads.len()
                )));
            }
            let mut cache = self.cache.lock().expect("cache lock");
            match cache.dim {
                Some(d) if d != resp.dim => {
                    return Err(ProviderError::DimensionInconsistent(format!(
                        "response dim {} differs from cached dim {d}",
                        resp.dim
                    )))
                }
                _ => cache.dim = Some(resp.dim),
            }
            for (&i, v) in misses.iter().zip(resp.vectors) {
                if cache.vectors.insert(keys[i].clone(), v).is_none() {
                    cache.keys.push(keys[i].clone());
                }
            }
            if let Some(path) = &self.cfg.cache_path {
                cache.persist(path)?;
            }
        }

        let cache = self.cache.lock().expect("cache lock");
        Ok(keys.iter().map(|k| cache.vectors[k].clone()).collect())
    }

    fn max_batch(&self) -> usize {
        self.cfg.max_batch
    }

    fn model_tag(&self) -> &str {
        &self.cfg.model_tag
    }
}

/// Looks up every key in `store` and fetches the misses from `provider` in
/// deduplicated batches. Returns vectors for the misses only.
pub fn resolve_missing<'a, I>(
    keys: I,
    store: &EmbeddingStore,
    provider: Option<&dyn Embedder>,
) -> Result<HashMap<String, Vec<f32>>, ProviderError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut seen = HashSet::new();
    let misses: Vec<String> = keys
        .into_iter()
        .filter(|k| !store.contains(k) && seen.insert(*k))
        .map(str::to_string)
        .collect();
    let mut out = HashMap::with_capacity(misses.len());
    if misses.is_empty() {
        return Ok(out);
    }
    let Some(provider) = provider else {
        return Err(ProviderError::UnknownId(misses));
    };
    for chunk in misses.chunks(provider.max_batch().max(1)) {
        let req = EmbeddingRequest {
            kind: EmbedKind::Text,
            model_tag: provider.model_tag().to_string(),
            payloads: chunk.to_vec(),
        };
        let vectors = provider.embed(&req)?;
        if vectors.len() != chunk.len() {
            return Err(ProviderError::DimensionInconsistent(format!(
                "{} vectors for {} payloads",
                vectors.len(),
                chunk.len()
            )));
        }
        for (k, v) in chunk.iter().zip(vectors) {
            if v.len() != store.dim() {
                return Err(ProviderError::DimensionInconsistent(format!(
                    "provider returned dim {} for {k:?}, store dim is {}",
                    v.len(),
                    store.dim()
                )));
            }
            out.insert(k.clone(), v);
        }
    }
    Ok(out)
}

/// One vector per unit, keyed by the unit's lowercased surface.
pub fn resolve_unit_embeddings(
    units: &[TextUnit],
    store: &EmbeddingStore,
    provider: Option<&dyn Embedder>,
) -> Result<Vec<Vec<f32>>, ProviderError> {
    let keys: Vec<String> = units.iter().map(TextUnit::scoring_text).collect();
    let fetched = resolve_missing(keys.iter().map(String::as_str), store, provider)?;
    Ok(keys
        .iter()
        .map(|k| {
            store
                .try_get(k)
                .map(<[f32]>::to_vec)
                .unwrap_or_else(|| fetched[k].clone())
        })
        .collect())
}
