use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::transport::{AuditLog, EndpointConfig, Transport};
use crate::error::{Error, Result};

pub const DEFAULT_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    text: String,
    source: String,
    target: String,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    source: String,
    target: String,
    text: String,
    translation: String,
}

#[derive(Deserialize)]
struct TranslateResponse {
    translations: Vec<String>,
}

/// Machine-translation client with a (text, source, target) cache that can
/// be persisted as JSONL.
#[derive(Debug)]
pub struct Translator {
    transport: Transport,
    chunk: usize,
    cache: Mutex<HashMap<Key, String>>,
    cache_file: Option<Mutex<File>>,
    upstream_items: std::sync::atomic::AtomicUsize,
}

impl Translator {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        Ok(Self {
            transport: Transport::new(config, None)?,
            chunk: DEFAULT_CHUNK,
            cache: Mutex::new(HashMap::new()),
            cache_file: None,
            upstream_items: Default::default(),
        })
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Result<Self> {
        self.transport = Transport::new(self.transport.config.clone(), Some(audit))?;
        Ok(self)
    }

    pub fn with_chunk_size(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    /// Loads `path` if it exists and appends new translations to it.
    pub fn with_cache_file(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.exists() {
            let cache = self.cache.get_mut().unwrap_or_else(|e| e.into_inner());
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let c: CacheLine =
                    serde_json::from_str(&line).map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
                cache.insert(
                    Key {
                        text: c.text,
                        source: c.source,
                        target: c.target,
                    },
                    c.translation,
                );
            }
        }
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        self.cache_file = Some(Mutex::new(f));
        Ok(self)
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Number of texts sent upstream so far.
    pub fn upstream_items(&self) -> usize {
        self.upstream_items.load(std::sync::atomic::Ordering::Relaxed)
    }

    /// Order-preserving; `None` marks an item that could not be translated.
    /// Only auth rejections are errors.
    pub async fn translate_batch(&self, texts: &[String], source: &str, target: &str) -> Result<Vec<Option<String>>> {
        let key = |t: &str| Key {
            text: t.to_string(),
            source: source.to_string(),
            target: target.to_string(),
        };
        let mut missing: Vec<&str> = Vec::new();
        {
            let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            let mut seen = std::collections::HashSet::new();
            for t in texts {
                if !cache.contains_key(&key(t)) && seen.insert(t.as_str()) {
                    missing.push(t);
                }
            }
        }
        let chunks: Vec<&[&str]> = missing.chunks(self.chunk).collect();
        let results: Vec<Option<Vec<String>>> = stream::iter(chunks.iter().enumerate())
            .map(|(i, chunk)| self.request(i, chunk, source, target))
            .buffered(self.transport.config.max_parallel)
            .try_collect()
            .await?;
        {
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            for (chunk, out) in chunks.iter().zip(results) {
                let Some(out) = out else { continue };
                for (text, tr) in chunk.iter().zip(out) {
                    self.persist(text, source, target, &tr);
                    cache.insert(key(text), tr);
                }
            }
        }
        let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(texts
            .iter()
            .map(|t| {
                let r = cache.get(&key(t)).cloned();
                if r.is_none() {
                    log::warn!("untranslated ({source}->{target}): {t:?}");
                }
                r
            })
            .collect())
    }

    async fn request(&self, i: usize, chunk: &[&str], source: &str, target: &str) -> Result<Option<Vec<String>>> {
        self.upstream_items
            .fetch_add(chunk.len(), std::sync::atomic::Ordering::Relaxed);
        let body = json!({ "q": chunk, "source": source, "target": target });
        let ex = self.transport.post("translate", &format!("chunk-{i}"), &body).await?;
        let parsed = ex.body.and_then(|t| {
            let r: TranslateResponse = serde_json::from_str(&t).map_err(|e| e.to_string())?;
            if r.translations.len() != chunk.len() {
                return Err(format!("expected {} translations, got {}", chunk.len(), r.translations.len()));
            }
            Ok(r.translations)
        });
        match parsed {
            Ok(v) => Ok(Some(v)),
            Err(e) => {
                log::warn!("translation chunk {i} failed: {e}");
                Ok(None)
            }
        }
    }

    fn persist(&self, text: &str, source: &str, target: &str, translation: &str) {
        let Some(f) = &self.cache_file else { return };
        let line = CacheLine {
            source: source.into(),
            target: target.into(),
            text: text.into(),
            translation: translation.into(),
        };
        let mut f = f.lock().unwrap_or_else(|e| e.into_inner());
        let res = serde_json::to_string(&line)
            .map_err(std::io::Error::other)
            .and_then(|l| writeln!(f, "{l}"));
        if let Err(e) = res {
            log::error!("translation cache write failed: {e}");
        }
    }
}

/// Path-typed convenience for callers that keep a cache next to outputs.
pub fn default_cache_path(dir: impl AsRef<Path>, source: &str, target: &str) -> PathBuf {
    dir.as_ref().join(format!("translations.{source}-{target}.jsonl"))
}
