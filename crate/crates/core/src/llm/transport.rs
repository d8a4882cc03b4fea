use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_parallel() -> usize {
    4
}
fn default_backoff() -> u64 {
    500
}
fn default_backoff_max() -> u64 {
    20_000
}

/// Where and how to reach a remote endpoint. `url` is the full POST target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default)]
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_backoff_max")]
    pub backoff_max_ms: u64,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_parallel: default_parallel(),
            backoff_base_ms: default_backoff(),
            backoff_max_ms: default_backoff_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be at least 1".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return Err(Error::Config(format!("endpoint url {:?} is not http(s)", self.url)));
        }
        Ok(())
    }

    fn token(&self) -> Result<Option<String>> {
        match &self.token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Config(format!("environment variable {var} is not set"))),
        }
    }

    /// Delay before retry number `attempt` (1-based): exponential with
    /// jitter in [50%, 100%] of the capped value.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = self.backoff_base_ms.saturating_mul(1u64 << attempt.saturating_sub(1).min(20));
        let capped = exp.min(self.backoff_max_ms);
        let jitter = rand::rng().random_range(0.5..=1.0);
        Duration::from_millis((capped as f64 * jitter) as u64)
    }
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    kind: &'a str,
    key: &'a str,
    attempt: u32,
    request: &'a Value,
    status: Option<u16>,
    response: Option<&'a str>,
    error: Option<&'a str>,
    elapsed_ms: u128,
}

/// Append-only JSONL log of every request/response pair.
#[derive(Debug)]
pub struct AuditLog {
    out: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(f)),
        })
    }

    fn write(&self, rec: &AuditRecord<'_>) {
        let line = match serde_json::to_string(rec) {
            Ok(l) => l,
            Err(e) => return log::error!("audit record: {e}"),
        };
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(out, "{line}").and_then(|_| out.flush()) {
            log::error!("audit log write failed: {e}");
        }
    }
}

/// Result of one logical request after retries.
#[derive(Debug)]
pub(crate) struct Exchange {
    pub body: std::result::Result<String, String>,
    pub attempts: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Transport {
    http: reqwest::Client,
    pub config: EndpointConfig,
    token: Option<String>,
    audit: Option<Arc<AuditLog>>,
}

enum Attempt {
    Ok(String),
    Retry(String),
    Fail(String),
}

impl Transport {
    pub fn new(config: EndpointConfig, audit: Option<Arc<AuditLog>>) -> Result<Self> {
        config.validate()?;
        let token = config.token()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;
        Ok(Self {
            http,
            config,
            token,
            audit,
        })
    }

    /// POSTs `body` with retries. Auth rejections abort with `Error::Auth`;
    /// everything else ends in `Exchange::body` being `Ok` or `Err(reason)`.
    pub async fn post(&self, kind: &str, key: &str, body: &Value) -> Result<Exchange> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = Instant::now();
            let mut req = self.http.post(&self.config.url).json(body);
            if let Some(t) = &self.token {
                req = req.bearer_auth(t);
            }
            let (status, outcome) = match req.send().await {
                Err(e) => {
                    let retry = e.is_timeout() || e.is_connect() || e.is_request();
                    let msg = e.to_string();
                    (None, if retry { Attempt::Retry(msg) } else { Attempt::Fail(msg) })
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().await;
                    let outcome = match (status, text) {
                        (401 | 403, _) => {
                            self.log(kind, key, attempt, body, Some(status), None, Some("auth"), started);
                            return Err(Error::Auth(status));
                        }
                        (_, Err(e)) => Attempt::Retry(e.to_string()),
                        (200..=299, Ok(t)) => Attempt::Ok(t),
                        (429 | 500..=599, Ok(t)) => Attempt::Retry(format!("HTTP {status}: {t}")),
                        (_, Ok(t)) => Attempt::Fail(format!("HTTP {status}: {t}")),
                    };
                    (Some(status), outcome)
                }
            };
            match outcome {
                Attempt::Ok(text) => {
                    self.log(kind, key, attempt, body, status, Some(&text), None, started);
                    return Ok(Exchange {
                        body: Ok(text),
                        attempts: attempt,
                    });
                }
                Attempt::Retry(msg) if attempt <= self.config.max_retries => {
                    self.log(kind, key, attempt, body, status, None, Some(&msg), started);
                    log::debug!("{kind} {key}: attempt {attempt} failed ({msg}), retrying");
                    tokio::time::sleep(self.config.backoff(attempt)).await;
                }
                Attempt::Retry(msg) | Attempt::Fail(msg) => {
                    self.log(kind, key, attempt, body, status, None, Some(&msg), started);
                    return Ok(Exchange {
                        body: Err(msg),
                        attempts: attempt,
                    });
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &self,
        kind: &str,
        key: &str,
        attempt: u32,
        request: &Value,
        status: Option<u16>,
        response: Option<&str>,
        error: Option<&str>,
        started: Instant,
    ) {
        if let Some(a) = &self.audit {
            a.write(&AuditRecord {
                kind,
                key,
                attempt,
                request,
                status,
                response,
                error,
                elapsed_ms: started.elapsed().as_millis(),
            });
        }
    }
}

/// Runs a future to completion on a fresh multi-threaded runtime.
pub fn block_on<F: std::future::Future>(fut: F) -> Result<F::Output> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    Ok(rt.block_on(fut))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_bounded_and_grows() {
        let mut c = EndpointConfig::new("http://x", "m");
        c.backoff_base_ms = 100;
        c.backoff_max_ms = 1000;
        for attempt in 1..10 {
            let d = c.backoff(attempt).as_millis() as u64;
            let cap = (100u64 << (attempt - 1)).min(1000);
            assert!(d >= cap / 2 && d <= cap, "attempt {attempt}: {d}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = EndpointConfig::new("http://x", "m");
        assert!(c.validate().is_ok());
        c.max_parallel = 0;
        assert!(c.validate().is_err());
        let c = EndpointConfig::new("ftp://x", "m");
        assert!(c.validate().is_err());
        let c: EndpointConfig = toml::from_str("url = \"http://h/v1\"\nmodel = \"m\"").unwrap();
        assert_eq!((c.max_parallel, c.max_retries), (4, 3));
    }
}
