//! Client for the common `/embeddings` JSON protocol.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{EmbeddingMatrix, Field};
use crate::corpus::ConstructSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsEndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: String,
    pub batch_size: usize,
    /// Per-request timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    /// Delay before the first retry, doubled on each further retry.
    #[serde(default = "default_backoff")]
    pub initial_backoff: f64,
}

fn default_backoff() -> f64 {
    0.5
}

impl EmbeddingsEndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.timeout > 0.0) {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if !(self.initial_backoff >= 0.0) {
            return Err(Error::Config("initial_backoff must be non-negative".into()));
        }
        Ok(())
    }

    pub fn endpoint(&self) -> String {
        format!("{}/embeddings", self.base_url.trim_end_matches('/'))
    }
}

/// Moves one JSON request to the endpoint and returns the decoded JSON reply.
///
/// Any error is treated as retryable by [`fetch_embeddings_with`].
pub trait EmbeddingTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<Value, String>;
}

#[cfg(feature = "http")]
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpTransport;

#[cfg(feature = "http")]
impl EmbeddingTransport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<Value, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let mut request = agent.post(url);
        if let Some(token) = bearer {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(body).map_err(|e| e.to_string())?;
        response
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| e.to_string())
    }
}

#[derive(Deserialize)]
struct Response {
    data: Vec<Item>,
}

#[derive(Deserialize)]
struct Item {
    index: usize,
    embedding: Vec<f32>,
}

/// Fetches one field's embeddings over HTTP.
#[cfg(feature = "http")]
pub fn fetch_embeddings(
    cfg: &EmbeddingsEndpointConfig,
    set: &ConstructSet,
    field: Field,
) -> Result<EmbeddingMatrix> {
    fetch_embeddings_with(&HttpTransport, cfg, set, field)
}

#[cfg(not(feature = "http"))]
pub fn fetch_embeddings(
    _cfg: &EmbeddingsEndpointConfig,
    _set: &ConstructSet,
    _field: Field,
) -> Result<EmbeddingMatrix> {
    Err(Error::Transport("built without the `http` feature".into()))
}

/// Fetches one row per construct in set order, batching requests.
///
/// Empty definitions are sent as the construct name.
pub fn fetch_embeddings_with<T: EmbeddingTransport + ?Sized>(
    transport: &T,
    cfg: &EmbeddingsEndpointConfig,
    set: &ConstructSet,
    field: Field,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let token = std::env::var(&cfg.api_key_env).ok().filter(|t| !t.is_empty());
    let timeout = Duration::from_secs_f64(cfg.timeout);
    let url = cfg.endpoint();
    let texts: Vec<&str> = set
        .iter()
        .map(|c| match field {
            Field::Name => c.name.as_str(),
            Field::Definition if c.definition.trim().is_empty() => c.name.as_str(),
            Field::Definition => c.definition.as_str(),
        })
        .collect();

    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    for (batch_no, batch) in texts.chunks(cfg.batch_size).enumerate() {
        let body = json!({ "model": cfg.model, "input": batch });
        let reply = post_with_retries(transport, cfg, &url, token.as_deref(), &body, timeout)?;
        let response: Response = serde_json::from_value(reply)
            .map_err(|e| Error::Protocol(format!("batch {batch_no}: {e}")))?;
        let mut rows: Vec<Option<Vec<f32>>> = vec![None; batch.len()];
        for item in response.data {
            let slot = rows.get_mut(item.index).ok_or_else(|| {
                Error::Protocol(format!(
                    "batch {batch_no}: index {} outside a batch of {}",
                    item.index,
                    batch.len()
                ))
            })?;
            if slot.replace(item.embedding).is_some() {
                return Err(Error::Protocol(format!(
                    "batch {batch_no}: index {} returned twice",
                    item.index
                )));
            }
        }
        for (i, row) in rows.into_iter().enumerate() {
            let row = row.ok_or_else(|| {
                Error::Protocol(format!("batch {batch_no}: no embedding for index {i}"))
            })?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Protocol(format!(
                        "embedding dimension changed from {d} to {}",
                        row.len()
                    )))
                }
                Some(_) => {}
            }
            data.extend(row);
        }
    }
    let ids = set.ids().map(str::to_string).collect();
    EmbeddingMatrix::new(field, ids, dim.unwrap_or(1), data)
}

fn post_with_retries<T: EmbeddingTransport + ?Sized>(
    transport: &T,
    cfg: &EmbeddingsEndpointConfig,
    url: &str,
    token: Option<&str>,
    body: &Value,
    timeout: Duration,
) -> Result<Value> {
    let mut backoff = cfg.initial_backoff;
    let mut last = String::new();
    for attempt in 0..=cfg.max_retries {
        if attempt > 0 && backoff > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(backoff));
            backoff *= 2.0;
        }
        match transport.post_json(url, token, body, timeout) {
            Ok(v) => return Ok(v),
            Err(e) => last = e,
        }
    }
    Err(Error::Transport(format!(
        "{url} failed after {} attempts: {last}",
        cfg.max_retries + 1
    )))
}
