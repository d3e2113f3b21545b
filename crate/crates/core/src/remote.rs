//! Client for the `/embed` service.
//!
//! Request: `{"kind": "clip_text" | "clip_image" | "dino_image", "payload": <text or base64 image>}`.
//! Response: `{"dim": N, "values": [..N decimals..]}`.

use std::path::Path;
use std::thread;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EmbeddingStore, Embeddings};
use crate::types::{EditSequence, EmbeddingVector, SyntheticSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedKind {
    ClipText,
    ClipImage,
    DinoImage,
}

#[derive(Debug, Clone)]
pub enum Payload<'a> {
    Text(&'a str),
    Image(&'a [u8]),
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    kind: EmbedKind,
    payload: std::borrow::Cow<'a, str>,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    dim: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RemoteOptions {
    /// Retries after the first attempt.
    pub retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Serializes the request body exactly as sent on the wire.
pub fn encode_request(kind: EmbedKind, payload: &Payload<'_>) -> Vec<u8> {
    let payload = match payload {
        Payload::Text(t) => std::borrow::Cow::Borrowed(*t),
        Payload::Image(bytes) => {
            std::borrow::Cow::Owned(base64::engine::general_purpose::STANDARD.encode(bytes))
        }
    };
    serde_json::to_vec(&EmbedRequest { kind, payload }).expect("request serializes")
}

/// Parses a response body into a vector keyed by `key`.
pub fn decode_response(key: &str, body: &[u8], expected_dim: Option<usize>) -> Result<EmbeddingVector> {
    let resp: EmbedResponse = serde_json::from_slice(body)
        .map_err(|e| Error::Format(format!("bad /embed response: {e}")))?;
    if resp.values.len() != resp.dim {
        return Err(Error::Format(format!(
            "response declares dim {} but carries {} values",
            resp.dim,
            resp.values.len()
        )));
    }
    if let Some(expected) = expected_dim {
        if expected != resp.dim {
            return Err(Error::DimensionMismatch {
                expected,
                actual: resp.dim,
            });
        }
    }
    EmbeddingVector::new(key, resp.values.iter().map(|&v| v as f32).collect())
}

#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    options: RemoteOptions,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, options: RemoteOptions) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            options,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Fetches one embedding. Transport failures and 5xx responses are
    /// retried; any other non-200 status fails immediately.
    pub fn fetch(
        &self,
        key: &str,
        kind: EmbedKind,
        payload: &Payload<'_>,
        expected_dim: Option<usize>,
    ) -> Result<EmbeddingVector> {
        let url = format!("{}/embed", self.endpoint);
        let body = encode_request(kind, payload);
        let mut attempts = 0;
        let reason = loop {
            attempts += 1;
            let result = self
                .agent
                .post(&url)
                .header("content-type", "application/json")
                .send(&body[..]);
            let retryable_reason = match result {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let bytes = resp
                        .body_mut()
                        .read_to_vec()
                        .map_err(|e| self.unavailable(attempts, e.to_string()))?;
                    match status {
                        200 => return decode_response(key, &bytes, expected_dim),
                        500..=599 => format!("status {status}"),
                        _ => {
                            return Err(self.unavailable(
                                attempts,
                                format!("status {status}: {}", String::from_utf8_lossy(&bytes)),
                            ))
                        }
                    }
                }
                Err(e) => e.to_string(),
            };
            if attempts > self.options.retries {
                break retryable_reason;
            }
            thread::sleep(self.options.backoff * attempts);
        };
        Err(self.unavailable(attempts, reason))
    }

    fn unavailable(&self, attempts: u32, reason: String) -> Error {
        Error::ProviderUnavailable {
            endpoint: self.endpoint.clone(),
            attempts,
            reason,
        }
    }

    /// Builds in-memory stores for every key a synthetic manifest references.
    /// Image keys are file paths relative to `base_dir`; prompt keys are
    /// embedded from the prompt text on the sample.
    pub fn materialize_synthetic(&self, samples: &[SyntheticSample], base_dir: &Path) -> Result<Embeddings> {
        let mut b = Materializer::default();
        for s in samples {
            for key in [&s.input_key, &s.gt_key, &s.candidate_key] {
                b.image(self, key, base_dir)?;
            }
            b.text(self, &s.input_prompt_key, &s.input_prompt)?;
            b.text(self, &s.target_prompt_key, &s.target_prompt)?;
        }
        b.finish()
    }

    pub fn materialize_sequences(&self, sequences: &[EditSequence], base_dir: &Path) -> Result<Embeddings> {
        let mut b = Materializer::default();
        for s in sequences {
            for key in &s.image_keys {
                b.image(self, key, base_dir)?;
            }
        }
        b.finish()
    }
}

#[derive(Default)]
struct Materializer {
    clip: Option<EmbeddingStore>,
    dino: Option<EmbeddingStore>,
}

impl Materializer {
    fn put(slot: &mut Option<EmbeddingStore>, v: EmbeddingVector) -> Result<()> {
        if slot.is_none() {
            *slot = Some(EmbeddingStore::new(v.dim())?);
        }
        slot.as_mut().expect("initialized").insert(v)
    }

    fn dim(slot: &Option<EmbeddingStore>) -> Option<usize> {
        slot.as_ref().map(EmbeddingStore::dim)
    }

    fn image(&mut self, remote: &RemoteProvider, key: &str, base_dir: &Path) -> Result<()> {
        let clip_done = self.clip.as_ref().is_some_and(|s| s.contains(key));
        let dino_done = self.dino.as_ref().is_some_and(|s| s.contains(key));
        if clip_done && dino_done {
            return Ok(());
        }
        let path = base_dir.join(key);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if !clip_done {
            let v = remote.fetch(key, EmbedKind::ClipImage, &Payload::Image(&bytes), Self::dim(&self.clip))?;
            Self::put(&mut self.clip, v)?;
        }
        if !dino_done {
            let v = remote.fetch(key, EmbedKind::DinoImage, &Payload::Image(&bytes), Self::dim(&self.dino))?;
            Self::put(&mut self.dino, v)?;
        }
        Ok(())
    }

    fn text(&mut self, remote: &RemoteProvider, key: &str, text: &str) -> Result<()> {
        if self.clip.as_ref().is_some_and(|s| s.contains(key)) {
            return Ok(());
        }
        let v = remote.fetch(key, EmbedKind::ClipText, &Payload::Text(text), Self::dim(&self.clip))?;
        Self::put(&mut self.clip, v)
    }

    fn finish(self) -> Result<Embeddings> {
        match (self.clip, self.dino) {
            (Some(c), Some(d)) => Ok(Embeddings::new(c, d)),
            (Some(c), None) => {
                let dim = c.dim();
                Ok(Embeddings::new(c, EmbeddingStore::new(dim)?))
            }
            _ => Err(Error::EmptyInput("manifest references no embeddings".into())),
        }
    }
}
