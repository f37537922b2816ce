//! Thin async client for the pgsynth service.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use pgsynth_api::{ErrorBody, GenCsRequest, GenCsResponse, Health, RunRequest, RunResponse, BUILD, GEN_CS, HEALTH, SOLVE};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach the service: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error body.
    #[error("{body}")]
    Api { status: u16, body: ErrorBody },
}

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    /// Like [`Client::new`] but ignores proxy settings; for services on this machine.
    pub fn direct(base: impl Into<String>) -> Self {
        let http = reqwest::Client::builder().no_proxy().build().unwrap_or_default();
        Client { base: base.into().trim_end_matches('/').to_string(), http }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        let resp = self.http.get(format!("{}{HEALTH}", self.base)).send().await?;
        decode(resp).await
    }

    pub async fn gen_cs(&self, n: usize) -> Result<String, ClientError> {
        let r: GenCsResponse = self.post(GEN_CS, &GenCsRequest { n }).await?;
        Ok(r.model)
    }

    /// Builds the game without solving it.
    pub async fn build(&self, req: &RunRequest) -> Result<RunResponse, ClientError> {
        self.post(BUILD, req).await
    }

    /// Builds and solves; synthesizes a strategy when requested and realizable.
    pub async fn solve(&self, req: &RunRequest) -> Result<RunResponse, ClientError> {
        self.post(SOLVE, req).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        decode(resp).await
    }
}

async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp.json().await?);
    }
    let text = resp.text().await?;
    let body = serde_json::from_str::<ErrorBody>(&text).unwrap_or_else(|_| ErrorBody {
        kind: if status.is_server_error() { pgsynth_api::ErrorKind::Internal } else { pgsynth_api::ErrorKind::Input },
        stage: None,
        message: format!("HTTP {status}: {text}"),
        partial_stats: None,
    });
    Err(ClientError::Api { status: status.as_u16(), body })
}
