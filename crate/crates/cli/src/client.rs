//! Minimal blocking client for the server's JSON API.

use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct ApiClient {
    base: String,
    agent: ureq::Agent,
}

impl ApiClient {
    pub fn new(base: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        ApiClient {
            base: base.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn finish(
        what: String,
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<String> {
        let mut resp = resp.with_context(|| what.clone())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .with_context(|| what.clone())?;
        if !(200..300).contains(&status) {
            bail!("{what}: status {status}: {body}");
        }
        Ok(body)
    }

    pub fn get_text(&self, path: &str) -> Result<String> {
        let url = format!("{}{path}", self.base);
        Self::finish(format!("GET {url}"), self.agent.get(&url).call())
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let text = self.get_text(path)?;
        serde_json::from_str(&text).with_context(|| format!("decoding response of GET {path}"))
    }

    pub fn put<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let text = Self::finish(format!("PUT {url}"), self.agent.put(&url).send_json(body))?;
        serde_json::from_str(&text).with_context(|| format!("decoding response of PUT {path}"))
    }

    pub fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let text = Self::finish(format!("POST {url}"), self.agent.post(&url).send_json(body))?;
        serde_json::from_str(&text).with_context(|| format!("decoding response of POST {path}"))
    }
}
