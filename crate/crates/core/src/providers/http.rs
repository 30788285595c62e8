//! JSON-over-HTTP clients for OpenAI-style chat and embedding endpoints and
//! a Cohere-style rerank endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{ChatProvider, ChatRequest, EmbeddingProvider, ProviderError, RerankProvider};

const ERROR_BODY_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub url: String,
    pub model: String,
    /// Sent as a bearer token when present.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key,
            timeout_secs: default_timeout(),
        }
    }

    fn agent(&self) -> Agent {
        Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(self.timeout_secs)))
            .build()
            .into()
    }
}

fn map_error(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => ProviderError::Unreachable(e.to_string()),
        ureq::Error::Io(ref io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::ConnectionRefused | std::io::ErrorKind::ConnectionReset | std::io::ErrorKind::NotConnected
            ) =>
        {
            ProviderError::Unreachable(e.to_string())
        }
        other => ProviderError::Transport(other.to_string()),
    }
}

fn post_json(agent: &Agent, endpoint: &HttpEndpoint, body: &Value) -> Result<Value, ProviderError> {
    let mut req = agent.post(&endpoint.url).header("Content-Type", "application/json");
    if let Some(key) = &endpoint.api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(map_error)?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(map_error)?;
    if status >= 400 {
        let mut body = text;
        if body.len() > ERROR_BODY_LIMIT {
            let mut cut = ERROR_BODY_LIMIT;
            while !body.is_char_boundary(cut) {
                cut -= 1;
            }
            body.truncate(cut);
        }
        return Err(ProviderError::Status { status, body });
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::Protocol(format!("response is not JSON: {e}")))
}

/// `{model, messages, temperature, max_tokens}` → `choices[0].message.content`.
pub struct HttpChatProvider {
    endpoint: HttpEndpoint,
    agent: Agent,
}

impl HttpChatProvider {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        let agent = endpoint.agent();
        Self { endpoint, agent }
    }
}

impl ChatProvider for HttpChatProvider {
    fn name(&self) -> &str {
        &self.endpoint.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.endpoint.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let v = post_json(&self.agent, &self.endpoint, &body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Protocol("missing choices[0].message.content".into()))
    }
}

/// `{model, input: [texts]}` → `data[].embedding`, reordered by `index` when present.
pub struct HttpEmbeddingProvider {
    endpoint: HttpEndpoint,
    agent: Agent,
    dimension: usize,
    token_budget: usize,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: HttpEndpoint, dimension: usize, token_budget: usize) -> Self {
        let agent = endpoint.agent();
        Self {
            endpoint,
            agent,
            dimension,
            token_budget,
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn name(&self) -> &str {
        &self.endpoint.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_budget(&self) -> usize {
        self.token_budget
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({"model": self.endpoint.model, "input": texts});
        let v = post_json(&self.agent, &self.endpoint, &body)?;
        let data = v
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Protocol("missing data array".into()))?;
        if data.len() != texts.len() {
            return Err(ProviderError::Protocol(format!("{} embeddings for {} inputs", data.len(), texts.len())));
        }
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let idx = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let emb: Vec<f64> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| ProviderError::Protocol(format!("data[{pos}] has no embedding")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| ProviderError::Protocol("non-numeric embedding value".into())))
                .collect::<Result<_, _>>()?;
            let slot = out
                .get_mut(idx)
                .ok_or_else(|| ProviderError::Protocol(format!("embedding index {idx} out of range")))?;
            *slot = Some(emb);
        }
        out.into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| ProviderError::Protocol(format!("no embedding for input {i}"))))
            .collect()
    }
}

/// `{model, query, documents}` → `results[{index, relevance_score}]`.
pub struct HttpRerankProvider {
    endpoint: HttpEndpoint,
    agent: Agent,
}

impl HttpRerankProvider {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        let agent = endpoint.agent();
        Self { endpoint, agent }
    }
}

impl RerankProvider for HttpRerankProvider {
    fn name(&self) -> &str {
        &self.endpoint.model
    }

    fn score(&self, query: &str, documents: &[&str]) -> Result<Vec<f64>, ProviderError> {
        let body = json!({"model": self.endpoint.model, "query": query, "documents": documents});
        let v = post_json(&self.agent, &self.endpoint, &body)?;
        let results = v
            .get("results")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Protocol("missing results array".into()))?;
        let mut out: Vec<Option<f64>> = vec![None; documents.len()];
        for r in results {
            let idx = r
                .get("index")
                .and_then(Value::as_u64)
                .ok_or_else(|| ProviderError::Protocol("result without index".into()))? as usize;
            let score = r
                .get("relevance_score")
                .and_then(Value::as_f64)
                .ok_or_else(|| ProviderError::Protocol("result without relevance_score".into()))?;
            *out.get_mut(idx)
                .ok_or_else(|| ProviderError::Protocol(format!("result index {idx} out of range")))? = Some(score);
        }
        out.into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| ProviderError::Protocol(format!("no score for document {i}"))))
            .collect()
    }
}
