use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{check_request, GenerateRequest, Oracle, OracleError, Prediction};

/// Environment variable holding the bearer token sent with every request.
pub const TOKEN_ENV: &str = "ORACLE_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiShape {
    /// The `/v1/predict` + `/v1/generate` protocol.
    #[default]
    Native,
    /// A `/v1/completions` endpoint returning `{"choices": [{"text"}]}`.
    Completions,
}

impl std::str::FromStr for ApiShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "native" => Ok(ApiShape::Native),
            "completions" => Ok(ApiShape::Completions),
            other => Err(format!("unknown api shape {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub backoff_base_ms: u64,
    pub shape: ApiShape,
    /// Model name sent in the completion-API shape.
    pub model: Option<String>,
    pub token: Option<String>,
}

impl Default for OracleEndpoint {
    fn default() -> Self {
        OracleEndpoint {
            base_url: String::new(),
            timeout_ms: 30_000,
            max_retries: 3,
            max_in_flight: 8,
            backoff_base_ms: 250,
            shape: ApiShape::Native,
            model: None,
            token: None,
        }
    }
}

impl OracleEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        OracleEndpoint {
            base_url: base_url.into(),
            ..Default::default()
        }
    }

    /// Fills `token` from the environment when unset.
    pub fn with_env_token(mut self) -> Self {
        if self.token.is_none() {
            self.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.max_in_flight < 1 {
            return Err(OracleError::Precondition("max_in_flight must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(OracleError::Precondition(format!(
                "base_url {:?} is not an http(s) URL",
                self.base_url
            )));
        }
        Ok(())
    }
}

struct Gate {
    used: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Gate {
    fn acquire(&self) -> GatePass<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        GatePass(self)
    }
}

struct GatePass<'a>(&'a Gate);

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Blocking HTTP client; shareable across threads.
pub struct HttpOracle {
    endpoint: OracleEndpoint,
    agent: ureq::Agent,
    gate: Gate,
}

enum Failure {
    Retryable(OracleError),
    Fatal(OracleError),
}

impl HttpOracle {
    pub fn new(endpoint: OracleEndpoint) -> Result<Self, OracleError> {
        endpoint.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build();
        let gate = Gate {
            used: Mutex::new(0),
            freed: Condvar::new(),
            limit: endpoint.max_in_flight,
        };
        Ok(HttpOracle { endpoint, agent, gate })
    }

    pub fn endpoint(&self) -> &OracleEndpoint {
        &self.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), path)
    }

    fn once(&self, path: &str, body: Option<&Value>, attempts: u32) -> Result<Value, Failure> {
        let url = self.url(path);
        let mut req = match body {
            Some(_) => self.agent.post(&url),
            None => self.agent.get(&url),
        };
        if let Some(t) = &self.endpoint.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let result = match body {
            Some(b) => req.send_json(b.clone()),
            None => req.call(),
        };
        match result {
            Ok(resp) => resp
                .into_json::<Value>()
                .map_err(|e| Failure::Fatal(OracleError::Malformed(e.to_string()))),
            Err(ureq::Error::Status(status, resp)) => {
                let err = OracleError::Status {
                    attempts,
                    status,
                    body: resp.into_string().unwrap_or_default(),
                };
                if status >= 500 || status == 429 {
                    Err(Failure::Retryable(err))
                } else {
                    Err(Failure::Fatal(err))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Failure::Retryable(OracleError::Transport {
                attempts,
                message: t.to_string(),
            })),
        }
    }

    /// Sends with retries: exponential backoff, full jitter.
    fn request(&self, path: &str, body: Option<&Value>) -> Result<Value, OracleError> {
        let _pass = self.gate.acquire();
        let total = self.endpoint.max_retries + 1;
        let mut attempt = 1;
        loop {
            match self.once(path, body, attempt) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) if attempt >= total => return Err(e),
                Err(Failure::Retryable(_)) => {
                    let cap = self
                        .endpoint
                        .backoff_base_ms
                        .saturating_mul(1u64 << (attempt - 1).min(20));
                    let wait = rand::thread_rng().gen_range(0..=cap);
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
            }
        }
    }

    fn completions(&self, prompt: &str, n: u32, temperature: f64, top_p: f64, max_tokens: u32, seed: Option<u64>) -> Result<Vec<String>, OracleError> {
        let mut body = json!({
            "prompt": prompt,
            "n": n,
            "temperature": temperature,
            "top_p": top_p,
            "max_tokens": max_tokens,
        });
        if let Some(m) = &self.endpoint.model {
            body["model"] = json!(m);
        }
        if let Some(s) = seed {
            body["seed"] = json!(s);
        }
        let v = self.request("/v1/completions", Some(&body))?;
        let choices = v
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| OracleError::Malformed("missing choices array".into()))?;
        let mut out: Vec<(u64, String)> = Vec::with_capacity(choices.len());
        for (pos, c) in choices.iter().enumerate() {
            let text = c
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| OracleError::Malformed("choice without text".into()))?;
            let index = c.get("index").and_then(Value::as_u64).unwrap_or(pos as u64);
            out.push((index, text.to_string()));
        }
        out.sort_by_key(|(i, _)| *i);
        Ok(out.into_iter().map(|(_, t)| t).collect())
    }
}

impl Oracle for HttpOracle {
    fn predict(&self, input: &str) -> Result<Prediction, OracleError> {
        match self.endpoint.shape {
            ApiShape::Native => {
                let v = self.request("/v1/predict", Some(&json!({ "input": input })))?;
                serde_json::from_value(v).map_err(|e| OracleError::Malformed(e.to_string()))
            }
            ApiShape::Completions => {
                let texts = self.completions(input, 1, 0.0, 1.0, 16, None)?;
                let label = texts
                    .into_iter()
                    .next()
                    .ok_or_else(|| OracleError::Malformed("no completion returned".into()))?;
                Ok(Prediction {
                    label: label.trim().to_string(),
                    rationale: None,
                })
            }
        }
    }

    fn generate(&self, r: &GenerateRequest) -> Result<Vec<String>, OracleError> {
        check_request(r)?;
        match self.endpoint.shape {
            ApiShape::Native => {
                let body = serde_json::to_value(r).expect("request serializes");
                let v = self.request("/v1/generate", Some(&body))?;
                #[derive(Deserialize)]
                struct Body {
                    completions: Vec<String>,
                }
                let b: Body =
                    serde_json::from_value(v).map_err(|e| OracleError::Malformed(e.to_string()))?;
                Ok(b.completions)
            }
            ApiShape::Completions => {
                self.completions(&r.prompt, r.n, r.temperature, r.top_p, r.max_tokens, r.seed)
            }
        }
    }

    fn health(&self) -> Result<(), OracleError> {
        let path = match self.endpoint.shape {
            ApiShape::Native => "/healthz",
            ApiShape::Completions => "/v1/models",
        };
        let v = self.request(path, None)?;
        if self.endpoint.shape == ApiShape::Native && v.get("status").and_then(Value::as_str) != Some("ok") {
            return Err(OracleError::Malformed(format!("unexpected health body {v}")));
        }
        Ok(())
    }
}
