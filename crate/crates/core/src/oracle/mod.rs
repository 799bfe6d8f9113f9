//! Prediction and generation oracles behind a small HTTP protocol.
//!
//! ```text
//! POST /v1/predict   {"input": str}                                  -> {"label": str, "rationale": str|null}
//! POST /v1/generate  {"prompt", "n", "temperature", "top_p", "max_tokens", "seed"} -> {"completions": [str]}
//! GET  /healthz                                                      -> {"status": "ok"}
//! ```

mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{ApiShape, HttpOracle, OracleEndpoint, TOKEN_ENV};
pub use mock::{MockOracle, PredictFn};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    #[serde(default)]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub n: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP status {status} after {attempts} attempt(s): {body}")]
    Status { attempts: u32, status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("mock has no answer for input {0:?}")]
    Unscripted(String),
}

/// A model reachable through the oracle protocol.
pub trait Oracle: Sync {
    fn predict(&self, input: &str) -> Result<Prediction, OracleError>;
    fn generate(&self, request: &GenerateRequest) -> Result<Vec<String>, OracleError>;
    fn health(&self) -> Result<(), OracleError> {
        Ok(())
    }
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn predict(&self, input: &str) -> Result<Prediction, OracleError> {
        (**self).predict(input)
    }
    fn generate(&self, request: &GenerateRequest) -> Result<Vec<String>, OracleError> {
        (**self).generate(request)
    }
    fn health(&self) -> Result<(), OracleError> {
        (**self).health()
    }
}

pub(crate) fn check_request(request: &GenerateRequest) -> Result<(), OracleError> {
    if request.n == 0 {
        return Err(OracleError::Precondition("n must be at least 1".into()));
    }
    Ok(())
}

/// Applies `f` to every item with at most `max_in_flight` calls running at
/// once. Results come back in input order.
pub fn map_bounded<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = max_in_flight.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..items.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_bounded_preserves_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = map_bounded(&items, 7, |x| {
            std::thread::sleep(std::time::Duration::from_micros((50 - x) * 20));
            x * 2
        });
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(map_bounded(&Vec::<u8>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn request_wire_fields() {
        let r = GenerateRequest {
            prompt: "p".into(),
            n: 5,
            temperature: 0.7,
            top_p: 1.0,
            max_tokens: 64,
            seed: None,
        };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["n"], 5);
        assert_eq!(v["temperature"], 0.7);
        assert!(v["seed"].is_null());
    }
}
