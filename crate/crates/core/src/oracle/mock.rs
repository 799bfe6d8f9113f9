//! In-process oracle with scripted answers and request instrumentation.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::{check_request, GenerateRequest, Oracle, OracleError, Prediction};

pub type PredictFn = Box<dyn Fn(&str) -> Option<String> + Send + Sync>;
type GenerateFn = Box<dyn Fn(&GenerateRequest) -> Vec<String> + Send + Sync>;

pub struct MockOracle {
    answers: HashMap<String, String>,
    fallback: Option<PredictFn>,
    generator: Option<GenerateFn>,
    delay: Duration,
    fail_first: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    requests: Mutex<Vec<GenerateRequest>>,
    inputs: Mutex<Vec<String>>,
}

impl Default for MockOracle {
    fn default() -> Self {
        MockOracle {
            answers: HashMap::new(),
            fallback: None,
            generator: None,
            delay: Duration::ZERO,
            fail_first: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
            inputs: Mutex::new(Vec::new()),
        }
    }
}

impl MockOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_answers<K: Into<String>, V: Into<String>>(
        mut self,
        answers: impl IntoIterator<Item = (K, V)>,
    ) -> Self {
        self.answers
            .extend(answers.into_iter().map(|(k, v)| (k.into(), v.into())));
        self
    }

    /// Answers inputs missing from the table.
    pub fn with_fallback(mut self, f: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.fallback = Some(Box::new(f));
        self
    }

    pub fn constant(label: &str) -> Self {
        let label = label.to_string();
        Self::new().with_fallback(move |_| Some(label.clone()))
    }

    pub fn with_completions<S: Into<String>>(self, completions: impl IntoIterator<Item = S>) -> Self {
        let fixed: Vec<String> = completions.into_iter().map(Into::into).collect();
        self.with_generator(move |_| fixed.clone())
    }

    pub fn with_generator(
        mut self,
        f: impl Fn(&GenerateRequest) -> Vec<String> + Send + Sync + 'static,
    ) -> Self {
        self.generator = Some(Box::new(f));
        self
    }

    /// Sleeps this long inside each call, so concurrency is observable.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// The first `k` calls fail with a transport error.
    pub fn failing_first(self, k: usize) -> Self {
        self.fail_first.store(k, Ordering::SeqCst);
        self
    }

    pub fn max_observed_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn generate_requests(&self) -> Vec<GenerateRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn predict_inputs(&self) -> Vec<String> {
        self.inputs.lock().unwrap().clone()
    }

    fn enter(&self) -> Result<InFlight<'_>, OracleError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        let guard = InFlight(&self.in_flight);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let failing = self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |k| k.checked_sub(1))
            .is_ok();
        if failing {
            return Err(OracleError::Transport {
                attempts: 1,
                message: "scripted failure".into(),
            });
        }
        Ok(guard)
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Oracle for MockOracle {
    fn predict(&self, input: &str) -> Result<Prediction, OracleError> {
        let _g = self.enter()?;
        self.inputs.lock().unwrap().push(input.to_string());
        let label = self
            .answers
            .get(input)
            .cloned()
            .or_else(|| self.fallback.as_ref().and_then(|f| f(input)))
            .ok_or_else(|| OracleError::Unscripted(input.to_string()))?;
        Ok(Prediction {
            label,
            rationale: None,
        })
    }

    fn generate(&self, request: &GenerateRequest) -> Result<Vec<String>, OracleError> {
        check_request(request)?;
        let _g = self.enter()?;
        self.requests.lock().unwrap().push(request.clone());
        Ok(self.generator.as_ref().map(|g| g(request)).unwrap_or_default())
    }
}
