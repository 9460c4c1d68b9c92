use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;

use super::{ChatRequest, Transport, TransportError};
use crate::corpus::Dataset;
use crate::rng::{sha256_hex, unit_from_key};

/// How a [`MockTransport`] answers.
#[derive(Debug, Clone)]
pub enum MockRule {
    /// Reply keyed by the SHA-256 hex of the prompt text. Unscripted
    /// prompts fail without retry.
    Script(HashMap<String, String>),
    /// Reply keyed by the query text of a classification prompt, i.e. the
    /// text between the last `Text: ` and the closing `\n\nLabel: `.
    /// Unknown queries fail without retry.
    QueryLookup(HashMap<String, String>),
    /// Echo the gold label, except that each gold label is replaced by
    /// another with the configured probabilities. Draws depend only on
    /// `(seed, query)`.
    NoisyEcho {
        gold: HashMap<String, String>,
        confusions: HashMap<String, Vec<(String, f64)>>,
        seed: u64,
    },
    /// A label drawn uniformly, depending only on `(seed, prompt)`.
    Uniform { labels: Vec<String>, seed: u64 },
    /// The same reply for every prompt.
    Fixed(String),
}

impl MockRule {
    /// Answers every query in `datasets` with its gold label.
    pub fn gold_echo<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> Self {
        Self::QueryLookup(gold_map(datasets))
    }

    pub fn noisy_echo<'a>(
        datasets: impl IntoIterator<Item = &'a Dataset>,
        confusions: impl IntoIterator<Item = (String, Vec<(String, f64)>)>,
        seed: u64,
    ) -> Self {
        Self::NoisyEcho {
            gold: gold_map(datasets),
            confusions: confusions.into_iter().collect(),
            seed,
        }
    }

    pub fn script<K: AsRef<str>, V: Into<String>>(prompt_replies: impl IntoIterator<Item = (K, V)>) -> Self {
        Self::Script(
            prompt_replies
                .into_iter()
                .map(|(prompt, reply)| (sha256_hex(prompt.as_ref().as_bytes()), reply.into()))
                .collect(),
        )
    }

    fn reply(&self, prompt: &str) -> Result<String, TransportError> {
        let unscripted = || TransportError::fatal(None, "mock has no reply for this prompt");
        match self {
            Self::Script(map) => map.get(&sha256_hex(prompt.as_bytes())).cloned().ok_or_else(unscripted),
            Self::QueryLookup(map) => lookup_query(prompt, map).map(|(_, v)| v.clone()).ok_or_else(unscripted),
            Self::NoisyEcho { gold, confusions, seed } => {
                let (query, label) = lookup_query(prompt, gold).ok_or_else(unscripted)?;
                let u = unit_from_key(*seed, query);
                let mut acc = 0.0;
                for (to, rate) in confusions.get(label).into_iter().flatten() {
                    acc += rate;
                    if u < acc {
                        return Ok(to.clone());
                    }
                }
                Ok(label.clone())
            }
            Self::Uniform { labels, seed } => {
                if labels.is_empty() {
                    return Err(unscripted());
                }
                let i = (unit_from_key(*seed, prompt) * labels.len() as f64) as usize;
                Ok(labels[i.min(labels.len() - 1)].clone())
            }
            Self::Fixed(reply) => Ok(reply.clone()),
        }
    }
}

fn gold_map<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> HashMap<String, String> {
    datasets
        .into_iter()
        .flat_map(|d| d.examples())
        .map(|e| (e.text.clone(), e.gold.clone()))
        .collect()
}

fn lookup_query<'p, 'm>(prompt: &'p str, map: &'m HashMap<String, String>) -> Option<(&'p str, &'m String)> {
    let body = prompt.strip_suffix("\n\nLabel: ").unwrap_or(prompt);
    body.rmatch_indices("Text: ")
        .map(|(at, marker)| &body[at + marker.len()..])
        .find_map(|query| map.get(query).map(|v| (query, v)))
}

/// In-process transport driven by a [`MockRule`], with call counting and
/// in-flight instrumentation.
#[derive(Debug)]
pub struct MockTransport {
    rule: MockRule,
    delay: Option<Duration>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl MockTransport {
    pub fn new(rule: MockRule) -> Self {
        Self {
            rule,
            delay: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Holds every call open for `delay`, so overlapping calls are visible.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    /// Prompts received so far, in arrival order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }
}

#[async_trait]
impl Transport for MockTransport {
    async fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        self.prompts
            .lock()
            .expect("prompt log poisoned")
            .push(request.prompt().to_owned());
        if let Some(delay) = self.delay {
            tokio::time::sleep(delay).await;
        }
        let reply = self.rule.reply(request.prompt());
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        reply
    }
}

/// Fails the first `failures` calls with `status`, then delegates.
pub struct FlakyTransport {
    inner: Arc<dyn Transport>,
    remaining: AtomicU32,
    status: u16,
    calls: AtomicUsize,
}

impl FlakyTransport {
    pub fn new(inner: Arc<dyn Transport>, failures: u32, status: u16) -> Self {
        Self {
            inner,
            remaining: AtomicU32::new(failures),
            status,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Transport for FlakyTransport {
    async fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let failing = self
            .remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if failing {
            return Err(TransportError::from_status(self.status, "injected failure"));
        }
        self.inner.send(request).await
    }
}
