//! Request statistics with bounded memory: latency quantiles over a fixed
//! 1024-request ring and throughput over the trailing 60 seconds.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

const RING_CAPACITY: usize = 1024;
const THROUGHPUT_WINDOW_S: f64 = 60.0;

pub struct StatsCollector {
    started: Instant,
    inner: Mutex<Inner>,
}

struct Inner {
    request_count: u64,
    error_count: u64,
    latencies_ms: VecDeque<f64>,
    completions: VecDeque<Instant>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StatsSnapshot {
    pub request_count: u64,
    pub error_count: u64,
    pub latency_ms_p50: Option<f64>,
    pub latency_ms_p90: Option<f64>,
    pub latency_ms_p99: Option<f64>,
    /// Completed requests per second over the last 60 s.
    pub throughput_rps: f64,
    pub uptime_s: f64,
}

impl Default for StatsCollector {
    fn default() -> Self {
        Self::new()
    }
}

impl StatsCollector {
    pub fn new() -> Self {
        Self {
            started: Instant::now(),
            inner: Mutex::new(Inner {
                request_count: 0,
                error_count: 0,
                latencies_ms: VecDeque::with_capacity(RING_CAPACITY),
                completions: VecDeque::new(),
            }),
        }
    }

    pub fn record(&self, latency_ms: f64, is_error: bool) {
        let mut inner = self.inner.lock().unwrap();
        inner.request_count += 1;
        if is_error {
            inner.error_count += 1;
        }
        if inner.latencies_ms.len() == RING_CAPACITY {
            inner.latencies_ms.pop_front();
        }
        inner.latencies_ms.push_back(latency_ms);
        inner.completions.push_back(Instant::now());
        // drop completions older than the window so the deque stays bounded
        while inner
            .completions
            .front()
            .is_some_and(|t| t.elapsed().as_secs_f64() > THROUGHPUT_WINDOW_S)
        {
            inner.completions.pop_front();
        }
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let inner = self.inner.lock().unwrap();
        let mut sorted: Vec<f64> = inner.latencies_ms.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |q: f64| -> Option<f64> {
            if sorted.is_empty() {
                None
            } else {
                let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
                Some(sorted[idx])
            }
        };
        let in_window = inner
            .completions
            .iter()
            .filter(|t| t.elapsed().as_secs_f64() <= THROUGHPUT_WINDOW_S)
            .count();
        StatsSnapshot {
            request_count: inner.request_count,
            error_count: inner.error_count,
            latency_ms_p50: quantile(0.50),
            latency_ms_p90: quantile(0.90),
            latency_ms_p99: quantile(0.99),
            throughput_rps: in_window as f64 / THROUGHPUT_WINDOW_S,
            uptime_s: self.started.elapsed().as_secs_f64(),
        }
    }
}
