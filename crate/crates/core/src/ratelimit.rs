//! Request pacing shared by the HTTP clients.

use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket refilled continuously at `rate` tokens per second.
///
/// One bucket is meant to be shared (behind an `Arc`) by every caller that
/// talks to the same remote service.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<BucketState>,
}

#[derive(Debug)]
struct BucketState {
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64) -> Self {
        assert!(rate_per_sec > 0.0 && capacity >= 1.0, "rate and capacity must be positive");
        Self { rate: rate_per_sec, capacity, state: Mutex::new(BucketState { tokens: capacity, last: Instant::now() }) }
    }

    /// A bucket allowing `per_sec` requests per second with bursts of the same size.
    pub fn per_second(per_sec: f64) -> Self {
        Self::new(per_sec, per_sec.max(1.0))
    }

    /// Takes one token, returning how long the caller must wait before using it.
    pub fn reserve(&self) -> Duration {
        let mut st = self.state.lock().unwrap();
        let now = Instant::now();
        let elapsed = now.saturating_duration_since(st.last).as_secs_f64();
        st.tokens = (st.tokens + elapsed * self.rate).min(self.capacity);
        st.last = now;
        st.tokens -= 1.0;
        if st.tokens >= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(-st.tokens / self.rate)
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        let wait = self.reserve();
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Exponential backoff: `base`, `2·base`, `4·base`, … for up to `max_retries` retries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub base: Duration,
    pub max_retries: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { base: Duration::from_secs(1), max_retries: 3 }
    }
}

impl Backoff {
    pub fn none() -> Self {
        Self { base: Duration::ZERO, max_retries: 0 }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}
