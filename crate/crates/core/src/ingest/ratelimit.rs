//! Sliding-window rate limiter: at most `max_requests` admissions in any
//! window of length `window`.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::Mutex;

use crate::clock::Clock;

pub struct RateLimiter {
    max_requests: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    admitted: Mutex<VecDeque<Duration>>,
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter")
            .field("max_requests", &self.max_requests)
            .field("window", &self.window)
            .finish()
    }
}

impl RateLimiter {
    pub fn new(max_requests: usize, window: Duration, clock: Arc<dyn Clock>) -> Self {
        assert!(max_requests > 0, "rate limiter needs a positive budget");
        Self {
            max_requests,
            window,
            clock,
            admitted: Mutex::new(VecDeque::with_capacity(max_requests)),
        }
    }

    pub fn per_second(rate: usize, clock: Arc<dyn Clock>) -> Self {
        Self::new(rate, Duration::from_secs(1), clock)
    }

    /// Wait until a request may be sent, then record it. Holding the lock
    /// while sleeping makes the limiter the single serialization point.
    pub async fn acquire(&self) {
        let mut admitted = self.admitted.lock().await;
        loop {
            let now = self.clock.now();
            while admitted
                .front()
                .is_some_and(|&t| now.saturating_sub(t) >= self.window)
            {
                admitted.pop_front();
            }
            if admitted.len() < self.max_requests {
                admitted.push_back(now);
                return;
            }
            let oldest = *admitted.front().expect("non-empty when full");
            let wait = (oldest + self.window).saturating_sub(now);
            self.clock.sleep(wait.max(Duration::from_millis(1))).await;
        }
    }
}
