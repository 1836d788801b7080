use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Deterministic clock for tests; sleeping advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Sliding-window limiter: at most `limit` acquisitions in any window.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(limit: u32, window: Duration) -> Self {
        RateLimiter {
            limit: limit.max(1) as usize,
            window,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(limit: u32) -> Self {
        Self::new(limit, Duration::from_secs(60))
    }

    /// Blocks on `clock` until a slot is free, then takes it.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        loop {
            let wait = {
                let mut issued = self.issued.lock().unwrap();
                let now = clock.now();
                while issued.front().is_some_and(|&t| t + self.window <= now) {
                    issued.pop_front();
                }
                if issued.len() < self.limit {
                    issued.push_back(now);
                    return now;
                }
                issued[0] + self.window - now
            };
            clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn third_call_waits_for_window() {
        let clock = VirtualClock::default();
        let lim = RateLimiter::per_minute(2);
        assert_eq!(lim.acquire(&clock), Duration::ZERO);
        clock.advance(Duration::from_secs(10));
        assert_eq!(lim.acquire(&clock), Duration::from_secs(10));
        assert_eq!(lim.acquire(&clock), Duration::from_secs(60));
    }

    proptest! {
        #[test]
        fn never_exceeds_limit_in_any_window(
            limit in 1u32..6,
            gaps in proptest::collection::vec(0u64..40_000, 1..60),
        ) {
            let clock = VirtualClock::default();
            let lim = RateLimiter::per_minute(limit);
            let mut stamps = Vec::new();
            for g in gaps {
                clock.advance(Duration::from_millis(g));
                stamps.push(lim.acquire(&clock));
            }
            for (i, &t) in stamps.iter().enumerate() {
                let in_window = stamps[i..].iter().filter(|&&s| s < t + Duration::from_secs(60)).count();
                prop_assert!(in_window <= limit as usize);
            }
        }
    }
}
