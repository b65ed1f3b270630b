use serde::{Deserialize, Serialize};

const NANOS: u128 = 1_000_000_000;

/// Error-message token bucket driven by the virtual clock.
///
/// Starts full. A rate of zero disables the bucket entirely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBucket {
    rate: u64,
    burst: u64,
    // tokens scaled by 1e9
    level: u128,
    last_ns: u64,
}

impl TokenBucket {
    pub fn new(rate: u64, burst: u64) -> Self {
        Self {
            rate,
            burst,
            level: burst as u128 * NANOS,
            last_ns: 0,
        }
    }

    fn refill(&mut self, now_ns: u64) {
        if now_ns > self.last_ns {
            let gained = (now_ns - self.last_ns) as u128 * self.rate as u128;
            self.level = (self.level + gained).min(self.burst as u128 * NANOS);
            self.last_ns = now_ns;
        }
    }

    /// Takes one token if available.
    pub fn take(&mut self, now_ns: u64) -> bool {
        if self.rate == 0 {
            return false;
        }
        self.refill(now_ns);
        if self.level >= NANOS {
            self.level -= NANOS;
            true
        } else {
            false
        }
    }

    /// Whole tokens currently available.
    pub fn tokens(&self) -> u64 {
        if self.rate == 0 {
            0
        } else {
            (self.level / NANOS) as u64
        }
    }

    /// Fill level in billionths of a token.
    pub fn level_nano(&self) -> u128 {
        self.level
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_refill() {
        let mut b = TokenBucket::new(10, 3);
        assert!(b.take(0));
        assert!(b.take(0));
        assert!(b.take(0));
        assert!(!b.take(0));
        // 10 tokens/s → one token every 100 ms
        assert!(!b.take(99_999_999));
        assert!(b.take(100_000_000));
        assert!(!b.take(100_000_000));
        // capped at burst
        assert!(b.take(10_000_000_000));
        assert_eq!(b.tokens(), 2);
    }

    #[test]
    fn zero_rate_never_grants() {
        let mut b = TokenBucket::new(0, 100);
        assert!(!b.take(0));
        assert!(!b.take(u64::MAX));
        assert_eq!(b.tokens(), 0);
    }

    #[test]
    fn time_never_runs_backwards() {
        let mut b = TokenBucket::new(1, 1);
        assert!(b.take(5_000_000_000));
        assert!(!b.take(1_000_000_000));
    }
}
