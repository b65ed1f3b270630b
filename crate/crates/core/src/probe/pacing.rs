use std::time::{Duration, Instant};

const NANOS: u128 = 1_000_000_000;

/// Token-bucket send pacing.
///
/// Tokens accrue at `rate` per second up to one millisecond worth of budget
/// (at least one packet). The bucket starts empty, so `n` acquisitions never
/// take less than `n / rate` seconds.
#[derive(Debug)]
pub struct Pacer {
    rate: u128,
    // tokens scaled by 1e9 so refills stay integral
    capacity: u128,
    tokens: u128,
    last: Instant,
}

impl Pacer {
    pub fn new(rate: u64) -> Self {
        assert!(rate > 0, "send rate must be positive");
        let burst = (rate / 1000).max(1) as u128;
        Self {
            rate: rate as u128,
            capacity: burst * NANOS,
            tokens: 0,
            last: Instant::now(),
        }
    }

    fn refill(&mut self) {
        let now = Instant::now();
        let elapsed = now.duration_since(self.last).as_nanos();
        self.last = now;
        self.tokens = (self.tokens + elapsed * self.rate).min(self.capacity);
    }

    /// Blocks until one packet may be sent.
    pub fn acquire(&mut self) {
        loop {
            self.refill();
            if self.tokens >= NANOS {
                self.tokens -= NANOS;
                return;
            }
            let wait_ns = (NANOS - self.tokens).div_ceil(self.rate);
            if wait_ns < 20_000 {
                std::thread::yield_now();
            } else {
                std::thread::sleep(Duration::from_nanos(wait_ns as u64));
            }
        }
    }
}
