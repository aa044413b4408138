use parking_lot::Mutex;
use rand::Rng;
use ulid::Ulid;

use crate::clock::SharedClock;

/// Sortable 26-character ids (ULID layout: 48-bit millisecond time, 80 random bits).
/// Ids from one generator are strictly increasing even when the clock stalls.
pub struct IdGenerator {
    clock: SharedClock,
    last: Mutex<Ulid>,
}

impl IdGenerator {
    pub fn new(clock: SharedClock) -> Self {
        Self {
            clock,
            last: Mutex::new(Ulid::nil()),
        }
    }

    /// A fresh id strictly greater than both every id this generator produced and `floor`.
    pub fn next_after(&self, floor: Option<&str>) -> String {
        let ms = self.clock.now().timestamp_millis().max(0) as u64;
        let random: u128 = rand::thread_rng().gen::<u128>() & ((1u128 << 80) - 1);
        let mut candidate = Ulid::from_parts(ms, random);
        let mut last = self.last.lock();
        let floor = floor
            .and_then(|f| Ulid::from_string(f).ok())
            .unwrap_or_else(Ulid::nil);
        let lower = (*last).max(floor);
        if candidate <= lower {
            candidate = lower.increment().expect("id space exhausted");
        }
        *last = candidate;
        candidate.to_string()
    }
}
