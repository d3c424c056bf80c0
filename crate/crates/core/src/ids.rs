//! Sortable entry identifiers (ULID text form: 26 Crockford base32 chars).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ulid::Ulid;

use crate::model::EntryId;

/// Generates strictly increasing identifiers within one process.
#[derive(Debug)]
pub struct IdGenerator {
    rng: ChaCha8Rng,
    last: Option<Ulid>,
}

impl IdGenerator {
    pub fn new() -> Self {
        IdGenerator {
            rng: ChaCha8Rng::from_os_rng(),
            last: None,
        }
    }

    pub fn seeded(seed: u64) -> Self {
        IdGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
        }
    }

    /// Identifiers sort after `floor`, so ids stay monotonic across reopens.
    pub fn observe(&mut self, floor: &str) {
        if let Ok(id) = Ulid::from_string(floor) {
            if self.last.is_none_or(|l| id > l) {
                self.last = Some(id);
            }
        }
    }

    pub fn next_id(&mut self) -> EntryId {
        let ms = chrono::Utc::now().timestamp_millis().max(0) as u64;
        let random: u128 = self.rng.random::<u128>() & ((1u128 << 80) - 1);
        let mut id = Ulid::from_parts(ms, random);
        if let Some(last) = self.last {
            if id <= last {
                id = last.increment().expect("identifier space exhausted");
            }
        }
        self.last = Some(id);
        id.to_string()
    }
}

impl Default for IdGenerator {
    fn default() -> Self {
        Self::new()
    }
}
