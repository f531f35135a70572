//! Shared setup for the criterion benches.

use trailkit_core::fixtures::{self, Fixtures};
use trailkit_core::service::system_clock;
use trailkit_core::{ActivityId, MemoryStore, Portal, Trail};

pub fn seeded_portal() -> (Portal, Fixtures) {
    let mut portal = Portal::open(Box::new(MemoryStore::new()), system_clock()).expect("empty store opens");
    let fx = fixtures::install(&mut portal).expect("fixtures install");
    (portal, fx)
}

/// `len` results cycling over every activity of `trail`, one failure in three.
pub fn cycling_history(trail: &Trail, len: usize) -> Vec<(ActivityId, bool)> {
    let all: Vec<ActivityId> = trail.levels.iter().flat_map(|l| l.activity_ids.iter().copied()).collect();
    (0..len).map(|i| (all[i % all.len()], i % 3 != 0)).collect()
}
