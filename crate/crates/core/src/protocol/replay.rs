use std::collections::{BTreeSet, HashSet};

use crate::credentials::KeyId;
use crate::hash::ContentHash;

use super::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReplayKey {
    pub user: KeyId,
    pub timestamp: Timestamp,
    pub message: ContentHash,
}

/// Remembers requests seen inside the freshness window.
///
/// Entries whose timestamp has left the window can be dropped: any replay
/// of them already fails the freshness check.
#[derive(Debug, Clone)]
pub struct ReplayCache {
    window: u64,
    seen: HashSet<ReplayKey>,
    by_time: BTreeSet<(Timestamp, ReplayKey)>,
}

impl ReplayCache {
    pub fn new(window_secs: u64) -> Self {
        Self {
            window: window_secs,
            seen: HashSet::new(),
            by_time: BTreeSet::new(),
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn contains(&self, key: &ReplayKey) -> bool {
        self.seen.contains(key)
    }

    pub fn evict(&mut self, now: Timestamp) {
        let cutoff = now.saturating_sub(self.window);
        while let Some(&(ts, key)) = self.by_time.first() {
            if ts >= cutoff {
                break;
            }
            self.by_time.pop_first();
            self.seen.remove(&key);
        }
    }

    /// Records `key` unless it is already present. Returns `false` on a replay.
    pub fn check_and_insert(&mut self, key: ReplayKey, now: Timestamp) -> bool {
        self.evict(now);
        if !self.seen.insert(key) {
            return false;
        }
        self.by_time.insert((key.timestamp, key));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(ts: u64, m: u8) -> ReplayKey {
        ReplayKey {
            user: KeyId([1; 32]),
            timestamp: ts,
            message: ContentHash([m; 32]),
        }
    }

    #[test]
    fn second_insert_is_a_replay() {
        let mut c = ReplayCache::new(300);
        assert!(c.check_and_insert(key(1000, 1), 1000));
        assert!(!c.check_and_insert(key(1000, 1), 1100));
        assert!(c.check_and_insert(key(1000, 2), 1100));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn entries_leave_with_the_window() {
        let mut c = ReplayCache::new(300);
        c.check_and_insert(key(1000, 1), 1000);
        c.evict(1300);
        assert!(c.contains(&key(1000, 1)));
        c.evict(1301);
        assert!(c.is_empty());
    }
}
