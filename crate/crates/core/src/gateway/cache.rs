//! Exact-match LRU cache for selection responses.
//!
//! Keyed on everything that determines the response bytes: catalog hash,
//! provider, query text, k, and threshold bits. Eviction scans for the
//! least-recently-used entry; capacities here are small enough that the
//! scan is never the bottleneck.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub catalog_hash: String,
    pub provider_id: String,
    pub query: String,
    pub k: usize,
    pub threshold_bits: Option<u32>,
}

#[derive(Debug)]
pub struct LruCache {
    capacity: usize,
    tick: u64,
    entries: HashMap<CacheKey, (String, u64)>,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            tick: 0,
            entries: HashMap::new(),
        }
    }

    pub fn get(&mut self, key: &CacheKey) -> Option<String> {
        self.tick += 1;
        let tick = self.tick;
        self.entries.get_mut(key).map(|(value, used)| {
            *used = tick;
            value.clone()
        })
    }

    pub fn insert(&mut self, key: CacheKey, value: String) {
        if self.capacity == 0 {
            return;
        }
        self.tick += 1;
        if self.entries.len() >= self.capacity && !self.entries.contains_key(&key) {
            if let Some(oldest) = self
                .entries
                .iter()
                .min_by_key(|(_, (_, used))| *used)
                .map(|(k, _)| k.clone())
            {
                self.entries.remove(&oldest);
            }
        }
        self.entries.insert(key, (value, self.tick));
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(query: &str) -> CacheKey {
        CacheKey {
            catalog_hash: "hash".into(),
            provider_id: "reference".into(),
            query: query.into(),
            k: 3,
            threshold_bits: None,
        }
    }

    #[test]
    fn stores_and_returns_values() {
        let mut cache = LruCache::new(4);
        assert!(cache.get(&key("a")).is_none());
        cache.insert(key("a"), "body-a".into());
        assert_eq!(cache.get(&key("a")).as_deref(), Some("body-a"));
    }

    #[test]
    fn evicts_least_recently_used() {
        let mut cache = LruCache::new(2);
        cache.insert(key("a"), "a".into());
        cache.insert(key("b"), "b".into());
        cache.get(&key("a")); // freshen a; b is now oldest
        cache.insert(key("c"), "c".into());
        assert!(cache.get(&key("b")).is_none());
        assert!(cache.get(&key("a")).is_some());
        assert!(cache.get(&key("c")).is_some());
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn zero_capacity_never_stores() {
        let mut cache = LruCache::new(0);
        cache.insert(key("a"), "a".into());
        assert!(cache.get(&key("a")).is_none());
        assert!(cache.is_empty());
    }

    #[test]
    fn distinct_parameters_are_distinct_entries() {
        let mut cache = LruCache::new(8);
        cache.insert(key("a"), "k3".into());
        let mut with_threshold = key("a");
        with_threshold.threshold_bits = Some(0.5f32.to_bits());
        cache.insert(with_threshold.clone(), "thresholded".into());
        assert_eq!(cache.get(&key("a")).as_deref(), Some("k3"));
        assert_eq!(cache.get(&with_threshold).as_deref(), Some("thresholded"));
    }

    #[test]
    fn clear_empties_the_cache() {
        let mut cache = LruCache::new(4);
        cache.insert(key("a"), "a".into());
        cache.clear();
        assert!(cache.is_empty());
    }
}
