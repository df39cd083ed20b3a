use std::collections::HashMap;

use crate::error::Result;

/// Memo table for pairwise kernel values, keyed on the unordered pair of item
/// keys a selector assigns on arrival.
///
/// With the cache disabled every lookup evaluates the kernel; the counters are
/// maintained either way so on/off runs can be compared.
#[derive(Debug, Clone, Default)]
pub struct KernelCache {
    enabled: bool,
    map: HashMap<(u64, u64), f64>,
    hits: u64,
    misses: u64,
}

impl KernelCache {
    pub fn new(enabled: bool) -> Self {
        KernelCache {
            enabled,
            ..Default::default()
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Number of kernel evaluations actually performed.
    pub fn evaluations(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get_or_compute(
        &mut self,
        a: u64,
        b: u64,
        compute: impl FnOnce() -> Result<f64>,
    ) -> Result<f64> {
        let key = if a <= b { (a, b) } else { (b, a) };
        if self.enabled {
            if let Some(&v) = self.map.get(&key) {
                self.hits += 1;
                return Ok(v);
            }
        }
        let v = compute()?;
        self.misses += 1;
        if self.enabled {
            self.map.insert(key, v);
        }
        Ok(v)
    }

    /// Drops cached values but keeps the counters.
    pub fn clear(&mut self) {
        self.map.clear();
    }
}
