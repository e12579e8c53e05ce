use std::collections::HashMap;
use std::sync::Arc;

/// Least-recently-used cache of kernel matrix rows.
pub(crate) struct RowCache {
    capacity: usize,
    rows: HashMap<usize, (u64, Arc<[f64]>)>,
    tick: u64,
    hits: u64,
    misses: u64,
}

impl RowCache {
    pub(crate) fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(2), rows: HashMap::new(), tick: 0, hits: 0, misses: 0 }
    }

    pub(crate) fn get_or_compute(&mut self, i: usize, compute: impl FnOnce() -> Vec<f64>) -> Arc<[f64]> {
        self.tick += 1;
        if let Some(entry) = self.rows.get_mut(&i) {
            entry.0 = self.tick;
            self.hits += 1;
            return entry.1.clone();
        }
        self.misses += 1;
        if self.rows.len() >= self.capacity {
            let oldest = self.rows.iter().min_by_key(|(_, (t, _))| *t).map(|(&k, _)| k);
            if let Some(k) = oldest {
                self.rows.remove(&k);
            }
        }
        let row: Arc<[f64]> = compute().into();
        self.rows.insert(i, (self.tick, row.clone()));
        row
    }

    #[allow(dead_code)]
    pub(crate) fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }
}
