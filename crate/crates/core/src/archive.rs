use std::collections::VecDeque;

/// Bounded store of search traces in original-space coordinates.
///
/// Keeps insertion order, rejects near-duplicates (L∞ distance within
/// `dedup_tol` of an existing entry) and evicts the oldest entries first.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    entries: VecDeque<Vec<f64>>,
    capacity: usize,
    dedup_tol: f64,
}

impl Archive {
    pub fn new(capacity: usize, dedup_tol: f64) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity + 1),
            capacity,
            dedup_tol,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest first.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.entries.iter().map(Vec::as_slice)
    }

    pub fn contains_near(&self, x: &[f64]) -> bool {
        self.entries.iter().any(|e| within_linf(e, x, self.dedup_tol))
    }

    /// Inserts `x` unless it duplicates an entry. Returns whether it was stored.
    pub fn insert(&mut self, x: Vec<f64>) -> bool {
        if self.capacity == 0 || self.contains_near(&x) {
            return false;
        }
        self.entries.push_back(x);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        true
    }
}

fn within_linf(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_and_eviction() {
        let mut a = Archive::new(2, 1e-12);
        assert!(a.insert(vec![0.0, 0.0]));
        assert!(!a.insert(vec![0.0, 1e-13]));
        assert!(a.insert(vec![1.0, 0.0]));
        assert!(a.insert(vec![2.0, 0.0]));
        let kept: Vec<&[f64]> = a.entries().collect();
        assert_eq!(kept, vec![&[1.0, 0.0][..], &[2.0, 0.0][..]]);
    }
}
