//! Sliding empirical CDF over the last `T` indicator vectors.

use std::collections::VecDeque;

use crate::scalar::Real;

/// Keeps integer hit counts so the window mean never accumulates rounding.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    capacity: usize,
    counts: Vec<u32>,
    slots: VecDeque<Vec<bool>>,
    pushes: u64,
}

/// Counts are recomputed from the stored slots this often.
const RECOUNT_EVERY: u64 = 1 << 16;

impl SlidingWindow {
    pub fn new(capacity: usize, width: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        assert!(capacity <= u32::MAX as usize, "window capacity");
        Self {
            capacity,
            counts: vec![0; width],
            slots: VecDeque::with_capacity(capacity + 1),
            pushes: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.capacity
    }

    pub fn push(&mut self, xi: Vec<bool>) {
        assert_eq!(xi.len(), self.counts.len(), "indicator width");
        for (c, &b) in self.counts.iter_mut().zip(&xi) {
            *c += b as u32;
        }
        self.slots.push_back(xi);
        if self.slots.len() > self.capacity {
            let old = self.slots.pop_front().expect("non-empty");
            for (c, &b) in self.counts.iter_mut().zip(&old) {
                *c -= b as u32;
            }
        }
        self.pushes += 1;
        if self.pushes.is_multiple_of(RECOUNT_EVERY) {
            let fresh = self.recount();
            debug_assert_eq!(fresh, self.counts);
            self.counts = fresh;
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Hit counts summed from scratch over the stored slots.
    pub fn recount(&self) -> Vec<u32> {
        let mut fresh = vec![0u32; self.counts.len()];
        for slot in &self.slots {
            for (c, &b) in fresh.iter_mut().zip(slot) {
                *c += b as u32;
            }
        }
        fresh
    }

    /// `u = (1/T) Σ ξ` over the capacity `T`, even while filling.
    pub fn mean<T: Real>(&self) -> Vec<T> {
        let cap = self.capacity as f64;
        self.counts
            .iter()
            .map(|&c| T::lit(c as f64 / cap))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fills_then_slides() {
        let mut w = SlidingWindow::new(3, 2);
        w.push(vec![true, false]);
        assert!(!w.is_full());
        w.push(vec![true, true]);
        w.push(vec![false, true]);
        assert!(w.is_full());
        assert_eq!(w.counts(), &[2, 2]);
        w.push(vec![false, false]);
        assert_eq!(w.counts(), &[1, 2]);
        assert_eq!(w.len(), 3);
        let m: Vec<f64> = w.mean();
        assert_eq!(m, vec![1.0 / 3.0, 2.0 / 3.0]);
    }

    proptest! {
        #[test]
        fn incremental_matches_fresh(
            cap in 1usize..20,
            bits in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 4), 1..200),
        ) {
            let mut w = SlidingWindow::new(cap, 4);
            for (k, b) in bits.iter().enumerate() {
                w.push(b.clone());
                prop_assert_eq!(w.counts(), &w.recount()[..]);
                let lo = (k + 1).saturating_sub(cap);
                for i in 0..4 {
                    let direct = bits[lo..=k].iter().filter(|v| v[i]).count() as u32;
                    prop_assert_eq!(w.counts()[i], direct);
                }
            }
        }
    }
}
