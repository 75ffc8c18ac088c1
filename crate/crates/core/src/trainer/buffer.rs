use rand::Rng;

use crate::image::Image;

/// Fixed-capacity store of generated images; the oldest entry is
/// overwritten first once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Image>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity,
            cursor: 0,
        }
    }

    pub fn push(&mut self, image: Image) {
        if self.items.len() < self.capacity {
            self.items.push(image);
        } else {
            self.items[self.cursor] = image;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `count` uniform draws with replacement; empty if the buffer is.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Image> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..count).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Image> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }
}
