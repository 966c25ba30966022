use rand::Rng;
use serde::{Deserialize, Serialize};

/// One stored interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Continuous action in unit coordinates.
    pub cont_action: Vec<f64>,
    /// Flat mask index of the executed schedule.
    pub disc_action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last slot of an episode: the target does not bootstrap.
    pub terminal: bool,
}

/// Fixed-capacity FIFO ring.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `size` distinct entries, or `None` when fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> Option<Vec<&Transition>> {
        if size == 0 || size > self.items.len() {
            return None;
        }
        let idx = rand::seq::index::sample(rng, self.items.len(), size);
        Some(idx.into_iter().map(|i| &self.items[i]).collect())
    }

    pub(crate) fn raw_parts(&self) -> (&[Transition], usize) {
        (&self.items, self.head)
    }

    pub(crate) fn from_raw_parts(capacity: usize, items: Vec<Transition>, head: usize) -> Option<Self> {
        let consistent = capacity > 0
            && items.len() <= capacity
            && (head == 0 || (items.len() == capacity && head < capacity));
        consistent.then_some(Self {
            capacity,
            items,
            head,
        })
    }
}
