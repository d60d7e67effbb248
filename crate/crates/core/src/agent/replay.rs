use rand::Rng;

use crate::Error;

/// A stored step. States are kept as placement prefixes: `s` is `prefix`,
/// `s′` is `prefix` followed by `action`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub prefix: Vec<u8>,
    pub action: u8,
    pub reward: f64,
    pub terminal: bool,
}

impl Transition {
    pub fn next_prefix(&self) -> Vec<u8> {
        let mut p = self.prefix.clone();
        p.push(self.action);
        p
    }
}

/// Fixed-capacity ring buffer with uniform sampling without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn from_parts(capacity: usize, items: Vec<Transition>, next: usize) -> Result<Self, Error> {
        if capacity == 0 || items.len() > capacity || next > items.len() || (items.len() < capacity && next != items.len()) {
            return Err(Error::Checkpoint("inconsistent replay buffer".into()));
        }
        Ok(Self { capacity, items, next: next % capacity })
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

    /// Slot the next push overwrites.
    pub fn cursor(&self) -> usize {
        self.next
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>, Error> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::IllegalStep(format!("cannot sample {batch} of {} transitions", self.items.len())));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_iter().map(|i| &self.items[i]).collect())
    }
}
