use rand::Rng;

use super::{MdpAction, MdpState};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: MdpState,
    pub action: MdpAction,
    pub reward: f64,
    pub next_state: MdpState,
}

/// Bounded FIFO of transitions; the oldest entry is evicted when full.
///
/// Rows live in flat ring arrays rather than one small allocation per
/// transition: long-lived small blocks scattered between the large training
/// temporaries fragment the heap badly.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    /// Physical slot of the oldest row once the ring is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            state_dim: 0,
            action_dim: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            head: 0,
        }
    }

    /// Row widths are fixed by the first transition pushed.
    pub fn push(&mut self, t: Transition) {
        if self.rewards.is_empty() {
            self.state_dim = t.state.0.len();
            self.action_dim = t.action.0.len();
        }
        assert!(
            t.state.0.len() == self.state_dim
                && t.next_state.0.len() == self.state_dim
                && t.action.0.len() == self.action_dim,
            "transition width differs from the buffer's"
        );
        if self.rewards.len() < self.capacity {
            self.states.extend_from_slice(&t.state.0);
            self.actions.extend_from_slice(&t.action.0);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state.0);
            return;
        }
        let (sd, ad, i) = (self.state_dim, self.action_dim, self.head);
        self.states[i * sd..(i + 1) * sd].copy_from_slice(&t.state.0);
        self.actions[i * ad..(i + 1) * ad].copy_from_slice(&t.action.0);
        self.rewards[i] = t.reward;
        self.next_states[i * sd..(i + 1) * sd].copy_from_slice(&t.next_state.0);
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn row(&self, slot: usize) -> Transition {
        let (sd, ad) = (self.state_dim, self.action_dim);
        Transition {
            state: MdpState(self.states[slot * sd..(slot + 1) * sd].to_vec()),
            action: MdpAction(self.actions[slot * ad..(slot + 1) * ad].to_vec()),
            reward: self.rewards[slot],
            next_state: MdpState(self.next_states[slot * sd..(slot + 1) * sd].to_vec()),
        }
    }

    /// The `i`-th oldest transition.
    pub fn get(&self, i: usize) -> Option<Transition> {
        (i < self.len()).then(|| self.row((self.head + i) % self.len()))
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.len()).map(|i| self.row((self.head + i) % self.len()))
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Transition> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..count).map(|_| self.row(rng.random_range(0..self.len()))).collect()
    }
}
