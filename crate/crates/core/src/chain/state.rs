use crate::error::{Error, Result};

/// Which coordinate of `(s, x, c)` a marginal is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Phase,
    Queue,
    Connections,
}

/// Enumeration of the states `(s, x, c)`; phases are zero-based.
///
/// `index(s, x, c) = (c * (X + 1) + x) * S + s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    phases: usize,
    queue_capacity: usize,
    max_connections: usize,
}

impl StateSpace {
    pub fn new(phases: usize, queue_capacity: usize, max_connections: usize) -> Self {
        assert!(phases >= 1);
        Self { phases, queue_capacity, max_connections }
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue_capacity
    }

    pub fn max_connections(&self) -> usize {
        self.max_connections
    }

    pub fn total_states(&self) -> usize {
        self.phases * (self.queue_capacity + 1) * (self.max_connections + 1)
    }

    #[inline]
    pub fn index(&self, s: usize, x: usize, c: usize) -> usize {
        (c * (self.queue_capacity + 1) + x) * self.phases + s
    }

    #[inline]
    pub fn state(&self, index: usize) -> (usize, usize, usize) {
        let s = index % self.phases;
        let rest = index / self.phases;
        (s, rest % (self.queue_capacity + 1), rest / (self.queue_capacity + 1))
    }

    /// Aggregation block of a state: the pair `(c, s)` flattened as `c * S + s`.
    #[inline]
    pub fn block_of(&self, index: usize) -> usize {
        let (s, _, c) = self.state(index);
        c * self.phases + s
    }

    pub fn block_count(&self) -> usize {
        self.phases * (self.max_connections + 1)
    }

    /// Sums `pi` over the two axes other than `axis`.
    pub fn marginal(&self, pi: &[f64], axis: Axis) -> Result<Vec<f64>> {
        if pi.len() != self.total_states() {
            return Err(Error::LengthMismatch { left: pi.len(), right: self.total_states() });
        }
        let len = match axis {
            Axis::Phase => self.phases,
            Axis::Queue => self.queue_capacity + 1,
            Axis::Connections => self.max_connections + 1,
        };
        let mut out = vec![0.0; len];
        for (i, p) in pi.iter().enumerate() {
            let (s, x, c) = self.state(i);
            let k = match axis {
                Axis::Phase => s,
                Axis::Queue => x,
                Axis::Connections => c,
            };
            out[k] += p;
        }
        Ok(out)
    }
}
