//! Sets of agents as bitmasks.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest agent count for which exhaustive subset enumeration is allowed.
pub const MAX_ENUMERATION_AGENTS: usize = 20;

/// A subset of agents `{0, .., n-1}` stored as a bitmask (bit `i` = agent `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct AgentSet(pub u64);

impl AgentSet {
    pub const EMPTY: AgentSet = AgentSet(0);

    /// All of `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= 64, "agent sets hold at most 64 agents");
        if n == 64 {
            AgentSet(u64::MAX)
        } else {
            AgentSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut bits = 0u64;
        for i in indices {
            assert!(i < 64, "agent index {i} out of range for an AgentSet");
            bits |= 1 << i;
        }
        AgentSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: AgentSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: AgentSet) -> Self {
        AgentSet(self.0 | other.0)
    }

    pub fn intersection(self, other: AgentSet) -> Self {
        AgentSet(self.0 & other.0)
    }

    /// `self \ other`.
    pub fn difference(self, other: AgentSet) -> Self {
        AgentSet(self.0 & !other.0)
    }

    /// Complement within `{0, .., n-1}`.
    pub fn complement(self, n: usize) -> Self {
        AgentSet::full(n).difference(self)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits >> i & 1 == 1)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Every subset of `self`, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = AgentSet> {
        // Standard submask walk, reversed into ascending order.
        let mut subs = Vec::with_capacity(1 << self.len());
        let mut s = self.0;
        loop {
            subs.push(AgentSet(s));
            if s == 0 {
                break;
            }
            s = (s - 1) & self.0;
        }
        subs.into_iter().rev()
    }
}

impl fmt::Display for AgentSet {
    /// 1-based, e.g. `{1,2,4}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}
