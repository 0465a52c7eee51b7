use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest agent count an [`AgentSet`] can hold.
pub const MAX_AGENTS: usize = 64;

/// A set of agents, stored as a bitmask over 0-based indices.
///
/// Agents are 0-based everywhere inside the library. The `Display` and serde
/// forms use 1-based numbers, as configs and traces do.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentSet(u64);

impl AgentSet {
    pub const fn empty() -> Self {
        AgentSet(0)
    }

    /// The set `{0, .., k-1}`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_AGENTS, "at most {MAX_AGENTS} agents supported");
        if k == MAX_AGENTS {
            AgentSet(u64::MAX)
        } else {
            AgentSet((1u64 << k) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut set = AgentSet::empty();
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_AGENTS && self.0 & (1u64 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < MAX_AGENTS, "agent index {i} out of range");
        self.0 |= 1u64 << i;
    }

    pub fn remove(&mut self, i: usize) {
        if i < MAX_AGENTS {
            self.0 &= !(1u64 << i);
        }
    }

    pub fn without(mut self, i: usize) -> Self {
        self.remove(i);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: AgentSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing index order.
    pub fn iter(self) -> Iter {
        Iter(self.0)
    }
}

pub struct Iter(u64);

impl Iterator for Iter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Iter {}

impl IntoIterator for AgentSet {
    type Item = usize;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        self.iter()
    }
}

impl FromIterator<usize> for AgentSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        AgentSet::from_indices(iter)
    }
}

impl fmt::Debug for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|i| i + 1)).finish()
    }
}

impl fmt::Display for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for i in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
            first = false;
        }
        Ok(())
    }
}

impl Serialize for AgentSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|i| i + 1))
    }
}

impl<'de> Deserialize<'de> for AgentSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let agents = Vec::<usize>::deserialize(d)?;
        let mut set = AgentSet::empty();
        for a in agents {
            if a == 0 || a > MAX_AGENTS {
                return Err(serde::de::Error::custom(format!(
                    "agent number {a} out of range 1..={MAX_AGENTS}"
                )));
            }
            set.insert(a - 1);
        }
        Ok(set)
    }
}
