//! Innovation bookkeeping.
//!
//! One registry covers one structural lineage for a whole run: the same
//! `(from, to)` endpoint pair always receives the same innovation number,
//! and splitting the same connection always yields the same hidden node id.
//! Agent genomes and environment CPPNs use separate registries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::genome::{Innovation, NodeId};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "RegistrySnapshot", into = "RegistrySnapshot")]
pub struct InnovationRegistry {
    next_innovation: Innovation,
    next_node_id: NodeId,
    seen: BTreeMap<(NodeId, NodeId), Innovation>,
    splits: BTreeMap<Innovation, NodeId>,
}

impl InnovationRegistry {
    /// `first_node_id` must lie beyond every fixed input/output/bias id.
    pub fn new(first_node_id: NodeId) -> Self {
        InnovationRegistry {
            next_innovation: 1,
            next_node_id: first_node_id,
            seen: BTreeMap::new(),
            splits: BTreeMap::new(),
        }
    }

    /// Innovation for the endpoint pair, allocating a fresh number on first
    /// sight and replaying the stored one afterwards.
    pub fn connection(&mut self, from: NodeId, to: NodeId) -> Innovation {
        if let Some(&innov) = self.seen.get(&(from, to)) {
            return innov;
        }
        let innov = self.next_innovation;
        self.next_innovation += 1;
        self.seen.insert((from, to), innov);
        innov
    }

    /// Hidden node id assigned to splitting `split_innovation`. Repeat splits
    /// of the same connection replay the same node id.
    pub fn split_node(&mut self, split_innovation: Innovation) -> NodeId {
        if let Some(&id) = self.splits.get(&split_innovation) {
            return id;
        }
        let id = self.next_node_id;
        self.next_node_id += 1;
        self.splits.insert(split_innovation, id);
        id
    }

    pub fn peek_next_node_id(&self) -> NodeId {
        self.next_node_id
    }

    /// A fresh hidden node id outside the split bookkeeping, for building
    /// fixed-topology templates.
    pub fn alloc_node_id(&mut self) -> NodeId {
        let id = self.next_node_id;
        self.next_node_id += 1;
        id
    }
}

/// Flat serialization proxy: JSON map keys must be strings, so the endpoint
/// map is stored as sorted triples.
#[derive(Serialize, Deserialize)]
struct RegistrySnapshot {
    next_innovation: Innovation,
    next_node_id: NodeId,
    seen: Vec<(NodeId, NodeId, Innovation)>,
    splits: Vec<(Innovation, NodeId)>,
}

impl From<RegistrySnapshot> for InnovationRegistry {
    fn from(s: RegistrySnapshot) -> Self {
        InnovationRegistry {
            next_innovation: s.next_innovation,
            next_node_id: s.next_node_id,
            seen: s.seen.into_iter().map(|(f, t, i)| ((f, t), i)).collect(),
            splits: s.splits.into_iter().collect(),
        }
    }
}

impl From<InnovationRegistry> for RegistrySnapshot {
    fn from(r: InnovationRegistry) -> Self {
        RegistrySnapshot {
            next_innovation: r.next_innovation,
            next_node_id: r.next_node_id,
            seen: r.seen.into_iter().map(|((f, t), i)| (f, t, i)).collect(),
            splits: r.splits.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_signature_same_innovation() {
        let mut reg = InnovationRegistry::new(100);
        let a = reg.connection(1, 5);
        let b = reg.connection(2, 5);
        let c = reg.connection(1, 5);
        assert_eq!(a, c);
        assert_ne!(a, b);
    }

    #[test]
    fn same_split_same_node() {
        let mut reg = InnovationRegistry::new(100);
        assert_eq!(reg.split_node(7), reg.split_node(7));
        assert_ne!(reg.split_node(7), reg.split_node(8));
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut reg = InnovationRegistry::new(10);
        reg.connection(1, 2);
        reg.connection(3, 4);
        reg.split_node(1);
        let json = serde_json::to_string(&reg).unwrap();
        let mut back: InnovationRegistry = serde_json::from_str(&json).unwrap();
        assert_eq!(back.connection(1, 2), reg.connection(1, 2));
        assert_eq!(json, serde_json::to_string(&back).unwrap());
    }
}
