//! Genome representation: node genes, connection genes, activations.
//!
//! A genome is a flat gene list, not a graph structure: nodes are kept
//! sorted by id and connections by innovation number so that two genomes
//! serialize byte-identically whenever their gene content is identical.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::rng::fnv1a;

pub type NodeId = u32;
pub type Innovation = u32;
pub type GenomeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Input,
    Output,
    Hidden,
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Sine,
    Gauss,
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Sine => x.sin(),
            Activation::Gauss => (-x * x).exp(),
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Sine => "sine",
            Activation::Gauss => "gauss",
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Activation> {
        Some(match s {
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "sine" => Activation::Sine,
            "gauss" => Activation::Gauss,
            "identity" => Activation::Identity,
            "relu" => Activation::Relu,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
    pub activation: Activation,
    pub response: f64,
    pub bias: f64,
}

impl NodeGene {
    pub fn new(id: NodeId, kind: NodeKind, activation: Activation) -> Self {
        NodeGene {
            id,
            kind,
            activation,
            response: 1.0,
            bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub weight: f64,
    pub enabled: bool,
}

/// A NEAT genome. Connections are kept sorted by innovation and nodes by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentGenome {
    pub id: GenomeId,
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
    pub fitness: Option<f64>,
}

impl AgentGenome {
    pub fn new(id: GenomeId) -> Self {
        AgentGenome {
            id,
            nodes: Vec::new(),
            connections: Vec::new(),
            fitness: None,
        }
    }

    /// Restores the sort invariants after gene edits.
    pub fn normalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.connections.sort_by_key(|c| c.innovation);
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(move |i| &mut self.nodes[i])
    }

    pub fn has_connection(&self, from: NodeId, to: NodeId) -> bool {
        self.connections
            .iter()
            .any(|c| c.from_node == from && c.to_node == to)
    }

    pub fn max_innovation(&self) -> Option<Innovation> {
        self.connections.last().map(|c| c.innovation)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &NodeGene> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &NodeGene> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Output)
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Hidden)
            .count()
    }

    pub fn enabled_count(&self) -> usize {
        self.connections.iter().filter(|c| c.enabled).count()
    }

    /// True when the enabled-connection graph contains no directed cycle.
    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm over enabled edges only.
        let mut indeg: BTreeMap<NodeId, usize> =
            self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut edges = 0usize;
        for c in self.connections.iter().filter(|c| c.enabled) {
            *indeg.entry(c.to_node).or_insert(0) += 1;
            out.entry(c.from_node).or_default().push(c.to_node);
            edges += 1;
        }
        let mut queue: Vec<NodeId> = indeg
            .iter()
            .filter(|&(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut removed = 0usize;
        while let Some(n) = queue.pop() {
            if let Some(succs) = out.get(&n) {
                for &m in succs {
                    let d = indeg.get_mut(&m).expect("edge endpoint exists");
                    *d -= 1;
                    removed += 1;
                    if *d == 0 {
                        queue.push(m);
                    }
                }
            }
        }
        removed == edges
    }

    /// True if enabling or adding an edge `from -> to` keeps the enabled
    /// graph acyclic, i.e. no enabled path already leads from `to` to `from`.
    pub fn edge_keeps_acyclic(&self, from: NodeId, to: NodeId) -> bool {
        if from == to {
            return false;
        }
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for c in self.connections.iter().filter(|c| c.enabled) {
            out.entry(c.from_node).or_default().push(c.to_node);
        }
        // DFS from `to`; reaching `from` means the new edge closes a cycle.
        let mut stack = vec![to];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == from {
                return false;
            }
            if !seen.insert(n) {
                continue;
            }
            if let Some(succs) = out.get(&n) {
                stack.extend(succs.iter().copied());
            }
        }
        true
    }

    /// Structural validity: unique ids, unique endpoints, endpoints present,
    /// acyclic enabled graph, sort invariants.
    pub fn validate(&self) -> Result<(), String> {
        for w in self.nodes.windows(2) {
            if w[0].id >= w[1].id {
                return Err(format!("node ids not strictly sorted: {} {}", w[0].id, w[1].id));
            }
        }
        for w in self.connections.windows(2) {
            if w[0].innovation >= w[1].innovation {
                return Err(format!(
                    "innovations not strictly sorted: {} {}",
                    w[0].innovation, w[1].innovation
                ));
            }
        }
        let mut pairs = BTreeSet::new();
        for c in &self.connections {
            if self.node(c.from_node).is_none() || self.node(c.to_node).is_none() {
                return Err(format!(
                    "connection {} references missing node",
                    c.innovation
                ));
            }
            if !pairs.insert((c.from_node, c.to_node)) {
                return Err(format!(
                    "duplicate endpoint pair ({}, {})",
                    c.from_node, c.to_node
                ));
            }
        }
        if !self.is_acyclic() {
            return Err("enabled-connection graph has a cycle".into());
        }
        Ok(())
    }

    /// Content hash over the canonical gene encoding. Ignores the genome id
    /// and fitness: two genomes with identical genes hash identically.
    pub fn stable_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.nodes.len() * 24 + self.connections.len() * 24);
        for n in &self.nodes {
            bytes.extend_from_slice(&n.id.to_le_bytes());
            bytes.push(match n.kind {
                NodeKind::Input => 0,
                NodeKind::Output => 1,
                NodeKind::Hidden => 2,
                NodeKind::Bias => 3,
            });
            bytes.push(n.activation as u8);
            bytes.extend_from_slice(&n.response.to_bits().to_le_bytes());
            bytes.extend_from_slice(&n.bias.to_bits().to_le_bytes());
        }
        for c in &self.connections {
            bytes.extend_from_slice(&c.innovation.to_le_bytes());
            bytes.extend_from_slice(&c.from_node.to_le_bytes());
            bytes.extend_from_slice(&c.to_node.to_le_bytes());
            bytes.extend_from_slice(&c.weight.to_bits().to_le_bytes());
            bytes.push(c.enabled as u8);
        }
        fnv1a(&bytes)
    }

    /// The innovation set together with node ids, used for the gene-set
    /// conservation check in fixed-topology mode.
    pub fn gene_set(&self) -> (BTreeSet<NodeId>, BTreeSet<Innovation>) {
        (
            self.nodes.iter().map(|n| n.id).collect(),
            self.connections.iter().map(|c| c.innovation).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> AgentGenome {
        let mut g = AgentGenome::new(1);
        g.nodes = vec![
            NodeGene::new(1, NodeKind::Input, Activation::Identity),
            NodeGene::new(2, NodeKind::Output, Activation::Tanh),
            NodeGene::new(3, NodeKind::Hidden, Activation::Tanh),
        ];
        g.connections = vec![
            ConnectionGene {
                innovation: 1,
                from_node: 1,
                to_node: 3,
                weight: 0.5,
                enabled: true,
            },
            ConnectionGene {
                innovation: 2,
                from_node: 3,
                to_node: 2,
                weight: -0.25,
                enabled: true,
            },
        ];
        g
    }

    #[test]
    fn validates_and_detects_cycles() {
        let mut g = toy();
        assert!(g.validate().is_ok());
        g.connections.push(ConnectionGene {
            innovation: 3,
            from_node: 2,
            to_node: 1,
            weight: 1.0,
            enabled: true,
        });
        assert!(!g.is_acyclic());
    }

    #[test]
    fn edge_check_rejects_back_edges() {
        let g = toy();
        assert!(!g.edge_keeps_acyclic(2, 1));
        assert!(!g.edge_keeps_acyclic(3, 1));
        assert!(g.edge_keeps_acyclic(1, 2));
    }

    #[test]
    fn stable_hash_ignores_id_and_fitness() {
        let a = toy();
        let mut b = toy();
        b.id = 99;
        b.fitness = Some(5.0);
        assert_eq!(a.stable_hash(), b.stable_hash());
        let mut c = toy();
        c.connections[0].weight = 0.75;
        assert_ne!(a.stable_hash(), c.stable_hash());
    }

    #[test]
    fn serialization_is_byte_stable() {
        let g = toy();
        let s1 = serde_json::to_string(&g).unwrap();
        let s2 = serde_json::to_string(&serde_json::from_str::<AgentGenome>(&s1).unwrap()).unwrap();
        assert_eq!(s1, s2);
    }
}
