//! Initial genome construction.
//!
//! Node id layout for a problem signature with `n_in` inputs and `n_out`
//! outputs: inputs take ids `1..=n_in`, the bias node `n_in + 1`, outputs
//! `n_in + 2..=n_in + n_out + 1`. Hidden ids start after that, handed out by
//! the registry, so every genome in a lineage agrees on what an id means.

use super::genome::{Activation, AgentGenome, ConnectionGene, NodeGene, NodeId, NodeKind};
use super::innovation::InnovationRegistry;
use crate::rng::DetRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub n_inputs: usize,
    pub n_outputs: usize,
}

impl Signature {
    pub fn bias_id(&self) -> NodeId {
        self.n_inputs as NodeId + 1
    }

    pub fn output_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        let start = self.n_inputs as NodeId + 2;
        (0..self.n_outputs as NodeId).map(move |k| start + k)
    }

    pub fn first_hidden_id(&self) -> NodeId {
        (self.n_inputs + self.n_outputs) as NodeId + 2
    }
}

fn signature_nodes(sig: Signature, output_activation: Activation) -> Vec<NodeGene> {
    let mut nodes = Vec::with_capacity(sig.n_inputs + sig.n_outputs + 1);
    for i in 0..sig.n_inputs as NodeId {
        nodes.push(NodeGene::new(i + 1, NodeKind::Input, Activation::Identity));
    }
    nodes.push(NodeGene::new(sig.bias_id(), NodeKind::Bias, Activation::Identity));
    for id in sig.output_ids() {
        nodes.push(NodeGene::new(id, NodeKind::Output, output_activation));
    }
    nodes
}

/// Minimal template: every input and the bias wired straight to every
/// output, weights zero. Callers instantiate copies with fresh weights.
pub fn minimal_template(
    sig: Signature,
    output_activation: Activation,
    reg: &mut InnovationRegistry,
) -> AgentGenome {
    let mut g = AgentGenome::new(0);
    g.nodes = signature_nodes(sig, output_activation);
    let sources: Vec<NodeId> = (1..=sig.n_inputs as NodeId)
        .chain([sig.bias_id()])
        .collect();
    for &from in &sources {
        for to in sig.output_ids() {
            g.connections.push(ConnectionGene {
                innovation: reg.connection(from, to),
                from_node: from,
                to_node: to,
                weight: 0.0,
                enabled: true,
            });
        }
    }
    g.normalize();
    g
}

/// Fixed-topology template: fully connected hidden layers between inputs and
/// outputs, bias wired into every hidden and output node. Used by the
/// fixed-topology baseline mode, with structural mutation disabled.
pub fn layered_template(
    sig: Signature,
    layers: &[usize],
    hidden_activation: Activation,
    output_activation: Activation,
    reg: &mut InnovationRegistry,
) -> AgentGenome {
    let mut g = AgentGenome::new(0);
    g.nodes = signature_nodes(sig, output_activation);

    let mut prev: Vec<NodeId> = (1..=sig.n_inputs as NodeId).collect();
    for &width in layers {
        let mut layer = Vec::with_capacity(width);
        for _ in 0..width {
            let id = reg.alloc_node_id();
            g.nodes.push(NodeGene::new(id, NodeKind::Hidden, hidden_activation));
            layer.push(id);
        }
        for &from in prev.iter().chain([sig.bias_id()].iter()) {
            for &to in &layer {
                g.connections.push(ConnectionGene {
                    innovation: reg.connection(from, to),
                    from_node: from,
                    to_node: to,
                    weight: 0.0,
                    enabled: true,
                });
            }
        }
        prev = layer;
    }
    for &from in prev.iter().chain([sig.bias_id()].iter()) {
        for to in sig.output_ids() {
            g.connections.push(ConnectionGene {
                innovation: reg.connection(from, to),
                from_node: from,
                to_node: to,
                weight: 0.0,
                enabled: true,
            });
        }
    }
    g.normalize();
    g
}

/// Clones the template with fresh gaussian weights and the given id.
pub fn instantiate(
    template: &AgentGenome,
    id: u64,
    weight_sigma: f64,
    rng: &mut DetRng,
) -> AgentGenome {
    let mut g = template.clone();
    g.id = id;
    g.fitness = None;
    for c in g.connections.iter_mut() {
        c.weight = rng.gauss(0.0, weight_sigma);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_is_fully_wired_and_valid() {
        let sig = Signature { n_inputs: 3, n_outputs: 2 };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let t = minimal_template(sig, Activation::Tanh, &mut reg);
        assert!(t.validate().is_ok());
        assert_eq!(t.connections.len(), (3 + 1) * 2);
        assert_eq!(t.hidden_count(), 0);
    }

    #[test]
    fn layered_template_matches_expected_counts() {
        let sig = Signature { n_inputs: 13, n_outputs: 2 };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let t = layered_template(sig, &[40, 40], Activation::Tanh, Activation::Tanh, &mut reg);
        assert!(t.validate().is_ok());
        assert_eq!(t.hidden_count(), 80);
        // 13*40 + bias*40 + 40*40 + bias*40 + 40*2 + bias*2
        assert_eq!(t.connections.len(), 13 * 40 + 40 + 40 * 40 + 40 + 40 * 2 + 2);
    }

    #[test]
    fn two_instances_share_structure() {
        let sig = Signature { n_inputs: 2, n_outputs: 1 };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let t = minimal_template(sig, Activation::Tanh, &mut reg);
        let mut rng = DetRng::new(1);
        let a = instantiate(&t, 1, 1.0, &mut rng);
        let b = instantiate(&t, 2, 1.0, &mut rng);
        assert_eq!(a.gene_set(), b.gene_set());
        assert_ne!(a.connections[0].weight, b.connections[0].weight);
    }
}
