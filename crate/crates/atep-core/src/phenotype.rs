//! Compiles a genome into an evaluable feedforward network.
//!
//! A compiled network carries every node of the genome and exactly its
//! enabled connections, flattened into dense indices with a topological
//! evaluation order. Activation is pure and stateless: a node's value is
//! `activation(bias + response * sum(incoming))`, inputs pass observations
//! through unchanged, and the bias node is the constant 1.

use crate::error::PhenotypeError;
use crate::neat::{AgentGenome, Activation, NodeId, NodeKind};

#[derive(Debug, Clone)]
struct NodeSpec {
    kind: NodeKind,
    activation: Activation,
    response: f64,
    bias: f64,
    incoming: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    nodes: Vec<NodeSpec>,
    /// Indices of non-source nodes in dependency order.
    eval_order: Vec<usize>,
    input_idx: Vec<usize>,
    output_idx: Vec<usize>,
    bias_idx: Option<usize>,
    enabled_connections: usize,
    hidden_nodes: usize,
}

impl CompiledNetwork {
    pub fn input_arity(&self) -> usize {
        self.input_idx.len()
    }

    pub fn output_arity(&self) -> usize {
        self.output_idx.len()
    }

    /// Total node count, equal to the genome's node count.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Hidden nodes only; the census behind the complexity metrics.
    pub fn hidden_count(&self) -> usize {
        self.hidden_nodes
    }

    /// Edge count, equal to the genome's enabled connection count.
    pub fn connection_count(&self) -> usize {
        self.enabled_connections
    }
}

/// Builds the evaluable network for a genome. Disabled genes are absent from
/// the edge list; a cycle among enabled connections is a malformed genome.
pub fn compile(genome: &AgentGenome) -> Result<CompiledNetwork, PhenotypeError> {
    let index_of = |id: NodeId| -> usize {
        genome
            .nodes
            .binary_search_by_key(&id, |n| n.id)
            .expect("connection endpoints validated")
    };

    let mut nodes: Vec<NodeSpec> = genome
        .nodes
        .iter()
        .map(|n| NodeSpec {
            kind: n.kind,
            activation: n.activation,
            response: n.response,
            bias: n.bias,
            incoming: Vec::new(),
        })
        .collect();

    let mut indegree = vec![0usize; nodes.len()];
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for c in genome.connections.iter().filter(|c| c.enabled) {
        let from = index_of(c.from_node);
        let to = index_of(c.to_node);
        nodes[to].incoming.push((from, c.weight));
        indegree[to] += 1;
        successors[from].push(to);
    }

    // Kahn's algorithm; ready nodes processed in index order so the
    // evaluation order is a pure function of the genome.
    let mut ready: Vec<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    ready.sort_unstable();
    ready.reverse();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = ready.pop() {
        order.push(i);
        let mut newly: Vec<usize> = Vec::new();
        for &s in &successors[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                newly.push(s);
            }
        }
        newly.sort_unstable();
        for s in newly.into_iter().rev() {
            ready.push(s);
        }
    }
    if order.len() != nodes.len() {
        return Err(PhenotypeError::Cycle { genome: genome.id });
    }

    let eval_order: Vec<usize> = order
        .into_iter()
        .filter(|&i| !matches!(nodes[i].kind, NodeKind::Input | NodeKind::Bias))
        .collect();

    let input_idx: Vec<usize> = genome
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == NodeKind::Input)
        .map(|(i, _)| i)
        .collect();
    let output_idx: Vec<usize> = genome
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == NodeKind::Output)
        .map(|(i, _)| i)
        .collect();
    let bias_idx = genome
        .nodes
        .iter()
        .position(|n| n.kind == NodeKind::Bias);

    Ok(CompiledNetwork {
        hidden_nodes: genome.hidden_count(),
        enabled_connections: genome.enabled_count(),
        nodes,
        eval_order,
        input_idx,
        output_idx,
        bias_idx,
    })
}

/// Feeds one observation vector through the network. Deterministic and
/// stateless; same `(net, obs)` gives the same output bit for bit.
pub fn activate(net: &CompiledNetwork, obs: &[f64]) -> Result<Vec<f64>, PhenotypeError> {
    if obs.len() != net.input_idx.len() {
        return Err(PhenotypeError::ArityMismatch {
            expected: net.input_idx.len(),
            got: obs.len(),
        });
    }
    let mut values = vec![0.0f64; net.nodes.len()];
    for (slot, &idx) in net.input_idx.iter().enumerate() {
        values[idx] = obs[slot];
    }
    if let Some(b) = net.bias_idx {
        values[b] = 1.0;
    }
    for &i in &net.eval_order {
        let spec = &net.nodes[i];
        let sum: f64 = spec.incoming.iter().map(|&(src, w)| values[src] * w).sum();
        values[i] = spec.activation.apply(spec.bias + spec.response * sum);
    }
    Ok(net.output_idx.iter().map(|&i| values[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::{
        instantiate, minimal_template, mutate, InnovationRegistry, MutationRates, Signature,
    };
    use crate::rng::DetRng;

    fn minimal(n_in: usize, n_out: usize) -> (AgentGenome, InnovationRegistry) {
        let sig = Signature { n_inputs: n_in, n_outputs: n_out };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let t = minimal_template(sig, Activation::Tanh, &mut reg);
        (t, reg)
    }

    #[test]
    fn minimal_genome_has_no_hidden_nodes() {
        let (g, _) = minimal(3, 2);
        let net = compile(&g).unwrap();
        assert_eq!(net.hidden_count(), 0);
        assert_eq!(net.input_arity(), 3);
        assert_eq!(net.output_arity(), 2);
        assert_eq!(net.connection_count(), g.enabled_count());
        assert_eq!(net.node_count(), g.nodes.len());
    }

    #[test]
    fn zero_weights_zero_output() {
        let (g, _) = minimal(4, 2);
        let net = compile(&g).unwrap();
        let out = activate(&net, &[0.3, -0.7, 1.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn single_connection_closed_form() {
        let (mut g, _) = minimal(1, 1);
        g.connections[0].weight = 0.8; // input -> output
        g.connections[1].weight = 0.0; // bias -> output
        let out_id = g.nodes.iter().find(|n| n.kind == NodeKind::Output).unwrap().id;
        g.node_mut(out_id).unwrap().bias = 0.25;
        let net = compile(&g).unwrap();
        let x = 0.6;
        let out = activate(&net, &[x]).unwrap();
        assert!((out[0] - (0.25 + 0.8 * x).tanh()).abs() < 1e-15);
    }

    #[test]
    fn disabled_connections_are_absent() {
        let (mut g, _) = minimal(2, 1);
        g.connections[0].enabled = false;
        let net = compile(&g).unwrap();
        assert_eq!(net.connection_count(), g.connections.len() - 1);
    }

    #[test]
    fn cycle_is_rejected() {
        let (mut g, _) = minimal(1, 1);
        // Force a back edge output -> input.
        g.connections.push(crate::neat::ConnectionGene {
            innovation: 99,
            from_node: 3,
            to_node: 1,
            weight: 1.0,
            enabled: true,
        });
        g.normalize();
        assert!(matches!(
            compile(&g),
            Err(PhenotypeError::Cycle { .. })
        ));
    }

    #[test]
    fn arity_mismatch_is_contract_error() {
        let (g, _) = minimal(2, 1);
        let net = compile(&g).unwrap();
        assert!(matches!(
            activate(&net, &[1.0]),
            Err(PhenotypeError::ArityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn activation_is_reproducible() {
        let sig = Signature { n_inputs: 3, n_outputs: 2 };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let t = minimal_template(sig, Activation::Tanh, &mut reg);
        let mut rng = DetRng::new(5);
        let mut g = instantiate(&t, 1, 1.0, &mut rng);
        let rates = MutationRates {
            add_node_prob: 1.0,
            add_connection_prob: 1.0,
            ..MutationRates::default()
        };
        for _ in 0..5 {
            g = mutate(&g, &mut reg, &rates, &mut rng);
        }
        let net = compile(&g).unwrap();
        let obs = [0.1, -0.4, 0.9];
        let first = activate(&net, &obs).unwrap();
        for _ in 0..100 {
            assert_eq!(activate(&net, &obs).unwrap(), first);
        }
    }

    /// Splitting a connection with an identity hidden node and weights
    /// (1.0, w_old) must not change the function the network computes.
    #[test]
    fn add_node_split_preserves_function() {
        let sig = Signature { n_inputs: 2, n_outputs: 1 };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let t = minimal_template(sig, Activation::Tanh, &mut reg);
        let mut rng = DetRng::new(9);
        let g = instantiate(&t, 1, 1.0, &mut rng);
        let rates = MutationRates {
            add_node_prob: 1.0,
            hidden_activations: vec![Activation::Identity],
            ..MutationRates::silent()
        };
        let split = mutate(&g, &mut reg, &rates, &mut rng);
        assert_eq!(split.hidden_count(), 1);
        let before = compile(&g).unwrap();
        let after = compile(&split).unwrap();
        let mut probe = DetRng::new(77);
        for _ in 0..100 {
            let obs = [probe.range(-2.0, 2.0), probe.range(-2.0, 2.0)];
            let a = activate(&before, &obs).unwrap();
            let b = activate(&after, &obs).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12, "{} vs {}", a[0], b[0]);
        }
    }
}
