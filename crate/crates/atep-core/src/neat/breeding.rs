//! Crossover, mutation, and generational reproduction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::genome::{
    Activation, AgentGenome, ConnectionGene, GenomeId, NodeGene, NodeId, NodeKind,
};
use super::innovation::InnovationRegistry;
use super::species::{best_of, cmp_rank, Species};
use crate::error::NeatError;
use crate::rng::DetRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub weight_mutate_prob: f64,
    pub weight_replace_prob: f64,
    pub weight_sigma: f64,
    pub weight_init_sigma: f64,
    pub bias_mutate_prob: f64,
    pub bias_sigma: f64,
    pub response_mutate_prob: f64,
    pub response_sigma: f64,
    pub toggle_prob: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    /// Gates add-connection and add-node; off in fixed-topology mode.
    pub structural_enabled: bool,
    pub hidden_activations: Vec<Activation>,
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates {
            weight_mutate_prob: 0.8,
            weight_replace_prob: 0.1,
            weight_sigma: 0.5,
            weight_init_sigma: 1.0,
            bias_mutate_prob: 0.3,
            bias_sigma: 0.1,
            response_mutate_prob: 0.1,
            response_sigma: 0.1,
            toggle_prob: 0.03,
            add_connection_prob: 0.15,
            add_node_prob: 0.05,
            structural_enabled: true,
            hidden_activations: vec![Activation::Tanh, Activation::Relu, Activation::Sigmoid],
        }
    }
}

impl MutationRates {
    /// A no-op rate set, useful for tests and for cloning populations.
    pub fn silent() -> Self {
        MutationRates {
            weight_mutate_prob: 0.0,
            weight_replace_prob: 0.0,
            bias_mutate_prob: 0.0,
            response_mutate_prob: 0.0,
            toggle_prob: 0.0,
            add_connection_prob: 0.0,
            add_node_prob: 0.0,
            ..MutationRates::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionConfig {
    /// Fraction of each species eligible as parents.
    pub survival_fraction: f64,
    /// Generations without best-fitness improvement before removal.
    pub stagnation_limit: u32,
    /// Probability that a gene disabled in either parent stays disabled.
    pub gene_redisable_prob: f64,
}

impl Default for ReproductionConfig {
    fn default() -> Self {
        ReproductionConfig {
            survival_fraction: 0.2,
            stagnation_limit: 15,
            gene_redisable_prob: 0.75,
        }
    }
}

/// Recombines two evaluated parents. Matching genes (same innovation) are
/// inherited from either parent at random; disjoint and excess genes come
/// from the fitter parent, or from both on a fitness tie. A gene disabled in
/// either parent is re-disabled in the child with `redisable_prob`. Genes
/// whose enabled state would close a cycle are kept but disabled, so the
/// child is always acyclic.
pub fn crossover(
    parent_a: &AgentGenome,
    parent_b: &AgentGenome,
    child_id: GenomeId,
    redisable_prob: f64,
    rng: &mut DetRng,
) -> Result<AgentGenome, NeatError> {
    let fa = parent_a
        .fitness
        .ok_or(NeatError::UnsetFitness { genome: parent_a.id })?;
    let fb = parent_b
        .fitness
        .ok_or(NeatError::UnsetFitness { genome: parent_b.id })?;

    let (a_fitter, tie) = if fa == fb {
        (true, true)
    } else {
        (fa > fb, false)
    };

    let mut child = AgentGenome::new(child_id);
    let mut used_pairs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut enabled_edges: Vec<(NodeId, NodeId)> = Vec::new();

    // Closes over the accepted enabled edges so far.
    fn would_cycle(edges: &[(NodeId, NodeId)], from: NodeId, to: NodeId) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![to];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == from {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            stack.extend(edges.iter().filter(|(f, _)| *f == n).map(|(_, t)| *t));
        }
        false
    }

    let mut push_gene =
        |gene: ConnectionGene, child: &mut AgentGenome| {
            if !used_pairs.insert((gene.from_node, gene.to_node)) {
                return;
            }
            let mut gene = gene;
            if gene.enabled {
                if would_cycle(&enabled_edges, gene.from_node, gene.to_node) {
                    gene.enabled = false;
                } else {
                    enabled_edges.push((gene.from_node, gene.to_node));
                }
            }
            child.connections.push(gene);
        };

    let (ca, cb) = (&parent_a.connections, &parent_b.connections);
    let (mut i, mut j) = (0usize, 0usize);
    while i < ca.len() || j < cb.len() {
        match (ca.get(i), cb.get(j)) {
            (Some(ga), Some(gb)) if ga.innovation == gb.innovation => {
                let mut gene = if rng.chance(0.5) { ga.clone() } else { gb.clone() };
                if !ga.enabled || !gb.enabled {
                    gene.enabled = !rng.chance(redisable_prob);
                }
                push_gene(gene, &mut child);
                i += 1;
                j += 1;
            }
            (Some(ga), Some(gb)) if ga.innovation < gb.innovation => {
                if a_fitter || tie {
                    push_gene(ga.clone(), &mut child);
                }
                i += 1;
            }
            (Some(_), Some(gb)) => {
                if !a_fitter || tie {
                    push_gene(gb.clone(), &mut child);
                }
                j += 1;
            }
            (Some(ga), None) => {
                if a_fitter || tie {
                    push_gene(ga.clone(), &mut child);
                }
                i += 1;
            }
            (None, Some(gb)) => {
                if !a_fitter || tie {
                    push_gene(gb.clone(), &mut child);
                }
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    // Node genes: the fixed signature plus everything the connections touch.
    let mut required: BTreeSet<NodeId> = child
        .connections
        .iter()
        .flat_map(|c| [c.from_node, c.to_node])
        .collect();
    for n in &parent_a.nodes {
        if n.kind != NodeKind::Hidden {
            required.insert(n.id);
        }
    }
    for id in required {
        let gene = match (parent_a.node(id), parent_b.node(id)) {
            (Some(na), Some(nb)) => {
                if rng.chance(0.5) {
                    na.clone()
                } else {
                    nb.clone()
                }
            }
            (Some(na), None) => na.clone(),
            (None, Some(nb)) => nb.clone(),
            (None, None) => {
                return Err(NeatError::MalformedGenome {
                    genome: child_id,
                    reason: format!("node {id} referenced by no parent"),
                })
            }
        };
        child.nodes.push(gene);
    }

    child.normalize();
    Ok(child)
}

/// Applies the configured mutations to a copy of the genome. Structural
/// edits draw innovations and node ids from the registry so identical edits
/// in different genomes are assigned identical numbers.
pub fn mutate(
    genome: &AgentGenome,
    reg: &mut InnovationRegistry,
    rates: &MutationRates,
    rng: &mut DetRng,
) -> AgentGenome {
    let mut g = genome.clone();
    g.fitness = None;

    for c in g.connections.iter_mut() {
        if rng.chance(rates.weight_mutate_prob) {
            if rng.chance(rates.weight_replace_prob) {
                c.weight = rng.gauss(0.0, rates.weight_init_sigma);
            } else {
                c.weight += rng.gauss(0.0, rates.weight_sigma);
            }
        }
    }

    for n in g.nodes.iter_mut() {
        if matches!(n.kind, NodeKind::Input | NodeKind::Bias) {
            continue;
        }
        if rng.chance(rates.bias_mutate_prob) {
            n.bias += rng.gauss(0.0, rates.bias_sigma);
        }
        if rng.chance(rates.response_mutate_prob) {
            n.response += rng.gauss(0.0, rates.response_sigma);
        }
    }

    if rng.chance(rates.toggle_prob) && !g.connections.is_empty() {
        let idx = rng.index(g.connections.len());
        let (from, to, enabled) = {
            let c = &g.connections[idx];
            (c.from_node, c.to_node, c.enabled)
        };
        if enabled {
            g.connections[idx].enabled = false;
        } else if g.edge_keeps_acyclic(from, to) {
            g.connections[idx].enabled = true;
        }
    }

    if rates.structural_enabled {
        if rng.chance(rates.add_connection_prob) {
            add_connection(&mut g, reg, rates, rng);
        }
        if rng.chance(rates.add_node_prob) {
            add_node(&mut g, reg, rates, rng);
        }
    }

    g.normalize();
    g
}

/// Adds one acyclic connection chosen uniformly from the valid candidates;
/// no-op when no candidate exists.
fn add_connection(
    g: &mut AgentGenome,
    reg: &mut InnovationRegistry,
    rates: &MutationRates,
    rng: &mut DetRng,
) {
    let mut candidates: Vec<(NodeId, NodeId)> = Vec::new();
    for from in &g.nodes {
        if from.kind == NodeKind::Output {
            continue;
        }
        for to in &g.nodes {
            if !matches!(to.kind, NodeKind::Hidden | NodeKind::Output) || from.id == to.id {
                continue;
            }
            if g.has_connection(from.id, to.id) {
                continue;
            }
            if g.edge_keeps_acyclic(from.id, to.id) {
                candidates.push((from.id, to.id));
            }
        }
    }
    if candidates.is_empty() {
        return;
    }
    let (from, to) = candidates[rng.index(candidates.len())];
    let innovation = reg.connection(from, to);
    g.connections.push(ConnectionGene {
        innovation,
        from_node: from,
        to_node: to,
        weight: rng.gauss(0.0, rates.weight_init_sigma),
        enabled: true,
    });
    g.normalize();
}

/// Splits one enabled connection: the old gene is disabled and replaced by
/// `from -> h` with weight 1.0 and `h -> to` carrying the old weight.
fn add_node(
    g: &mut AgentGenome,
    reg: &mut InnovationRegistry,
    rates: &MutationRates,
    rng: &mut DetRng,
) {
    if rates.hidden_activations.is_empty() {
        return;
    }
    let enabled: Vec<usize> = g
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .map(|(i, _)| i)
        .collect();
    if enabled.is_empty() {
        return;
    }
    let idx = enabled[rng.index(enabled.len())];
    let (innovation, from, to, weight) = {
        let c = &g.connections[idx];
        (c.innovation, c.from_node, c.to_node, c.weight)
    };
    let node_id = reg.split_node(innovation);
    if g.node(node_id).is_some() {
        // This genome already split this connection once; re-splitting would
        // duplicate the node id.
        return;
    }
    g.connections[idx].enabled = false;
    let activation = rates.hidden_activations[rng.index(rates.hidden_activations.len())];
    g.nodes.push(NodeGene::new(node_id, NodeKind::Hidden, activation));
    let in_innov = reg.connection(from, node_id);
    g.connections.push(ConnectionGene {
        innovation: in_innov,
        from_node: from,
        to_node: node_id,
        weight: 1.0,
        enabled: true,
    });
    let out_innov = reg.connection(node_id, to);
    g.connections.push(ConnectionGene {
        innovation: out_innov,
        from_node: node_id,
        to_node: to,
        weight,
        enabled: true,
    });
    g.normalize();
}

/// One generational replacement step over a speciated, evaluated population.
///
/// Species histories and stagnation counters are updated in place; species
/// past the stagnation limit are dropped unless they hold the population
/// champion. Offspring quotas are proportional to total adjusted fitness
/// (largest-remainder rounding), each surviving species keeps its champion
/// unchanged, and parents are drawn from the top survival fraction. Exactly
/// `pop_size` genomes are returned.
pub fn reproduce(
    species: &mut Vec<Species>,
    pop_size: usize,
    cfg: &ReproductionConfig,
    rates: &MutationRates,
    reg: &mut InnovationRegistry,
    rng: &mut DetRng,
    next_genome_id: &mut GenomeId,
) -> Result<Vec<AgentGenome>, NeatError> {
    assert!(pop_size > 0, "pop_size must be positive");
    species.sort_by_key(|sp| sp.id);

    for sp in species.iter() {
        for m in &sp.members {
            if m.fitness.is_none() {
                return Err(NeatError::UnsetFitness { genome: m.id });
            }
        }
    }

    let champion_id = species
        .iter()
        .flat_map(|sp| sp.members.iter())
        .min_by(|a, b| cmp_rank(a, b))
        .expect("population non-empty")
        .id;

    // Stagnation bookkeeping.
    for sp in species.iter_mut() {
        let cur_best = best_of(&sp.members).and_then(|g| g.fitness).unwrap();
        let historic = sp
            .best_fitness_history
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if sp.best_fitness_history.is_empty() || cur_best > historic {
            sp.stagnation_count = 0;
        } else {
            sp.stagnation_count += 1;
        }
        sp.best_fitness_history.push(cur_best);
    }

    let before = species.len();
    species.retain(|sp| {
        sp.stagnation_count <= cfg.stagnation_limit
            || sp.members.iter().any(|m| m.id == champion_id)
    });
    debug_assert!(!species.is_empty() || before == 0);

    // Quotas by total adjusted fitness. Raw scores may be negative; weights
    // are shifted by the population-wide minimum so proportions stay
    // meaningful, which leaves already-positive populations untouched.
    let adj: Vec<Vec<f64>> = species
        .iter()
        .map(|sp| {
            let n = sp.members.len() as f64;
            sp.members.iter().map(|m| m.fitness.unwrap() / n).collect()
        })
        .collect();
    let min_adj = adj
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let shift = if min_adj < 0.0 { -min_adj } else { 0.0 };
    let weights: Vec<f64> = adj
        .iter()
        .map(|v| v.iter().map(|x| x + shift).sum::<f64>())
        .collect();
    let total: f64 = weights.iter().sum();

    let mut quotas = largest_remainder(&weights, total, pop_size, species);

    // The champion's species always breeds.
    let champ_idx = species
        .iter()
        .position(|sp| sp.members.iter().any(|m| m.id == champion_id))
        .expect("champion species retained");
    if quotas[champ_idx] == 0 {
        let donor = (0..quotas.len())
            .filter(|&i| quotas[i] > 0)
            .max_by_key(|&i| (quotas[i], std::cmp::Reverse(species[i].id)))
            .expect("pop_size > 0 implies a positive quota");
        quotas[donor] -= 1;
        quotas[champ_idx] += 1;
    }

    let mut offspring = Vec::with_capacity(pop_size);
    for (sp, &quota) in species.iter().zip(quotas.iter()) {
        if quota == 0 {
            continue;
        }
        let mut ranked: Vec<&AgentGenome> = sp.members.iter().collect();
        ranked.sort_by(|a, b| cmp_rank(a, b));
        let keep = ((ranked.len() as f64 * cfg.survival_fraction).ceil() as usize)
            .clamp(1, ranked.len());
        let survivors = &ranked[..keep];

        // Elitism: the species champion passes through unchanged.
        offspring.push(survivors[0].clone());
        for _ in 1..quota {
            let pa = survivors[rng.index(survivors.len())];
            let pb = survivors[rng.index(survivors.len())];
            let child_id = *next_genome_id;
            *next_genome_id += 1;
            let child = crossover(pa, pb, child_id, cfg.gene_redisable_prob, rng)?;
            offspring.push(mutate(&child, reg, rates, rng));
        }
    }

    debug_assert_eq!(offspring.len(), pop_size);
    Ok(offspring)
}

/// Largest-remainder apportionment of `pop_size` slots over `weights`.
/// A zero total degenerates to an equal split. Ties in the remainder go to
/// the lower species id.
fn largest_remainder(
    weights: &[f64],
    total: f64,
    pop_size: usize,
    species: &[Species],
) -> Vec<usize> {
    let n = weights.len();
    let shares: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| pop_size as f64 * w / total).collect()
    } else {
        vec![pop_size as f64 / n as f64; n]
    };
    let mut quotas: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let ri = shares[i] - shares[i].floor();
        let rj = shares[j] - shares[j].floor();
        rj.partial_cmp(&ri)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(species[i].id.cmp(&species[j].id))
    });
    for k in 0..(pop_size - assigned) {
        quotas[order[k % n]] += 1;
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::genome::{Activation, NodeKind};
    use crate::neat::init::{instantiate, minimal_template, Signature};

    fn setup(n_in: usize, n_out: usize) -> (AgentGenome, InnovationRegistry, DetRng) {
        let sig = Signature { n_inputs: n_in, n_outputs: n_out };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let template = minimal_template(sig, Activation::Tanh, &mut reg);
        (template, reg, DetRng::new(404))
    }

    #[test]
    fn crossover_of_identical_parents_is_identical() {
        let (template, _, mut rng) = setup(3, 1);
        let mut a = instantiate(&template, 1, 1.0, &mut rng);
        a.fitness = Some(5.0);
        let mut b = a.clone();
        b.id = 2;
        let child = crossover(&a, &b, 3, 0.75, &mut rng).unwrap();
        assert_eq!(child.stable_hash(), a.stable_hash());
        assert_eq!(child.id, 3);
        assert_eq!(child.fitness, None);
    }

    #[test]
    fn fitter_parent_contributes_exclusive_genes() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let mut fitter = instantiate(&template, 1, 1.0, &mut rng);
        let mut weaker = instantiate(&template, 2, 1.0, &mut rng);
        // Give the fitter parent an extra split (new innovations), the
        // weaker parent a different extra structure.
        let grow = MutationRates {
            add_node_prob: 1.0,
            ..MutationRates::silent()
        };
        fitter = mutate(&fitter, &mut reg, &grow, &mut rng);
        weaker = mutate(&weaker, &mut reg, &grow, &mut rng);
        weaker = mutate(&weaker, &mut reg, &grow, &mut rng);
        fitter.fitness = Some(10.0);
        weaker.fitness = Some(1.0);

        let child = crossover(&fitter, &weaker, 9, 0.75, &mut rng).unwrap();
        let child_innovs: std::collections::BTreeSet<u32> =
            child.connections.iter().map(|c| c.innovation).collect();
        let fitter_innovs: std::collections::BTreeSet<u32> =
            fitter.connections.iter().map(|c| c.innovation).collect();
        let weaker_only: Vec<u32> = weaker
            .connections
            .iter()
            .map(|c| c.innovation)
            .filter(|i| !fitter_innovs.contains(i))
            .collect();
        assert_eq!(child_innovs, fitter_innovs);
        assert!(!weaker_only.is_empty());
        assert!(weaker_only.iter().all(|i| !child_innovs.contains(i)));
    }

    #[test]
    fn tied_parents_contribute_both_exclusive_sides() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let grow = MutationRates {
            add_node_prob: 1.0,
            ..MutationRates::silent()
        };
        let mut a = mutate(&instantiate(&template, 1, 1.0, &mut rng), &mut reg, &grow, &mut rng);
        let mut b = mutate(&instantiate(&template, 2, 1.0, &mut rng), &mut reg, &grow, &mut rng);
        a.fitness = Some(4.0);
        b.fitness = Some(4.0);
        let child = crossover(&a, &b, 9, 0.75, &mut rng).unwrap();
        let union: std::collections::BTreeSet<u32> = a
            .connections
            .iter()
            .chain(b.connections.iter())
            .map(|c| c.innovation)
            .collect();
        let got: std::collections::BTreeSet<u32> =
            child.connections.iter().map(|c| c.innovation).collect();
        assert_eq!(got, union);
        child.validate().unwrap();
    }

    #[test]
    fn zero_rates_mutation_is_identity() {
        let (template, mut reg, mut rng) = setup(3, 2);
        let g = instantiate(&template, 1, 1.0, &mut rng);
        let out = mutate(&g, &mut reg, &MutationRates::silent(), &mut rng);
        assert_eq!(out.stable_hash(), g.stable_hash());
    }

    /// A saturated minimal genome has nowhere left to grow a connection:
    /// the mutation degrades to a no-op instead of forcing a cycle.
    #[test]
    fn add_connection_without_candidates_is_a_noop() {
        let (template, mut reg, mut rng) = setup(1, 1);
        let g = instantiate(&template, 1, 1.0, &mut rng);
        let rates = MutationRates {
            add_connection_prob: 1.0,
            ..MutationRates::silent()
        };
        let out = mutate(&g, &mut reg, &rates, &mut rng);
        assert_eq!(out.stable_hash(), g.stable_hash());
    }

    #[test]
    fn add_node_splits_with_unit_in_weight_and_carried_out_weight() {
        let (template, mut reg, mut rng) = setup(1, 1);
        let mut g = instantiate(&template, 1, 1.0, &mut rng);
        g.connections[0].weight = 0.7; // input -> output
        g.connections[1].enabled = false; // silence bias edge so the split
                                          // picks the only enabled gene
        let rates = MutationRates {
            add_node_prob: 1.0,
            hidden_activations: vec![Activation::Tanh],
            ..MutationRates::silent()
        };
        let split = mutate(&g, &mut reg, &rates, &mut rng);
        assert_eq!(split.hidden_count(), 1);
        let old = split
            .connections
            .iter()
            .find(|c| c.innovation == g.connections[0].innovation)
            .unwrap();
        assert!(!old.enabled, "split gene must be disabled");
        let hidden = split
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Hidden)
            .unwrap();
        let incoming = split
            .connections
            .iter()
            .find(|c| c.to_node == hidden.id)
            .unwrap();
        let outgoing = split
            .connections
            .iter()
            .find(|c| c.from_node == hidden.id)
            .unwrap();
        assert_eq!(incoming.weight, 1.0);
        assert_eq!(outgoing.weight, 0.7);
        assert_eq!(incoming.from_node, old.from_node);
        assert_eq!(outgoing.to_node, old.to_node);
    }

    /// The same structural mutation in different genomes replays the same
    /// innovation numbers through the registry.
    #[test]
    fn same_split_in_two_genomes_shares_innovations() {
        let (template, mut reg, mut rng) = setup(1, 1);
        let mut a = instantiate(&template, 1, 1.0, &mut rng);
        let mut b = instantiate(&template, 2, 1.0, &mut rng);
        a.connections[1].enabled = false;
        b.connections[1].enabled = false;
        let rates = MutationRates {
            add_node_prob: 1.0,
            hidden_activations: vec![Activation::Tanh],
            ..MutationRates::silent()
        };
        let sa = mutate(&a, &mut reg, &rates, &mut rng);
        let sb = mutate(&b, &mut reg, &rates, &mut rng);
        let innovs = |g: &AgentGenome| -> Vec<u32> {
            g.connections.iter().map(|c| c.innovation).collect()
        };
        assert_eq!(innovs(&sa), innovs(&sb));
        assert_eq!(sa.gene_set(), sb.gene_set());
    }

    fn evaluated_species(
        id: u64,
        genomes: Vec<AgentGenome>,
        history: Vec<f64>,
        stagnation: u32,
    ) -> Species {
        Species {
            id,
            representative: genomes[0].clone(),
            members: genomes,
            best_fitness_history: history,
            stagnation_count: stagnation,
        }
    }

    #[test]
    fn reproduce_single_species_preserves_champion() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let mut members = Vec::new();
        for i in 0..5 {
            let mut g = instantiate(&template, i, 1.0, &mut rng);
            g.fitness = Some(i as f64);
            members.push(g);
        }
        let champion_hash = members[4].stable_hash();
        let mut species = vec![evaluated_species(1, members, vec![], 0)];
        let mut next_id = 100;
        let out = reproduce(
            &mut species,
            10,
            &ReproductionConfig::default(),
            &MutationRates::silent(),
            &mut reg,
            &mut rng,
            &mut next_id,
        )
        .unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(out[0].id, 4, "champion passes through unchanged");
        assert_eq!(out[0].stable_hash(), champion_hash);
    }

    /// Proportional quotas with largest-remainder rounding: adjusted totals
    /// 3 and 1 at population 8 give 6 and 2. Species are structurally
    /// distinct and mutation is silent, so offspring are attributable.
    #[test]
    fn reproduce_quota_proportional_to_adjusted_fitness() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let grow = MutationRates {
            add_node_prob: 1.0,
            ..MutationRates::silent()
        };
        // Species A: two members, raw fitness 3 each -> total adjusted 3.
        let mut a_members = Vec::new();
        for i in 0..2 {
            let mut g = instantiate(&template, i, 1.0, &mut rng);
            g.fitness = Some(3.0);
            a_members.push(g);
        }
        // Species B: one structurally grown member, raw fitness 1.
        let mut b = mutate(&instantiate(&template, 10, 1.0, &mut rng), &mut reg, &grow, &mut rng);
        b.id = 10;
        b.fitness = Some(1.0);
        let b_genes = b.gene_set();
        let a_genes = a_members[0].gene_set();

        let mut species = vec![
            evaluated_species(1, a_members, vec![], 0),
            evaluated_species(2, vec![b], vec![], 0),
        ];
        let mut next_id = 100;
        let out = reproduce(
            &mut species,
            8,
            &ReproductionConfig::default(),
            &MutationRates::silent(),
            &mut reg,
            &mut rng,
            &mut next_id,
        )
        .unwrap();
        assert_eq!(out.len(), 8);
        let from_a = out.iter().filter(|g| g.gene_set() == a_genes).count();
        let from_b = out.iter().filter(|g| g.gene_set() == b_genes).count();
        assert_eq!((from_a, from_b), (6, 2));
    }

    #[test]
    fn stagnant_species_without_champion_is_removed() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let grow = MutationRates {
            add_node_prob: 1.0,
            ..MutationRates::silent()
        };
        let mut strong = instantiate(&template, 1, 1.0, &mut rng);
        strong.fitness = Some(50.0);
        let strong_genes = strong.gene_set();
        let mut stale = mutate(&instantiate(&template, 2, 1.0, &mut rng), &mut reg, &grow, &mut rng);
        stale.id = 2;
        stale.fitness = Some(5.0);
        let stale_genes = stale.gene_set();

        let cfg = ReproductionConfig {
            stagnation_limit: 15,
            ..ReproductionConfig::default()
        };
        let mut species = vec![
            evaluated_species(1, vec![strong], vec![60.0], 0),
            // Not improving on its recorded best and already past the limit.
            evaluated_species(2, vec![stale], vec![9.0], 15),
        ];
        let mut next_id = 100;
        let out = reproduce(
            &mut species,
            6,
            &cfg,
            &MutationRates::silent(),
            &mut reg,
            &mut rng,
            &mut next_id,
        )
        .unwrap();
        assert_eq!(species.len(), 1, "stagnant species dropped");
        assert!(out.iter().all(|g| g.gene_set() == strong_genes));
        assert!(out.iter().all(|g| g.gene_set() != stale_genes));
    }

    #[test]
    fn all_stagnant_keeps_the_champion_species() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let mut only = instantiate(&template, 1, 1.0, &mut rng);
        only.fitness = Some(1.0);
        let mut species = vec![evaluated_species(1, vec![only], vec![2.0], 40)];
        let mut next_id = 100;
        let out = reproduce(
            &mut species,
            4,
            &ReproductionConfig::default(),
            &MutationRates::silent(),
            &mut reg,
            &mut rng,
            &mut next_id,
        )
        .unwrap();
        assert_eq!(out.len(), 4, "population never comes back empty");
    }

    #[test]
    fn offspring_count_exact_for_any_split() {
        let (template, mut reg, mut rng) = setup(2, 1);
        for (sizes, pop_size) in [(vec![3usize, 5, 2], 17usize), (vec![1, 1], 3), (vec![7], 5)] {
            let mut species = Vec::new();
            let mut id = 0;
            for (k, n) in sizes.iter().enumerate() {
                let mut members = Vec::new();
                for _ in 0..*n {
                    let mut g = instantiate(&template, id, 1.0, &mut rng);
                    g.fitness = Some((id % 5) as f64 - 2.0); // negatives too
                    id += 1;
                    members.push(g);
                }
                species.push(evaluated_species(k as u64 + 1, members, vec![], 0));
            }
            let mut next_id = 1000;
            let out = reproduce(
                &mut species,
                pop_size,
                &ReproductionConfig::default(),
                &MutationRates::default(),
                &mut reg,
                &mut rng,
                &mut next_id,
            )
            .unwrap();
            assert_eq!(out.len(), pop_size);
            for g in &out {
                g.validate().unwrap();
            }
        }
    }

    #[test]
    fn unevaluated_member_is_an_error() {
        let (template, mut reg, mut rng) = setup(2, 1);
        let g = instantiate(&template, 1, 1.0, &mut rng);
        let mut species = vec![evaluated_species(1, vec![g], vec![], 0)];
        let mut next_id = 10;
        let err = reproduce(
            &mut species,
            4,
            &ReproductionConfig::default(),
            &MutationRates::silent(),
            &mut reg,
            &mut rng,
            &mut next_id,
        );
        assert!(matches!(err, Err(NeatError::UnsetFitness { genome: 1 })));
    }
}
