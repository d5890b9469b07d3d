//! Speciation: partitioning a population by compatibility distance.

use serde::{Deserialize, Serialize};

use super::distance::{distance, CompatConfig};
use super::genome::AgentGenome;
use crate::error::NeatError;

pub type SpeciesId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub id: SpeciesId,
    /// The genome members were matched against at assignment time.
    pub representative: AgentGenome,
    pub members: Vec<AgentGenome>,
    pub best_fitness_history: Vec<f64>,
    pub stagnation_count: u32,
}

impl Species {
    pub fn best_member(&self) -> &AgentGenome {
        best_of(&self.members).expect("species is never empty")
    }

    pub fn total_adjusted_fitness(&self) -> Result<f64, NeatError> {
        Ok(adjusted_fitness(self)?.iter().sum())
    }
}

/// Highest fitness first; genome id breaks ties.
pub fn best_of(genomes: &[AgentGenome]) -> Option<&AgentGenome> {
    genomes.iter().min_by(|a, b| cmp_rank(a, b))
}

/// Ordering used everywhere a single genome must be picked: fitness
/// descending, then genome id ascending.
pub fn cmp_rank(a: &AgentGenome, b: &AgentGenome) -> std::cmp::Ordering {
    let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
    let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
    fb.partial_cmp(&fa)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

/// Per-member adjusted fitness: raw fitness divided by species size.
pub fn adjusted_fitness(sp: &Species) -> Result<Vec<f64>, NeatError> {
    let n = sp.members.len() as f64;
    sp.members
        .iter()
        .map(|m| {
            m.fitness
                .map(|f| f / n)
                .ok_or(NeatError::UnsetFitness { genome: m.id })
        })
        .collect()
}

/// Assigns each genome to the first species whose representative lies within
/// `delta_species`, creating new species for outliers. Prior species carry
/// their histories forward; before matching, each prior species re-draws its
/// representative as the prior member closest to the old one (ties broken by
/// lowest genome hash). Species left without members are dropped.
pub fn speciate(
    population: Vec<AgentGenome>,
    prior: &[Species],
    cfg: &CompatConfig,
    next_species_id: &mut SpeciesId,
) -> Vec<Species> {
    let mut species: Vec<Species> = prior
        .iter()
        .map(|sp| {
            let rep = sp
                .members
                .iter()
                .min_by(|a, b| {
                    let da = distance(a, &sp.representative, cfg).delta;
                    let db = distance(b, &sp.representative, cfg).delta;
                    da.partial_cmp(&db)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.stable_hash().cmp(&b.stable_hash()))
                })
                .unwrap_or(&sp.representative)
                .clone();
            Species {
                id: sp.id,
                representative: rep,
                members: Vec::new(),
                best_fitness_history: sp.best_fitness_history.clone(),
                stagnation_count: sp.stagnation_count,
            }
        })
        .collect();

    for genome in population {
        let slot = species
            .iter()
            .position(|sp| distance(&genome, &sp.representative, cfg).delta < cfg.delta_species);
        match slot {
            Some(i) => species[i].members.push(genome),
            None => {
                let id = *next_species_id;
                *next_species_id += 1;
                species.push(Species {
                    id,
                    representative: genome.clone(),
                    members: vec![genome],
                    best_fitness_history: Vec::new(),
                    stagnation_count: 0,
                });
            }
        }
    }

    species.retain(|sp| !sp.members.is_empty());
    species
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::genome::{Activation, ConnectionGene, NodeGene, NodeKind};

    fn weighted(id: u64, w: f64, fitness: Option<f64>) -> AgentGenome {
        let mut g = AgentGenome::new(id);
        g.nodes = vec![
            NodeGene::new(1, NodeKind::Input, Activation::Identity),
            NodeGene::new(2, NodeKind::Output, Activation::Tanh),
        ];
        g.connections = vec![ConnectionGene {
            innovation: 1,
            from_node: 1,
            to_node: 2,
            weight: w,
            enabled: true,
        }];
        g.fitness = fitness;
        g
    }

    #[test]
    fn identical_genomes_one_species() {
        let pop: Vec<_> = (0..8).map(|i| weighted(i, 0.5, None)).collect();
        let mut next = 1;
        let out = speciate(pop, &[], &CompatConfig::default(), &mut next);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].members.len(), 8);
    }

    #[test]
    fn two_weight_clusters_two_species() {
        // c3 = 0.4, threshold 1.0: within-cluster delta 0.04, across 4.0.
        let cfg = CompatConfig {
            delta_species: 1.0,
            ..CompatConfig::default()
        };
        let mut pop = Vec::new();
        for i in 0..4 {
            pop.push(weighted(i, 0.0 + 0.1 * i as f64, None));
        }
        for i in 4..8 {
            pop.push(weighted(i, 10.0 + 0.1 * i as f64, None));
        }
        let mut next = 1;
        let out = speciate(pop, &[], &cfg, &mut next);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].members.len(), 4);
        assert_eq!(out[1].members.len(), 4);
    }

    #[test]
    fn singleton_population() {
        let mut next = 1;
        let out = speciate(
            vec![weighted(3, 0.1, None)],
            &[],
            &CompatConfig::default(),
            &mut next,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].members.len(), 1);
        assert_eq!(out[0].representative.id, 3);
    }

    #[test]
    fn prior_species_keep_history() {
        let cfg = CompatConfig::default();
        let mut next = 1;
        let gen1 = speciate(vec![weighted(1, 0.5, None)], &[], &cfg, &mut next);
        let mut carried = gen1;
        carried[0].members[0].fitness = Some(3.0);
        carried[0].best_fitness_history.push(3.0);
        let gen2 = speciate(vec![weighted(2, 0.5, None)], &carried, &cfg, &mut next);
        assert_eq!(gen2.len(), 1);
        assert_eq!(gen2[0].id, carried[0].id);
        assert_eq!(gen2[0].best_fitness_history, vec![3.0]);
    }

    #[test]
    fn adjusted_fitness_divides_by_size() {
        let sp = Species {
            id: 1,
            representative: weighted(0, 0.0, Some(3.0)),
            members: vec![weighted(0, 0.0, Some(3.0)), weighted(1, 0.0, Some(5.0))],
            best_fitness_history: Vec::new(),
            stagnation_count: 0,
        };
        assert_eq!(adjusted_fitness(&sp).unwrap(), vec![1.5, 2.5]);
    }

    #[test]
    fn adjusted_fitness_requires_evaluation() {
        let sp = Species {
            id: 1,
            representative: weighted(0, 0.0, None),
            members: vec![weighted(0, 0.0, None)],
            best_fitness_history: Vec::new(),
            stagnation_count: 0,
        };
        assert!(adjusted_fitness(&sp).is_err());
    }
}
