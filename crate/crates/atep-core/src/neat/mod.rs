//! NEAT: genomes, innovation bookkeeping, compatibility distance,
//! speciation, and generational reproduction.

pub mod breeding;
pub mod distance;
pub mod genome;
pub mod init;
pub mod innovation;
pub mod species;

pub use breeding::{crossover, mutate, reproduce, MutationRates, ReproductionConfig};
pub use distance::{distance, CompatConfig, DistanceBreakdown};
pub use genome::{
    Activation, AgentGenome, ConnectionGene, GenomeId, Innovation, NodeGene, NodeId, NodeKind,
};
pub use init::{instantiate, layered_template, minimal_template, Signature};
pub use innovation::InnovationRegistry;
pub use species::{adjusted_fitness, best_of, cmp_rank, speciate, Species, SpeciesId};
