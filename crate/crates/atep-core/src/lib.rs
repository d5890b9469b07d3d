//! Open-ended coevolution of terrain environments and NEAT agents.
//!
//! This crate implements ATEP-style coevolution: a population of
//! CPPN-encoded terrain environments, each paired with a NEAT population
//! that evolves both weights and topology, plus pluggable mechanisms for
//! transferring agents between environments (fitness-based, species-based,
//! random, or none) and the open-endedness metrics used to judge such
//! systems (ANNECS, fitness-to-nodes and ANNECS-to-nodes ratios, and a
//! cross-run generalization protocol).
//!
//! Runs are deterministic: every stochastic decision draws from serialized
//! RNG streams, so a (config, seed) pair fully determines the ledger, and a
//! checkpoint resumes bit for bit.
//!
//! ```
//! use atep_core::config::RunConfig;
//! use atep_core::engine::Engine;
//!
//! let mut cfg = RunConfig::default();
//! cfg.poet.max_active = 2;
//! cfg.neat.pop_size = 8;
//! let mut engine = Engine::new(cfg).unwrap();
//! for _ in 0..3 {
//!     engine.step_iteration().unwrap();
//! }
//! assert_eq!(engine.state.ledger.rows.len(), 3);
//! ```

pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod neat;
pub mod phenotype;
pub mod rng;
pub mod sim;
pub mod terrain;

/// The guide's code blocks run as doc-tests so the book can never drift
/// from the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/genomes-and-distance.md")]
    mod genomes_and_distance {}
    #[doc = include_str!("../../../book/src/speciation-and-reproduction.md")]
    mod speciation_and_reproduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/terrain.md")]
    mod terrain_chapter {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine_chapter {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics_chapter {}
    #[doc = include_str!("../../../book/src/running-experiments.md")]
    mod running_experiments {}
}
