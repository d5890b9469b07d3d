//! Helpers shared by the integration and acceptance suites.

#![allow(dead_code)]

use atep_core::config::RunConfig;
use atep_core::neat::{
    instantiate, minimal_template, mutate, Activation, AgentGenome, InnovationRegistry,
    MutationRates, Signature,
};
use atep_core::rng::DetRng;

/// Small, fast run configuration for engine tests.
pub fn small_cfg(seed: u64) -> RunConfig {
    let mut cfg = RunConfig { seed, ..RunConfig::default() };
    cfg.neat.pop_size = 12;
    cfg.poet.max_active = 3;
    cfg.poet.max_children = 4;
    cfg.poet.max_admitted = 1;
    cfg.schedule.n_reproduce_iters = 10;
    cfg.schedule.n_transfer_iters = 5;
    cfg
}

/// A lineage of genomes sharing one registry, grown by random structural
/// mutation from a minimal template. Gives realistic aligned innovations.
pub struct Lineage {
    pub reg: InnovationRegistry,
    pub template: AgentGenome,
    pub rates: MutationRates,
    pub rng: DetRng,
    next_id: u64,
}

impl Lineage {
    pub fn new(seed: u64, n_inputs: usize, n_outputs: usize) -> Lineage {
        let sig = Signature { n_inputs, n_outputs };
        let mut reg = InnovationRegistry::new(sig.first_hidden_id());
        let template = minimal_template(sig, Activation::Tanh, &mut reg);
        let rates = MutationRates {
            weight_mutate_prob: 0.9,
            add_connection_prob: 0.4,
            add_node_prob: 0.3,
            toggle_prob: 0.1,
            ..MutationRates::default()
        };
        Lineage {
            reg,
            template,
            rates,
            rng: DetRng::new(seed),
            next_id: 1,
        }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// A fresh genome after `steps` rounds of mutation.
    pub fn genome(&mut self, steps: usize) -> AgentGenome {
        let id = self.next_id();
        let mut g = instantiate(&self.template, id, 1.0, &mut self.rng);
        for _ in 0..steps {
            g = mutate(&g, &mut self.reg, &self.rates, &mut self.rng);
            g.id = id;
        }
        g
    }
}
