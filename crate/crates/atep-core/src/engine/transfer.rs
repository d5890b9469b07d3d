//! Inter-environment transfer mechanisms.
//!
//! Four policies move agents between active pairs:
//!
//! * **FBT** (fitness-based): the candidate's best genome must beat every
//!   entry of the target's recent best-score window, then a copy of the
//!   candidate population is fine-tuned on the target environment and must
//!   beat the window again; on success it replaces the entire target
//!   population.
//! * **SBT** (species-based): if the candidate's best genome lies within a
//!   distance threshold of the target's best, the candidate's best species
//!   is copied in, replacing the species that holds the target's best; the
//!   extra members are trimmed at the next reproduction.
//! * **RT** (random): each target is replaced by a coin flip.
//! * **NT**: no transfer.
//!
//! Checks run over ordered (candidate, target) pairs, candidate env id
//! ascending then target env id ascending, and each target accepts at most
//! one transfer per cycle.

use crate::config::TransferKind;
use crate::error::EngineError;
use crate::neat::{distance, reproduce, speciate, AgentGenome, Species};
use crate::rng::DetRng;
use crate::sim::evaluate_population;

use super::{Engine, TAG_FBT};

/// True when `score` strictly beats every recorded entry. Young pairs with
/// short histories are compared against what exists.
pub fn beats_history(score: f64, history: &[f64]) -> bool {
    history.iter().all(|&h| score > h)
}

impl Engine {
    /// Applies the configured transfer policy across all ordered pairs of
    /// distinct active pairs. Pairs without a completed generation (no
    /// champion yet) neither give nor receive.
    pub fn attempt_transfers(&mut self) -> Result<(), EngineError> {
        if self.cfg.transfer.kind == TransferKind::Nt {
            return Ok(());
        }
        let ids: Vec<usize> = (0..self.state.pairs.len())
            .filter(|&i| {
                self.state.pairs[i].champion.is_some()
                    && !self.state.pairs[i].best_fitness_history.is_empty()
            })
            .collect();
        if ids.len() < 2 {
            return Ok(());
        }

        let mut replaced: Vec<bool> = vec![false; self.state.pairs.len()];
        for &cand in &ids {
            for &target in &ids {
                if cand == target || replaced[target] {
                    continue;
                }
                let applied = match self.cfg.transfer.kind {
                    TransferKind::Nt => false,
                    TransferKind::Rt => self.rt_transfer(cand, target),
                    TransferKind::Fbt => self.fbt_check_and_transfer(cand, target)?,
                    TransferKind::Sbt => self.sbt_check_and_transfer(cand, target),
                };
                if applied {
                    replaced[target] = true;
                    let (s, t) = (
                        self.state.pairs[cand].env.env_id,
                        self.state.pairs[target].env.env_id,
                    );
                    self.record_transfer(self.cfg.transfer.kind, s, t);
                }
            }
        }
        Ok(())
    }

    /// Random transfer: replace the target population with a copy of the
    /// candidate's, with the configured probability.
    fn rt_transfer(&mut self, cand: usize, target: usize) -> bool {
        if !self
            .state
            .engine_rng
            .chance(self.cfg.transfer.rt_probability)
        {
            return false;
        }
        let population = self.state.pairs[cand].population.clone();
        let t = &mut self.state.pairs[target];
        t.population = population;
        t.species = Vec::new();
        true
    }

    /// Two-stage fitness gate, then full population replacement.
    pub fn fbt_check_and_transfer(
        &mut self,
        cand: usize,
        target: usize,
    ) -> Result<bool, EngineError> {
        let candidate_best = self.state.pairs[cand]
            .champion
            .clone()
            .expect("transfer participants have champions");
        let target_env = self.state.pairs[target].env.clone();
        let history = self.state.pairs[target].best_fitness_history.clone();

        // Stage 1: the candidate's best genome, scored directly on the
        // target environment, must beat the whole recent window.
        let terrain = self.terrain_of(&target_env)?;
        let direct = self.counted_rollout(&candidate_best, &terrain, target_env.env_id)?;
        if !beats_history(direct, &history) {
            return Ok(false);
        }

        // Stage 2: fine-tune a copy of the candidate population on the
        // target environment and apply the same gate to its best.
        let mut pop: Vec<AgentGenome> = self.state.pairs[cand].population.clone();
        let mut species: Vec<Species> = Vec::new();
        let mut next_species_id = 1u64;
        let mut ft_rng = DetRng::fork(
            self.cfg.seed,
            &[
                TAG_FBT,
                self.state.iteration,
                self.state.pairs[cand].env.env_id,
                target_env.env_id,
            ],
        );
        for _ in 0..self.cfg.transfer.finetune_generations {
            pop = self.evaluate_on(pop, &terrain, target_env.env_id)?;
            species = speciate(pop, &species, &self.cfg.neat.compat, &mut next_species_id);
            pop = reproduce(
                &mut species,
                self.cfg.neat.pop_size,
                &self.cfg.neat.repro,
                &self.cfg.neat.rates,
                &mut self.state.agent_registry,
                &mut ft_rng,
                &mut self.state.next_genome_id,
            )?;
        }
        pop = self.evaluate_on(pop, &terrain, target_env.env_id)?;
        let tuned_best = pop
            .iter()
            .filter_map(|g| g.fitness)
            .fold(f64::NEG_INFINITY, f64::max);
        if !beats_history(tuned_best, &history) {
            return Ok(false);
        }

        let t = &mut self.state.pairs[target];
        t.population = pop;
        t.species = Vec::new();
        Ok(true)
    }

    /// Species-based transfer: distance gate between best genomes, then the
    /// candidate's best species replaces the target's best species. Only
    /// that one species changes; the incoming members join the target's
    /// evaluation slate and the population is trimmed back to size at the
    /// next reproduction.
    pub fn sbt_check_and_transfer(&mut self, cand: usize, target: usize) -> bool {
        let (bc, bt) = match (
            self.state.pairs[cand].champion.clone(),
            self.state.pairs[target].champion.clone(),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => return false,
        };
        let d = distance(&bc, &bt, &self.cfg.neat.compat);
        if d.delta >= self.cfg.transfer.delta_transfer {
            return false;
        }
        let donor = match self.state.pairs[cand]
            .species
            .iter()
            .find(|sp| sp.members.iter().any(|m| m.id == bc.id))
        {
            Some(sp) => sp.clone(),
            None => return false,
        };
        let t = &mut self.state.pairs[target];
        let victim = match t
            .species
            .iter()
            .position(|sp| sp.members.iter().any(|m| m.id == bt.id))
        {
            Some(i) => i,
            None => return false,
        };
        t.species.remove(victim);
        let injected_id = t.next_species_id;
        t.next_species_id += 1;
        t.species.push(Species {
            id: injected_id,
            representative: donor.representative.clone(),
            members: donor.members.clone(),
            best_fitness_history: Vec::new(),
            stagnation_count: 0,
        });
        t.population.extend(donor.members);
        true
    }

    /// Evaluates a scratch population on a terrain with full accounting.
    fn evaluate_on(
        &mut self,
        pop: Vec<AgentGenome>,
        terrain: &crate::terrain::Terrain,
        env_id: crate::terrain::EnvId,
    ) -> Result<Vec<AgentGenome>, EngineError> {
        let sim_cfg = self.cfg.sim.clone();
        let counter = &self.state.sim_evals;
        let evaluated = self
            .pool
            .install(|| evaluate_population(pop, terrain, &sim_cfg, None, counter))?;
        self.state.ledger_evals += evaluated.len() as u64;
        for g in &evaluated {
            self.state.archive.annecs.record_score(
                env_id,
                g.fitness.unwrap(),
                sim_cfg.solved_threshold,
            );
        }
        Ok(evaluated)
    }
}
