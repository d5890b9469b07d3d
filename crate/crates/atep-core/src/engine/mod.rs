//! The coevolution engine: active environment-agent pairs, per-pair NEAT
//! generations, environment reproduction under the minimal criterion and
//! novelty ranking, inter-environment transfers, and the archive.
//!
//! One iteration runs a NEAT generation for every active pair, then (on
//! schedule) reproduces environments and attempts transfers, then appends a
//! ledger row. All stochastic choices draw from serialized streams and all
//! collections are processed in canonical order (env id, genome id), so a
//! run is a pure function of its config and seed, and a resumed checkpoint
//! continues the run bit for bit.

pub mod pata;
mod transfer;

pub use transfer::beats_history;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, TransferKind};
use crate::error::{EngineError, SimError};
use crate::metrics::ledger::{AnnecsTracker, LedgerRow, RunLedger, TransferEvent};
use crate::neat::{
    best_of, instantiate, layered_template, minimal_template, reproduce, speciate, Activation,
    AgentGenome, GenomeId, InnovationRegistry, Signature, Species, SpeciesId,
};
use crate::phenotype::compile;
use crate::rng::{mix_words, DetRng};
use crate::sim::{evaluate_population, rollout, EvalCounter};
use crate::terrain::{
    reproduce_env, seed_env, synthesize, EnvGenome, EnvId, Terrain, CPPN_SIGNATURE,
};

use pata::{novelty, pata_ec_from_scores, PataEcVector};

const TAG_ENGINE: u64 = 0x0065_6E67;
const TAG_PAIR: u64 = 0x7061_6972;
const TAG_FBT: u64 = 0x0066_6274;
const TAG_NOISE: u64 = 0x6E6F_6973;

pub const STATE_VERSION: u32 = 1;

/// One active environment paired with its NEAT population.
///
/// `population` is the slate evaluated at the next iteration; `species` is
/// the speciated partition of the generation evaluated last. Transfers edit
/// both: a full-population transfer clears `species` so the pair re-speciates
/// from scratch, a species transfer splices one species and appends its
/// members to the slate (trimmed back to size at the next reproduction).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EAPair {
    pub env: EnvGenome,
    pub population: Vec<AgentGenome>,
    pub species: Vec<Species>,
    /// Last `history_len` per-iteration best scores, oldest first.
    pub best_fitness_history: Vec<f64>,
    pub solved_flag: bool,
    pub champion: Option<AgentGenome>,
    pub next_species_id: SpeciesId,
    pub rng: DetRng,
    pub created_iteration: u64,
}

impl EAPair {
    pub fn latest_best(&self) -> Option<f64> {
        self.best_fitness_history.last().copied()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetiredPair {
    pub env: EnvGenome,
    pub champion: AgentGenome,
    pub retired_iteration: u64,
}

/// Retired pairs in retirement order, plus the ANNECS bookkeeping.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Archive {
    pub retired: Vec<RetiredPair>,
    pub annecs: AnnecsTracker,
}

/// The champion recorded the last time an environment's pair scored at or
/// above the solved threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolvedRecord {
    pub iteration: u64,
    pub champion: AgentGenome,
}

/// Everything a run needs to continue: serialized into checkpoints verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineState {
    pub version: u32,
    pub config_hash: u64,
    pub iteration: u64,
    pub pairs: Vec<EAPair>,
    pub archive: Archive,
    pub agent_registry: InnovationRegistry,
    pub env_registry: InnovationRegistry,
    pub engine_rng: DetRng,
    pub next_genome_id: GenomeId,
    pub next_env_id: EnvId,
    pub ledger: RunLedger,
    /// Engine-side evaluation accounting, summed call site by call site.
    pub ledger_evals: u64,
    /// Independent counter bumped inside every rollout.
    pub sim_evals: EvalCounter,
    pub solved_agents: BTreeMap<EnvId, SolvedRecord>,
}

pub struct Engine {
    pub cfg: RunConfig,
    pub state: EngineState,
    pool: rayon::ThreadPool,
}

impl Engine {
    pub fn agent_signature(cfg: &RunConfig) -> Signature {
        Signature {
            n_inputs: cfg.sim.observation_size(),
            n_outputs: 2,
        }
    }

    /// Builds a fresh engine with one seed pair: a flat, gap-free
    /// environment and an initial population over the configured topology.
    pub fn new(cfg: RunConfig) -> Result<Engine, EngineError> {
        let sig = Self::agent_signature(&cfg);
        let mut agent_registry = InnovationRegistry::new(sig.first_hidden_id());
        let mut env_registry = InnovationRegistry::new(CPPN_SIGNATURE.first_hidden_id());

        let template = match &cfg.fixed_topology {
            Some(layers) => {
                let hidden = cfg
                    .neat
                    .rates
                    .hidden_activations
                    .first()
                    .copied()
                    .unwrap_or(Activation::Tanh);
                layered_template(sig, layers, hidden, Activation::Tanh, &mut agent_registry)
            }
            None => minimal_template(sig, Activation::Tanh, &mut agent_registry),
        };

        let env = seed_env(cfg.env.init.clone(), &mut env_registry, 0);
        let mut next_genome_id: GenomeId = 1;
        let mut pair_rng = DetRng::fork(cfg.seed, &[TAG_PAIR, 0]);
        let population: Vec<AgentGenome> = (0..cfg.neat.pop_size)
            .map(|_| {
                let id = next_genome_id;
                next_genome_id += 1;
                instantiate(&template, id, cfg.neat.rates.weight_init_sigma, &mut pair_rng)
            })
            .collect();

        let seed_pair = EAPair {
            env,
            population,
            species: Vec::new(),
            best_fitness_history: Vec::new(),
            solved_flag: false,
            champion: None,
            next_species_id: 1,
            rng: pair_rng,
            created_iteration: 0,
        };

        let state = EngineState {
            version: STATE_VERSION,
            config_hash: cfg.config_hash(),
            iteration: 0,
            pairs: vec![seed_pair],
            archive: Archive::default(),
            agent_registry,
            env_registry,
            engine_rng: DetRng::fork(cfg.seed, &[TAG_ENGINE]),
            next_genome_id,
            next_env_id: 1,
            ledger: RunLedger::default(),
            ledger_evals: 0,
            sim_evals: EvalCounter::default(),
            solved_agents: BTreeMap::new(),
        };

        // The seed environment is admitted by construction; it counts toward
        // ANNECS once something solves it.
        let mut engine = Engine::from_state(cfg, state);
        engine.state.archive.annecs.record_mc_pass(0);
        Ok(engine)
    }

    /// Reattaches behavior to a deserialized state (checkpoint resume).
    pub fn from_state(cfg: RunConfig, state: EngineState) -> Engine {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .expect("worker pool");
        Engine { cfg, state, pool }
    }

    pub fn iteration(&self) -> u64 {
        self.state.iteration
    }

    pub fn annecs(&self) -> u64 {
        self.state.archive.annecs.annecs()
    }

    fn terrain_of(&self, env: &EnvGenome) -> Result<Terrain, SimError> {
        synthesize(env, &self.cfg.terrain).map_err(SimError::Phenotype)
    }

    fn noise_base(&self, env_id: EnvId) -> Option<u64> {
        (self.cfg.sim.noise_sigma > 0.0).then(|| {
            mix_words(&[self.cfg.seed, TAG_NOISE, env_id, self.state.iteration])
        })
    }

    /// One full iteration: a NEAT generation per pair, scheduled environment
    /// reproduction and transfers, ANNECS update, one ledger row.
    pub fn step_iteration(&mut self) -> Result<(), EngineError> {
        if self.state.pairs.is_empty() {
            return Err(EngineError::NoActivePairs);
        }
        self.state.iteration += 1;
        let iter = self.state.iteration;

        for idx in 0..self.state.pairs.len() {
            self.neat_generation(idx)?;
        }

        let sched = self.cfg.schedule.clone();
        if sched.n_reproduce_iters > 0 && iter.is_multiple_of(sched.n_reproduce_iters) {
            self.reproduce_environments()?;
        }
        if sched.n_transfer_iters > 0
            && iter.is_multiple_of(sched.n_transfer_iters)
            && self.state.pairs.len() >= 2
        {
            self.attempt_transfers()?;
        }

        self.append_ledger_row();
        Ok(())
    }

    /// Evaluate, speciate, record, reproduce: one generation for one pair.
    fn neat_generation(&mut self, idx: usize) -> Result<(), EngineError> {
        let terrain = self.terrain_of(&self.state.pairs[idx].env.clone())?;
        let env_id = self.state.pairs[idx].env.env_id;
        let noise_base = self.noise_base(env_id);
        let iter = self.state.iteration;
        let sim_cfg = self.cfg.sim.clone();

        let pair = &mut self.state.pairs[idx];
        let slate = std::mem::take(&mut pair.population);
        let counter = &self.state.sim_evals;
        let evaluated = self
            .pool
            .install(|| evaluate_population(slate, &terrain, &sim_cfg, noise_base, counter))?;
        self.state.ledger_evals += evaluated.len() as u64;

        for g in &evaluated {
            self.state.archive.annecs.record_score(
                env_id,
                g.fitness.unwrap(),
                sim_cfg.solved_threshold,
            );
        }

        let best = best_of(&evaluated).expect("population non-empty").clone();
        let best_score = best.fitness.unwrap();

        let pair = &mut self.state.pairs[idx];
        pair.best_fitness_history.push(best_score);
        let hist_cap = self.cfg.poet.history_len;
        if pair.best_fitness_history.len() > hist_cap {
            let overflow = pair.best_fitness_history.len() - hist_cap;
            pair.best_fitness_history.drain(..overflow);
        }
        if best_score >= sim_cfg.solved_threshold {
            pair.solved_flag = true;
            self.state.solved_agents.insert(
                env_id,
                SolvedRecord {
                    iteration: iter,
                    champion: best.clone(),
                },
            );
        }
        pair.champion = Some(best);

        let pair = &mut self.state.pairs[idx];
        let mut species = speciate(
            evaluated,
            &pair.species,
            &self.cfg.neat.compat,
            &mut pair.next_species_id,
        );
        let offspring = reproduce(
            &mut species,
            self.cfg.neat.pop_size,
            &self.cfg.neat.repro,
            &self.cfg.neat.rates,
            &mut self.state.agent_registry,
            &mut pair.rng,
            &mut self.state.next_genome_id,
        )?;
        let pair = &mut self.state.pairs[idx];
        pair.species = species;
        pair.population = offspring;
        Ok(())
    }

    /// Scores one compiled champion on a terrain, with full bookkeeping.
    fn counted_rollout(
        &mut self,
        agent: &AgentGenome,
        terrain: &Terrain,
        env_id: EnvId,
    ) -> Result<f64, EngineError> {
        let net = compile(agent).map_err(SimError::Phenotype)?;
        let r = rollout(&net, terrain, &self.cfg.sim, None, &self.state.sim_evals)
            .map_err(EngineError::Sim)?;
        self.state.ledger_evals += 1;
        self.state
            .archive
            .annecs
            .record_score(env_id, r.score, self.cfg.sim.solved_threshold);
        Ok(r.score)
    }

    /// All champion agents in canonical order: archived champions first (in
    /// retirement order), then active champions by env id.
    fn champion_roster(&self) -> Vec<(EnvId, AgentGenome)> {
        let mut roster: Vec<(EnvId, AgentGenome)> = self
            .state
            .archive
            .retired
            .iter()
            .map(|r| (r.env.env_id, r.champion.clone()))
            .collect();
        roster.extend(
            self.state
                .pairs
                .iter()
                .filter_map(|p| p.champion.clone().map(|c| (p.env.env_id, c))),
        );
        roster
    }

    /// PATA-EC signature of one environment against the given agent roster.
    fn pata_vector(
        &mut self,
        env: &EnvGenome,
        roster: &[(EnvId, AgentGenome)],
    ) -> Result<PataEcVector, EngineError> {
        let terrain = self.terrain_of(env)?;
        let mut scores = Vec::with_capacity(roster.len());
        for (_, agent) in roster {
            scores.push(self.counted_rollout(agent, &terrain, env.env_id)?);
        }
        Ok(pata_ec_from_scores(
            &scores,
            self.cfg.poet.clip_lo,
            self.cfg.poet.clip_hi,
        ))
    }

    /// Environment reproduction: eligible parents mutate children, children
    /// face the minimal criterion against every active champion, survivors
    /// are ranked by PATA-EC novelty, and the most novel are admitted as new
    /// pairs seeded from the population whose champion handled them best.
    /// Over-capacity retires the oldest pairs into the archive.
    fn reproduce_environments(&mut self) -> Result<(), EngineError> {
        let iter = self.state.iteration;
        let threshold = self.cfg.poet.repro_threshold;
        let eligible: Vec<usize> = (0..self.state.pairs.len())
            .filter(|&i| {
                let p = &self.state.pairs[i];
                p.champion.is_some() && p.latest_best().is_some_and(|b| b >= threshold)
            })
            .collect();
        if eligible.is_empty() {
            return Ok(());
        }

        let cppn_rates = self.cfg.cppn_rates();
        let mut children = Vec::with_capacity(self.cfg.poet.max_children);
        for k in 0..self.cfg.poet.max_children {
            let parent_idx = eligible[k % eligible.len()];
            let parent_env = self.state.pairs[parent_idx].env.clone();
            let child_id = self.state.next_env_id;
            self.state.next_env_id += 1;
            let child = reproduce_env(
                &parent_env,
                &self.cfg.env.drift,
                &cppn_rates,
                &mut self.state.env_registry,
                &mut self.state.engine_rng,
                child_id,
                iter,
            );
            children.push(child);
        }

        // Minimal criterion: best active-champion score must land in band.
        let champions: Vec<(usize, AgentGenome)> = (0..self.state.pairs.len())
            .filter_map(|i| {
                self.state.pairs[i]
                    .champion
                    .clone()
                    .map(|c| (i, c))
            })
            .collect();
        let mut survivors: Vec<(EnvGenome, usize)> = Vec::new();
        for child in children {
            let terrain = self.terrain_of(&child)?;
            let mut best: Option<(f64, usize)> = None;
            for (pair_idx, champ) in &champions {
                let score = self.counted_rollout(champ, &terrain, child.env_id)?;
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, *pair_idx));
                }
            }
            let (best_score, best_pair) = best.expect("at least one champion");
            if best_score >= self.cfg.poet.mc_lo && best_score <= self.cfg.poet.mc_hi {
                self.state.archive.annecs.record_mc_pass(child.env_id);
                survivors.push((child, best_pair));
            }
        }
        if survivors.is_empty() {
            return Ok(());
        }

        // Novelty ranking against every existing signature.
        let roster = self.champion_roster();
        let mut existing: Vec<PataEcVector> = Vec::new();
        let archived_envs: Vec<EnvGenome> = self
            .state
            .archive
            .retired
            .iter()
            .map(|r| r.env.clone())
            .collect();
        let active_envs: Vec<EnvGenome> =
            self.state.pairs.iter().map(|p| p.env.clone()).collect();
        for env in archived_envs.iter().chain(active_envs.iter()) {
            existing.push(self.pata_vector(env, &roster)?);
        }
        let mut ranked: Vec<(f64, EnvGenome, usize)> = Vec::new();
        for (child, best_pair) in survivors {
            let vec = self.pata_vector(&child, &roster)?;
            ranked.push((novelty(&vec, &existing, self.cfg.poet.novelty_k), child, best_pair));
        }
        ranked.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.env_id.cmp(&b.1.env_id))
        });

        for (_, child, best_pair) in ranked.into_iter().take(self.cfg.poet.max_admitted) {
            let seed_population = self.state.pairs[best_pair].population.clone();
            let pair_rng = DetRng::fork(self.cfg.seed, &[TAG_PAIR, child.env_id]);
            self.state.pairs.push(EAPair {
                env: child,
                population: seed_population,
                species: Vec::new(),
                best_fitness_history: Vec::new(),
                solved_flag: false,
                champion: None,
                next_species_id: 1,
                rng: pair_rng,
                created_iteration: iter,
            });
        }
        self.state.pairs.sort_by_key(|p| p.env.env_id);

        // Retirement: oldest first, env id as tie break.
        while self.state.pairs.len() > self.cfg.poet.max_active {
            let oldest = (0..self.state.pairs.len())
                .min_by_key(|&i| {
                    (
                        self.state.pairs[i].created_iteration,
                        self.state.pairs[i].env.env_id,
                    )
                })
                .unwrap();
            let pair = self.state.pairs.remove(oldest);
            let champion = pair
                .champion
                .or_else(|| pair.population.first().cloned())
                .expect("pair has genomes");
            self.state.archive.retired.push(RetiredPair {
                env: pair.env,
                champion,
                retired_iteration: iter,
            });
        }
        Ok(())
    }

    fn append_ledger_row(&mut self) {
        let iter = self.state.iteration;
        let annecs = self.state.archive.annecs.update();

        let (mut node_sum, mut node_count) = (0usize, 0usize);
        for p in &self.state.pairs {
            for g in &p.population {
                node_sum += g.hidden_count();
                node_count += 1;
            }
        }
        let mean_nodes = if node_count == 0 {
            0.0
        } else {
            node_sum as f64 / node_count as f64
        };

        let bests: Vec<f64> = self
            .state
            .pairs
            .iter()
            .filter_map(|p| p.latest_best())
            .collect();
        let mean_best_fitness = if bests.is_empty() {
            0.0
        } else {
            bests.iter().sum::<f64>() / bests.len() as f64
        };

        let count_kind = |kind: TransferKind| {
            self.state
                .ledger
                .transfer_events
                .iter()
                .filter(|e| e.iteration == iter && e.kind == kind)
                .count() as u32
        };

        let row = LedgerRow {
            iteration: iter,
            annecs,
            mean_nodes,
            mean_best_fitness,
            cumulative_function_evals: self.state.ledger_evals,
            active_pair_count: self.state.pairs.len(),
            transfers_fbt: count_kind(TransferKind::Fbt),
            transfers_sbt: count_kind(TransferKind::Sbt),
            transfers_rt: count_kind(TransferKind::Rt),
        };
        self.state.ledger.push(row);
    }

    pub(crate) fn record_transfer(&mut self, kind: TransferKind, source: EnvId, target: EnvId) {
        let iteration = self.state.iteration;
        self.state.ledger.transfer_events.push(TransferEvent {
            iteration,
            kind,
            source_env: source,
            target_env: target,
        });
    }
}
