//! Run configuration: a flat, typed key-value text format.
//!
//! Every key is explicitly known; an unknown key is an error, not a warning,
//! since a silently ignored hyperparameter typo is the main reproducibility
//! hazard in long evolution runs. Units are carried in key names
//! (`sim.dt_s`, `terrain.cell_size_m`). The fully resolved configuration is
//! echoed into each run directory in the same format.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::neat::{Activation, CompatConfig, MutationRates, ReproductionConfig};
use crate::rng::fnv1a;
use crate::sim::SimConfig;
use crate::terrain::{DifficultyScalars, EnvMutationConfig, TerrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferKind {
    Fbt,
    Sbt,
    Rt,
    Nt,
}

impl TransferKind {
    pub fn name(self) -> &'static str {
        match self {
            TransferKind::Fbt => "fbt",
            TransferKind::Sbt => "sbt",
            TransferKind::Rt => "rt",
            TransferKind::Nt => "nt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fbt" => TransferKind::Fbt,
            "sbt" => TransferKind::Sbt,
            "rt" => TransferKind::Rt,
            "nt" => TransferKind::Nt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPolicy {
    pub kind: TransferKind,
    /// SBT: candidate and target best genomes must lie within this distance.
    pub delta_transfer: f64,
    /// FBT: generations of fine-tuning before the second gate.
    pub finetune_generations: u32,
    /// RT: probability of replacing each target per cycle.
    pub rt_probability: f64,
}

impl Default for TransferPolicy {
    fn default() -> Self {
        TransferPolicy {
            kind: TransferKind::Sbt,
            delta_transfer: 3.0,
            finetune_generations: 2,
            rt_probability: 0.25,
        }
    }
}

/// Cadence of the engine's periodic phases; 0 disables a phase entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n_reproduce_iters: u64,
    pub n_transfer_iters: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            n_reproduce_iters: 25,
            n_transfer_iters: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoetConfig {
    pub max_active: usize,
    pub max_children: usize,
    pub max_admitted: usize,
    /// A pair may parent child environments once its best reaches this.
    pub repro_threshold: f64,
    pub mc_lo: f64,
    pub mc_hi: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub novelty_k: usize,
    /// Length of the per-pair best-score window used by transfer gates.
    pub history_len: usize,
}

impl Default for PoetConfig {
    fn default() -> Self {
        PoetConfig {
            max_active: 20,
            max_children: 8,
            max_admitted: 2,
            repro_threshold: 200.0,
            mc_lo: 50.0,
            mc_hi: 300.0,
            clip_lo: -100.0,
            clip_hi: 300.0,
            novelty_k: 5,
            history_len: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeatSettings {
    pub pop_size: usize,
    pub compat: CompatConfig,
    pub rates: MutationRates,
    pub repro: ReproductionConfig,
}

impl Default for NeatSettings {
    fn default() -> Self {
        NeatSettings {
            pop_size: 32,
            compat: CompatConfig::default(),
            rates: MutationRates::default(),
            repro: ReproductionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSettings {
    pub init: DifficultyScalars,
    pub drift: EnvMutationConfig,
}

impl Default for EnvSettings {
    fn default() -> Self {
        EnvSettings {
            init: DifficultyScalars {
                roughness_scale: 1.0,
                gap_threshold: -0.5,
                height_amplitude: 0.0,
            },
            drift: EnvMutationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationConfig {
    pub n_envs: usize,
    pub n_runs: usize,
    pub noise_sigma: f64,
}

impl Default for GeneralizationConfig {
    fn default() -> Self {
        GeneralizationConfig {
            n_envs: 20,
            n_runs: 30,
            noise_sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub iterations: u64,
    pub workers: usize,
    pub checkpoint_every_iters: u64,
    pub transfer: TransferPolicy,
    pub schedule: Schedule,
    pub poet: PoetConfig,
    pub neat: NeatSettings,
    /// Hidden-layer widths for the fixed-topology baseline; None runs NEAT.
    pub fixed_topology: Option<Vec<usize>>,
    pub cppn_hidden_activations: Vec<Activation>,
    pub env: EnvSettings,
    pub terrain: TerrainConfig,
    pub sim: SimConfig,
    pub generalization: GeneralizationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            iterations: 300,
            workers: 1,
            checkpoint_every_iters: 50,
            transfer: TransferPolicy::default(),
            schedule: Schedule::default(),
            poet: PoetConfig::default(),
            neat: NeatSettings::default(),
            fixed_topology: None,
            cppn_hidden_activations: vec![
                Activation::Sine,
                Activation::Gauss,
                Activation::Sigmoid,
                Activation::Identity,
            ],
            env: EnvSettings::default(),
            terrain: TerrainConfig::default(),
            sim: SimConfig::default(),
            generalization: GeneralizationConfig::default(),
        }
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "fbt-atep",
    "sbt-atep",
    "rt-atep",
    "nt-atep",
    "epoet40x40-like",
    "epoet20x20-like",
];

/// Built-in presets mirroring the six experimental arms: the four transfer
/// variants plus the two fixed-topology baselines.
pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    match name {
        "fbt-atep" => cfg.transfer.kind = TransferKind::Fbt,
        "sbt-atep" => cfg.transfer.kind = TransferKind::Sbt,
        "rt-atep" => cfg.transfer.kind = TransferKind::Rt,
        "nt-atep" => cfg.transfer.kind = TransferKind::Nt,
        "epoet40x40-like" | "epoet20x20-like" => {
            let width = if name.starts_with("epoet40") { 40 } else { 20 };
            cfg.transfer.kind = TransferKind::Fbt;
            cfg.fixed_topology = Some(vec![width, width]);
            cfg.neat.rates.structural_enabled = false;
            cfg.neat.rates.add_connection_prob = 0.0;
            cfg.neat.rates.add_node_prob = 0.0;
            cfg.neat.rates.toggle_prob = 0.0;
            // Larger fixed genomes: keep the distance normalized.
            cfg.neat.compat.small_genome_floor = 20;
        }
        _ => {
            return Err(ConfigError::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    }
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        reason: format!("cannot parse '{value}'"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("expected true/false, got '{value}'"),
        }),
    }
}

fn parse_activations(key: &str, value: &str) -> Result<Vec<Activation>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            Activation::parse(s).ok_or_else(|| ConfigError::InvalidValue {
                key: key.to_string(),
                reason: format!("unknown activation '{s}'"),
            })
        })
        .collect()
}

fn activations_str(list: &[Activation]) -> String {
    list.iter().map(|a| a.name()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "iterations" => self.iterations = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            "checkpoint.every_iters" => self.checkpoint_every_iters = parse_num(key, v)?,
            "transfer.kind" => {
                self.transfer.kind =
                    TransferKind::parse(v).ok_or_else(|| ConfigError::InvalidValue {
                        key: key.to_string(),
                        reason: format!("expected fbt|sbt|rt|nt, got '{v}'"),
                    })?
            }
            "transfer.delta_transfer" => self.transfer.delta_transfer = parse_num(key, v)?,
            "transfer.finetune_generations" => {
                self.transfer.finetune_generations = parse_num(key, v)?
            }
            "transfer.rt_probability" => self.transfer.rt_probability = parse_num(key, v)?,
            "schedule.n_reproduce_iters" => self.schedule.n_reproduce_iters = parse_num(key, v)?,
            "schedule.n_transfer_iters" => self.schedule.n_transfer_iters = parse_num(key, v)?,
            "poet.max_active" => self.poet.max_active = parse_num(key, v)?,
            "poet.max_children" => self.poet.max_children = parse_num(key, v)?,
            "poet.max_admitted" => self.poet.max_admitted = parse_num(key, v)?,
            "poet.repro_threshold" => self.poet.repro_threshold = parse_num(key, v)?,
            "poet.mc_lo" => self.poet.mc_lo = parse_num(key, v)?,
            "poet.mc_hi" => self.poet.mc_hi = parse_num(key, v)?,
            "poet.clip_lo" => self.poet.clip_lo = parse_num(key, v)?,
            "poet.clip_hi" => self.poet.clip_hi = parse_num(key, v)?,
            "poet.novelty_k" => self.poet.novelty_k = parse_num(key, v)?,
            "poet.history_len" => self.poet.history_len = parse_num(key, v)?,
            "neat.pop_size" => self.neat.pop_size = parse_num(key, v)?,
            "neat.c1" => self.neat.compat.c1 = parse_num(key, v)?,
            "neat.c2" => self.neat.compat.c2 = parse_num(key, v)?,
            "neat.c3" => self.neat.compat.c3 = parse_num(key, v)?,
            "neat.delta_species" => self.neat.compat.delta_species = parse_num(key, v)?,
            "neat.small_genome_floor" => self.neat.compat.small_genome_floor = parse_num(key, v)?,
            "neat.survival_fraction" => self.neat.repro.survival_fraction = parse_num(key, v)?,
            "neat.stagnation_limit" => self.neat.repro.stagnation_limit = parse_num(key, v)?,
            "neat.gene_redisable_prob" => self.neat.repro.gene_redisable_prob = parse_num(key, v)?,
            "neat.weight_mutate_prob" => self.neat.rates.weight_mutate_prob = parse_num(key, v)?,
            "neat.weight_replace_prob" => self.neat.rates.weight_replace_prob = parse_num(key, v)?,
            "neat.weight_sigma" => self.neat.rates.weight_sigma = parse_num(key, v)?,
            "neat.weight_init_sigma" => self.neat.rates.weight_init_sigma = parse_num(key, v)?,
            "neat.bias_mutate_prob" => self.neat.rates.bias_mutate_prob = parse_num(key, v)?,
            "neat.bias_sigma" => self.neat.rates.bias_sigma = parse_num(key, v)?,
            "neat.response_mutate_prob" => {
                self.neat.rates.response_mutate_prob = parse_num(key, v)?
            }
            "neat.response_sigma" => self.neat.rates.response_sigma = parse_num(key, v)?,
            "neat.toggle_prob" => self.neat.rates.toggle_prob = parse_num(key, v)?,
            "neat.add_connection_prob" => {
                self.neat.rates.add_connection_prob = parse_num(key, v)?
            }
            "neat.add_node_prob" => self.neat.rates.add_node_prob = parse_num(key, v)?,
            "neat.structural_mutation" => {
                self.neat.rates.structural_enabled = parse_bool(key, v)?
            }
            "neat.hidden_activations" => {
                self.neat.rates.hidden_activations = parse_activations(key, v)?
            }
            "fixed_topology.layers" => {
                self.fixed_topology = if v == "none" || v.is_empty() {
                    None
                } else {
                    Some(
                        v.split(',')
                            .map(|s| parse_num::<usize>(key, s.trim()))
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
            }
            "cppn.hidden_activations" => {
                self.cppn_hidden_activations = parse_activations(key, v)?
            }
            "env.init_roughness_scale" => self.env.init.roughness_scale = parse_num(key, v)?,
            "env.init_gap_threshold" => self.env.init.gap_threshold = parse_num(key, v)?,
            "env.init_height_amplitude" => self.env.init.height_amplitude = parse_num(key, v)?,
            "env.amp_drift_mean_m" => self.env.drift.amp_drift_mean = parse_num(key, v)?,
            "env.amp_drift_sigma_m" => self.env.drift.amp_drift_sigma = parse_num(key, v)?,
            "env.gap_drift_mean" => self.env.drift.gap_drift_mean = parse_num(key, v)?,
            "env.gap_drift_sigma" => self.env.drift.gap_drift_sigma = parse_num(key, v)?,
            "env.rough_drift_sigma" => self.env.drift.rough_drift_sigma = parse_num(key, v)?,
            "terrain.cells" => self.terrain.cells = parse_num(key, v)?,
            "terrain.cell_size_m" => self.terrain.cell_size_m = parse_num(key, v)?,
            "terrain.spawn_pad_cells" => self.terrain.spawn_pad_cells = parse_num(key, v)?,
            "sim.dt_s" => self.sim.dt_s = parse_num(key, v)?,
            "sim.gravity_mps2" => self.sim.gravity_mps2 = parse_num(key, v)?,
            "sim.v_max_mps" => self.sim.v_max_mps = parse_num(key, v)?,
            "sim.drive_accel_mps2" => self.sim.drive_accel_mps2 = parse_num(key, v)?,
            "sim.v_jump_mps" => self.sim.v_jump_mps = parse_num(key, v)?,
            "sim.max_steps" => self.sim.max_steps = parse_num(key, v)?,
            "sim.kill_plane_offset_m" => self.sim.kill_plane_offset_m = parse_num(key, v)?,
            "sim.max_climb_m" => self.sim.max_climb_m = parse_num(key, v)?,
            "sim.solved_threshold" => self.sim.solved_threshold = parse_num(key, v)?,
            "sim.lookahead_cells" => self.sim.lookahead_cells = parse_num(key, v)?,
            "sim.obs_clip_m" => self.sim.obs_clip_m = parse_num(key, v)?,
            "sim.noise_sigma" => self.sim.noise_sigma = parse_num(key, v)?,
            "gen.n_envs" => self.generalization.n_envs = parse_num(key, v)?,
            "gen.n_runs" => self.generalization.n_runs = parse_num(key, v)?,
            "gen.noise_sigma" => self.generalization.noise_sigma = parse_num(key, v)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Parses a whole config file body, applying assignments in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Malformed {
                line: lineno + 1,
                reason: "expected 'key = value'".to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The fully resolved configuration, one sorted `key = value` per line.
    /// Parsing the echo reproduces this config exactly.
    pub fn echo(&self) -> String {
        let mut lines: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("iterations".into(), self.iterations.to_string()),
            ("workers".into(), self.workers.to_string()),
            (
                "checkpoint.every_iters".into(),
                self.checkpoint_every_iters.to_string(),
            ),
            ("transfer.kind".into(), self.transfer.kind.name().into()),
            (
                "transfer.delta_transfer".into(),
                self.transfer.delta_transfer.to_string(),
            ),
            (
                "transfer.finetune_generations".into(),
                self.transfer.finetune_generations.to_string(),
            ),
            (
                "transfer.rt_probability".into(),
                self.transfer.rt_probability.to_string(),
            ),
            (
                "schedule.n_reproduce_iters".into(),
                self.schedule.n_reproduce_iters.to_string(),
            ),
            (
                "schedule.n_transfer_iters".into(),
                self.schedule.n_transfer_iters.to_string(),
            ),
            ("poet.max_active".into(), self.poet.max_active.to_string()),
            ("poet.max_children".into(), self.poet.max_children.to_string()),
            ("poet.max_admitted".into(), self.poet.max_admitted.to_string()),
            (
                "poet.repro_threshold".into(),
                self.poet.repro_threshold.to_string(),
            ),
            ("poet.mc_lo".into(), self.poet.mc_lo.to_string()),
            ("poet.mc_hi".into(), self.poet.mc_hi.to_string()),
            ("poet.clip_lo".into(), self.poet.clip_lo.to_string()),
            ("poet.clip_hi".into(), self.poet.clip_hi.to_string()),
            ("poet.novelty_k".into(), self.poet.novelty_k.to_string()),
            ("poet.history_len".into(), self.poet.history_len.to_string()),
            ("neat.pop_size".into(), self.neat.pop_size.to_string()),
            ("neat.c1".into(), self.neat.compat.c1.to_string()),
            ("neat.c2".into(), self.neat.compat.c2.to_string()),
            ("neat.c3".into(), self.neat.compat.c3.to_string()),
            (
                "neat.delta_species".into(),
                self.neat.compat.delta_species.to_string(),
            ),
            (
                "neat.small_genome_floor".into(),
                self.neat.compat.small_genome_floor.to_string(),
            ),
            (
                "neat.survival_fraction".into(),
                self.neat.repro.survival_fraction.to_string(),
            ),
            (
                "neat.stagnation_limit".into(),
                self.neat.repro.stagnation_limit.to_string(),
            ),
            (
                "neat.gene_redisable_prob".into(),
                self.neat.repro.gene_redisable_prob.to_string(),
            ),
            (
                "neat.weight_mutate_prob".into(),
                self.neat.rates.weight_mutate_prob.to_string(),
            ),
            (
                "neat.weight_replace_prob".into(),
                self.neat.rates.weight_replace_prob.to_string(),
            ),
            (
                "neat.weight_sigma".into(),
                self.neat.rates.weight_sigma.to_string(),
            ),
            (
                "neat.weight_init_sigma".into(),
                self.neat.rates.weight_init_sigma.to_string(),
            ),
            (
                "neat.bias_mutate_prob".into(),
                self.neat.rates.bias_mutate_prob.to_string(),
            ),
            ("neat.bias_sigma".into(), self.neat.rates.bias_sigma.to_string()),
            (
                "neat.response_mutate_prob".into(),
                self.neat.rates.response_mutate_prob.to_string(),
            ),
            (
                "neat.response_sigma".into(),
                self.neat.rates.response_sigma.to_string(),
            ),
            ("neat.toggle_prob".into(), self.neat.rates.toggle_prob.to_string()),
            (
                "neat.add_connection_prob".into(),
                self.neat.rates.add_connection_prob.to_string(),
            ),
            (
                "neat.add_node_prob".into(),
                self.neat.rates.add_node_prob.to_string(),
            ),
            (
                "neat.structural_mutation".into(),
                self.neat.rates.structural_enabled.to_string(),
            ),
            (
                "neat.hidden_activations".into(),
                activations_str(&self.neat.rates.hidden_activations),
            ),
            (
                "fixed_topology.layers".into(),
                match &self.fixed_topology {
                    None => "none".to_string(),
                    Some(layers) => layers
                        .iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                },
            ),
            (
                "cppn.hidden_activations".into(),
                activations_str(&self.cppn_hidden_activations),
            ),
            (
                "env.init_roughness_scale".into(),
                self.env.init.roughness_scale.to_string(),
            ),
            (
                "env.init_gap_threshold".into(),
                self.env.init.gap_threshold.to_string(),
            ),
            (
                "env.init_height_amplitude".into(),
                self.env.init.height_amplitude.to_string(),
            ),
            (
                "env.amp_drift_mean_m".into(),
                self.env.drift.amp_drift_mean.to_string(),
            ),
            (
                "env.amp_drift_sigma_m".into(),
                self.env.drift.amp_drift_sigma.to_string(),
            ),
            ("env.gap_drift_mean".into(), self.env.drift.gap_drift_mean.to_string()),
            (
                "env.gap_drift_sigma".into(),
                self.env.drift.gap_drift_sigma.to_string(),
            ),
            (
                "env.rough_drift_sigma".into(),
                self.env.drift.rough_drift_sigma.to_string(),
            ),
            ("terrain.cells".into(), self.terrain.cells.to_string()),
            ("terrain.cell_size_m".into(), self.terrain.cell_size_m.to_string()),
            (
                "terrain.spawn_pad_cells".into(),
                self.terrain.spawn_pad_cells.to_string(),
            ),
            ("sim.dt_s".into(), self.sim.dt_s.to_string()),
            ("sim.gravity_mps2".into(), self.sim.gravity_mps2.to_string()),
            ("sim.v_max_mps".into(), self.sim.v_max_mps.to_string()),
            (
                "sim.drive_accel_mps2".into(),
                self.sim.drive_accel_mps2.to_string(),
            ),
            ("sim.v_jump_mps".into(), self.sim.v_jump_mps.to_string()),
            ("sim.max_steps".into(), self.sim.max_steps.to_string()),
            (
                "sim.kill_plane_offset_m".into(),
                self.sim.kill_plane_offset_m.to_string(),
            ),
            ("sim.max_climb_m".into(), self.sim.max_climb_m.to_string()),
            (
                "sim.solved_threshold".into(),
                self.sim.solved_threshold.to_string(),
            ),
            (
                "sim.lookahead_cells".into(),
                self.sim.lookahead_cells.to_string(),
            ),
            ("sim.obs_clip_m".into(), self.sim.obs_clip_m.to_string()),
            ("sim.noise_sigma".into(), self.sim.noise_sigma.to_string()),
            ("gen.n_envs".into(), self.generalization.n_envs.to_string()),
            ("gen.n_runs".into(), self.generalization.n_runs.to_string()),
            (
                "gen.noise_sigma".into(),
                self.generalization.noise_sigma.to_string(),
            ),
        ];
        lines.sort();
        let mut out = String::new();
        for (k, v) in lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Stable hash of the resolved configuration, stored in checkpoints so
    /// resume can refuse silently changed parameters.
    pub fn config_hash(&self) -> u64 {
        fnv1a(self.echo().as_bytes())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let conflict = |reason: String| Err(ConfigError::Conflict { reason });
        if self.workers == 0 {
            return conflict("workers must be at least 1".into());
        }
        if self.neat.pop_size == 0 {
            return conflict("neat.pop_size must be at least 1".into());
        }
        if self.poet.max_active == 0 {
            return conflict("poet.max_active must be at least 1".into());
        }
        if self.poet.history_len == 0 {
            return conflict("poet.history_len must be at least 1".into());
        }
        if self.neat.compat.delta_species <= 0.0 {
            return conflict("neat.delta_species must be positive".into());
        }
        if self.neat.compat.c1 < 0.0 || self.neat.compat.c2 < 0.0 || self.neat.compat.c3 < 0.0 {
            return conflict("distance coefficients must be nonnegative".into());
        }
        if !(0.0 < self.neat.repro.survival_fraction
            && self.neat.repro.survival_fraction <= 1.0)
        {
            return conflict("neat.survival_fraction must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.transfer.rt_probability) {
            return conflict("transfer.rt_probability must be in [0, 1]".into());
        }
        if self.poet.mc_lo > self.poet.mc_hi {
            return conflict("poet.mc_lo must not exceed poet.mc_hi".into());
        }
        if self.poet.clip_lo >= self.poet.clip_hi {
            return conflict("poet.clip_lo must be below poet.clip_hi".into());
        }
        if self.terrain.cells < 2 || self.terrain.spawn_pad_cells >= self.terrain.cells {
            return conflict("terrain.spawn_pad_cells must be below terrain.cells".into());
        }
        let (lo, hi) = (self.sim.score_min(), self.sim.score_max());
        for (key, v) in [
            ("poet.repro_threshold", self.poet.repro_threshold),
            ("poet.mc_lo", self.poet.mc_lo),
            ("poet.mc_hi", self.poet.mc_hi),
            ("poet.clip_lo", self.poet.clip_lo),
            ("poet.clip_hi", self.poet.clip_hi),
            ("sim.solved_threshold", self.sim.solved_threshold),
        ] {
            if v < lo || v > hi {
                return Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: format!("{v} outside the simulator score bounds [{lo}, {hi}]"),
                });
            }
        }
        if let Some(layers) = &self.fixed_topology {
            let r = &self.neat.rates;
            if r.structural_enabled || r.add_connection_prob > 0.0 || r.add_node_prob > 0.0 {
                return conflict(
                    "fixed_topology.layers is mutually exclusive with structural mutation; \
                     set neat.structural_mutation = false and zero the structural rates"
                        .into(),
                );
            }
            if layers.is_empty() {
                return conflict("fixed_topology.layers must name at least one layer".into());
            }
        }
        if self.neat.rates.hidden_activations.is_empty() {
            return conflict("neat.hidden_activations must not be empty".into());
        }
        if self.cppn_hidden_activations.is_empty() {
            return conflict("cppn.hidden_activations must not be empty".into());
        }
        Ok(())
    }

    /// Mutation rates for environment CPPNs: agent rates with the CPPN
    /// activation set and structural growth always on.
    pub fn cppn_rates(&self) -> MutationRates {
        MutationRates {
            hidden_activations: self.cppn_hidden_activations.clone(),
            structural_enabled: true,
            add_connection_prob: self.neat.rates.add_connection_prob.max(0.1),
            add_node_prob: self.neat.rates.add_node_prob.max(0.03),
            ..self.neat.rates.clone()
        }
    }
}

/// Derives a config from an optional preset, optional file text, and
/// key=value override pairs, in that order of precedence.
pub fn resolve_config(
    preset_name: Option<&str>,
    file_text: Option<&str>,
    overrides: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut cfg = match preset_name {
        Some(name) => preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(text) = file_text {
        cfg.apply_text(text)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Every key accepted by [`RunConfig::set`], for diagnostics.
pub fn known_keys() -> BTreeSet<String> {
    RunConfig::default()
        .echo()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, _)| k.trim().to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_roundtrips() {
        let cfg = RunConfig::default();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.echo()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.config_hash(), back.config_hash());
    }

    #[test]
    fn unknown_key_is_named() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("neat.popsize = 10\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { key } => assert_eq!(key, "neat.popsize"),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn invalid_value_is_named() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("seed = banana\n").unwrap_err();
        match err {
            ConfigError::InvalidValue { key, .. } => assert_eq!(key, "seed"),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# header\n\nseed = 9 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn fixed_topology_conflicts_with_structural_mutation() {
        let cfg = RunConfig {
            fixed_topology: Some(vec![40, 40]),
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(ConfigError::Conflict { .. })));
        let preset_cfg = preset("epoet40x40-like").unwrap();
        assert!(preset_cfg.validate().is_ok());
        assert_eq!(preset_cfg.fixed_topology, Some(vec![40, 40]));
    }

    #[test]
    fn presets_cover_the_six_arms() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
        }
        assert!(matches!(
            preset("nope"),
            Err(ConfigError::UnknownPreset { .. })
        ));
    }

    #[test]
    fn threshold_outside_score_bounds_rejected() {
        let mut cfg = RunConfig::default();
        cfg.poet.repro_threshold = 1000.0;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::InvalidValue { key, .. }) if key == "poet.repro_threshold"
        ));
    }
}
