//! CPPN-encoded environments and terrain synthesis.
//!
//! An environment genome is a CPPN (one `x` input plus bias, two tanh
//! outputs: height signal and gap signal) together with three difficulty
//! scalars. Synthesis samples the CPPN across the course and is pure: the
//! same genome always produces the same terrain.

use serde::{Deserialize, Serialize};

use crate::error::PhenotypeError;
use crate::neat::{
    minimal_template, mutate, Activation, AgentGenome, InnovationRegistry, MutationRates,
    Signature,
};
use crate::phenotype::{activate, compile};
use crate::rng::DetRng;

pub type EnvId = u64;

pub const CPPN_SIGNATURE: Signature = Signature { n_inputs: 1, n_outputs: 2 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyScalars {
    pub roughness_scale: f64,
    /// Cells whose gap signal falls below this are holes; -1 disables gaps.
    pub gap_threshold: f64,
    pub height_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvGenome {
    pub cppn: AgentGenome,
    pub difficulty_scalars: DifficultyScalars,
    pub env_id: EnvId,
    pub parent_id: Option<EnvId>,
    pub created_iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainConfig {
    pub cells: usize,
    pub cell_size_m: f64,
    pub spawn_pad_cells: usize,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig {
            cells: 200,
            cell_size_m: 0.5,
            spawn_pad_cells: 10,
        }
    }
}

impl TerrainConfig {
    pub fn course_length(&self) -> f64 {
        self.cells as f64 * self.cell_size_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    pub heights: Vec<f64>,
    pub gap_mask: Vec<bool>,
    pub cell_size_m: f64,
    pub course_length: f64,
    pub spawn_pad_cells: usize,
}

impl Terrain {
    pub fn cell_at(&self, x: f64) -> usize {
        ((x / self.cell_size_m) as usize).min(self.heights.len() - 1)
    }

    pub fn cell_left_edge(&self, cell: usize) -> f64 {
        cell as f64 * self.cell_size_m
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Step distributions for child difficulty scalars. Amplitude and gap
/// threshold drift with a small positive mean so children trend harder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvMutationConfig {
    pub amp_drift_mean: f64,
    pub amp_drift_sigma: f64,
    pub gap_drift_mean: f64,
    pub gap_drift_sigma: f64,
    pub rough_drift_sigma: f64,
}

impl Default for EnvMutationConfig {
    fn default() -> Self {
        EnvMutationConfig {
            amp_drift_mean: 0.1,
            amp_drift_sigma: 0.1,
            gap_drift_mean: 0.02,
            gap_drift_sigma: 0.03,
            rough_drift_sigma: 0.05,
        }
    }
}

/// The canonical first environment: a zero-weight CPPN (flat, gap-free
/// terrain) with the configured initial scalars.
pub fn seed_env(
    scalars: DifficultyScalars,
    reg: &mut InnovationRegistry,
    env_id: EnvId,
) -> EnvGenome {
    let cppn = minimal_template(CPPN_SIGNATURE, Activation::Tanh, reg);
    EnvGenome {
        cppn: AgentGenome { id: 0, ..cppn },
        difficulty_scalars: scalars,
        env_id,
        parent_id: None,
        created_iteration: 0,
    }
}

/// Samples the CPPN over the course. `x` is normalized to [0, 1] across the
/// cells; the spawn pad is forced flat (height 0) and gap-free.
pub fn synthesize(env: &EnvGenome, cfg: &TerrainConfig) -> Result<Terrain, PhenotypeError> {
    let net = compile(&env.cppn)?;
    let n = cfg.cells;
    let mut heights = Vec::with_capacity(n);
    let mut gap_mask = Vec::with_capacity(n);
    let s = &env.difficulty_scalars;
    for i in 0..n {
        let x_norm = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let out = activate(&net, &[x_norm])?;
        let (height_signal, gap_signal) = (out[0], out[1]);
        if i < cfg.spawn_pad_cells {
            heights.push(0.0);
            gap_mask.push(false);
        } else {
            heights.push(s.height_amplitude * height_signal * s.roughness_scale);
            gap_mask.push(gap_signal < s.gap_threshold);
        }
    }
    Ok(Terrain {
        heights,
        gap_mask,
        cell_size_m: cfg.cell_size_m,
        course_length: cfg.course_length(),
        spawn_pad_cells: cfg.spawn_pad_cells,
    })
}

/// Creates a child environment: the CPPN is mutated through the shared NEAT
/// machinery and the difficulty scalars drift within their bounds. The
/// parent is never modified.
pub fn reproduce_env(
    parent: &EnvGenome,
    env_cfg: &EnvMutationConfig,
    rates: &MutationRates,
    reg: &mut InnovationRegistry,
    rng: &mut DetRng,
    child_id: EnvId,
    iteration: u64,
) -> EnvGenome {
    let mut cppn = mutate(&parent.cppn, reg, rates, rng);
    cppn.id = child_id;
    let s = &parent.difficulty_scalars;
    let difficulty_scalars = DifficultyScalars {
        roughness_scale: (s.roughness_scale + rng.gauss(0.0, env_cfg.rough_drift_sigma)).max(0.0),
        gap_threshold: (s.gap_threshold
            + rng.gauss(env_cfg.gap_drift_mean, env_cfg.gap_drift_sigma))
        .clamp(-1.0, 1.0),
        height_amplitude: (s.height_amplitude
            + rng.gauss(env_cfg.amp_drift_mean, env_cfg.amp_drift_sigma))
        .max(0.0),
    };
    EnvGenome {
        cppn,
        difficulty_scalars,
        env_id: child_id,
        parent_id: Some(parent.env_id),
        created_iteration: iteration,
    }
}

/// Plot-ready table: x, height, and a 0/1 gap sentinel per cell.
pub fn terrain_table(terrain: &Terrain) -> String {
    let mut out = String::from("x_m\theight_m\tgap\n");
    for (i, (&h, &g)) in terrain.heights.iter().zip(terrain.gap_mask.iter()).enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            terrain.cell_left_edge(i),
            h,
            g as u8
        ));
    }
    out
}
