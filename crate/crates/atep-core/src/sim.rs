//! Deterministic terrain-traversal simulator.
//!
//! Point-mass dynamics under semi-implicit Euler at fixed `dt`. The score
//! convention matches the usual walker benchmarks: per-step progress reward
//! totalling 320 for a full course, a small control cost, and a -100 penalty
//! for falling, so "unsolved" sits below 200 and strong runs above 300.
//!
//! The agent observes the height of the next `lookahead` cells relative to
//! its own height (gaps read as the kill plane), its velocities, and a
//! ground-contact flag. It emits a horizontal drive in [-1, 1] and a jump
//! signal that fires above 0.5 when grounded. Ground motion follows the
//! terrain; rises above `max_climb_m` block the walker, holes swallow it.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::neat::AgentGenome;
use crate::phenotype::{activate, compile, CompiledNetwork};
use crate::rng::DetRng;
use crate::terrain::Terrain;

/// Progress reward for traversing the whole course.
pub const PROGRESS_TOTAL: f64 = 320.0;
/// Per-step cost multiplier on |drive|.
pub const CONTROL_COST: f64 = 0.001;
/// Reward penalty applied on a fall.
pub const FALL_PENALTY: f64 = 100.0;
/// Bins per action dimension in the rollout histogram.
pub const ACTION_BINS: usize = 10;
/// Action dimensions: horizontal drive and jump signal.
pub const ACTION_DIMS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_s: f64,
    pub gravity_mps2: f64,
    pub v_max_mps: f64,
    pub drive_accel_mps2: f64,
    pub v_jump_mps: f64,
    pub max_steps: u32,
    /// Kill plane sits this far below the lowest terrain cell.
    pub kill_plane_offset_m: f64,
    /// Ground rises above this per cell are walls and must be jumped.
    pub max_climb_m: f64,
    pub solved_threshold: f64,
    /// Cells of terrain visible ahead of the agent.
    pub lookahead_cells: usize,
    /// Height deltas are clipped to this before scaling into [-1, 1].
    pub obs_clip_m: f64,
    /// Gaussian sigma added to observations when nonzero.
    pub noise_sigma: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_s: 0.05,
            gravity_mps2: 9.8,
            v_max_mps: 5.0,
            drive_accel_mps2: 8.0,
            v_jump_mps: 6.0,
            max_steps: 1000,
            kill_plane_offset_m: 5.0,
            max_climb_m: 1.0,
            solved_threshold: 200.0,
            lookahead_cells: 10,
            obs_clip_m: 5.0,
            noise_sigma: 0.0,
        }
    }
}

impl SimConfig {
    /// Observation vector length: lookahead deltas + vx + vy + contact flag.
    pub fn observation_size(&self) -> usize {
        self.lookahead_cells + 3
    }

    pub fn score_min(&self) -> f64 {
        -FALL_PENALTY - self.max_steps as f64 * CONTROL_COST
    }

    pub fn score_max(&self) -> f64 {
        PROGRESS_TOTAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedEnd,
    Fell,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub score: f64,
    pub solved: bool,
    pub steps: u32,
    pub termination: Termination,
    pub final_x: f64,
    pub action_histogram: [[u32; ACTION_BINS]; ACTION_DIMS],
}

/// Seeded observation noise for a single rollout.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Run-wide function-evaluation counter, incremented once per rollout.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(from = "u64", into = "u64")]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new(value: u64) -> Self {
        EvalCounter(AtomicU64::new(value))
    }

    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn value(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

impl Clone for EvalCounter {
    fn clone(&self) -> Self {
        EvalCounter::new(self.value())
    }
}

impl From<u64> for EvalCounter {
    fn from(v: u64) -> Self {
        EvalCounter::new(v)
    }
}

impl From<EvalCounter> for u64 {
    fn from(c: EvalCounter) -> u64 {
        c.value()
    }
}

struct SimState {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    on_ground: bool,
}

/// Terrain height as the walker experiences it: holes read as the kill
/// plane both for observations and for landing checks.
fn effective_height(terrain: &Terrain, cell: usize, kill_plane: f64) -> f64 {
    if terrain.gap_mask[cell] {
        kill_plane
    } else {
        terrain.heights[cell]
    }
}

fn bin_action(value: f64) -> usize {
    let t = ((value + 1.0) / 2.0 * ACTION_BINS as f64).floor();
    (t as isize).clamp(0, ACTION_BINS as isize - 1) as usize
}

/// One deterministic episode of the network on the terrain. Increments the
/// counter by one function evaluation.
pub fn rollout(
    net: &CompiledNetwork,
    terrain: &Terrain,
    cfg: &SimConfig,
    noise: Option<NoiseSpec>,
    counter: &EvalCounter,
) -> Result<RolloutResult, SimError> {
    if net.input_arity() != cfg.observation_size() {
        return Err(SimError::Phenotype(
            crate::error::PhenotypeError::ArityMismatch {
                expected: cfg.observation_size(),
                got: net.input_arity(),
            },
        ));
    }
    if net.output_arity() != ACTION_DIMS {
        return Err(SimError::OutputArity {
            expected: ACTION_DIMS,
            got: net.output_arity(),
        });
    }
    counter.bump();

    let kill_plane = terrain.min_height() - cfg.kill_plane_offset_m;
    let mut noise_rng = noise.map(|n| (n.sigma, DetRng::fork(n.seed, &[0x006F_6273])));

    let mut st = SimState {
        x: 0.0,
        y: terrain.heights[0],
        vx: 0.0,
        vy: 0.0,
        on_ground: true,
    };
    let mut reward = 0.0f64;
    let mut steps = 0u32;
    let mut histogram = [[0u32; ACTION_BINS]; ACTION_DIMS];
    let last_cell = terrain.heights.len() - 1;

    let termination = loop {
        // Observe.
        let mut obs = Vec::with_capacity(cfg.observation_size());
        let cur_cell = terrain.cell_at(st.x);
        for k in 1..=cfg.lookahead_cells {
            let cell = (cur_cell + k).min(last_cell);
            let delta = effective_height(terrain, cell, kill_plane) - st.y;
            obs.push(delta.clamp(-cfg.obs_clip_m, cfg.obs_clip_m) / cfg.obs_clip_m);
        }
        obs.push(st.vx / cfg.v_max_mps);
        obs.push(st.vy / cfg.v_max_mps);
        obs.push(if st.on_ground { 1.0 } else { 0.0 });
        if let Some((sigma, rng)) = noise_rng.as_mut() {
            for o in obs.iter_mut() {
                *o += rng.gauss(0.0, *sigma);
            }
        }

        // Act.
        let out = activate(net, &obs).map_err(SimError::Phenotype)?;
        let drive = out[0].clamp(-1.0, 1.0);
        let jump = out[1];
        histogram[0][bin_action(drive)] += 1;
        histogram[1][bin_action(jump)] += 1;

        let mut jumped_now = false;
        if st.on_ground && jump > 0.5 {
            st.vy = cfg.v_jump_mps;
            st.on_ground = false;
            jumped_now = true;
        }
        if !st.on_ground && !jumped_now {
            st.vy -= cfg.gravity_mps2 * cfg.dt_s;
        }
        st.vx = (st.vx + cfg.drive_accel_mps2 * drive * cfg.dt_s)
            .clamp(-cfg.v_max_mps, cfg.v_max_mps);

        let mut fell = false;

        // Vertical resolution on the current cell.
        if !st.on_ground {
            let y_new = st.y + st.vy * cfg.dt_s;
            let cell = terrain.cell_at(st.x);
            let eff = effective_height(terrain, cell, kill_plane);
            if st.vy <= 0.0 && !terrain.gap_mask[cell] && y_new <= eff {
                st.y = eff;
                st.vy = 0.0;
                st.on_ground = true;
            } else {
                st.y = y_new;
            }
            if st.y < kill_plane {
                fell = true;
            }
        }

        // Horizontal resolution.
        let x_prev = st.x;
        if !fell {
            let x_try = (st.x + st.vx * cfg.dt_s).clamp(0.0, terrain.course_length);
            if st.on_ground {
                let target = terrain.cell_at(x_try);
                let mut cell = terrain.cell_at(st.x);
                let mut x_new = x_try;
                let moving_right = target > cell;
                let mut blocked = false;
                while cell != target {
                    let next = if moving_right { cell + 1 } else { cell - 1 };
                    if terrain.gap_mask[next] {
                        // Entering a hole at ground level: stop at its rim
                        // and fall.
                        x_new = if moving_right {
                            terrain.cell_left_edge(next)
                        } else {
                            terrain.cell_left_edge(cell)
                        };
                        fell = true;
                        break;
                    }
                    let h = terrain.heights[next];
                    if h > st.y + cfg.max_climb_m {
                        // Wall: blocked at the boundary.
                        x_new = if moving_right {
                            terrain.cell_left_edge(next)
                        } else {
                            terrain.cell_left_edge(cell)
                        };
                        st.vx = 0.0;
                        blocked = true;
                        break;
                    }
                    st.y = h;
                    cell = next;
                }
                if !fell && !blocked {
                    st.y = terrain.heights[target];
                }
                st.x = if fell || blocked { x_new } else { x_try };
            } else {
                let target = terrain.cell_at(x_try);
                let eff = effective_height(terrain, target, kill_plane);
                if st.y < eff {
                    // Airborne against a wall face: horizontal motion stops.
                    st.vx = 0.0;
                } else {
                    st.x = x_try;
                }
            }
        }

        reward += PROGRESS_TOTAL * (st.x - x_prev) / terrain.course_length;
        reward -= CONTROL_COST * drive.abs();
        steps += 1;

        if fell {
            reward -= FALL_PENALTY;
            break Termination::Fell;
        }
        if st.x >= terrain.course_length {
            break Termination::ReachedEnd;
        }
        if steps >= cfg.max_steps {
            break Termination::Timeout;
        }
    };

    Ok(RolloutResult {
        score: reward,
        solved: reward >= cfg.solved_threshold,
        steps,
        termination,
        final_x: st.x,
        action_histogram: histogram,
    })
}

/// Compiles and rolls out every genome on the environment's terrain,
/// returning the population with fitness set to the rollout score. Pure per
/// genome, so the evaluations run in parallel; the counter advances by the
/// population size.
pub fn evaluate_population(
    population: Vec<AgentGenome>,
    terrain: &Terrain,
    cfg: &SimConfig,
    noise_base: Option<u64>,
    counter: &EvalCounter,
) -> Result<Vec<AgentGenome>, SimError> {
    use rayon::prelude::*;
    let scores: Result<Vec<f64>, SimError> = population
        .par_iter()
        .map(|genome| {
            let net = compile(genome).map_err(SimError::Phenotype)?;
            let noise = noise_base.map(|base| NoiseSpec {
                sigma: cfg.noise_sigma,
                seed: crate::rng::mix_words(&[base, genome.id]),
            });
            Ok(rollout(&net, terrain, cfg, noise, counter)?.score)
        })
        .collect();
    let scores = scores?;
    let mut out = population;
    for (g, s) in out.iter_mut().zip(scores) {
        g.fitness = Some(s);
    }
    Ok(out)
}
