//! The generalization harness: cross-evaluate the agents of completed runs
//! on each other's hardest solved environments.
//!
//! For each run ("method") the harness selects the latest `n_envs` solved
//! environments and, per environment, the latest agent that solved it. With
//! several runs, each method's agents are evaluated on every other method's
//! selected environments; with a single run, the method's own agents face
//! all of its own selected environments (the self-generalization variant).
//! Every (agent, environment) pair is rolled out `n_runs` times under
//! seeded observation noise, and the mean score lands the pair in one of
//! three buckets split at 200 and 300.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::engine::EngineState;
use crate::error::MetricsError;
use crate::neat::{AgentGenome, GenomeId};
use crate::phenotype::compile;
use crate::rng::{fnv1a, mix_words};
use crate::sim::{rollout, EvalCounter, NoiseSpec};
use crate::terrain::{synthesize, EnvGenome, EnvId};

/// Lower edge of the "solved comfortably" band.
pub const BUCKET_LO: f64 = 200.0;
/// Lower edge of the "strong" band.
pub const BUCKET_HI: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bucket {
    Above300,
    Between200And300,
    Below200,
}

impl Bucket {
    pub fn of_mean(mean: f64) -> Bucket {
        if mean > BUCKET_HI {
            Bucket::Above300
        } else if mean < BUCKET_LO {
            Bucket::Below200
        } else {
            Bucket::Between200And300
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bucket::Above300 => "above_300",
            Bucket::Between200And300 => "between_200_300",
            Bucket::Below200 => "below_200",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    /// Environment the agent originally solved (its provenance).
    pub agent_env: EnvId,
    pub agent_id: GenomeId,
    /// Method that created the evaluation environment.
    pub env_method: String,
    pub env_id: EnvId,
    pub mean: f64,
    pub max: f64,
    pub bucket: Bucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub rows: Vec<PairScore>,
    /// Counts for [above_300, between_200_300, below_200].
    pub bucket_counts: [usize; 3],
}

impl MethodReport {
    pub fn bucket_percentages(&self) -> [f64; 3] {
        let total: usize = self.bucket_counts.iter().sum();
        if total == 0 {
            return [0.0; 3];
        }
        self.bucket_counts
            .map(|c| 100.0 * c as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub methods: Vec<MethodReport>,
    pub n_envs: usize,
    pub n_runs: usize,
    pub noise_sigma: f64,
    pub function_evaluations: u64,
}

impl GeneralizationReport {
    /// Per-pair rows as a delimited table.
    pub fn table(&self) -> String {
        let mut out =
            String::from("method\tagent_env\tagent_id\tenv_method\tenv_id\tmean\tmax\tbucket\n");
        for m in &self.methods {
            for r in &m.rows {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    m.method,
                    r.agent_env,
                    r.agent_id,
                    r.env_method,
                    r.env_id,
                    r.mean,
                    r.max,
                    r.bucket.name()
                ));
            }
        }
        out
    }

    /// Human-readable bucket summary, one line per method.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for m in &self.methods {
            let p = m.bucket_percentages();
            let total: usize = m.bucket_counts.iter().sum();
            out.push_str(&format!(
                "{}: above_300 {:.1}% ({}/{t}), between_200_300 {:.1}% ({}/{t}), below_200 {:.1}% ({}/{t})\n",
                m.method,
                p[0],
                m.bucket_counts[0],
                p[1],
                m.bucket_counts[1],
                p[2],
                m.bucket_counts[2],
                t = total,
            ));
        }
        out
    }
}

/// One completed run, as loaded from its final checkpoint.
pub struct MethodRun {
    pub label: String,
    pub cfg: RunConfig,
    pub state: EngineState,
}

struct Selected {
    env: EnvGenome,
    agent: AgentGenome,
}

fn find_env(state: &EngineState, env_id: EnvId) -> Option<EnvGenome> {
    state
        .pairs
        .iter()
        .map(|p| &p.env)
        .chain(state.archive.retired.iter().map(|r| &r.env))
        .find(|e| e.env_id == env_id)
        .cloned()
}

/// The latest `n_envs` solved environments with their latest solving agents,
/// ordered oldest first.
fn select(run: &MethodRun, n_envs: usize) -> Result<Vec<Selected>, MetricsError> {
    let mut solved: Vec<EnvId> = run.state.solved_agents.keys().cloned().collect();
    solved.sort_unstable();
    if solved.len() < n_envs {
        return Err(MetricsError::Shortfall {
            method: run.label.clone(),
            have: solved.len(),
            need: n_envs,
        });
    }
    let latest = &solved[solved.len() - n_envs..];
    latest
        .iter()
        .map(|env_id| {
            let record = &run.state.solved_agents[env_id];
            let env = find_env(&run.state, *env_id).ok_or_else(|| MetricsError::Shortfall {
                method: run.label.clone(),
                have: 0,
                need: n_envs,
            })?;
            Ok(Selected {
                env,
                agent: record.champion.clone(),
            })
        })
        .collect()
}

/// Cross- or self-generalization over completed runs. Observation noise is
/// seeded per (agent, environment, run index) so the protocol is
/// reproducible; sigma zero degenerates every pair to mean == max.
pub fn run_generalization(
    runs: &[MethodRun],
    n_envs: usize,
    n_runs: usize,
    noise_sigma: f64,
) -> Result<GeneralizationReport, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::NoRuns);
    }
    let selections: Vec<Vec<Selected>> = runs
        .iter()
        .map(|r| select(r, n_envs))
        .collect::<Result<_, _>>()?;

    let counter = EvalCounter::default();
    let mut methods = Vec::with_capacity(runs.len());
    for (mi, run) in runs.iter().enumerate() {
        let mut rows = Vec::new();
        let mut bucket_counts = [0usize; 3];
        // Cross mode evaluates on everyone else's environments; a single
        // run evaluates on its own.
        let eval_sets: Vec<usize> = if runs.len() == 1 {
            vec![0]
        } else {
            (0..runs.len()).filter(|&j| j != mi).collect()
        };
        for sel in &selections[mi] {
            let net = compile(&sel.agent).map_err(crate::error::SimError::Phenotype)?;
            for &ei in &eval_sets {
                let env_run = &runs[ei];
                for target in &selections[ei] {
                    let terrain = synthesize(&target.env, &env_run.cfg.terrain)
                        .map_err(crate::error::SimError::Phenotype)?;
                    let mut sim_cfg = env_run.cfg.sim.clone();
                    sim_cfg.noise_sigma = noise_sigma;
                    let mut sum = 0.0f64;
                    let mut max = f64::NEG_INFINITY;
                    for run_idx in 0..n_runs {
                        let noise = (noise_sigma > 0.0).then(|| NoiseSpec {
                            sigma: noise_sigma,
                            seed: mix_words(&[
                                fnv1a(run.label.as_bytes()),
                                sel.agent.id,
                                fnv1a(env_run.label.as_bytes()),
                                target.env.env_id,
                                run_idx as u64,
                            ]),
                        });
                        let r = rollout(&net, &terrain, &sim_cfg, noise, &counter)?;
                        sum += r.score;
                        max = max.max(r.score);
                    }
                    let mean = sum / n_runs as f64;
                    let bucket = Bucket::of_mean(mean);
                    bucket_counts[match bucket {
                        Bucket::Above300 => 0,
                        Bucket::Between200And300 => 1,
                        Bucket::Below200 => 2,
                    }] += 1;
                    rows.push(PairScore {
                        agent_env: sel.env.env_id,
                        agent_id: sel.agent.id,
                        env_method: env_run.label.clone(),
                        env_id: target.env.env_id,
                        mean,
                        max,
                        bucket,
                    });
                }
            }
        }
        methods.push(MethodReport {
            method: run.label.clone(),
            rows,
            bucket_counts,
        });
    }
    Ok(GeneralizationReport {
        methods,
        n_envs,
        n_runs,
        noise_sigma,
        function_evaluations: counter.value(),
    })
}
