//! Compatibility distance between genomes.
//!
//! delta = c1*E/N + c2*D/N + c3*W, where E counts excess genes (innovation
//! beyond the other genome's maximum), D counts disjoint genes (unmatched
//! within range), W is the mean absolute weight difference over matching
//! innovations, and N is the larger gene count. Disabled genes participate
//! in the alignment and in W. For a pair of small genomes N is clamped to 1
//! so the gene-count terms stay unnormalized.

use serde::{Deserialize, Serialize};

use super::genome::AgentGenome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta_species: f64,
    /// N is clamped to 1 when both genomes have fewer genes than this.
    pub small_genome_floor: usize,
}

impl Default for CompatConfig {
    fn default() -> Self {
        CompatConfig {
            c1: 1.0,
            c2: 1.0,
            c3: 0.4,
            delta_species: 3.0,
            small_genome_floor: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBreakdown {
    pub excess: usize,
    pub disjoint: usize,
    pub mean_weight_diff: f64,
    pub larger_size: usize,
    pub delta: f64,
}

/// Aligns two genomes by innovation number and evaluates the distance.
/// Total on well-formed genomes and symmetric in its arguments.
pub fn distance(a: &AgentGenome, b: &AgentGenome, cfg: &CompatConfig) -> DistanceBreakdown {
    let max_a = a.max_innovation();
    let max_b = b.max_innovation();

    let mut excess = 0usize;
    let mut disjoint = 0usize;
    let mut matching = 0usize;
    let mut weight_diff_sum = 0.0f64;

    let (ca, cb) = (&a.connections, &b.connections);
    let (mut i, mut j) = (0usize, 0usize);
    while i < ca.len() || j < cb.len() {
        match (ca.get(i), cb.get(j)) {
            (Some(ga), Some(gb)) => match ga.innovation.cmp(&gb.innovation) {
                std::cmp::Ordering::Equal => {
                    matching += 1;
                    weight_diff_sum += (ga.weight - gb.weight).abs();
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    // Gene only in a. Excess if beyond b's newest innovation.
                    if max_b.is_none_or(|m| ga.innovation > m) {
                        excess += 1;
                    } else {
                        disjoint += 1;
                    }
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    if max_a.is_none_or(|m| gb.innovation > m) {
                        excess += 1;
                    } else {
                        disjoint += 1;
                    }
                    j += 1;
                }
            },
            (Some(ga), None) => {
                if max_b.is_none_or(|m| ga.innovation > m) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                i += 1;
            }
            (None, Some(gb)) => {
                if max_a.is_none_or(|m| gb.innovation > m) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let mean_weight_diff = if matching > 0 {
        weight_diff_sum / matching as f64
    } else {
        0.0
    };

    let (la, lb) = (ca.len(), cb.len());
    let larger_size = if la < cfg.small_genome_floor && lb < cfg.small_genome_floor {
        1
    } else {
        la.max(lb).max(1)
    };

    let n = larger_size as f64;
    let delta = cfg.c1 * excess as f64 / n + cfg.c2 * disjoint as f64 / n
        + cfg.c3 * mean_weight_diff;

    DistanceBreakdown {
        excess,
        disjoint,
        mean_weight_diff,
        larger_size,
        delta,
    }
}
