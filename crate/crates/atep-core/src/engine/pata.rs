//! PATA-EC: rank-normalized performance signatures for environments.
//!
//! An environment's signature is built from the scores every champion agent
//! achieves on it: scores are clipped to a fixed band, ranked ascending with
//! average ranks on ties, and the ranks mapped affinely onto [-0.5, 0.5].
//! Only the rank ordering of the clipped scores matters, so any strictly
//! increasing rescoring that preserves the clip band leaves the signature
//! bit-identical. Novelty is the mean Euclidean distance to the k nearest
//! existing signatures.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PataEcVector {
    /// One entry per evaluating agent, in canonical agent order.
    pub entries: Vec<f64>,
}

/// Clips raw champion scores and rank-normalizes them into [-0.5, 0.5].
/// A single-agent vector degenerates to the centered value 0.
pub fn pata_ec_from_scores(raw_scores: &[f64], clip_lo: f64, clip_hi: f64) -> PataEcVector {
    let n = raw_scores.len();
    let clipped: Vec<f64> = raw_scores
        .iter()
        .map(|s| s.clamp(clip_lo, clip_hi))
        .collect();

    // Ranks ascending, ties averaged.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        clipped[i]
            .partial_cmp(&clipped[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut ranks = vec![0.0f64; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos;
        while end + 1 < n && clipped[order[end + 1]] == clipped[order[pos]] {
            end += 1;
        }
        let avg_rank = (pos + 1 + end + 1) as f64 / 2.0;
        for &idx in &order[pos..=end] {
            ranks[idx] = avg_rank;
        }
        pos = end + 1;
    }

    let entries = if n <= 1 {
        vec![0.0; n]
    } else {
        ranks
            .iter()
            .map(|r| (r - 1.0) / (n as f64 - 1.0) - 0.5)
            .collect()
    };
    PataEcVector { entries }
}

/// Mean Euclidean distance to the k nearest signatures; empty `others`
/// means maximal novelty.
pub fn novelty(v: &PataEcVector, others: &[PataEcVector], k: usize) -> f64 {
    if others.is_empty() {
        return f64::INFINITY;
    }
    let mut dists: Vec<f64> = others
        .iter()
        .map(|o| {
            debug_assert_eq!(o.entries.len(), v.entries.len());
            v.entries
                .iter()
                .zip(o.entries.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let k = k.min(dists.len()).max(1);
    dists[..k].iter().sum::<f64>() / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_ranked_example() {
        // Scores (-50, 250, 400) clipped to [-100, 300] -> (-50, 250, 300).
        let v = pata_ec_from_scores(&[-50.0, 250.0, 400.0], -100.0, 300.0);
        assert_eq!(v.entries, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn all_tied_scores_center_at_zero() {
        let v = pata_ec_from_scores(&[7.0, 7.0, 7.0, 7.0], -100.0, 300.0);
        assert_eq!(v.entries, vec![0.0; 4]);
    }

    #[test]
    fn rank_invariance_under_increasing_transform() {
        let raw = [-120.0, -3.0, 88.0, 88.0, 299.0, 520.0];
        let (lo, hi) = (-100.0, 300.0);
        let before = pata_ec_from_scores(&raw, lo, hi);
        // Strictly increasing map fixing the clip band endpoints.
        let transformed: Vec<f64> = raw
            .iter()
            .map(|&x| {
                if x <= lo {
                    lo - (lo - x) * 2.0
                } else if x >= hi {
                    hi + (x - hi) * 0.5
                } else {
                    lo + (hi - lo) * ((x - lo) / (hi - lo)).powf(1.7)
                }
            })
            .collect();
        let after = pata_ec_from_scores(&transformed, lo, hi);
        assert_eq!(before, after);
    }

    #[test]
    fn single_agent_is_centered() {
        let v = pata_ec_from_scores(&[42.0], -100.0, 300.0);
        assert_eq!(v.entries, vec![0.0]);
    }

    #[test]
    fn novelty_hand_example() {
        let v = PataEcVector { entries: vec![0.5, -0.5] };
        let others = vec![
            PataEcVector { entries: vec![0.5, 0.5] },
            PataEcVector { entries: vec![-0.5, -0.5] },
        ];
        assert!((novelty(&v, &others, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn novelty_conventions() {
        let v = PataEcVector { entries: vec![0.1, 0.2] };
        assert_eq!(novelty(&v, &[], 5), f64::INFINITY);
        let same = vec![v.clone()];
        assert_eq!(novelty(&v, &same, 1), 0.0);
    }
}
