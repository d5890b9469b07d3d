//! The run ledger: one row per iteration, plus derived ratio metrics.
//!
//! Persisted as an append-only comma-delimited table with a fixed header so
//! external plotting never has to guess column order. ANNECS and the
//! cumulative evaluation count are nondecreasing by construction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::TransferKind;
use crate::terrain::EnvId;

pub const LEDGER_HEADER: &str = "iteration,annecs,mean_nodes,mean_best_fitness,cumulative_function_evals,active_pair_count,transfers_fbt,transfers_sbt,transfers_rt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub iteration: u64,
    pub annecs: u64,
    /// Mean hidden-node count over every genome in every active population.
    pub mean_nodes: f64,
    pub mean_best_fitness: f64,
    pub cumulative_function_evals: u64,
    pub active_pair_count: usize,
    pub transfers_fbt: u32,
    pub transfers_sbt: u32,
    pub transfers_rt: u32,
}

impl LedgerRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.annecs,
            self.mean_nodes,
            self.mean_best_fitness,
            self.cumulative_function_evals,
            self.active_pair_count,
            self.transfers_fbt,
            self.transfers_sbt,
            self.transfers_rt
        )
    }
}

/// One recorded inter-environment transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferEvent {
    pub iteration: u64,
    pub kind: TransferKind,
    pub source_env: EnvId,
    pub target_env: EnvId,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub rows: Vec<LedgerRow>,
    pub transfer_events: Vec<TransferEvent>,
}

impl RunLedger {
    pub fn push(&mut self, row: LedgerRow) {
        if let Some(prev) = self.rows.last() {
            debug_assert!(row.annecs >= prev.annecs, "ANNECS must be nondecreasing");
            debug_assert!(
                row.cumulative_function_evals >= prev.cumulative_function_evals,
                "evaluation count must be nondecreasing"
            );
        }
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LEDGER_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    pub fn transfers_csv(&self) -> String {
        let mut out = String::from("iteration,kind,source_env,target_env\n");
        for ev in &self.transfer_events {
            out.push_str(&format!(
                "{},{},{},{}\n",
                ev.iteration,
                ev.kind.name(),
                ev.source_env,
                ev.target_env
            ));
        }
        out
    }

    /// Parses rows back from the persisted table (transfer events are kept
    /// in their own file and not read here).
    pub fn rows_from_csv(text: &str) -> Result<Vec<LedgerRow>, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == LEDGER_HEADER => {}
            other => return Err(format!("bad ledger header: {other:?}")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(format!("ledger line {} has {} fields", i + 2, f.len()));
            }
            let err = |what: &str| format!("ledger line {}: bad {what}", i + 2);
            rows.push(LedgerRow {
                iteration: f[0].parse().map_err(|_| err("iteration"))?,
                annecs: f[1].parse().map_err(|_| err("annecs"))?,
                mean_nodes: f[2].parse().map_err(|_| err("mean_nodes"))?,
                mean_best_fitness: f[3].parse().map_err(|_| err("mean_best_fitness"))?,
                cumulative_function_evals: f[4]
                    .parse()
                    .map_err(|_| err("cumulative_function_evals"))?,
                active_pair_count: f[5].parse().map_err(|_| err("active_pair_count"))?,
                transfers_fbt: f[6].parse().map_err(|_| err("transfers_fbt"))?,
                transfers_sbt: f[7].parse().map_err(|_| err("transfers_sbt"))?,
                transfers_rt: f[8].parse().map_err(|_| err("transfers_rt"))?,
            });
        }
        Ok(rows)
    }
}

/// Fitness-to-nodes ratio for one row; None marks a zero-node row.
pub fn fnr(row: &LedgerRow) -> Option<f64> {
    if row.mean_nodes == 0.0 {
        None
    } else {
        Some(row.mean_best_fitness / row.mean_nodes)
    }
}

/// ANNECS-to-nodes ratio for one row; None marks a zero-node row.
pub fn anr(row: &LedgerRow) -> Option<f64> {
    if row.mean_nodes == 0.0 {
        None
    } else {
        Some(row.annecs as f64 / row.mean_nodes)
    }
}

/// ANNECS bookkeeping: an environment counts exactly once, at the first
/// iteration where it both passed the minimal criterion at creation and has
/// been solved by some agent (at any time, including after retirement).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnecsTracker {
    mc_passed: BTreeSet<EnvId>,
    solved: BTreeSet<EnvId>,
    counted: BTreeSet<EnvId>,
}

impl AnnecsTracker {
    pub fn record_mc_pass(&mut self, env: EnvId) {
        self.mc_passed.insert(env);
    }

    /// Feed every rollout score through here; solving is permanent.
    pub fn record_score(&mut self, env: EnvId, score: f64, solved_threshold: f64) {
        if score >= solved_threshold {
            self.solved.insert(env);
        }
    }

    pub fn is_solved(&self, env: EnvId) -> bool {
        self.solved.contains(&env)
    }

    pub fn mc_passed(&self, env: EnvId) -> bool {
        self.mc_passed.contains(&env)
    }

    /// Called once per iteration; promotes newly eligible environments.
    pub fn update(&mut self) -> u64 {
        let newly: Vec<EnvId> = self
            .mc_passed
            .intersection(&self.solved)
            .filter(|e| !self.counted.contains(e))
            .cloned()
            .collect();
        self.counted.extend(newly);
        self.counted.len() as u64
    }

    pub fn annecs(&self) -> u64 {
        self.counted.len() as u64
    }
}
