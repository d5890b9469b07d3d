//! Run metrics: the ledger, ANNECS accounting, derived ratios, checkpoint
//! persistence, and the generalization harness.

pub mod checkpoint;
pub mod generalization;
pub mod ledger;

pub use checkpoint::{check_config_compatible, checkpoint_load, checkpoint_save};
pub use generalization::{
    run_generalization, Bucket, GeneralizationReport, MethodReport, MethodRun, PairScore,
};
pub use ledger::{anr, fnr, AnnecsTracker, LedgerRow, RunLedger, TransferEvent, LEDGER_HEADER};
