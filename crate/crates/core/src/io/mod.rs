//! Configuration, persistence and run orchestration.

pub mod analysis;
pub mod config;
pub mod init;
pub mod ledger;
pub mod run;
pub mod snapshot;

pub use config::{load_config, parse_config, Audit, InitKind, RunConfig, OUTPUT_ROOT_ENV};
pub use ledger::{read_ledger, LedgerRow, LedgerWriter};
pub use run::{read_meta, run, run_in, AuditResult, Meta, RunReport};
pub use snapshot::{read_snapshot, read_snapshot_data, read_snapshot_on, write_snapshot};
