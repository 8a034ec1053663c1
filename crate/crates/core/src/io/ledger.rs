//! Per-trajectory CSV ledger of energies and audit quantities.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NschError, Result};
use crate::stepper::{div_residual, EnergyLedger, State};

pub const COLUMNS: [&str; 12] = [
    "t",
    "E",
    "D",
    "source",
    "bel_residual",
    "E_tilde",
    "lambda1",
    "mean_phi",
    "mean_sigma",
    "max_abs_phi",
    "div_residual",
    "newton_iters",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub source: f64,
    pub bel_residual: f64,
    #[serde(rename = "E_tilde")]
    pub e_tilde: f64,
    pub lambda1: f64,
    pub mean_phi: f64,
    pub mean_sigma: f64,
    pub max_abs_phi: f64,
    pub div_residual: f64,
    pub newton_iters: usize,
}

impl LedgerRow {
    pub fn new(s: &State, energy: &EnergyLedger, newton_iters: usize) -> Self {
        Self {
            t: s.t,
            e: energy.e,
            d: energy.d,
            source: energy.source,
            bel_residual: energy.residual,
            e_tilde: energy.e_tilde,
            lambda1: energy.lambda1,
            mean_phi: s.phi.mean(),
            mean_sigma: s.sigma.mean(),
            max_abs_phi: s.phi.max_abs(),
            div_residual: div_residual(s),
            newton_iters,
        }
    }
}

fn csv_err(e: csv::Error) -> NschError {
    NschError::Ledger(e.to_string())
}

pub struct LedgerWriter {
    inner: csv::Writer<File>,
}

impl LedgerWriter {
    /// Creates the file and writes the header row.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(csv_err)?;
        inner.write_record(COLUMNS).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &LedgerRow) -> Result<()> {
        self.inner.serialize(row).map_err(csv_err)
    }

    pub fn flush(&mut self) -> Result<()> {
        Ok(self.inner.flush()?)
    }
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(NschError::Ledger(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> LedgerRow {
        LedgerRow {
            t,
            e: 1.0 / 3.0,
            d: 2.5e-17,
            source: -0.0,
            bel_residual: -1e-300,
            e_tilde: 12.0,
            lambda1: 0.1,
            mean_phi: 0.2,
            mean_sigma: 5.0,
            max_abs_phi: 0.97,
            div_residual: 0.0,
            newton_iters: 3,
        }
    }

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.csv");
        let mut w = LedgerWriter::create(&path).unwrap();
        w.push(&row(0.0)).unwrap();
        w.push(&row(0.01)).unwrap();
        w.flush().unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        let back = read_ledger(&path).unwrap();
        assert_eq!(back, vec![row(0.0), row(0.01)]);
    }

    #[test]
    fn header_only_ledger_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.csv");
        LedgerWriter::create(&path).unwrap().flush().unwrap();
        assert!(read_ledger(&path).unwrap().is_empty());
    }
}
