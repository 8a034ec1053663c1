//! Binary state snapshots: `NSCH` magic, `u32` version, `u32` nx and ny,
//! `f64` hx, hy and t, then phi, sigma, p, u, w as little-endian `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{NschError, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::physics::{chemical_potential, PhysParams};
use crate::stepper::State;

pub const MAGIC: &[u8; 4] = b"NSCH";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 24;

/// Stored fields; the chemical potential is not part of the format.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub t: f64,
    pub phi: ScalarField,
    pub sigma: ScalarField,
    pub p: ScalarField,
    pub v: VectorField,
}

impl SnapshotData {
    pub fn grid(&self) -> Grid {
        self.phi.grid
    }

    /// Rebuilds a state, recomputing `mu` from its definition.
    pub fn into_state(self, params: &PhysParams) -> Result<State> {
        let mu = chemical_potential(&self.phi, &self.sigma, params)?;
        let s = State {
            t: self.t,
            v: self.v,
            phi: self.phi,
            sigma: self.sigma,
            mu,
            p: self.p,
        };
        s.check(params)?;
        Ok(s)
    }
}

impl From<&State> for SnapshotData {
    fn from(s: &State) -> Self {
        Self {
            t: s.t,
            phi: s.phi.clone(),
            sigma: s.sigma.clone(),
            p: s.p.clone(),
            v: s.v.clone(),
        }
    }
}

pub fn encode(data: &SnapshotData) -> Vec<u8> {
    let g = data.grid();
    let floats = 3 * g.cells() + g.u_len() + g.w_len();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny as u32).to_le_bytes());
    for x in [g.hx, g.hy, data.t] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for field in [
        &data.phi.values,
        &data.sigma.values,
        &data.p.values,
        &data.v.u,
        &data.v.w,
    ] {
        for x in field {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<SnapshotData> {
    let corrupt = |message: String| NschError::Snapshot {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!(
            "truncated header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(corrupt(format!(
            "format version {version}, expected {VERSION}"
        )));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let (hx, hy, t) = (f64_at(16), f64_at(24), f64_at(32));
    let g = Grid::new(nx, ny, nx as f64 * hx, ny as f64 * hy)
        .map_err(|e| corrupt(format!("bad grid header: {e}")))?;
    // Recover the exact spacings written, independent of the lx/nx rounding.
    let g = Grid { hx, hy, ..g };
    let floats = 3 * g.cells() + g.u_len() + g.w_len();
    let expected = HEADER_LEN + 8 * floats;
    if bytes.len() != expected {
        return Err(corrupt(format!(
            "payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut at = HEADER_LEN;
    let mut take = |n: usize| {
        let v: Vec<f64> = (0..n).map(|k| f64_at(at + 8 * k)).collect();
        at += 8 * n;
        v
    };
    let phi = take(g.cells());
    let sigma = take(g.cells());
    let p = take(g.cells());
    let u = take(g.u_len());
    let w = take(g.w_len());
    Ok(SnapshotData {
        t,
        phi: ScalarField::from_values(g, phi)?,
        sigma: ScalarField::from_values(g, sigma)?,
        p: ScalarField::from_values(g, p)?,
        v: VectorField::from_values(g, u, w)?,
    })
}

pub fn write_snapshot(s: &State, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path.as_ref())?);
    f.write_all(&encode(&SnapshotData::from(s)))?;
    f.flush()?;
    Ok(())
}

pub fn read_snapshot_data(path: impl AsRef<Path>) -> Result<SnapshotData> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, path)
}

pub fn read_snapshot(path: impl AsRef<Path>, params: &PhysParams) -> Result<State> {
    read_snapshot_data(path)?.into_state(params)
}

/// Reads a snapshot that must live on `grid`.
pub fn read_snapshot_on(path: impl AsRef<Path>, grid: &Grid, params: &PhysParams) -> Result<State> {
    let data = read_snapshot_data(path)?;
    grid.ensure_same(&data.grid())?;
    data.into_state(params)
}
