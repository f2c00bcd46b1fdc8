//! Binary deformation checkpoints.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic     5 bytes  "SHLM1"
//! version   u32      1
//! dimension u32
//! min_level u32      grid levels
//! max_level u32
//! level     u32      descent level the state belongs to
//! flags     u64      number of split flags, then ceil(n / 8) bytes, LSB first
//! vertices  u64      number of grid vertices
//! values    f64      vertices × dimension nodal positions
//! ```
//!
//! A JSON sidecar with the config echo and descent history sits next to the
//! binary file.

use std::path::Path;
use std::sync::Arc;

use shellmatch_core::{AdaptiveGrid, Deformation, Vector};

use crate::io::write_atomic;
use crate::Error;

pub const MAGIC: &[u8; 5] = b"SHLM1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode<const D: usize>(phi: &Deformation<D>, level: u32) -> Vec<u8> {
    let grid = phi.grid();
    let flags = grid.split_flags();
    let mut out = Vec::with_capacity(64 + flags.len() / 8 + phi.values().len() * D * 8);
    out.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, D as u32, grid.min_level(), grid.max_level(), level] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(flags.len() as u64).to_le_bytes());
    for chunk in flags.chunks(8) {
        out.push(chunk.iter().enumerate().fold(0u8, |b, (i, &f)| b | ((f as u8) << i)));
    }
    out.extend_from_slice(&(phi.values().len() as u64).to_le_bytes());
    for v in phi.values() {
        for c in v.0 {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, Error> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, Error> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a checkpoint into the deformation and its descent level.
pub fn decode<const D: usize>(bytes: &[u8]) -> Result<(Deformation<D>, u32), Error> {
    let bad = |m: &str| Error::Checkpoint(m.into());
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(5)? != MAGIC {
        return Err(bad("not a shellmatch checkpoint"));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    if c.u32()? as usize != D {
        return Err(bad("dimension mismatch"));
    }
    let (min_level, max_level, level) = (c.u32()?, c.u32()?, c.u32()?);
    let n_flags = c.u64()? as usize;
    let packed = c.take(n_flags.div_ceil(8))?;
    let flags: Vec<bool> = (0..n_flags).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    let grid = AdaptiveGrid::<D>::from_split_flags(min_level, max_level, &flags)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let n = c.u64()? as usize;
    if n != grid.num_vertices() {
        return Err(bad("vertex count does not match the grid"));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = [0.0; D];
        for x in &mut p {
            *x = c.f64()?;
        }
        values.push(Vector(p));
    }
    if c.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    let grid = Arc::new(grid);
    let phi = Deformation::identity(grid.clone());
    let dofs: Vec<Vector<D>> = (0..grid.num_dofs()).map(|k| values[grid.dof_vertex(k)]).collect();
    let phi = phi.with_dofs(&dofs);
    if phi.values().iter().zip(&values).any(|(a, b)| (*a - *b).max_abs() > 1e-12) {
        return Err(bad("nodal values violate the grid constraints"));
    }
    Ok((phi, level))
}

pub fn save<const D: usize>(path: &Path, phi: &Deformation<D>, level: u32) -> Result<(), Error> {
    write_atomic(path, &encode(phi, level))
}

pub fn load<const D: usize>(path: &Path) -> Result<(Deformation<D>, u32), Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
    decode(&bytes)
}
