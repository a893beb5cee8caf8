//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `VLN1` |
//! | 4 | `u32` dimension `d` (2 or 3) |
//! | 4·d | `u32` points per axis, x first |
//! | 4 | `u32` component count `c` |
//! | 8 | `f64` time |
//! | 8·d | `f64` box length per axis |
//! | 8·c·N | components in order, each row-major (x slowest), `N = Π n` |
//!
//! SQG snapshots hold one component (θ), Euler snapshots three (ω).

use crate::error::{Error, Result};
use crate::frame::Model;
use crate::grid::{Grid, ScalarField, VectorField};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"VLN1";

/// Upper bound on the component count accepted by the decoder.
pub const MAX_COMPONENTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_scalar(field: &ScalarField, time: f64) -> Self {
        Self {
            time,
            grid: field.grid().clone(),
            components: vec![field.values().to_vec()],
        }
    }

    pub fn from_vector(field: &VectorField, time: f64) -> Self {
        Self {
            time,
            grid: field.grid().clone(),
            components: field.components().to_vec(),
        }
    }

    /// Model implied by dimension and component count.
    pub fn model(&self) -> Result<Model> {
        match (self.grid.dim(), self.components.len()) {
            (2, 1) => Ok(Model::Sqg),
            (3, 3) => Ok(Model::Euler3d),
            (d, c) => Err(Error::Format(format!(
                "a {d}D snapshot with {c} components is neither SQG (2D, 1) nor Euler (3D, 3)"
            ))),
        }
    }

    pub fn scalar(&self) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::Format(format!("expected 1 component, found {}", self.components.len())));
        }
        ScalarField::new(self.grid.clone(), self.components[0].clone())
    }

    pub fn vector(&self) -> Result<VectorField> {
        VectorField::new(self.grid.clone(), self.components.clone())
    }

    pub fn encode(&self) -> Vec<u8> {
        let d = self.grid.dim();
        let total: usize = self.components.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(4 + 4 * (d + 2) + 8 * (d + 1) + 8 * total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(d as u32).to_le_bytes());
        for &n in self.grid.shape() {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.components.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for &l in self.grid.lengths() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for c in &self.components {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected VLN1".into()));
        }
        let d = r.u32()? as usize;
        if !(d == 2 || d == 3) {
            return Err(Error::Format(format!("dimension {d} is not 2 or 3")));
        }
        let mut shape = Vec::with_capacity(d);
        for _ in 0..d {
            shape.push(r.u32()? as usize);
        }
        let ncomp = r.u32()? as usize;
        if ncomp == 0 || ncomp > MAX_COMPONENTS {
            return Err(Error::Format(format!("component count {ncomp} outside 1..={MAX_COMPONENTS}")));
        }
        let time = r.f64()?;
        if !time.is_finite() {
            return Err(Error::Format("non-finite snapshot time".into()));
        }
        let mut lengths = Vec::with_capacity(d);
        for _ in 0..d {
            lengths.push(r.f64()?);
        }
        let points = shape
            .iter()
            .try_fold(1usize, |a, &n| a.checked_mul(n))
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        let payload = points
            .checked_mul(ncomp)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if r.remaining() != payload {
            return Err(Error::Format(format!(
                "payload is {} bytes, header implies {payload}",
                r.remaining()
            )));
        }
        let grid = Grid::new(&shape, &lengths).map_err(|e| Error::Format(e.to_string()))?;
        let mut components = Vec::with_capacity(ncomp);
        for _ in 0..ncomp {
            let raw = r.take(8 * points)?;
            components.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            );
        }
        Ok(Self {
            time,
            grid,
            components,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Snapshot file name for a step index.
pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:06}.vln")
}

/// Snapshot files in `dir`, sorted by name.
pub fn list_snapshots(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vln"))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(&[8, 16], &[1.0, 2.0]).unwrap();
        let s = Snapshot {
            time: 0.25,
            grid: g,
            components: vec![(0..128).map(|i| i as f64).collect()],
        };
        let b = s.encode();
        assert_eq!(&b[..4], b"VLN1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 16);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), 0.25);
        assert_eq!(f64::from_le_bytes(b[36..44].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(b[52..60].try_into().unwrap()), 1.0);
        assert_eq!(b.len(), 44 + 8 * 128);
        assert_eq!(Snapshot::decode(&b).unwrap(), s);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = Grid::square(8).unwrap();
        let b = Snapshot {
            time: 0.0,
            grid: g,
            components: vec![vec![1.0; 64]],
        }
        .encode();
        assert!(Snapshot::decode(&b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(Snapshot::decode(&extra).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Snapshot::decode(&bad).is_err());
        let mut huge = b.clone();
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(Snapshot::decode(&huge).is_err());
        assert!(Snapshot::decode(&[]).is_err());
    }
}
