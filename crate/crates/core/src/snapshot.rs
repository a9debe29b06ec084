//! Binary field snapshots.
//!
//! Layout (little-endian): magic `KSFD`, `u32` version (1), `u8` domain tag
//! (0 torus, 1 hyperbolic-radial), `u8` dimension, one `u32` sample count per
//! axis (the torus stores `n` counts, the radial grid one), `f64` geometry
//! (`L` or `τ_max`), then the `f64` samples in row-major order.

use std::path::Path;

use thiserror::Error;

use crate::domain::{DomainKind, Field};
use crate::hyperbolic::{RadialField, RadialGrid};
use crate::spectral::{TorusField, TorusGrid};

pub const MAGIC: &[u8; 4] = b"KSFD";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SnapshotError {
    #[error("bad magic bytes {found:?}, expected \"KSFD\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported snapshot version {0}, expected {VERSION}")]
    UnsupportedVersion(u32),
    #[error("truncated snapshot: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("snapshot has {actual} bytes but its header describes {expected}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("unknown domain tag {0}")]
    UnknownDomainTag(u8),
    #[error("domain-tag mismatch: snapshot holds a {found} field, expected {expected}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid snapshot geometry: {0}")]
    InvalidGeometry(String),
}

/// A decoded snapshot of either geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Torus(TorusField),
    Radial(RadialField),
}

impl Snapshot {
    pub fn kind(&self) -> DomainKind {
        match self {
            Snapshot::Torus(_) => DomainKind::Torus,
            Snapshot::Radial(_) => DomainKind::HyperbolicRadial,
        }
    }
}

/// Fields that can be written to and read from a snapshot.
pub trait SnapshotField: Field + Sized {
    fn encode(&self) -> Vec<u8>;
    fn decode(bytes: &[u8]) -> Result<Self, SnapshotError>;
}

fn header(kind: DomainKind, dim: usize, counts: &[usize], geometry: f64, payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 4 * counts.len() + 8 + 8 * payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match kind {
        DomainKind::Torus => 0,
        DomainKind::HyperbolicRadial => 1,
    });
    out.push(dim as u8);
    for &c in counts {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    out.extend_from_slice(&geometry.to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take(bytes: &[u8], at: usize, len: usize) -> Result<&[u8], SnapshotError> {
    bytes.get(at..at + len).ok_or(SnapshotError::Truncated {
        expected: at + len,
        actual: bytes.len(),
    })
}

struct Parsed {
    kind: DomainKind,
    dim: usize,
    counts: Vec<usize>,
    geometry: f64,
    payload: Vec<f64>,
}

fn parse(bytes: &[u8]) -> Result<Parsed, SnapshotError> {
    let magic = take(bytes, 0, 4)?;
    if magic != MAGIC {
        return Err(SnapshotError::BadMagic { found: magic.to_vec() });
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let tag = take(bytes, 8, 1)?[0];
    let kind = match tag {
        0 => DomainKind::Torus,
        1 => DomainKind::HyperbolicRadial,
        t => return Err(SnapshotError::UnknownDomainTag(t)),
    };
    let dim = take(bytes, 9, 1)?[0] as usize;
    let axes = match kind {
        DomainKind::Torus => dim,
        DomainKind::HyperbolicRadial => 1,
    };
    let mut at = 10;
    let mut counts = Vec::with_capacity(axes);
    for _ in 0..axes {
        counts.push(u32::from_le_bytes(take(bytes, at, 4)?.try_into().unwrap()) as usize);
        at += 4;
    }
    let geometry = f64::from_le_bytes(take(bytes, at, 8)?.try_into().unwrap());
    at += 8;
    let samples = counts
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .ok_or_else(|| SnapshotError::InvalidGeometry("sample count overflows".into()))?;
    let expected = samples
        .checked_mul(8)
        .and_then(|b| b.checked_add(at))
        .ok_or_else(|| SnapshotError::InvalidGeometry("sample count overflows".into()))?;
    if bytes.len() < expected {
        return Err(SnapshotError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(SnapshotError::TrailingBytes {
            expected,
            actual: bytes.len(),
        });
    }
    let payload = bytes[at..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Parsed {
        kind,
        dim,
        counts,
        geometry,
        payload,
    })
}

fn mismatch(expected: DomainKind, found: DomainKind) -> SnapshotError {
    SnapshotError::DomainMismatch {
        expected: expected.name(),
        found: found.name(),
    }
}

fn into_torus(p: Parsed) -> Result<TorusField, SnapshotError> {
    if p.kind != DomainKind::Torus {
        return Err(mismatch(DomainKind::Torus, p.kind));
    }
    if p.counts.windows(2).any(|w| w[0] != w[1]) {
        return Err(SnapshotError::InvalidGeometry(format!(
            "torus axes must share one count, got {:?}",
            p.counts
        )));
    }
    let grid = TorusGrid::new(p.dim, p.counts.first().copied().unwrap_or(0), p.geometry)
        .map_err(|e| SnapshotError::InvalidGeometry(e.to_string()))?;
    TorusField::new(grid, p.payload).map_err(|e| SnapshotError::InvalidGeometry(e.to_string()))
}

fn into_radial(p: Parsed) -> Result<RadialField, SnapshotError> {
    if p.kind != DomainKind::HyperbolicRadial {
        return Err(mismatch(DomainKind::HyperbolicRadial, p.kind));
    }
    let grid =
        RadialGrid::new(p.dim, p.counts[0], p.geometry).map_err(|e| SnapshotError::InvalidGeometry(e.to_string()))?;
    RadialField::new(grid, p.payload).map_err(|e| SnapshotError::InvalidGeometry(e.to_string()))
}

impl SnapshotField for TorusField {
    fn encode(&self) -> Vec<u8> {
        let g = self.grid();
        header(
            DomainKind::Torus,
            g.dim(),
            &vec![g.points(); g.dim()],
            g.length(),
            self.values(),
        )
    }

    fn decode(bytes: &[u8]) -> Result<Self, SnapshotError> {
        into_torus(parse(bytes)?)
    }
}

impl SnapshotField for RadialField {
    fn encode(&self) -> Vec<u8> {
        let g = self.grid();
        header(
            DomainKind::HyperbolicRadial,
            g.dim(),
            &[g.nodes()],
            g.tau_max(),
            self.values(),
        )
    }

    fn decode(bytes: &[u8]) -> Result<Self, SnapshotError> {
        into_radial(parse(bytes)?)
    }
}

pub fn decode_any(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    let p = parse(bytes)?;
    Ok(match p.kind {
        DomainKind::Torus => Snapshot::Torus(into_torus(p)?),
        DomainKind::HyperbolicRadial => Snapshot::Radial(into_radial(p)?),
    })
}

pub fn save<F: SnapshotField>(field: &F, path: &Path) -> crate::Result<()> {
    std::fs::write(path, field.encode())?;
    Ok(())
}

pub fn load<F: SnapshotField>(path: &Path) -> crate::Result<F> {
    Ok(F::decode(&std::fs::read(path)?)?)
}
