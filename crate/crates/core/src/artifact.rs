//! Binary artifact holding a fitted basis set and, optionally, its null
//! calibration, so a calibrated test can be reused without refitting.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SSTBASIS" | version u32
//! dim u64 | m u64 | m·dim training values
//! count u64 | per basis: ε, width u64, eigenvalues, eigenvectors (row per i), degree
//! flag u8 | calibration when flag = 1
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::diffusion_basis::{BasisSet, DiffusionBasis, Eigenpairs};
use crate::error::{Result, SstError};
use crate::kernel_space::KernelConfig;
use crate::smooth_test::{DroppedSetting, LambdaNull, LambdaSetting, NullCalibration};

pub const MAGIC: &[u8; 8] = b"SSTBASIS";
pub const VERSION: u32 = 1;

/// What an artifact contains.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub bases: BasisSet,
    pub calibration: Option<NullCalibration>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn setting(&mut self, s: &LambdaSetting) {
        self.len(s.bandwidth_index);
        self.f64(s.bandwidth);
        self.len(s.cutoff);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(SstError::Parse { offset: self.bytes.len(), message: "artifact is truncated".into() });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize> {
        let at = self.pos;
        let v = self.u64()?;
        // Every counted item takes at least one byte, so larger counts are corrupt.
        if v > (self.bytes.len() - self.pos) as u64 && v > 0 {
            return Err(SstError::Parse { offset: at, message: format!("length {v} exceeds the remaining input") });
        }
        Ok(v as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let at = self.pos;
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| SstError::Parse { offset: at, message: "invalid UTF-8".into() })
    }
    fn setting(&mut self) -> Result<LambdaSetting> {
        Ok(LambdaSetting { bandwidth_index: self.len()?, bandwidth: self.f64()?, cutoff: self.len()? })
    }
}

/// Serializes a basis set and an optional calibration.
pub fn to_bytes(bases: &BasisSet, calibration: Option<&NullCalibration>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let training = bases.training();
    w.len(training.dim());
    w.len(training.len());
    training.as_flat().iter().for_each(|&x| w.f64(x));
    w.len(bases.len());
    for b in bases.bases() {
        w.f64(b.kernel().bandwidth());
        w.len(b.eigenvalues().len());
        b.eigenvalues().iter().for_each(|&x| w.f64(x));
        for i in 0..b.eigenvalues().len() {
            b.eigenvector(i).iter().for_each(|&x| w.f64(x));
        }
        b.degree().iter().for_each(|&x| w.f64(x));
    }
    match calibration {
        None => w.u8(0),
        Some(c) => {
            w.u8(1);
            w.len(c.n);
            w.len(c.b1);
            w.len(c.b2);
            w.u64(c.seed);
            w.len(c.lambdas.len());
            for l in &c.lambdas {
                w.setting(&l.setting);
                w.f64(l.mean);
                w.f64(l.variance);
                w.f64s(&l.sorted);
            }
            w.f64s(&c.t_sst_null);
            w.len(c.dropped.len());
            for d in &c.dropped {
                w.setting(&d.setting);
                w.str(&d.reason);
            }
        }
    }
    w.0
}

/// Parses an artifact written by [`to_bytes`].
pub fn from_bytes(bytes: &[u8]) -> Result<Artifact> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(SstError::Parse { offset: 0, message: "not a basis artifact (bad magic)".into() });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SstError::Parse {
            offset: MAGIC.len(),
            message: format!("unsupported artifact version {version} (expected {VERSION})"),
        });
    }
    let dim = r.len()?;
    let m = r.len()?;
    let count = m
        .checked_mul(dim)
        .filter(|c| c.saturating_mul(8) <= bytes.len())
        .ok_or_else(|| SstError::Parse { offset: r.pos, message: "training size overflows the input".into() })?;
    let values = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let training = Arc::new(Dataset::from_flat(dim, values)?);

    let nbases = r.len()?;
    let mut bases = Vec::with_capacity(nbases);
    for _ in 0..nbases {
        let kernel = KernelConfig::new(r.f64()?)?;
        let width = r.len()?;
        let eigenvalues = (0..width).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let eigenvectors = (0..width)
            .map(|_| (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let degree = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        bases.push(DiffusionBasis::from_parts(
            training.clone(),
            kernel,
            Eigenpairs { eigenvalues, eigenvectors },
            degree,
        )?);
    }
    let bases = BasisSet::from_bases(bases)?;

    let calibration = match r.u8()? {
        0 => None,
        1 => {
            let (n, b1, b2, seed) = (r.len()?, r.len()?, r.len()?, r.u64()?);
            let count = r.len()?;
            let mut lambdas = Vec::with_capacity(count);
            for _ in 0..count {
                let setting = r.setting()?;
                let (mean, variance) = (r.f64()?, r.f64()?);
                lambdas.push(LambdaNull { setting, sorted: r.f64s()?, mean, variance });
            }
            let t_sst_null = r.f64s()?;
            let count = r.len()?;
            let mut dropped = Vec::with_capacity(count);
            for _ in 0..count {
                dropped.push(DroppedSetting { setting: r.setting()?, reason: r.str()? });
            }
            Some(NullCalibration { lambdas, t_sst_null, dropped, n, b1, b2, seed })
        }
        flag => {
            return Err(SstError::Parse { offset: r.pos - 1, message: format!("bad calibration flag {flag}") });
        }
    };
    if r.pos != bytes.len() {
        return Err(SstError::Parse { offset: r.pos, message: "trailing bytes after artifact".into() });
    }
    Ok(Artifact { bases, calibration })
}

pub fn save(path: impl AsRef<Path>, bases: &BasisSet, calibration: Option<&NullCalibration>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(bases, calibration))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Artifact> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
