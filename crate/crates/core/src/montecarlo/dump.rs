//! Binary dump of terminal samples.
//!
//! Layout (little endian): 8-byte magic `MVMDSMPL`, `u32` version, `u64`
//! path count, `u64` seed, then all `S₁` samples followed by all `S₂`
//! samples as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SimulationResult;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MVMDSMPL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub version: u32,
    pub n_paths: u64,
    pub seed: u64,
}

pub fn write_dump(path: impl AsRef<Path>, res: &SimulationResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(res.len() as u64).to_le_bytes())?;
    w.write_all(&res.config.seed.to_le_bytes())?;
    for v in res.terminal_s1.iter().chain(&res.terminal_s2) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<(DumpHeader, Vec<f64>, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput("not a sample dump (bad magic)".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::InvalidInput(format!("unsupported dump version {version}")));
    }
    r.read_exact(&mut b8)?;
    let n_paths = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let mut read = |n: u64| -> Result<Vec<f64>> {
        (0..n)
            .map(|_| {
                r.read_exact(&mut b8)?;
                Ok(f64::from_le_bytes(b8))
            })
            .collect()
    };
    let s1 = read(n_paths)?;
    let s2 = read(n_paths)?;
    Ok((DumpHeader { version, n_paths, seed }, s1, s2))
}
