//! On-disk Kraus families keyed by a SHA-256 of the exact parameter bits.
//!
//! File layout (little endian): magic "CSKF", version u16, the 32-byte key,
//! `d` and `n` as u32, then the tall `(n d) x d` column-major stack as
//! `(re, im)` f64 pairs.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use collisim_core::channel::{collision_propagator, kraus_from_propagators, Construction, OpStack};
use collisim_core::{KrausFamily, ModelParams};
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::RunError;

const MAGIC: [u8; 4] = *b"CSKF";
const VERSION: u16 = 1;

pub fn params_key(p: &ModelParams) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"collisim-kraus");
    h.update(VERSION.to_le_bytes());
    h.update((p.sites as u64).to_le_bytes());
    for x in [p.omega, p.v, p.gamma, p.dt, p.delta] {
        h.update(x.to_bits().to_le_bytes());
    }
    h.update([p.pbc as u8]);
    h.finalize().into()
}

/// Block-diagonal construction with the `2^L` exponentials spread over the
/// current rayon pool.
pub fn build_family(params: &ModelParams) -> Result<KrausFamily, RunError> {
    params.validate()?;
    let blocks = (0..params.dim())
        .into_par_iter()
        .map(|m| collision_propagator(params, m as u64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(kraus_from_propagators(params, &blocks)?)
}

#[derive(Debug, Clone, Default)]
pub struct KrausCache {
    dir: Option<PathBuf>,
}

impl KrausCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn path_for(&self, params: &ModelParams) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.kraus", hex::encode(params_key(params)))))
    }

    pub fn get_or_build(&self, params: &ModelParams) -> Result<KrausFamily, RunError> {
        let Some(path) = self.path_for(params) else {
            return build_family(params);
        };
        if path.exists() {
            return load(&path, params);
        }
        let kf = build_family(params)?;
        store(&path, &kf)?;
        Ok(kf)
    }
}

pub fn store(path: &Path, kf: &KrausFamily) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        out.write_all(&MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&params_key(&kf.params))?;
        out.write_all(&(kf.dim() as u32).to_le_bytes())?;
        out.write_all(&(kf.len() as u32).to_le_bytes())?;
        for z in kf.stack().tall() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path, params: &ModelParams) -> Result<KrausFamily, RunError> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    let bad = |m: &str| RunError::Format(format!("{}: {m}", path.display()));
    if data.len() < 46 || data[..4] != MAGIC || u16::from_le_bytes([data[4], data[5]]) != VERSION {
        return Err(bad("not a Kraus cache file"));
    }
    if data[6..38] != params_key(params) {
        return Err(bad("parameter key mismatch"));
    }
    let d = u32::from_le_bytes(data[38..42].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(data[42..46].try_into().unwrap()) as usize;
    let body = &data[46..];
    if body.len() != n * d * d * 16 {
        return Err(bad("truncated"));
    }
    let tall = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap()))
        })
        .collect();
    Ok(KrausFamily::from_stack(*params, Construction::BlockWht, OpStack::from_tall(d, n, tall))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use collisim_core::build_kraus_fast;

    #[test]
    fn parallel_build_matches_serial() {
        let p = ModelParams::reference(3);
        assert_eq!(build_family(&p).unwrap().stack(), build_kraus_fast(&p).unwrap().stack());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KrausCache::new(Some(dir.path().to_path_buf()));
        let p = ModelParams::reference(3).with_v(1.0 / 3.0);
        let built = cache.get_or_build(&p).unwrap();
        let path = cache.path_for(&p).unwrap();
        assert!(path.exists());
        let loaded = cache.get_or_build(&p).unwrap();
        let bits = |kf: &KrausFamily| kf.stack().tall().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&built), bits(&loaded));
        assert_eq!(loaded.params, p);
        assert!(load(&path, &p.with_v(0.5)).is_err());
    }

    #[test]
    fn keys_separate_nearby_parameters() {
        let p = ModelParams::reference(4);
        let q = p.with_v(f64::from_bits(p.v.to_bits() + 1));
        assert_ne!(params_key(&p), params_key(&q));
        assert_ne!(params_key(&p), params_key(&p.open_chain()));
        assert_eq!(params_key(&p), params_key(&ModelParams::reference(4)));
    }
}
