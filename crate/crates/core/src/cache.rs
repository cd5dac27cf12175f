//! On-disk cache for coarse-grained evolution operators.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "RTRGTEO\0"
//! version  u32
//! fp_len   u32, then fp_len bytes of UTF-8 fingerprint
//! count    u32 tensors, each: rank u32, rank × u64 extents, then
//!          (re f64, im f64) pairs in row-major order
//! ```
//!
//! Tensors are stored in this order: operator matrix, prefactor (shape `[1]`),
//! then per level the isometry `(child, child, kept)`, the kept eigenvalues
//! and the discarded weight (shape `[1]`).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hotrg::{build_teo, discard_warnings, CoarseTEO, HotrgLevel, IsometryTree};
use crate::ising::ModelParams;

const MAGIC: &[u8; 8] = b"RTRGTEO\0";
pub const FORMAT_VERSION: u32 = 1;

/// Whether [`load_or_build`] reused a file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    /// No file existed; one was written.
    Miss,
    /// A file existed but was stale or unreadable; it was replaced.
    Rebuilt,
}

pub fn cache_fingerprint(p: &ModelParams) -> String {
    format!("teo-cache;format={};{}", FORMAT_VERSION, p.fingerprint())
}

/// Cache file name for `p`: a 64-bit FNV-1a digest of the fingerprint.
pub fn cache_path(dir: &Path, p: &ModelParams) -> PathBuf {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in cache_fingerprint(p).bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    dir.join(format!("teo-{:016x}.bin", h))
}

struct Raw {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn put_tensor(out: &mut Vec<u8>, shape: &[usize], data: impl Iterator<Item = C64>) {
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &s in shape {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for z in data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn encode(teo: &CoarseTEO) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let fp = cache_fingerprint(&teo.params);
    out.extend_from_slice(&(fp.len() as u32).to_le_bytes());
    out.extend_from_slice(fp.as_bytes());

    let levels = &teo.tree.levels;
    out.extend_from_slice(&((2 + 3 * levels.len()) as u32).to_le_bytes());
    let (r, c) = teo.matrix.dim();
    put_tensor(&mut out, &[r, c], teo.matrix.iter().copied());
    put_tensor(&mut out, &[1], std::iter::once(teo.prefactor));
    for l in levels {
        put_tensor(&mut out, &[l.child_dim, l.child_dim, l.kept_dim()], l.gamma.iter().map(|&x| real(x)));
        put_tensor(&mut out, &[l.kept_eigenvalues.len()], l.kept_eigenvalues.iter().map(|&x| real(x)));
        put_tensor(&mut out, &[1], std::iter::once(real(l.discarded_weight)));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CacheFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn tensor(&mut self) -> Result<Raw> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(Error::CacheFormat(format!("implausible rank {}", rank)));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |a, &s| a.checked_mul(s))
            .filter(|&n| n.saturating_mul(16) <= self.buf.len() - self.pos)
            .ok_or_else(|| Error::CacheFormat(format!("tensor shape {:?} exceeds file", shape)))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let re = self.f64()?;
            let im = self.f64()?;
            data.push(C64::new(re, im));
        }
        Ok(Raw { shape, data })
    }
}

fn expect_shape(raw: &Raw, rank: usize, what: &str) -> Result<()> {
    if raw.shape.len() != rank {
        return Err(Error::CacheFormat(format!("{} has shape {:?}", what, raw.shape)));
    }
    Ok(())
}

/// Read only the fingerprint from a cache header.
pub fn read_fingerprint(bytes: &[u8]) -> Result<String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::CacheFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::CacheFormat(format!("format version {} unsupported", version)));
    }
    let n = r.u32()? as usize;
    String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::CacheFormat("fingerprint is not UTF-8".into()))
}

/// Decode a cache image, requiring its fingerprint to match `p` exactly.
pub fn decode(bytes: &[u8], p: &ModelParams) -> Result<CoarseTEO> {
    let found = read_fingerprint(bytes)?;
    let expected = cache_fingerprint(p);
    if found != expected {
        return Err(Error::Fingerprint { expected, found });
    }
    let mut r = Reader { buf: bytes, pos: 8 + 4 + 4 + found.len() };
    let count = r.u32()? as usize;
    let n_levels = p.levels();
    if count != 2 + 3 * n_levels {
        return Err(Error::CacheFormat(format!("{} tensors for {} levels", count, n_levels)));
    }
    let m = r.tensor()?;
    expect_shape(&m, 2, "operator")?;
    let matrix = Array2::from_shape_vec((m.shape[0], m.shape[1]), m.data)?;
    let pf = r.tensor()?;
    expect_shape(&pf, 1, "prefactor")?;
    let prefactor = *pf.data.first().ok_or_else(|| Error::CacheFormat("empty prefactor".into()))?;

    let mut levels = Vec::with_capacity(n_levels);
    for level in 1..=n_levels {
        let g = r.tensor()?;
        expect_shape(&g, 3, "isometry")?;
        let (c, k) = (g.shape[0], g.shape[2]);
        let gamma = Array2::from_shape_vec((c * g.shape[1], k), g.data.iter().map(|z| z.re).collect())?;
        let ev = r.tensor()?;
        expect_shape(&ev, 1, "eigenvalues")?;
        let dw = r.tensor()?;
        expect_shape(&dw, 1, "discarded weight")?;
        levels.push(HotrgLevel {
            level,
            child_dim: c,
            gamma,
            kept_eigenvalues: ev.data.iter().map(|z| z.re).collect(),
            discarded_weight: dw.data.first().map_or(0.0, |z| z.re),
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::CacheFormat("trailing bytes".into()));
    }
    let tree = IsometryTree { levels, fingerprint: p.fingerprint() };
    let warnings = discard_warnings(&tree);
    Ok(CoarseTEO { matrix, prefactor, tree: Arc::new(tree), params: p.clone(), warnings })
}

/// Write through a temporary file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("cache");
    let tmp = dir.join(format!(".{}.{}.tmp", name, std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save(path: &Path, teo: &CoarseTEO) -> Result<()> {
    write_atomic(path, &encode(teo))
}

pub fn load(path: &Path, p: &ModelParams) -> Result<CoarseTEO> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, p)
}

/// Reuse the cached operator for `p` in `dir` when the fingerprint matches,
/// otherwise build and store it.
pub fn load_or_build(dir: &Path, p: &ModelParams) -> Result<(CoarseTEO, CacheStatus)> {
    p.validate()?;
    let path = cache_path(dir, p);
    let status = if path.exists() {
        match load(&path, p) {
            Ok(teo) => return Ok((teo, CacheStatus::Hit)),
            Err(Error::Io(e)) => return Err(Error::Io(e)),
            Err(_) => CacheStatus::Rebuilt,
        }
    } else {
        CacheStatus::Miss
    };
    let teo = build_teo(p)?;
    save(&path, &teo)?;
    Ok((teo, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(4, 0.3, 0.01, 10)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let teo = build_teo(&params()).unwrap();
        let back = decode(&encode(&teo), &params()).unwrap();
        assert_eq!(back.matrix, teo.matrix);
        assert_eq!(back.prefactor, teo.prefactor);
        assert_eq!(*back.tree, *teo.tree);
        assert_eq!(back.warnings, teo.warnings);
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let bytes = encode(&build_teo(&params()).unwrap());
        let other = params().with_epsilon(0.1);
        assert!(matches!(decode(&bytes, &other), Err(Error::Fingerprint { .. })));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode(&build_teo(&params()).unwrap());
        assert!(matches!(decode(&bytes[..bytes.len() - 3], &params()), Err(Error::CacheFormat(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, &params()), Err(Error::CacheFormat(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode(&long, &params()), Err(Error::CacheFormat(_))));
    }

    #[test]
    fn load_or_build_hits_and_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let p = params();
        let (a, s1) = load_or_build(dir.path(), &p).unwrap();
        assert_eq!(s1, CacheStatus::Miss);
        let (b, s2) = load_or_build(dir.path(), &p).unwrap();
        assert_eq!(s2, CacheStatus::Hit);
        assert_eq!(a.matrix, b.matrix);

        fs::write(cache_path(dir.path(), &p), b"garbage").unwrap();
        let (_, s3) = load_or_build(dir.path(), &p).unwrap();
        assert_eq!(s3, CacheStatus::Rebuilt);

        let q = p.clone().with_dt_override(true);
        assert_ne!(cache_path(dir.path(), &p), cache_path(dir.path(), &q));
    }
}
