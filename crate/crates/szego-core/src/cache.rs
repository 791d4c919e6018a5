//! Content-addressed store for lattice eigendecompositions.
//!
//! Diagonalizing a Dirichlet box is by far the most expensive step of a
//! sweep, and the result depends only on (dimension, spacing, box
//! half-width, potential) — not on the truncation domain or the test
//! function. Entries are keyed by a SHA-256 digest of those inputs; the
//! file stores the energy cutoff up to which the spectrum is complete, so
//! a lookup hits whenever the cached cutoff covers the requested energy.
//! Payloads are raw little-endian `f64`, making replays bit-identical.

use std::env;
use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::Potential;
use crate::{CoreError, Result};

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "SZEGO_CACHE_DIR";

const MAGIC: &[u8; 8] = b"SZEGEIG1";

/// A directory of cached eigendecompositions.
#[derive(Debug, Clone)]
pub struct CacheStore {
    dir: PathBuf,
}

/// One cached eigendecomposition: all eigenpairs with eigenvalue below
/// `energy_cut`, ascending; `vecs` is sites × modes.
pub struct EigenData {
    pub energy_cut: f64,
    pub vals: Vec<f64>,
    pub vecs: Mat<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    energy_cut: f64,
    sites: usize,
    modes: usize,
}

/// Canonical cache key for a Dirichlet-box eigenproblem. The potential is
/// serialized through its (stable) serde representation; floats are keyed
/// by their exact bit pattern.
pub fn eigen_key(dim: u32, spacing: f64, halfwidth: f64, potential: &Potential) -> String {
    let pot = serde_json::to_string(potential).expect("potential serializes");
    let canon = format!(
        "dim={dim};h={:016x};R={:016x};V={pot}",
        spacing.to_bits(),
        halfwidth.to_bits()
    );
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

impl CacheStore {
    /// Open (creating if needed) a cache at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<CacheStore> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| CoreError::Cache(format!("create {}: {e}", dir.display())))?;
        Ok(CacheStore { dir })
    }

    /// Open the cache named by `SZEGO_CACHE_DIR`, if set and usable.
    pub fn from_env() -> Option<CacheStore> {
        let dir = env::var_os(CACHE_DIR_ENV)?;
        CacheStore::open(PathBuf::from(dir)).ok()
    }

    pub fn dir(&self) -> &std::path::Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.eig"))
    }

    /// Fetch an entry if it exists and its cutoff covers `energy`.
    /// Unreadable or corrupt entries count as misses.
    pub fn lookup(&self, key: &str, energy: f64) -> Option<EigenData> {
        let data = read_entry(&self.path_for(key))?;
        if data.energy_cut >= energy {
            Some(data)
        } else {
            None
        }
    }

    /// Store an entry (atomically via a temp file + rename).
    pub fn store(
        &self,
        key: &str,
        energy_cut: f64,
        vals: &[f64],
        vecs: MatRef<'_, f64>,
    ) -> Result<()> {
        let header = Header {
            energy_cut,
            sites: vecs.nrows(),
            modes: vecs.ncols(),
        };
        if vals.len() != header.modes {
            return Err(CoreError::Cache(format!(
                "{} eigenvalues but {} vector columns",
                vals.len(),
                header.modes
            )));
        }
        let header_json =
            serde_json::to_string(&header).map_err(|e| CoreError::Cache(e.to_string()))?;
        let tmp = self.dir.join(format!("{key}.tmp{}", std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(MAGIC)?;
            let hb = header_json.as_bytes();
            f.write_all(&(hb.len() as u64).to_le_bytes())?;
            f.write_all(hb)?;
            for &v in vals {
                f.write_all(&v.to_le_bytes())?;
            }
            // Column-major to match the natural faer iteration order.
            for j in 0..header.modes {
                for i in 0..header.sites {
                    f.write_all(&vecs[(i, j)].to_le_bytes())?;
                }
            }
            f.flush()
        };
        write().map_err(|e| CoreError::Cache(format!("write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, self.path_for(key))
            .map_err(|e| CoreError::Cache(format!("rename into cache: {e}")))?;
        Ok(())
    }
}

fn read_entry(path: &std::path::Path) -> Option<EigenData> {
    let mut f = fs::File::open(path).ok()?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).ok()?;
    if &magic != MAGIC {
        return None;
    }
    let mut len8 = [0u8; 8];
    f.read_exact(&mut len8).ok()?;
    let hlen = u64::from_le_bytes(len8) as usize;
    if hlen > 1 << 16 {
        return None;
    }
    let mut hbuf = vec![0u8; hlen];
    f.read_exact(&mut hbuf).ok()?;
    let header: Header = serde_json::from_slice(&hbuf).ok()?;
    let mut payload = Vec::new();
    f.read_to_end(&mut payload).ok()?;
    let want = (header.modes + header.sites * header.modes) * 8;
    if payload.len() != want {
        return None;
    }
    let read_f64 = |chunk: &[u8]| f64::from_le_bytes(chunk.try_into().unwrap());
    let vals: Vec<f64> = payload[..header.modes * 8]
        .chunks_exact(8)
        .map(read_f64)
        .collect();
    let rest = &payload[header.modes * 8..];
    let mut vecs = Mat::<f64>::zeros(header.sites, header.modes);
    let mut it = rest.chunks_exact(8).map(read_f64);
    for j in 0..header.modes {
        for i in 0..header.sites {
            vecs[(i, j)] = it.next()?;
        }
    }
    Some(EigenData {
        energy_cut: header.energy_cut,
        vals,
        vecs,
    })
}
