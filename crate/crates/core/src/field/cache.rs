//! On-disk cache for solved voltage bases.
//!
//! One file per basis, little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SFG1"
//! 4       12    dims, 3 x u32
//! 16      24    origin, 3 x f64 (m)
//! 40      8     spacing, f64 (m)
//! 48      32    geometry hash (SHA-256)
//! 80      8     achieved residual, f64 (V)
//! 88      ...   payload: dims[0]*dims[1]*dims[2] f64 values, x-fastest
//! ```
//!
//! A file is a hit only when geometry hash, spacing, and dims all match and
//! the stored residual meets the requested tolerance; otherwise the basis is
//! re-solved and rewritten.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::geometry::{BasisId, Electrode, ElectrodeGeometry};
use crate::field::grid::{rasterize, MaskGrid, ScalarFieldGrid};
use crate::field::laplace::{solve_basis, RelaxationOptions};
use crate::scalar::{lit, Real};

const MAGIC: [u8; 4] = *b"SFG1";
const HEADER_LEN: usize = 88;

fn cache_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Cache {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Writes a solved basis grid. The payload is always f64 regardless of the
/// working scalar.
pub fn write_grid<T: Real>(path: &Path, grid: &ScalarFieldGrid<T>) -> Result<()> {
    let layout = grid.layout;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * grid.values.len());
    buf.extend_from_slice(&MAGIC);
    for d in layout.dims {
        buf.extend_from_slice(&u32::try_from(d).expect("grid dimension fits u32").to_le_bytes());
    }
    for o in layout.origin {
        buf.extend_from_slice(&o.to_le_bytes());
    }
    buf.extend_from_slice(&layout.spacing.to_le_bytes());
    buf.extend_from_slice(&grid.mask.geometry_hash);
    buf.extend_from_slice(
        &grid
            .achieved_residual
            .ok_or_else(|| cache_error(path, "refusing to cache a derived grid"))?
            .to_le_bytes(),
    );
    for v in &grid.values {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a basis grid and validates it against the mask it must pair with.
/// Returns `Ok(None)` when the file is absent or stale, an error only for
/// unreadable or corrupt data.
pub fn read_grid<T: Real>(
    path: &Path,
    mask: &Arc<MaskGrid>,
    tolerance: f64,
) -> Result<Option<ScalarFieldGrid<T>>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(cache_error(path, "bad magic or truncated header"));
    }
    let mut at = 4usize;
    let mut take = |n: usize| -> &[u8] {
        let s = &bytes[at..at + n];
        at += n;
        s
    };
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(4).try_into().unwrap()) as usize;
    }
    let mut origin = [0f64; 3];
    for o in &mut origin {
        *o = f64::from_le_bytes(take(8).try_into().unwrap());
    }
    let spacing = f64::from_le_bytes(take(8).try_into().unwrap());
    let hash: [u8; 32] = take(32).try_into().unwrap();
    let residual = f64::from_le_bytes(take(8).try_into().unwrap());

    let layout = mask.layout;
    if dims != layout.dims
        || origin != layout.origin
        || spacing != layout.spacing
        || hash != mask.geometry_hash
        || !(residual <= tolerance)
    {
        return Ok(None);
    }
    let n = dims[0] * dims[1] * dims[2];
    if bytes.len() != HEADER_LEN + 8 * n {
        return Err(cache_error(path, "payload length mismatch"));
    }
    let mut values = Vec::with_capacity(n);
    let mut payload = &bytes[HEADER_LEN..];
    let mut chunk = [0u8; 8];
    for _ in 0..n {
        payload.read_exact(&mut chunk).map_err(|_| {
            cache_error(path, "short payload")
        })?;
        values.push(lit::<T>(f64::from_le_bytes(chunk)));
    }
    Ok(Some(ScalarFieldGrid {
        layout,
        values,
        mask: Arc::clone(mask),
        achieved_residual: Some(residual),
    }))
}

/// File name for a basis at a given geometry and spacing:
/// `<hash16>_<spacing-nm>_<basis>.sfg`.
pub fn cache_file_name(hash: &[u8; 32], spacing: f64, basis: BasisId) -> String {
    let mut hex = String::with_capacity(16);
    for b in &hash[..8] {
        hex.push_str(&format!("{b:02x}"));
    }
    let nm = (spacing * 1e9).round() as u64;
    format!("{hex}_{nm}_{}.sfg", basis.name())
}

/// The solved unit-voltage bases for one trap geometry at one grid spacing.
#[derive(Debug, Clone)]
pub struct BasisSet<T> {
    pub geometry: ElectrodeGeometry,
    pub mask: Arc<MaskGrid>,
    /// RF drive basis: endcaps at 1 V, sectors RF-grounded.
    pub rf: ScalarFieldGrid<T>,
    /// Per-electrode DC bases; only the requested electrodes are present.
    pub dc: BTreeMap<Electrode, ScalarFieldGrid<T>>,
    /// Tolerance the bases were solved (or accepted from cache) at, V.
    pub tolerance: f64,
    /// Which bases came from the cache rather than a fresh solve.
    pub cache_hits: BTreeMap<String, bool>,
}

impl<T: Real> BasisSet<T> {
    /// Solves (or loads) the RF basis plus the named DC electrode bases.
    ///
    /// `cache_dir = None` always re-solves. Freshly solved bases are written
    /// back to the cache.
    pub fn acquire(
        geometry: &ElectrodeGeometry,
        spacing: f64,
        electrodes: &[Electrode],
        options: &RelaxationOptions,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        let mask = rasterize(geometry, spacing)?;
        let mut cache_hits = BTreeMap::new();
        let mut fetch = |basis: BasisId| -> Result<ScalarFieldGrid<T>> {
            let path: Option<PathBuf> = cache_dir
                .map(|d| d.join(cache_file_name(&mask.geometry_hash, spacing, basis)));
            if let Some(p) = &path {
                if let Some(grid) = read_grid(p, &mask, options.tolerance)? {
                    cache_hits.insert(basis.name(), true);
                    return Ok(grid);
                }
            }
            let grid = solve_basis(&mask, basis, options)?;
            if let Some(p) = &path {
                write_grid(p, &grid)?;
            }
            cache_hits.insert(basis.name(), false);
            Ok(grid)
        };

        let rf = fetch(BasisId::Rf)?;
        let mut dc = BTreeMap::new();
        for &e in electrodes {
            dc.insert(e, fetch(BasisId::Dc(e))?);
        }
        Ok(Self {
            geometry: *geometry,
            mask,
            rf,
            dc,
            tolerance: options.tolerance,
            cache_hits,
        })
    }

    pub fn dc_basis(&self, e: Electrode) -> Result<&ScalarFieldGrid<T>> {
        self.dc.get(&e).ok_or_else(|| Error::MissingBasis(e.name()))
    }
}
