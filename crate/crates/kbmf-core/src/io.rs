//! Matrix and manifest file formats.
//!
//! Dense matrices travel either as headerless row-major CSV or as the "KBMF"
//! binary container: 4 magic bytes, u32 rows, u32 cols, then row-major f64
//! values, all little-endian. A kernel-bundle manifest is a TOML file listing
//! member kernel names and paths (relative paths resolve against the manifest
//! location).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{KbmfError, Result};
use crate::kernels::KernelBundle;

const MAGIC: &[u8; 4] = b"KBMF";

/// Writes `bytes` to `path` atomically (temp file in the same directory, then
/// rename), so a failed run leaves no partial artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| KbmfError::Io(e.error))?;
    Ok(())
}

/// Parses a headerless comma-separated matrix (one row per line).
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| KbmfError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_matrix_csv(&text).map_err(|e| KbmfError::Data(format!("{}: {e}", path.display())))
}

fn parse_matrix_csv(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: cannot parse '{}'", lineno + 1, cell.trim()))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "line {}: {} columns, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("empty matrix".into());
    }
    let (nrows, ncols) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serializes a matrix as headerless CSV. Values are printed with Rust's
/// shortest round-trip float formatting, so reading the file back reproduces
/// the exact bits.
pub fn matrix_to_csv(matrix: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", matrix[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    atomic_write(path, matrix_to_csv(matrix).as_bytes())
}

/// Reads a matrix from the "KBMF" binary container.
pub fn read_matrix_binary(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path)
        .map_err(|e| KbmfError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(KbmfError::Data(format!(
            "{}: not a KBMF matrix container",
            path.display()
        )));
    }
    let nrows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let ncols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + nrows * ncols * 8;
    if bytes.len() != expected {
        return Err(KbmfError::Data(format!(
            "{}: {} bytes for {}x{} matrix, expected {}",
            path.display(),
            bytes.len(),
            nrows,
            ncols,
            expected
        )));
    }
    let mut values = Vec::with_capacity(nrows * ncols);
    for chunk in bytes[12..].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    // Row-major on disk.
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| values[i * ncols + j]))
}

pub fn write_matrix_binary(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(12 + matrix.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(matrix.nrows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(matrix.ncols() as u32).to_le_bytes());
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            bytes.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    atomic_write(path, &bytes)
}

/// Reads `.csv` files as CSV and everything else as the binary container.
pub fn read_matrix_auto(path: &Path) -> Result<DMatrix<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_matrix_csv(path),
        _ => read_matrix_binary(path),
    }
}

#[derive(Debug, Deserialize)]
struct ManifestFile {
    #[serde(default)]
    kernel: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    name: Option<String>,
    path: String,
}

/// Loads a kernel bundle from a TOML manifest:
///
/// ```toml
/// [[kernel]]
/// name = "chemical"
/// path = "kx_chemical.csv"
/// ```
pub fn read_bundle_manifest(path: &Path) -> Result<KernelBundle> {
    let text = fs::read_to_string(path)
        .map_err(|e| KbmfError::Config(format!("{}: {e}", path.display())))?;
    let manifest: ManifestFile = toml::from_str(&text)
        .map_err(|e| KbmfError::Config(format!("{}: {e}", path.display())))?;
    if manifest.kernel.is_empty() {
        return Err(KbmfError::Config(format!(
            "{}: manifest lists no kernels",
            path.display()
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut matrices = Vec::new();
    let mut names = Vec::new();
    for (idx, entry) in manifest.kernel.iter().enumerate() {
        let kernel_path = resolve(base, &entry.path);
        if !kernel_path.exists() {
            return Err(KbmfError::Config(format!(
                "kernel file not found: {}",
                kernel_path.display()
            )));
        }
        matrices.push(read_matrix_auto(&kernel_path)?);
        names.push(entry.name.clone().unwrap_or_else(|| format!("k{idx}")));
    }
    KernelBundle::new(matrices, Some(names))
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
