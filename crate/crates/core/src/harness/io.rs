//! CSV/JSON writers and the on-disk operator format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::collision::{
    assemble_linearized, linearized::AssemblyDiagnostics, CollisionKernel, KernelKind, LinearizedOperator,
};
use crate::error::{Error, Result};
use crate::velocity::build_velocity_grid;

/// A float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Header stored next to the flat binary of an operator.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OperatorHeader {
    /// Shape of each square block.
    pub shape: [usize; 2],
    pub grid_hash: String,
    pub kernel: KernelKind,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_per_axis: usize,
    pub extent: f64,
    /// Blocks in file order: `nu` (length M), then `K` and `L`, column-major.
    pub layout: Vec<String>,
    pub diagnostics: AssemblyDiagnostics,
}

pub const OPERATOR_BIN: &str = "operator.bin";
pub const OPERATOR_JSON: &str = "operator.json";

/// Writes `operator.bin` (little-endian f64) and `operator.json` into `dir`.
pub fn export_operator(op: &LinearizedOperator, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let m = op.len();
    let (nt, np) = op.angular_resolution();
    let header = OperatorHeader {
        shape: [m, m],
        grid_hash: op.grid_hash(),
        kernel: op.kernel_kind(),
        n_theta: nt,
        n_phi: np,
        n_per_axis: op.grid().n_per_axis(),
        extent: op.grid().extent(),
        layout: vec!["nu".into(), "K".into(), "L".into()],
        diagnostics: op.diagnostics.clone(),
    };
    let mut bytes = Vec::with_capacity(8 * (m + 2 * m * m));
    for x in op.nu() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    for mat in [op.kmat(), op.matrix()] {
        for j in 0..m {
            for x in mat.col(j).iter() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    fs::write(dir.join(OPERATOR_BIN), bytes)?;
    write_json(&dir.join(OPERATOR_JSON), &header)
}

/// Reads an operator written by [`export_operator`], checking its size and hash.
pub fn import_operator(dir: &Path) -> Result<LinearizedOperator> {
    let header: OperatorHeader = serde_json::from_str(&fs::read_to_string(dir.join(OPERATOR_JSON))?)?;
    let grid = build_velocity_grid(header.n_per_axis, header.extent, header.kernel.gamma())?;
    let m = grid.len();
    if header.shape != [m, m] {
        return Err(Error::invalid(format!("operator shape {:?} does not match {m} nodes", header.shape)));
    }
    let bytes = fs::read(dir.join(OPERATOR_BIN))?;
    if bytes.len() != 8 * (m + 2 * m * m) {
        return Err(Error::invalid(format!("operator file has {} bytes, expected {}", bytes.len(), 8 * (m + 2 * m * m))));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    let nu = vals[..m].to_vec();
    let block = |k: usize| Mat::from_fn(m, m, |i, j| vals[m + k * m * m + j * m + i]);
    let op = LinearizedOperator::from_parts(
        grid,
        header.kernel,
        header.n_theta,
        header.n_phi,
        nu,
        block(0),
        block(1),
        header.diagnostics.clone(),
    )?;
    if op.grid_hash() != header.grid_hash {
        return Err(Error::invalid(format!(
            "operator hash {} does not match its parameters ({})",
            header.grid_hash,
            op.grid_hash()
        )));
    }
    Ok(op)
}

fn cache_dir(root: &Path, kind: KernelKind, n_theta: usize, n_phi: usize, n: usize, extent: f64) -> Result<PathBuf> {
    let grid = build_velocity_grid(n, extent, kind.gamma())?;
    Ok(root.join(crate::collision::linearized::discretization_hash(&grid, kind, n_theta, n_phi)))
}

/// Loads the operator from `cache` when present, otherwise assembles and stores it.
pub fn load_or_assemble(
    cache: Option<&Path>,
    kind: KernelKind,
    n_theta: usize,
    n_phi: usize,
    n: usize,
    extent: f64,
) -> Result<LinearizedOperator> {
    if let Some(root) = cache {
        let dir = cache_dir(root, kind, n_theta, n_phi, n, extent)?;
        if dir.join(OPERATOR_BIN).exists() {
            return import_operator(&dir);
        }
        let op = assemble(kind, n_theta, n_phi, n, extent)?;
        export_operator(&op, &dir)?;
        return Ok(op);
    }
    assemble(kind, n_theta, n_phi, n, extent)
}

fn assemble(kind: KernelKind, n_theta: usize, n_phi: usize, n: usize, extent: f64) -> Result<LinearizedOperator> {
    let grid = build_velocity_grid(n, extent, kind.gamma())?;
    let kernel = CollisionKernel::new(kind, n_theta, n_phi)?;
    assemble_linearized(&grid, &kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn operator_file_round_trip_and_cache() {
        let tmp = std::env::temp_dir().join(format!("bfd-op-{}", std::process::id()));
        let _ = fs::remove_dir_all(&tmp);
        let op = load_or_assemble(Some(&tmp), KernelKind::HardSphere, 4, 4, 4, 6.0).unwrap();
        let again = load_or_assemble(Some(&tmp), KernelKind::HardSphere, 4, 4, 4, 6.0).unwrap();
        assert_eq!(op.grid_hash(), again.grid_hash());
        for j in 0..op.len() {
            for i in 0..op.len() {
                assert_eq!(op.matrix()[(i, j)].to_bits(), again.matrix()[(i, j)].to_bits());
                assert_eq!(op.kmat()[(i, j)].to_bits(), again.kmat()[(i, j)].to_bits());
            }
        }
        assert_eq!(op.nu(), again.nu());
        let header: OperatorHeader =
            serde_json::from_str(&fs::read_to_string(tmp.join(op.grid_hash()).join(OPERATOR_JSON)).unwrap()).unwrap();
        assert_eq!(header.shape, [64, 64]);
        fs::remove_dir_all(&tmp).unwrap();
    }
}
