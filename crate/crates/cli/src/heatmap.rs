//! Topology traces rendered as 8-bit grayscale PGM images.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Edge counts per neuron for every recorded step, in step order.
pub fn read_trace(path: &Path) -> Result<BTreeMap<usize, Vec<(usize, usize)>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut steps: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Usage(format!("{}:{line}: {e}", path.display())))?;
        let field = |j: usize| -> Result<usize> {
            record
                .get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Usage(format!("{}:{line}: expected step,neuron,edge_count", path.display())))
        };
        steps.entry(field(0)?).or_default().push((field(1)?, field(2)?));
    }
    if steps.is_empty() {
        return Err(CliError::Usage(format!("{}: empty trace", path.display())));
    }
    Ok(steps)
}

/// Lays one step's counts out row-major; every neuron must appear exactly once.
pub fn to_grid(step: usize, entries: &[(usize, usize)], rows: usize, cols: usize) -> Result<Vec<usize>> {
    let cells = rows * cols;
    let non_rect = || {
        CliError::Usage(format!(
            "step {step}: {} entries do not form a {rows}x{cols} grid",
            entries.len()
        ))
    };
    if entries.len() != cells {
        return Err(non_rect());
    }
    let mut grid = vec![None; cells];
    for &(neuron, count) in entries {
        match grid.get_mut(neuron) {
            Some(slot @ None) => *slot = Some(count),
            _ => return Err(non_rect()),
        }
    }
    Ok(grid.into_iter().map(|c| c.expect("all cells filled")).collect())
}

/// Linear min-max scaling to 0..=255; a constant grid maps to mid-gray.
pub fn scale_to_gray(counts: &[usize]) -> Vec<u8> {
    let (Some(&lo), Some(&hi)) = (counts.iter().min(), counts.iter().max()) else {
        return Vec::new();
    };
    if lo == hi {
        return vec![128; counts.len()];
    }
    let span = (hi - lo) as f64;
    counts
        .iter()
        .map(|&c| ((c - lo) as f64 / span * 255.0).round() as u8)
        .collect()
}

pub fn write_pgm(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `step_NNNN.pgm` for every step in the trace; returns the paths.
pub fn render(trace: &Path, rows: usize, cols: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if rows == 0 || cols == 0 {
        return Err(CliError::Usage("heatmap grid needs positive rows and cols".into()));
    }
    let steps = read_trace(trace)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::with_capacity(steps.len());
    for (step, entries) in &steps {
        let grid = to_grid(*step, entries, rows, cols)?;
        let path = out_dir.join(format!("step_{step:04}.pgm"));
        write_pgm(&path, rows, cols, &scale_to_gray(&grid))?;
        written.push(path);
    }
    Ok(written)
}
