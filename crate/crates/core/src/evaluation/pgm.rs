use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Linear value-to-gray map with clipping: `lo → 0`, `hi → 255`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrayMapping {
    pub lo: f64,
    pub hi: f64,
}

impl GrayMapping {
    pub fn gray(&self, v: f64) -> u8 {
        let t = ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        (t * 255.0).round() as u8
    }

    fn describe(&self, what: &str) -> String {
        format!(
            "{what}\nmapping: linear\nvalue_at_gray_0: {}\nvalue_at_gray_255: {}\nclipped: true\n",
            self.lo, self.hi
        )
    }
}

/// Writes a binary (P5) 8-bit PGM and a `<name>.txt` sidecar describing the mapping.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    values: &[f64],
    mapping: GrayMapping,
    description: &str,
) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::dim("write_pgm", &[height, width], &[values.len()]));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values.iter().map(|&v| mapping.gray(v)).collect();
    f.write_all(&bytes)?;
    fs::write(path.with_extension("txt"), mapping.describe(description))?;
    Ok(())
}

/// Writes a row-major grid as CSV with full precision.
pub fn write_grid_csv(path: &Path, width: usize, values: &[f64]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in values.chunks(width) {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
