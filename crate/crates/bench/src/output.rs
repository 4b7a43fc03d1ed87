use std::path::{Path, PathBuf};

use compsamp::Vector;
use serde::Serialize;

use crate::error::{BenchError, Result};

/// Float text with 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

/// Write a CSV with the given header. Each row is already rendered.
pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// `x1,...,xd` header followed by one row per point.
pub fn write_points(path: &Path, dim: usize, points: &[Vector]) -> Result<()> {
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    write_csv(path, &header, points.iter().map(|p| p.iter().map(|&v| fmt_float(v)).collect()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Files written by one experiment, in write order.
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

impl Written {
    pub fn push(&mut self, path: PathBuf) -> &Path {
        self.files.push(path);
        self.files.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }
}
