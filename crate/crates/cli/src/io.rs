//! CSV and sidecar writers plus the trajectory reader.
//!
//! Numbers are written in scientific notation with a configurable number of
//! significant digits (17 by default, enough for a lossless f64 round trip).
//! Readers report the 1-based line number of the first malformed row.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use banach_ar::linalg::Mat;
use banach_ar::process::Trajectory;

pub fn fmt_float(v: f64, precision: usize) -> String {
    format!("{:.*e}", precision.saturating_sub(1), v)
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

/// Trajectory CSV: header `i,f1,...,fM`, one row per time index.
pub fn write_trajectory(path: &Path, traj: &Trajectory, precision: usize) -> Result<()> {
    let m = traj.dim();
    let mut out = String::from("i");
    for j in 1..=m {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for i in 0..traj.len() {
        out.push_str(&i.to_string());
        for v in traj.row(i) {
            out.push(',');
            out.push_str(&fmt_float(*v, precision));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_trajectory(path: &Path, expected_dim: usize) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read trajectory {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| anyhow!("trajectory {} is empty", path.display()))?;
    let expected_header: Vec<String> = std::iter::once("i".to_string())
        .chain((1..=expected_dim).map(|j| format!("f{j}")))
        .collect();
    let header_fields: Vec<&str> = header.split(',').collect();
    if header_fields.len() != expected_dim + 1
        || header_fields
            .iter()
            .zip(&expected_header)
            .any(|(a, b)| a != b)
    {
        bail!(
            "trajectory {}: header `{header}` does not match {} coordinates",
            path.display(),
            expected_dim
        );
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_dim + 1 {
            bail!(
                "trajectory {}: line {} has {} fields, expected {}",
                path.display(),
                idx + 1,
                fields.len(),
                expected_dim + 1
            );
        }
        let mut row = Vec::with_capacity(expected_dim);
        for field in &fields[1..] {
            let v: f64 = field.trim().parse().map_err(|e| {
                anyhow!(
                    "trajectory {}: line {}: cannot parse `{field}` ({e})",
                    path.display(),
                    idx + 1
                )
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Trajectory::from_rows(&rows, 0, 0)?)
}

/// Eigenvalue CSV: header `j,value`.
pub fn write_eigenvalues(path: &Path, values: &[f64], precision: usize) -> Result<()> {
    let mut out = String::from("j,value\n");
    for (j, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", j + 1, fmt_float(*v, precision)));
    }
    write_text(path, &out)
}

/// Matrix CSV, row-major: header `i,c1,...,cM`, one row per matrix row.
pub fn write_matrix(path: &Path, matrix: &Mat, precision: usize) -> Result<()> {
    let mut out = String::from("i");
    for j in 1..=matrix.cols() {
        out.push_str(&format!(",c{j}"));
    }
    out.push('\n');
    for i in 0..matrix.rows() {
        out.push_str(&i.to_string());
        for v in matrix.row(i) {
            out.push(',');
            out.push_str(&fmt_float(*v, precision));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Single-element CSV in the trajectory schema.
pub fn write_element(path: &Path, index: usize, coeffs: &[f64], precision: usize) -> Result<()> {
    let mut out = String::from("i");
    for j in 1..=coeffs.len() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    out.push_str(&index.to_string());
    for v in coeffs {
        out.push(',');
        out.push_str(&fmt_float(*v, precision));
    }
    out.push('\n');
    write_text(path, &out)
}

/// Long-format record writer: header `n,replicate,metric,value`.
pub struct LongWriter {
    out: String,
    precision: usize,
}

impl LongWriter {
    pub fn new(precision: usize) -> Self {
        LongWriter {
            out: String::from("n,replicate,metric,value\n"),
            precision,
        }
    }

    pub fn push(&mut self, n: usize, replicate: usize, metric: &str, value: f64) {
        self.out.push_str(&format!(
            "{n},{replicate},{metric},{}\n",
            fmt_float(value, self.precision)
        ));
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        write_text(path, &self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        let values = [std::f64::consts::PI, -1.0 / 3.0, 1e-17, 123456.789012345678];
        for v in values {
            let s = fmt_float(v, 17);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v, back, "{s}");
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = Trajectory::from_rows(
            &[vec![1.0, -2.5e-7], vec![0.25, 3.0], vec![0.5, -0.125]],
            7,
            3,
        )
        .unwrap();
        write_trajectory(&path, &traj, 17).unwrap();
        let back = read_trajectory(&path, 2).unwrap();
        assert_eq!(back.len(), 3);
        for i in 0..3 {
            assert_eq!(back.row(i), traj.row(i));
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(&path, "i,f1,f2\n0,1.0,2.0\n1,oops,2.0\n").unwrap();
        let err = read_trajectory(&path, 2).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn wrong_width_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(&path, "i,f1,f2\n0,1.0,2.0\n1,1.0\n").unwrap();
        let err = read_trajectory(&path, 2).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
