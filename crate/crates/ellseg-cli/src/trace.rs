//! CSV emission of the per-sweep solver trace.

use std::io::Write;
use std::path::Path;

use ellseg_core::solver::IterationRecord;

use crate::error::CliError;

pub const HEADER: &str = "iter,energy,u_change,ortho_residual,x0,y0,a,b,theta";

/// Writes one row per sweep. Floats print in Rust's shortest round-trip
/// form, so identical runs produce byte-identical files.
pub fn write_csv(trace: &[IterationRecord], path: &Path) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for rec in trace {
        let e = &rec.ellipse;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            rec.iter, rec.energy, rec.u_change, rec.ortho_residual, e.x0, e.y0, e.a, e.b, e.theta
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|source| CliError::Unwritable {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(out.as_bytes()).map_err(|source| CliError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ellseg_core::EllipseParams;

    #[test]
    fn csv_has_header_and_one_row_per_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let rec = IterationRecord {
            iter: 1,
            energy: -1.5,
            u_change: 0.25,
            ortho_residual: 0.125,
            ellipse: EllipseParams::new(2.0, 3.0, 4.0, 2.5, 0.5).unwrap(),
            refit_failed: false,
        };
        write_csv(&[rec.clone(), IterationRecord { iter: 2, ..rec }], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[1], "1,-1.5,0.25,0.125,2,3,4,2.5,0.5");
        assert!(lines[2].starts_with("2,"));
    }
}
