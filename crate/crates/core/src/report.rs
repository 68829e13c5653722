//! CSV emitters for sweep, bound and simulation tables.
//!
//! Every file starts with a `#schema=v1` comment line so downstream readers
//! can detect format drift, followed by a regular header row.

use std::io::Write;
use std::path::Path;

use crate::breakdown::{BoundRow, SweepTable};
use crate::error::{Error, Result};
use crate::simulation::CellSummary;

const SCHEMA_LINE: &str = "#schema=v1";

fn write_with_schema(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut fh = std::fs::File::create(path)?;
    writeln!(fh, "{SCHEMA_LINE}")?;
    fh.write_all(body)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Numerical(format!("csv serialization: {e}"))
}

/// Write functional sweep tables: `alpha,eps,theta_1..theta_d,objective`.
pub fn write_sweep_csv(path: &Path, tables: &[SweepTable]) -> Result<()> {
    let d = tables
        .first()
        .and_then(|t| t.rows.first())
        .map(|r| r.theta.len())
        .ok_or_else(|| Error::Config("nothing to write: empty sweep".into()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["alpha".to_string(), "eps".to_string()];
    header.extend((1..=d).map(|j| format!("theta_{j}")));
    header.push("objective".to_string());
    w.write_record(&header).map_err(csv_error)?;
    for t in tables {
        for r in &t.rows {
            let mut rec = vec![format!("{}", t.alpha), format!("{}", r.eps)];
            rec.extend(r.theta.iter().map(|v| format!("{v}")));
            rec.push(format!("{}", r.objective));
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    let body = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    write_with_schema(path, &body)
}

/// Write a theoretical bound sweep: `alpha,L0,bound`.
pub fn write_bound_csv(path: &Path, rows: &[BoundRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "L0", "bound"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            format!("{}", r.alpha),
            format!("{}", r.l0),
            format!("{}", r.bound),
        ])
        .map_err(csv_error)?;
    }
    let body = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    write_with_schema(path, &body)
}

/// Write simulation summaries in long form:
/// `alpha,eps,coord,median,q25,q75,conv_rate`.
pub fn write_simulation_csv(path: &Path, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "eps", "coord", "median", "q25", "q75", "conv_rate"])
        .map_err(csv_error)?;
    for c in cells {
        for j in 0..c.median.len() {
            w.write_record([
                format!("{}", c.alpha),
                format!("{}", c.eps),
                format!("{}", j + 1),
                format!("{}", c.median[j]),
                format!("{}", c.q25[j]),
                format!("{}", c.q75[j]),
                format!("{}", c.conv_rate),
            ])
            .map_err(csv_error)?;
        }
    }
    let body = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    write_with_schema(path, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breakdown::SweepRow;

    #[test]
    fn sweep_csv_layout() {
        let dir = std::env::temp_dir().join("dpdbp-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sweep.csv");
        let tables = vec![SweepTable {
            alpha: 0.5,
            rows: vec![SweepRow {
                eps: 0.1,
                theta: vec![1.0, 2.0],
                objective: 0.25,
            }],
        }];
        write_sweep_csv(&path, &tables).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("#schema=v1"));
        assert_eq!(lines.next(), Some("alpha,eps,theta_1,theta_2,objective"));
        assert_eq!(lines.next(), Some("0.5,0.1,1,2,0.25"));
    }

    #[test]
    fn bound_csv_layout() {
        let dir = std::env::temp_dir().join("dpdbp-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bound.csv");
        write_bound_csv(
            &path,
            &[BoundRow {
                alpha: 1.0,
                l0: 0.0667,
                bound: 0.2,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("#schema=v1\nalpha,L0,bound\n1,0.0667,0.2"));
    }

    #[test]
    fn simulation_csv_long_form() {
        let dir = std::env::temp_dir().join("dpdbp-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sim.csv");
        let cells = vec![CellSummary {
            alpha: 0.0,
            eps: 0.05,
            median: vec![1.0, 2.0],
            q25: vec![0.9, 1.9],
            q75: vec![1.1, 2.1],
            conv_rate: 1.0,
        }];
        write_simulation_csv(&path, &cells).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "0,0.05,1,1,0.9,1.1,1");
        assert_eq!(lines[3], "0,0.05,2,2,1.9,2.1,1");
    }
}
