//! CSV emission with provenance headers.
//!
//! Every file begins with `#`-prefixed comment lines carrying the resolved
//! configuration and the library version, so a result file is traceable to
//! the exact run that produced it. Output bytes are a pure function of the
//! configuration: worker count, output location, and wall-clock never appear.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use super::{fmt_f64, CriterionRow, ExperimentConfig, ExperimentOutput, Table};
use crate::{Error, Result};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_header<W: Write>(mut out: W, header: &[(String, String)]) -> io::Result<()> {
    writeln!(out, "# version={VERSION}")?;
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// Writes one result table as CSV with the provenance header.
pub fn write_table_csv<W: Write>(
    mut out: W,
    table: &Table,
    header: &[(String, String)],
) -> io::Result<()> {
    write_header(&mut out, header)?;
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes the summary rows (one per named check) as CSV.
pub fn write_summary_csv<W: Write>(
    mut out: W,
    criteria: &[CriterionRow],
    header: &[(String, String)],
) -> io::Result<()> {
    write_header(&mut out, header)?;
    writeln!(out, "name,observed,expected,tolerance,pass")?;
    for c in criteria {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.name,
            fmt_f64(c.observed),
            fmt_f64(c.expected),
            fmt_f64(c.tolerance),
            c.pass
        )?;
    }
    Ok(())
}

/// Writes every table plus `summary.csv` into the configured output
/// directory (created if absent) and returns the written paths.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    let dir = cfg.output_dir.as_ref().ok_or_else(|| Error::InvalidParameter {
        name: "output_dir",
        rule: "no output directory configured".into(),
    })?;
    let io_err = |e: io::Error| Error::DegenerateSample(format!("output write failed: {e}"));
    fs::create_dir_all(dir).map_err(io_err)?;
    let header = cfg.resolved_pairs();
    let mut written = Vec::new();
    for table in &output.tables {
        let path = dir.join(format!("{}.csv", table.name));
        let mut buf = Vec::new();
        write_table_csv(&mut buf, table, &header).map_err(io_err)?;
        fs::write(&path, buf).map_err(io_err)?;
        written.push(path);
    }
    let path = dir.join("summary.csv");
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &output.criteria, &header).map_err(io_err)?;
    fs::write(&path, buf).map_err(io_err)?;
    written.push(path);
    Ok(written)
}
