//! Output plumbing: the reproducibility header, CSV and table emission, and
//! full-precision float formatting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// Formats a float with 17 significant digits, enough to round-trip any
/// f64 and keep golden files byte-stable.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float17(x: Option<f64>) -> String {
    x.map(float17).unwrap_or_default()
}

/// Opens the output sink: a file when a path is given, stdout otherwise.
pub fn open_sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes the leading header comment: artifact version, subcommand, and the
/// canonical flag set (including the resolved seed). The thread cap and the
/// output path are deliberately absent — they never change results.
pub fn write_header(
    w: &mut dyn Write,
    subcommand: &str,
    fields: &[(&str, String)],
) -> io::Result<()> {
    write!(w, "# quadlab {} {subcommand}", env!("CARGO_PKG_VERSION"))?;
    for (key, value) in fields {
        write!(w, " {key}={value}")?;
    }
    writeln!(w)
}

pub fn write_csv_row(w: &mut dyn Write, cells: &[String]) -> io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}

/// Emits rows as aligned left-justified columns.
pub fn write_table(w: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (width, cell) in widths.iter_mut().zip(row) {
            *width = (*width).max(cell.len());
        }
    }
    let render = |w: &mut dyn Write, cells: &[String]| -> io::Result<()> {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            let pad = widths[i].saturating_sub(cell.len());
            if i + 1 < cells.len() {
                line.extend(std::iter::repeat_n(' ', pad));
            }
        }
        writeln!(w, "{}", line.trim_end())
    };
    let header_cells: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    render(w, &header_cells)?;
    for row in rows {
        render(w, row)?;
    }
    Ok(())
}
