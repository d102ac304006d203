//! Diagnostics CSV and binary field snapshots.
//!
//! A snapshot file is a text header of `key value` lines closed by
//! `end_header`, followed by `nx * ny` little-endian f64 values in row-major
//! order (index `j * nx + i`).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chd_core::grid::{GridSpec, ScalarField};
use chd_core::{DiagnosticsRecord, Error, Result};

pub const CSV_MAGIC: &str = "# chd-sharp v1";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn invalid(path: &Path, msg: String) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("{}: {msg}", path.display()),
    ))
}

pub fn write_csv_to(out: &mut impl Write, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_MAGIC}")?;
    writeln!(out, "{}", DiagnosticsRecord::COLUMNS.join(","))?;
    for r in records {
        let row: Vec<String> = r.values().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_csv_to(&mut w, records)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

/// Rows of a diagnostics CSV in column order.
pub fn read_csv(path: &Path) -> Result<Vec<[f64; 18]>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_MAGIC) {
        return Err(invalid(path, format!("missing '{CSV_MAGIC}' header")));
    }
    let header = lines.next().unwrap_or("");
    if header != DiagnosticsRecord::COLUMNS.join(",") {
        return Err(invalid(path, "unexpected column header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid(path, format!("row {}: {e}", i + 1)))?;
            vals.try_into()
                .map_err(|_| invalid(path, format!("row {} does not have 18 columns", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub field: String,
    pub t: f64,
    pub data: ScalarField,
}

pub fn write_snapshot(path: &Path, field: &str, t: f64, data: &ScalarField) -> Result<()> {
    let g = data.grid();
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "field {field}")?;
        writeln!(w, "dim {}", g.dim())?;
        writeln!(w, "nx {}", g.nx())?;
        writeln!(w, "ny {}", g.ny())?;
        writeln!(w, "lx {:.17e}", g.lx())?;
        writeln!(w, "ly {:.17e}", g.ly())?;
        writeln!(w, "t {t:.17e}")?;
        writeln!(w, "end_header")?;
        for v in data.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_err(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(f);
    let bad = |m: &str| invalid(path, m.to_string());
    let mut field = None;
    let (mut dim, mut nx, mut ny) = (None, None, None);
    let (mut lx, mut ly, mut t) = (None, None, None);
    loop {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(|e| io_err(path, e))? == 0 {
            return Err(bad("header not terminated by end_header"));
        }
        let line = line.trim_end();
        if line == "end_header" {
            break;
        }
        let (k, v) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
        let num = || v.parse::<f64>().map_err(|_| bad(&format!("bad value for {k}")));
        let int = || v.parse::<usize>().map_err(|_| bad(&format!("bad value for {k}")));
        match k {
            "field" => field = Some(v.to_string()),
            "dim" => dim = Some(int()?),
            "nx" => nx = Some(int()?),
            "ny" => ny = Some(int()?),
            "lx" => lx = Some(num()?),
            "ly" => ly = Some(num()?),
            "t" => t = Some(num()?),
            _ => return Err(bad(&format!("unknown header key {k}"))),
        }
    }
    let missing = |k: &str| bad(&format!("header lacks {k}"));
    let grid = GridSpec::new(
        dim.ok_or_else(|| missing("dim"))?,
        nx.ok_or_else(|| missing("nx"))?,
        ny.ok_or_else(|| missing("ny"))?,
        lx.ok_or_else(|| missing("lx"))?,
        ly.ok_or_else(|| missing("ly"))?,
    )?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    if bytes.len() != 8 * grid.num_cells() {
        return Err(bad(&format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            8 * grid.num_cells()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SnapshotFile {
        field: field.ok_or_else(|| missing("field"))?,
        t: t.ok_or_else(|| missing("t"))?,
        data: ScalarField::from_vec(grid, values)?,
    })
}
