use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::types::{CurveSet, SampleGrid};

/// Layout of a curve table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadOptions {
    /// First row holds the abscissae; otherwise `t = 1, 2, ..., M`.
    pub header_row: bool,
    /// First column holds curve ids.
    pub id_column: bool,
    /// Curves are stored as columns. Applied before the two flags above,
    /// which then refer to the transposed table.
    pub transpose: bool,
}

struct Cell {
    text: String,
    at: Location,
}

fn parse_error(at: Location, message: impl Into<String>) -> Error {
    Error::Parse {
        location: at,
        message: message.into(),
    }
}

/// Reads curves from a CSV file. Lines starting with `#` are skipped.
pub fn read_curves(path: &Path, options: ReadOptions) -> Result<CurveSet> {
    read_curves_from(File::open(path)?, options)
}

pub fn read_curves_from<R: Read>(reader: R, options: ReadOptions) -> Result<CurveSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table: Vec<Vec<Cell>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(Location { line, column: None }, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        table.push(
            record
                .iter()
                .enumerate()
                .map(|(c, f)| Cell {
                    text: f.to_string(),
                    at: Location {
                        line,
                        column: Some(c),
                    },
                })
                .collect(),
        );
    }
    let Some(first) = table.first() else {
        return Err(parse_error(Location { line: 1, column: None }, "no data rows"));
    };
    let width = first.len();
    if let Some(row) = table.iter().find(|r| r.len() != width) {
        return Err(parse_error(
            Location {
                line: row[0].at.line,
                column: None,
            },
            format!("row has {} fields, the first row has {width}", row.len()),
        ));
    }
    if options.transpose {
        let mut cols: Vec<Vec<Cell>> = (0..width).map(|_| Vec::with_capacity(table.len())).collect();
        for row in table {
            for (c, cell) in row.into_iter().enumerate() {
                cols[c].push(cell);
            }
        }
        table = cols;
    }
    let skip = usize::from(options.id_column);
    let mut rows = table.into_iter();
    let header = if options.header_row { rows.next() } else { None };
    let data: Vec<Vec<Cell>> = rows.collect();
    let ncols = data.first().or(header.as_ref()).map_or(0, Vec::len);
    if ncols < skip + 2 {
        let at = data.first().or(header.as_ref()).map_or(Location { line: 1, column: None }, |r| r[0].at);
        return Err(parse_error(at, format!("need at least two value columns, found {}", ncols.saturating_sub(skip))));
    }
    if data.is_empty() {
        return Err(parse_error(Location { line: 1, column: None }, "no curves in the table"));
    }
    let grid = match header {
        Some(h) => {
            let t = h[skip..].iter().map(number).collect::<Result<Vec<_>>>()?;
            SampleGrid::new(t).map_err(|e| parse_error(h[skip].at, format!("header row: {e}")))?
        }
        None => SampleGrid::uniform(ncols - skip)?,
    };
    let mut ids = Vec::with_capacity(data.len());
    let mut values = Vec::with_capacity(data.len());
    for row in &data {
        if options.id_column {
            ids.push(row[0].text.clone());
        }
        values.push(row[skip..].iter().map(number).collect::<Result<Vec<_>>>()?);
    }
    CurveSet::new(grid, values, options.id_column.then_some(ids))
}

fn number(cell: &Cell) -> Result<f64> {
    let v: f64 = cell
        .text
        .parse()
        .map_err(|_| parse_error(cell.at, format!("`{}` is not a number", cell.text)))?;
    if !v.is_finite() {
        return Err(parse_error(cell.at, format!("`{}` is not finite", cell.text)));
    }
    Ok(v)
}

/// Text form of a real that parses back to the same bits (17 significant
/// digits).
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes curves in the layout [`read_curves`] reads with `header_row` and
/// `id_column` set.
pub fn write_curves<W: Write>(out: W, set: &CurveSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(set.grid().points().iter().map(|&t| format_real(t)));
    w.write_record(&header).map_err(csv_io)?;
    for (id, row) in set.ids().iter().zip(set.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&v| format_real(v)));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `id,cluster` lines.
pub fn write_assignment<W: Write>(out: W, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "cluster"]).map_err(csv_io)?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
