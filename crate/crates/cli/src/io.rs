use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use rasch_gauss::model::ScoreMatrix;

use crate::error::{CliError, CliResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn input_err(path: &Path, message: String) -> CliError {
    CliError::Input { path: path.to_path_buf(), message }
}

/// Reads a 0/1 score sheet: rows are subjects, columns items, with an
/// optional single header row (any non-numeric field in the first record).
pub fn read_scores(path: &Path) -> CliResult<ScoreMatrix> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_scores(file, path)
}

pub fn parse_scores<R: std::io::Read>(reader: R, path: &Path) -> CliResult<ScoreMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut entries = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| input_err(path, format!("line {}: {e}", line + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && rec.iter().any(|f| f.parse::<i64>().is_err()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(input_err(path, format!("row {}: {} columns, expected {w}", rows + 1, rec.len())));
            }
            _ => {}
        }
        for (col, field) in rec.iter().enumerate() {
            let v = match field {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(input_err(
                        path,
                        format!("row {}, column {}: expected 0 or 1, got '{other}'", rows + 1, col + 1),
                    ))
                }
            };
            entries.push(v);
        }
        rows += 1;
    }
    let m = width.ok_or_else(|| input_err(path, "no score rows".into()))?;
    ScoreMatrix::new(rows, m, entries).map_err(|e| input_err(path, e.to_string()))
}

pub fn write_scores(path: &Path, x: &ScoreMatrix, header: bool) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) };
    if header {
        w.write_record((1..=x.m()).map(|j| format!("item{j}"))).map_err(csv_err)?;
    }
    for i in 0..x.n() {
        w.write_record(x.row(i).iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Pretty JSON to `path`, or to stdout when `path` is `None`.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    match path {
        Some(p) => {
            let mut f = File::create(p).map_err(io_err(p))?;
            writeln!(f, "{text}").map_err(io_err(p))
        }
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(io_err(Path::new("<stdout>"))),
        },
    }
}
