//! CSV and JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::LabError;

/// 17 significant digits in scientific notation, enough to round-trip any
/// f64. Formatting does not depend on the locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV cell.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(usize),
    Real(f64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) => fmt_f64(v),
        }
    }
}

pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    width: usize,
}

impl CsvSink {
    /// Creates the file and writes the header row.
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Self, LabError> {
        let file = File::create(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        writer
            .write_record(header.iter().map(|h| h.as_ref()))
            .map_err(|e| csv_error(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
            width: header.len(),
        })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<(), LabError> {
        debug_assert_eq!(cells.len(), self.width);
        self.writer
            .write_record(cells.iter().map(|c| c.render()))
            .map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), LabError> {
        self.writer.flush().map_err(|source| LabError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> LabError {
    LabError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| LabError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    text.push('\n');
    let mut file = File::create(path).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes())
        .map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn ensure_dir(dir: &Path) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
