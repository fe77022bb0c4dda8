use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Header row, LF line endings, RFC 4180 quoting.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(ctx(), e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(ctx(), e.into()))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

/// Like [`write_csv`] but with an explicit header, for rows that are plain string vectors.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(ctx(), e.into()))?;
    w.write_record(header).map_err(|e| Error::io(ctx(), e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::io(ctx(), e.into()))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("opening {}", path.display()), io),
        other => Error::Parse { what, path: path.to_path_buf(), detail: format!("{other:?}") },
    })?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Parse { what, path: path.to_path_buf(), detail: e.to_string() })
}

/// Header and rows as strings, for rendering tables that were written with [`write_table`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("opening {}", path.display()), io),
        other => Error::Parse { what: "table", path: path.to_path_buf(), detail: format!("{other:?}") },
    })?;
    let parse = |e: csv::Error| Error::Parse { what: "table", path: path.to_path_buf(), detail: e.to_string() };
    let header = r.headers().map_err(parse)?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(parse)?;
    Ok((header, rows))
}
