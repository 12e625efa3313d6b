//! Small delimited text inputs (control points, field maps, default tables,
//! exception lists).
//!
//! Fields are separated by whitespace, commas, semicolons or tabs. Blank
//! lines and everything after `#` are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Record {
    pub line: usize,
    pub fields: Vec<String>,
}

pub fn parse_records(text: &str) -> Vec<Record> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("");
            let fields: Vec<String> = content
                .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
                .filter(|f| !f.is_empty())
                .map(str::to_string)
                .collect();
            (!fields.is_empty()).then_some(Record { line: i + 1, fields })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(&text))
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        message: message.into(),
    }
}

pub(crate) fn number(path: &Path, rec: &Record, index: usize) -> Result<f64> {
    let raw = &rec.fields[index];
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(path, rec.line, format!("`{raw}` is not a finite number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_separators() {
        let recs = parse_records("# header\n1 2, 3;4\n\n  # only comment\n5\t6 # trailing\n");
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].line, 2);
        assert_eq!(recs[0].fields, ["1", "2", "3", "4"]);
        assert_eq!(recs[1].fields, ["5", "6"]);
    }
}
