//! Per-segment embedding files: `<segment id> <side> <v1> ... <vd>` per line.
//! Blank lines and lines starting with `#` are ignored.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use pedal_core::{EmbeddingTable, Side};

use crate::error::{Error, IoContext, Result};

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).at(path)?;
    parse_embeddings(file, &path.display().to_string())
}

pub fn parse_embeddings<R: Read>(reader: R, name: &str) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let row_err = |message: String| Error::Row {
            path: name.into(),
            line: line_no,
            message,
        };
        let line = line.map_err(|e| row_err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| row_err("expected a segment id".into()))?;
        let side = parts
            .next()
            .and_then(Side::parse)
            .ok_or_else(|| row_err("expected side `source`, `target` or `target.K`".into()))?;
        let values = parts
            .map(|v| v.parse::<f64>().map_err(|_| row_err(format!("bad number {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(row_err("no vector values".into()));
        }
        table.insert(id, side, values).map_err(|e| row_err(e.to_string()))?;
    }
    if table.is_empty() {
        return Err(Error::EmptyInput(name.into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records() {
        let t = parse_embeddings("# d=2\n0 source 0.5 1\n0 target -1 2e-1\n\n1 target.1 3 4\n".as_bytes(), "m").unwrap();
        assert_eq!(t.dim(), Some(2));
        assert_eq!(t.get(0, Side::Target(0)), Some(&[-1.0, 0.2][..]));
        assert_eq!(t.get(1, Side::Target(1)), Some(&[3.0, 4.0][..]));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_embeddings("0 source 1 2\n1 source 1\n".as_bytes(), "m").unwrap_err();
        assert!(matches!(err, Error::Row { line: 2, .. }), "{err}");
        assert!(parse_embeddings("0 middle 1\n".as_bytes(), "m").is_err());
        assert!(parse_embeddings("0 source nan\n".as_bytes(), "m").is_err());
        assert!(parse_embeddings("".as_bytes(), "m").is_err());
    }
}
