//! Plain-text artifact helpers shared by datasets, run logs and summaries.
//!
//! Tables are comma-separated with a single header row, optionally preceded
//! by `#` comment lines carrying the seed and the config hash.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Fixed-point rendering with 9 decimals, so reloaded values agree to 1e-9.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.9}");
    if s == "-0.000000000" {
        "0.000000000".to_string()
    } else {
        s
    }
}

/// Lowercase hex SHA-256 of a config rendering.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Seed and config hash lines written at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(seed: u64, config_text: &str) -> Self {
        Self {
            seed,
            config_sha256: config_hash(config_text),
        }
    }

    pub fn comment_lines(&self) -> Vec<String> {
        vec![format!("seed={}", self.seed), format!("config_sha256={}", self.config_sha256)]
    }
}

/// Writes `# ` comments, the header and the rows, each line ending in `\n`.
pub fn write_table<W: Write>(out: W, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let fail = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    write_table(fs::File::create(path)?, comments, header, rows)
}

/// A numeric table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub comments: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a table whose header must equal `header`; every field must parse as `f64`.
pub fn read_numeric_table(path: &Path, header: &[&str]) -> Result<NumericTable> {
    let text = fs::read_to_string(path)?;
    let fmt_err = |msg: String| Error::Format {
        path: path.display().to_string(),
        msg,
    };
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| fmt_err(e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(fmt_err(format!("expected header {:?}, found {:?}", header.join(","), got.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| fmt_err(format!("row {}: cannot parse {f:?}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { comments, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_decimals_and_no_negative_zero() {
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-1e-12), "0.000000000");
        assert_eq!(fmt_num(-2.5), "-2.500000000");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let prov = Provenance::new(7, "a = 1");
        let rows = vec![vec![fmt_num(0.1), fmt_num(-2.0)], vec![fmt_num(3.0), fmt_num(4.25)]];
        write_table_file(&path, &prov.comment_lines(), &["a", "b"], &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# seed=7\n# config_sha256="));
        assert!(!text.contains('\r'));
        let t = read_numeric_table(&path, &["a", "b"]).unwrap();
        assert_eq!(t.rows, vec![vec![0.1, -2.0], vec![3.0, 4.25]]);
        assert_eq!(t.comments[0], "seed=7");
        assert!(matches!(read_numeric_table(&path, &["a", "c"]), Err(Error::Format { .. })));
    }

    #[test]
    fn hash_is_stable_hex() {
        let h = config_hash("x");
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash("x"));
        assert_ne!(h, config_hash("y"));
    }
}
