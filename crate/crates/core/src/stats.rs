//! The `nira-stats-v1` text format: `key value` lines and embedded tables.
//!
//! ```text
//! schema nira-stats-v1
//! command extract
//! method up
//! table kl block up ra-ua sample
//! row 0 0.012 0.4 0.03
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const STATS_SCHEMA: &str = "nira-stats-v1";

#[derive(Debug, Clone, PartialEq)]
pub enum StatsEntry {
    Value { key: String, value: String },
    Table { name: String, columns: Vec<String>, rows: Vec<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    entries: Vec<StatsEntry>,
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("stats {what} '{s}' must be a non-empty word")));
    }
    Ok(())
}

impl Stats {
    pub fn new(command: &str) -> Self {
        let mut s = Self { entries: Vec::new() };
        s.push_str("schema", STATS_SCHEMA);
        s.push_str("command", command);
        s
    }

    pub fn entries(&self) -> &[StatsEntry] {
        &self.entries
    }

    /// Adds a key/value line; newlines in the value become spaces.
    pub fn push_str(&mut self, key: &str, value: &str) {
        debug_assert!(check_token(key, "key").is_ok());
        self.entries.push(StatsEntry::Value {
            key: key.to_string(),
            value: value.replace(['\n', '\r'], " "),
        });
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.push_str(key, &value.to_string());
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push_str(key, &fmt_f64(value));
    }

    pub fn push_table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        check_token(name, "table name")?;
        for c in columns {
            check_token(c, "column")?;
        }
        for r in &rows {
            if r.len() != columns.len() {
                return Err(Error::InvalidArgument(format!(
                    "stats table {name}: row has {} cells, expected {}",
                    r.len(),
                    columns.len()
                )));
            }
            for cell in r {
                check_token(cell, "cell")?;
            }
        }
        self.entries.push(StatsEntry::Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        });
        Ok(())
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find_map(|e| match e {
            StatsEntry::Value { key: k, value } if k == key => Some(value.as_str()),
            _ => None,
        })
    }

    pub fn table(&self, name: &str) -> Option<(&[String], &[Vec<String>])> {
        self.entries.iter().find_map(|e| match e {
            StatsEntry::Table { name: n, columns, rows } if n == name => Some((columns.as_slice(), rows.as_slice())),
            _ => None,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            match e {
                StatsEntry::Value { key, value } => {
                    let _ = writeln!(out, "{key} {value}");
                }
                StatsEntry::Table { name, columns, rows } => {
                    let _ = writeln!(out, "table {name} {}", columns.join(" "));
                    for r in rows {
                        let _ = writeln!(out, "row {}", r.join(" "));
                    }
                    out.push_str("end\n");
                }
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut lines = text.lines().enumerate();
        while let Some((n, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            if key == "table" {
                let mut words = rest.split(' ');
                let name = words.next().filter(|w| !w.is_empty()).ok_or_else(|| {
                    Error::parse("table", format!("line {}: table without a name", n + 1))
                })?;
                let columns: Vec<String> = words.map(str::to_string).collect();
                let mut rows = Vec::new();
                loop {
                    let (m, l) = lines
                        .next()
                        .ok_or_else(|| Error::parse("table", format!("table {name} is not closed")))?;
                    if l == "end" {
                        break;
                    }
                    let cells = l.strip_prefix("row ").ok_or_else(|| {
                        Error::parse("row", format!("line {}: expected 'row' or 'end'", m + 1))
                    })?;
                    let cells: Vec<String> = cells.split(' ').map(str::to_string).collect();
                    if cells.len() != columns.len() {
                        return Err(Error::parse("row", format!("line {}: wrong cell count", m + 1)));
                    }
                    rows.push(cells);
                }
                entries.push(StatsEntry::Table { name: name.to_string(), columns, rows });
            } else {
                entries.push(StatsEntry::Value { key: key.to_string(), value: rest.to_string() });
            }
        }
        let stats = Self { entries };
        match stats.get("schema") {
            Some(STATS_SCHEMA) => Ok(stats),
            other => Err(Error::parse("schema", format!("expected {STATS_SCHEMA}, found {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse_round_trip() {
        let mut s = Stats::new("extract");
        s.push("depth", 9);
        s.push_f64("fpr", 0.125);
        s.push_str("note", "two\nlines");
        s.push_table("kl", &["block", "up"], vec![vec!["0".into(), fmt_f64(1e-7)]]).unwrap();
        let text = s.render();
        assert!(text.starts_with("schema nira-stats-v1\ncommand extract\n"));
        assert!(text.contains("note two lines\n"));
        assert!(text.contains("table kl block up\nrow 0 1e-7\nend\n"));
        let back = Stats::parse(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get("depth"), Some("9"));
        assert_eq!(back.table("kl").unwrap().1[0][1], "1e-7");
    }

    #[test]
    fn table_validation() {
        let mut s = Stats::new("x");
        assert!(s.push_table("t", &["a", "b"], vec![vec!["1".into()]]).is_err());
        assert!(s.push_table("t", &["a"], vec![vec!["has space".into()]]).is_err());
        assert!(Stats::parse("command x\n").is_err());
        assert!(Stats::parse("schema nira-stats-v1\ntable t a\nrow 1\n").is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.0, 1.5, -2.25e-9, 3e20, 0.1 + 0.2, 1e-300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
