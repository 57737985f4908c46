//! Headered comma-separated result files.
//!
//! Every artifact starts with a `#` header block (tool version, config
//! hash, seed, the full effective configuration), then a column-name row,
//! then a units row, then data. `#` lines are permitted anywhere and
//! skipped by the readers, which lets long runs append footers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "densecell";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a over the canonical config text; enough to tell runs apart.
pub fn fnv1a64(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn config_hash_hex(canonical_text: &str) -> String {
    format!("{:016x}", fnv1a64(canonical_text))
}

/// Header block shared by all artifacts.
#[derive(Debug, Clone)]
pub struct FileMeta {
    pub config_hash: String,
    pub seed: u64,
    /// Effective configuration, echoed as `# cfg key = value` lines.
    pub cfg_lines: Vec<(String, String)>,
    /// Stage-specific entries, echoed as `# key = value` lines.
    pub extra: Vec<(String, String)>,
}

impl FileMeta {
    pub fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {TOOL_NAME} {TOOL_VERSION}");
        let _ = writeln!(s, "# config_hash = {}", self.config_hash);
        let _ = writeln!(s, "# seed = {}", self.seed);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "# {k} = {v}");
        }
        for (k, v) in &self.cfg_lines {
            let _ = writeln!(s, "# cfg {k} = {v}");
        }
        s
    }
}

/// A parsed artifact: header entries, configuration echo, columns, units
/// and raw data cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub cfg: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => {
                Error::InvalidConfig(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut meta = BTreeMap::new();
        let mut cfg = BTreeMap::new();
        let mut columns = Vec::new();
        let mut units = Vec::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(kv) = rest.strip_prefix("cfg ") {
                    if let Some((k, v)) = kv.split_once('=') {
                        cfg.insert(k.trim().to_string(), v.trim().to_string());
                    }
                } else if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if columns.is_empty() {
                columns = cells;
            } else if units.is_empty() {
                units = cells;
            } else {
                if cells.len() != columns.len() {
                    return Err(Error::InvalidConfig(format!(
                        "row has {} cells, expected {}",
                        cells.len(),
                        columns.len()
                    )));
                }
                rows.push(cells);
            }
        }
        if columns.is_empty() {
            return Err(Error::InvalidConfig("no column header found".into()));
        }
        Ok(Table {
            meta,
            cfg,
            columns,
            units,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidConfig(format!("missing column '{name}'")))
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .map(|row| {
                row[idx].parse::<f64>().map_err(|_| {
                    Error::InvalidConfig(format!("column '{name}': bad number '{}'", row[idx]))
                })
            })
            .collect()
    }

    pub fn cfg_f64(&self, key: &str) -> Result<f64> {
        let v = self
            .cfg
            .get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("missing '# cfg {key}' header entry")))?;
        v.parse::<f64>()
            .map_err(|_| Error::InvalidConfig(format!("header cfg {key}: bad number '{v}'")))
    }
}

/// One fitted power-law row of a fits file.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub metric: String,
    pub x_lo_per_m2: f64,
    pub x_hi_per_m2: f64,
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

pub const FITS_COLUMNS: &str = "metric,x_lo,x_hi,a,b,r2";
pub const FITS_UNITS: &str = "-,per_m2,per_m2,si_at_x1,-,-";

pub fn write_fits(meta: &FileMeta, rows: &[FitRow]) -> String {
    let mut s = meta.header();
    let _ = writeln!(s, "{FITS_COLUMNS}");
    let _ = writeln!(s, "{FITS_UNITS}");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.metric, r.x_lo_per_m2, r.x_hi_per_m2, r.a, r.b, r.r2
        );
    }
    s
}

pub fn read_fits(table: &Table) -> Result<Vec<FitRow>> {
    let metric = table.column_index("metric")?;
    let x_lo = table.column_index("x_lo")?;
    let x_hi = table.column_index("x_hi")?;
    let a = table.column_index("a")?;
    let b = table.column_index("b")?;
    let r2 = table.column_index("r2")?;
    let cell = |row: &[String], idx: usize| -> Result<f64> {
        row[idx]
            .parse::<f64>()
            .map_err(|_| Error::InvalidConfig(format!("bad number '{}' in fits file", row[idx])))
    };
    table
        .rows
        .iter()
        .map(|row| {
            Ok(FitRow {
                metric: row[metric].clone(),
                x_lo_per_m2: cell(row, x_lo)?,
                x_hi_per_m2: cell(row, x_hi)?,
                a: cell(row, a)?,
                b: cell(row, b)?,
                r2: cell(row, r2)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a64("seed = 1"), fnv1a64("seed = 2"));
    }

    #[test]
    fn table_roundtrip() {
        let meta = FileMeta {
            config_hash: "00ff".into(),
            seed: 7,
            cfg_lines: vec![("bandwidth_hz".into(), "10000000".into())],
            extra: vec![("breakpoints_per_km2".into(), "10,60".into())],
        };
        let rows = vec![FitRow {
            metric: "ase".into(),
            x_lo_per_m2: 1e-5,
            x_hi_per_m2: 6e-5,
            a: 39.8,
            b: 1.25,
            r2: 0.999,
        }];
        let text = write_fits(&meta, &rows);
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.meta.get("config_hash").unwrap(), "00ff");
        assert_eq!(table.meta.get("seed").unwrap(), "7");
        assert_eq!(table.cfg_f64("bandwidth_hz").unwrap(), 1e7);
        let parsed = read_fits(&table).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let text = "a,b\n-,-\n1,2,3\n";
        assert!(Table::parse(text).is_err());
    }
}
