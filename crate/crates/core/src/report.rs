//! `key = value` text blocks used for run summaries, and a reader for
//! the numeric CSV tables written by the experiments.

use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Stores a float with 17 significant digits.
    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:.16e}"));
    }

    pub fn push_opt(&mut self, key: &str, value: Option<f64>) {
        match value {
            Some(v) => self.push_f64(key, v),
            None => self.push(key, "none"),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn extend(&mut self, other: KeyValues) {
        self.entries.extend(other.entries);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.render().as_bytes())?;
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn read<R: BufRead>(r: R) -> Result<KeyValues> {
        let mut kv = KeyValues::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{t}`"),
            })?;
            let k = k.trim();
            if kv.get(k).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate key `{k}`"),
                });
            }
            kv.push(k, v.trim());
        }
        Ok(kv)
    }
}

/// A numeric CSV table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read<R: Read>(r: R) -> Result<Table> {
        let mut rd = csv::Reader::from_reader(r);
        let columns = rd
            .headers()
            .map_err(crate::integrate::csv_err)?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(crate::integrate::csv_err)?;
            let row = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 2,
                        msg: format!("`{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_full_precision() {
        let mut kv = KeyValues::default();
        kv.push_f64("p_measure", 0.1 + 0.2);
        kv.push_opt("kappa_est", None);
        kv.push("label", "seir");
        let back = KeyValues::read(kv.render().as_bytes()).unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.get_f64("p_measure"), Some(0.1 + 0.2));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(KeyValues::read("a = 1\na = 2\n".as_bytes()).is_err());
    }
}
