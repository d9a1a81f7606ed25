//! Compressed sparse row matrices and the triplet text format.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::PowerIteration;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` entries, summing repeats.
    ///
    /// Repeated coordinates are accumulated in input order, so the result
    /// is reproducible bit for bit. Explicit zeros are kept.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::ShapeMismatch(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("repeat follows an entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Like [`SparseMatrix::from_triplets`] but rejects repeated coordinates.
    pub fn from_unique_triplets(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen: Vec<(usize, usize)> = entries.iter().map(|&(r, c, _)| (r, c)).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::ShapeMismatch(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Self::from_triplets(rows, cols, entries)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    entries.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), entries).expect("indices in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    /// Maximum number of nonzeros in any row or column.
    pub fn sparsity(&self) -> usize {
        let mut col_counts = vec![0usize; self.cols];
        for &c in &self.col_idx {
            col_counts[c] += 1;
        }
        let max_row = (0..self.rows)
            .map(|r| self.row_ptr[r + 1] - self.row_ptr[r])
            .max()
            .unwrap_or(0);
        max_row.max(col_counts.into_iter().max().unwrap_or(0))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// `y = Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Spectral norm by power iteration on the smaller Gram matrix.
    pub fn spectral_norm(&self, opts: PowerIteration) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let lam = if self.rows <= self.cols {
            let mut tmp = vec![0.0; self.cols];
            opts.dominant_eigenvalue(self.rows, |x, y| {
                self.matvec_transpose(x, &mut tmp);
                self.matvec(&tmp, y);
            })
        } else {
            let mut tmp = vec![0.0; self.rows];
            opts.dominant_eigenvalue(self.cols, |x, y| {
                self.matvec(x, &mut tmp);
                self.matvec_transpose(&tmp, y);
            })
        };
        lam.max(0.0).sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Writes `rows cols nnz` followed by one `row col value` line per entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (rows, cols, nnz) = loop {
            let (i, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: "missing header".into(),
            })?;
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let f = parse_fields::<usize>(t, 3, i + 1)?;
            break (f[0], f[1], f[2]);
        };
        let mut entries = Vec::with_capacity(nnz);
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected `row col value`, got `{t}`"),
                });
            }
            let r = parse_one::<usize>(parts[0], i + 1)?;
            let c = parse_one::<usize>(parts[1], i + 1)?;
            let v = parse_one::<f64>(parts[2], i + 1)?;
            entries.push((r, c, v));
        }
        if entries.len() != nnz {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {nnz} entries, found {}", entries.len()),
            });
        }
        Self::from_unique_triplets(rows, cols, entries)
    }
}

fn parse_one<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

fn parse_fields<T: std::str::FromStr>(s: &str, count: usize, line: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != count {
        return Err(Error::Parse {
            line,
            msg: format!("expected {count} fields, got `{s}`"),
        });
    }
    parts.iter().map(|p| parse_one(p, line)).collect()
}
