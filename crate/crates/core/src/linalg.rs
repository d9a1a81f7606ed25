//! Small dense helpers shared by the sparse and Carleman code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn scale(a: &mut [f64], s: f64) {
    for x in a {
        *x *= s;
    }
}

/// Kronecker product of two vectors, first factor most significant.
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// `u ⊗ u ⊗ ... ⊗ u` with `power` factors (`power = 0` gives `[1.0]`).
pub fn tensor_power(u: &[f64], power: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..power {
        out = kron(&out, u);
    }
    out
}

/// Deterministic, non-degenerate start vector for power iterations.
pub fn start_vector(dim: usize) -> Vec<f64> {
    // Golden-ratio sequence: no entry is zero and no index pattern repeats.
    let phi = 0.618_033_988_749_894_9_f64;
    (0..dim)
        .map(|i| 0.5 + ((i as f64 + 1.0) * phi).fract())
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl PowerIteration {
    /// Largest eigenvalue of a symmetric positive semidefinite operator.
    ///
    /// `apply(x, y)` must overwrite `y` with `Sx`. Convergence is declared
    /// when the Rayleigh quotient changes by less than `tol` relatively.
    pub fn dominant_eigenvalue<F>(&self, dim: usize, mut apply: F) -> f64
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        if dim == 0 {
            return 0.0;
        }
        let mut x = start_vector(dim);
        let nx = norm(&x);
        scale(&mut x, 1.0 / nx);
        let mut y = vec![0.0; dim];
        let mut lambda = 0.0;
        for _ in 0..self.max_iter {
            apply(&x, &mut y);
            let next = dot(&x, &y);
            let ny = norm(&y);
            if ny == 0.0 {
                return 0.0;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / ny;
            }
            if (next - lambda).abs() <= self.tol * next.abs() {
                return next;
            }
            lambda = next;
        }
        lambda
    }
}

/// Eigenvalues of a dense real matrix as `(re, im)` pairs.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 100_000)
        .ok_or_else(|| Error::EigenFailure("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect())
}

/// Singular values of a dense matrix, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
