//! The forward-Euler recurrence written as one block lower-bidiagonal
//! linear system `L Y = B`, its solution, and the quantities that decide
//! how useful the solution is: condition number and the weight of the
//! final-time blocks.

use std::io::Write;

use crate::carleman::CarlemanSystem;
use crate::error::{Error, Result};
use crate::integrate::EulerStepper;
use crate::linalg::{distance, norm, singular_values, PowerIteration};
use crate::sparse::SparseMatrix;

/// Largest dimension for which the condition number is computed with a
/// dense SVD.
pub const DENSE_SVD_LIMIT: usize = 2000;

/// `L Y = B` over `m + p + 1` time blocks of size `Δ`.
///
/// Block row 0 is the identity; rows `1..=m` carry `-(I + h A((k-1)h))`
/// below the diagonal, rows `m+1..=m+p` carry `-I`. The right-hand side
/// is `y_in` in block 0, `h b((k-1)h)` in blocks `1..=m` and zero after.
#[derive(Debug, Clone)]
pub struct BlockLinearSystem<'a> {
    pub system: &'a CarlemanSystem,
    pub h: f64,
    pub m: usize,
    pub p: usize,
    /// `||u_in|| / ||u(T)||` of the underlying ODE.
    pub q: f64,
    /// Explicit sparse `L`, present when assembled within budget.
    pub matrix: Option<SparseMatrix>,
    y_in: Vec<f64>,
    /// `h b((k-1)h)` for `k = 1..=m` (first block only).
    forcing: Vec<Vec<f64>>,
    /// `||B||^2` of the unnormalized right-hand side.
    pub b_m: f64,
}

impl<'a> BlockLinearSystem<'a> {
    /// Matrix-free form; `L` is applied through the Carleman system.
    pub fn new(system: &'a CarlemanSystem, h: f64, m: usize, p: usize, q: f64) -> Result<Self> {
        if !(h > 0.0) || m == 0 {
            return Err(Error::ParameterOutOfRange(format!("h = {h}, m = {m}")));
        }
        let stepper = EulerStepper::new(system, h);
        let y_in = system.initial_vector();
        let forcing: Vec<Vec<f64>> = (1..=m).map(|k| stepper.scaled_forcing((k - 1) as f64 * h)).collect();
        let b_m = norm(&y_in).powi(2) + forcing.iter().map(|f| norm(f).powi(2)).sum::<f64>();
        Ok(BlockLinearSystem {
            system,
            h,
            m,
            p,
            q,
            matrix: None,
            y_in,
            forcing,
            b_m,
        })
    }

    /// Builds the explicit sparse `L` as well, within a nonzero budget.
    pub fn assemble(system: &'a CarlemanSystem, h: f64, m: usize, p: usize, q: f64, budget: u128) -> Result<Self> {
        let mut bls = Self::new(system, h, m, p, q)?;
        let d = system.delta;
        let a0 = system.assemble(0.0)?;
        let needed = ((m + p + 1) * d) as u128 + (m as u128) * (a0.nnz() + d) as u128 + (p * d) as u128;
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let mut entries = Vec::with_capacity(needed as usize);
        for i in 0..(m + p + 1) * d {
            entries.push((i, i, 1.0));
        }
        for k in 1..=m + p {
            let (r0, c0) = (k * d, (k - 1) * d);
            for i in 0..d {
                entries.push((r0 + i, c0 + i, -1.0));
            }
            if k <= m {
                let a = if k == 1 { a0.clone() } else { system.assemble((k - 1) as f64 * h)? };
                entries.extend(a.iter().map(|(r, c, v)| (r0 + r, c0 + c, -h * v)));
            }
        }
        bls.matrix = Some(SparseMatrix::from_triplets((m + p + 1) * d, (m + p + 1) * d, entries)?);
        Ok(bls)
    }

    pub fn dim(&self) -> usize {
        (self.m + self.p + 1) * self.system.delta
    }

    /// Unnormalized right-hand side `B`.
    pub fn rhs(&self) -> Vec<f64> {
        let d = self.system.delta;
        let mut b = vec![0.0; self.dim()];
        b[..d].copy_from_slice(&self.y_in);
        for (k, f) in self.forcing.iter().enumerate() {
            let start = (k + 1) * d;
            b[start..start + f.len()].copy_from_slice(f);
        }
        b
    }

    /// `B / sqrt(B_m)`, the unit-norm right-hand side.
    pub fn normalized_rhs(&self) -> Vec<f64> {
        let s = 1.0 / self.b_m.sqrt();
        self.rhs().into_iter().map(|v| v * s).collect()
    }

    /// Block forward substitution. Each step reuses [`EulerStepper`], so
    /// `Y^k` equals the Euler iterate `y^k` exactly for `k <= m`, and
    /// `Y^k = Y^m` for `k > m`.
    pub fn solve(&self) -> Result<(Vec<f64>, SolutionDiagnostics)> {
        let d = self.system.delta;
        let mut y = vec![0.0; self.dim()];
        y[..d].copy_from_slice(&self.y_in);
        let mut stepper = EulerStepper::new(self.system, self.h);
        for k in 1..=self.m + self.p {
            let (done, rest) = y.split_at_mut(k * d);
            let prev = &done[(k - 1) * d..];
            let cur = &mut rest[..d];
            if k <= self.m {
                stepper.step((k - 1) as f64 * self.h, prev, &self.forcing[k - 1], cur);
            } else {
                cur.copy_from_slice(prev);
            }
        }
        let block_norms: Vec<Vec<f64>> = (0..=self.m + self.p)
            .map(|k| self.system.block_norms(&y[k * d..(k + 1) * d]))
            .collect();
        let prob = success_probability(&block_norms, self.m, self.p, self.system.level, self.q);
        let residual = self.residual(&y)?;
        let diag = SolutionDiagnostics {
            block_norms,
            p_measure: prob.p_measure,
            p_lower: prob.p_lower,
            p_lower_general: prob.p_lower_general,
            kappa_bound: kappa_bound(self.m, self.p),
            kappa_est: None,
            residual,
        };
        Ok((y, diag))
    }

    /// Matrix-free `out = L y`.
    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        let d = self.system.delta;
        out[..d].copy_from_slice(&y[..d]);
        let mut ay = vec![0.0; d];
        for k in 1..=self.m + self.p {
            let prev = &y[(k - 1) * d..k * d];
            let cur = &y[k * d..(k + 1) * d];
            let o = &mut out[k * d..(k + 1) * d];
            if k <= self.m {
                self.system.apply((k - 1) as f64 * self.h, prev, &mut ay);
                for i in 0..d {
                    o[i] = cur[i] - (prev[i] + self.h * ay[i]);
                }
            } else {
                for i in 0..d {
                    o[i] = cur[i] - prev[i];
                }
            }
        }
    }

    /// `||L Y - B|| / ||B||`, using the explicit matrix when available.
    pub fn residual(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!("Y has length {}, expected {}", y.len(), self.dim())));
        }
        let mut ly = vec![0.0; self.dim()];
        match &self.matrix {
            Some(l) => l.matvec(y, &mut ly),
            None => self.apply(y, &mut ly),
        }
        let b = self.rhs();
        Ok(distance(&ly, &b) / norm(&b))
    }

    fn explicit(&self) -> Result<&SparseMatrix> {
        self.matrix
            .as_ref()
            .ok_or_else(|| Error::Config("operation needs the explicitly assembled matrix".into()))
    }

    /// `||L||` by power iteration on `LᵀL`.
    pub fn norm(&self) -> Result<f64> {
        Ok(self.explicit()?.spectral_norm(PowerIteration::default()))
    }

    /// `κ(L)`: dense SVD up to [`DENSE_SVD_LIMIT`], otherwise power
    /// iteration for `σ_max` and inverse iteration through triangular
    /// solves for `σ_min`.
    pub fn condition_number(&self) -> Result<f64> {
        let l = self.explicit()?;
        if self.dim() <= DENSE_SVD_LIMIT {
            let s = singular_values(&l.to_dense());
            return Ok(s[0] / s[s.len() - 1]);
        }
        let opts = PowerIteration::default();
        let smax = l.spectral_norm(opts);
        // Largest eigenvalue of (LᵀL)^{-1} = L^{-1} L^{-T}.
        let inv = opts.dominant_eigenvalue(self.dim(), |x, y| {
            let t = solve_lower_transpose(l, x).expect("unit lower triangular");
            let s = solve_lower(l, &t).expect("unit lower triangular");
            y.copy_from_slice(&s);
        });
        Ok(smax * inv.sqrt())
    }
}

/// `3 (m + p + 1)`.
pub fn kappa_bound(m: usize, p: usize) -> f64 {
    3.0 * (m + p + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbability {
    /// Weight of the first-block entries of time blocks `m..=m+p`.
    pub p_measure: f64,
    /// Reported lower bound: `1/(18 N q^2)` when `m = p`, else the general form.
    pub p_lower: f64,
    /// `(p + 1) / (9 (m + p + 1) N q^2)`.
    pub p_lower_general: f64,
}

/// Success probability of measuring a final-time first block.
///
/// `block_norms[k][j-1]` is `||Y^k_j||` for `k = 0..=m+p`.
pub fn success_probability(block_norms: &[Vec<f64>], m: usize, p: usize, level: usize, q: f64) -> SuccessProbability {
    let total: f64 = block_norms.iter().flatten().map(|v| v * v).sum();
    let good: f64 = block_norms[m..=m + p].iter().map(|b| b[0] * b[0]).sum();
    let nq2 = level as f64 * q * q;
    let general = (p + 1) as f64 / (9.0 * (m + p + 1) as f64 * nq2);
    SuccessProbability {
        p_measure: good / total,
        p_lower: if m == p { 1.0 / (18.0 * nq2) } else { general },
        p_lower_general: general,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDiagnostics {
    /// `||Y^k_j||` indexed `[k][j-1]`.
    pub block_norms: Vec<Vec<f64>>,
    pub p_measure: f64,
    pub p_lower: f64,
    pub p_lower_general: f64,
    pub kappa_bound: f64,
    pub kappa_est: Option<f64>,
    /// `||L Y - B|| / ||B||`; `None` when not computed.
    pub residual: f64,
}

impl SolutionDiagnostics {
    /// Diagnostics from per-step block norms of an Euler run, without
    /// forming `Y`. Blocks past `m` repeat block `m`.
    pub fn from_euler_norms(euler_norms: Vec<Vec<f64>>, p: usize, level: usize, q: f64) -> Self {
        let m = euler_norms.len() - 1;
        let mut block_norms = euler_norms;
        let last = block_norms[m].clone();
        block_norms.extend(std::iter::repeat_n(last, p));
        let prob = success_probability(&block_norms, m, p, level, q);
        SolutionDiagnostics {
            block_norms,
            p_measure: prob.p_measure,
            p_lower: prob.p_lower,
            p_lower_general: prob.p_lower_general,
            kappa_bound: kappa_bound(m, p),
            kappa_est: None,
            residual: f64::NAN,
        }
    }

    /// Flat CSV `k,j,norm`, every `stride`-th time block plus the last.
    pub fn write_norms_csv<W: Write>(&self, w: W, stride: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "j", "norm"]).map_err(crate::integrate::csv_err)?;
        let last = self.block_norms.len() - 1;
        for (k, blocks) in self.block_norms.iter().enumerate() {
            if k % stride.max(1) != 0 && k != last {
                continue;
            }
            for (j, v) in blocks.iter().enumerate() {
                wr.write_record(&[k.to_string(), (j + 1).to_string(), format!("{v:.16e}")])
                    .map_err(crate::integrate::csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> crate::report::KeyValues {
        let mut kv = crate::report::KeyValues::default();
        kv.push_f64("p_measure", self.p_measure);
        kv.push_f64("p_lower", self.p_lower);
        kv.push_f64("p_lower_general", self.p_lower_general);
        kv.push_f64("kappa_bound", self.kappa_bound);
        kv.push_opt("kappa_est", self.kappa_est);
        kv.push_f64("residual", self.residual);
        kv
    }
}

/// Forward substitution for a sparse lower-triangular matrix; generic
/// scalar reference for the block solver.
pub fn solve_lower(l: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = vec![0.0; b.len()];
    for i in 0..l.rows() {
        let mut acc = b[i];
        let mut diag = 0.0;
        for (c, v) in l.row(i) {
            if c < i {
                acc -= v * x[c];
            } else if c == i {
                diag = v;
            } else if v != 0.0 {
                return Err(Error::ShapeMismatch(format!("entry ({i}, {c}) above the diagonal")));
            }
        }
        if diag == 0.0 {
            return Err(Error::ShapeMismatch(format!("zero pivot in row {i}")));
        }
        x[i] = acc / diag;
    }
    Ok(x)
}

/// Solves `Lᵀ x = b` for lower-triangular `L` stored by rows.
pub fn solve_lower_transpose(l: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut rhs = b.to_vec();
    let mut x = vec![0.0; b.len()];
    for i in (0..l.rows()).rev() {
        let diag = l.get(i, i);
        if diag == 0.0 {
            return Err(Error::ShapeMismatch(format!("zero pivot in row {i}")));
        }
        x[i] = rhs[i] / diag;
        for (c, v) in l.row(i) {
            if c < i {
                rhs[c] -= v * x[i];
            }
        }
    }
    Ok(x)
}
