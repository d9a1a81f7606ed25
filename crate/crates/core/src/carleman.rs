//! Truncated Carleman embedding.
//!
//! The state `y = (y_1, ..., y_N)` with `y_j ≈ u^{⊗j}` obeys the linear
//! system `dy/dt = A(t) y + b(t)`, where block row `j` of `A` holds
//!
//! * `A^j_{j+1} = Σ_i I^{⊗(i-1)} ⊗ F2 ⊗ I^{⊗(j-i)}` (raising),
//! * `A^j_j     = Σ_i I^{⊗(i-1)} ⊗ F1 ⊗ I^{⊗(j-i)}` (diagonal),
//! * `A^j_{j-1} = Σ_i I^{⊗(i-1)} ⊗ F0(t) ⊗ I^{⊗(j-i)}` (lowering),
//!
//! and `b(t) = (F0(t), 0, ..., 0)`. Tensor indices are lexicographic with
//! the first factor most significant, matching [`crate::linalg::kron`].

use crate::error::{Error, Result};
use crate::linalg::{norm, tensor_power};
use crate::ode::{Forcing, QuadraticOde, SpectralSummary};
use crate::sparse::SparseMatrix;

/// Default cap on stored nonzeros, overridable with `CARLEMAN_BUDGET_NNZ`.
pub const DEFAULT_NNZ_BUDGET: u128 = 10_000_000;

pub const BUDGET_ENV: &str = "CARLEMAN_BUDGET_NNZ";

pub fn nnz_budget() -> u128 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_NNZ_BUDGET)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `n x n^2` factor, maps level `j+1` to level `j`.
    Raising,
    /// `n x n` factor, level `j` to level `j`.
    Diagonal,
    /// `n x 1` factor, level `j-1` to level `j`.
    Lowering,
}

impl BlockKind {
    fn input_width(self, n: usize) -> usize {
        match self {
            BlockKind::Raising => n * n,
            BlockKind::Diagonal => n,
            BlockKind::Lowering => 1,
        }
    }
}

/// Explicit Kronecker sum `Σ_{i=1}^{j} I^{⊗(i-1)} ⊗ M ⊗ I^{⊗(j-i)}`.
///
/// The factor `M` has `n` rows and `n^2`, `n` or `1` columns according to
/// `kind`; the result has `n^j` rows.
pub fn transfer_block(m: &SparseMatrix, n: usize, j: usize, kind: BlockKind) -> Result<SparseMatrix> {
    let d_in = kind.input_width(n);
    if m.rows() != n || m.cols() != d_in {
        return Err(Error::ShapeMismatch(format!(
            "{kind:?} factor is {}x{}, expected {n}x{d_in}",
            m.rows(),
            m.cols()
        )));
    }
    if j == 0 || (kind == BlockKind::Lowering && j < 2) {
        return Err(Error::ShapeMismatch(format!("{kind:?} block at level {j}")));
    }
    let in_level = match kind {
        BlockKind::Raising => j + 1,
        BlockKind::Diagonal => j,
        BlockKind::Lowering => j - 1,
    };
    let mut entries = Vec::with_capacity(j * m.nnz() * n.pow(j as u32 - 1));
    for i in 1..=j {
        let pre = n.pow(i as u32 - 1);
        let post = n.pow((j - i) as u32);
        for a in 0..pre {
            for (r, k, v) in m.iter() {
                for c in 0..post {
                    entries.push(((a * n + r) * post + c, (a * d_in + k) * post + c, v));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n.pow(j as u32), n.pow(in_level as u32), entries)
}

/// Adds `(Σ_i I ⊗ M ⊗ I) x` to `out` without forming the block.
fn add_kron_sum(entries: &[(usize, usize, f64)], d_in: usize, n: usize, j: usize, x: &[f64], out: &mut [f64]) {
    for i in 1..=j {
        let pre = n.pow(i as u32 - 1);
        let post = n.pow((j - i) as u32);
        for a in 0..pre {
            let xb = a * d_in * post;
            let ob = a * n * post;
            for &(r, k, v) in entries {
                let xs = &x[xb + k * post..xb + (k + 1) * post];
                let os = &mut out[ob + r * post..ob + (r + 1) * post];
                for (o, xi) in os.iter_mut().zip(xs) {
                    *o += v * xi;
                }
            }
        }
    }
}

/// Upper bound on the stored nonzeros of `A(t)`.
pub fn estimate_nnz(n: usize, level: usize, nnz_f2: usize, nnz_f1: usize, nnz_f0: usize) -> u128 {
    let mut total: u128 = 0;
    for j in 1..=level {
        let per = n as u128;
        let width = j as u128 * per.pow(j as u32 - 1);
        let mut row = nnz_f1 as u128;
        if j < level {
            row += nnz_f2 as u128;
        }
        if j > 1 {
            row += nnz_f0 as u128;
        }
        total += width * row;
    }
    total
}

fn forcing_nnz(f0: &Forcing, n: usize) -> usize {
    match f0 {
        Forcing::Zero => 0,
        Forcing::Constant(v) | Forcing::Harmonic { profile: v, .. } => v.iter().filter(|&&x| x != 0.0).count(),
        Forcing::Custom { .. } => n,
    }
}

/// Offsets of the blocks of `y` and the total dimension `Δ`.
pub fn block_offsets(n: usize, level: usize) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(level);
    let mut acc = 0;
    for j in 1..=level {
        offsets.push(acc);
        acc += n.pow(j as u32);
    }
    (offsets, acc)
}

/// Linear system of dimension `Δ = n + n^2 + ... + n^N` approximating the
/// quadratic ODE. Time-independent blocks are stored explicitly.
#[derive(Debug, Clone)]
pub struct CarlemanSystem {
    pub ode: QuadraticOde,
    pub level: usize,
    pub delta: usize,
    offsets: Vec<usize>,
    /// `A^j_{j+1}` for `j = 1..N-1`.
    pub raising: Vec<SparseMatrix>,
    /// `A^j_j` for `j = 1..N`.
    pub diagonal: Vec<SparseMatrix>,
    f2_entries: Vec<(usize, usize, f64)>,
    f1_entries: Vec<(usize, usize, f64)>,
}

impl CarlemanSystem {
    /// Builds the level-`N` system, refusing if the nonzero estimate
    /// exceeds `budget`.
    pub fn build(ode: &QuadraticOde, level: usize, budget: u128) -> Result<Self> {
        if level == 0 {
            return Err(Error::ParameterOutOfRange("truncation level must be at least 1".into()));
        }
        let n = ode.dim();
        let needed = estimate_nnz(n, level, ode.f2.nnz(), ode.f1.nnz(), forcing_nnz(&ode.f0, n));
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let (offsets, delta) = block_offsets(n, level);
        let mut raising = Vec::with_capacity(level.saturating_sub(1));
        let mut diagonal = Vec::with_capacity(level);
        for j in 1..=level {
            diagonal.push(transfer_block(&ode.f1, n, j, BlockKind::Diagonal)?);
            if j < level {
                raising.push(transfer_block(&ode.f2, n, j, BlockKind::Raising)?);
            }
        }
        Ok(CarlemanSystem {
            ode: ode.clone(),
            level,
            delta,
            offsets,
            raising,
            diagonal,
            f2_entries: ode.f2.iter().collect(),
            f1_entries: ode.f1.iter().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.ode.dim()
    }

    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let start = self.offsets[j - 1];
        start..start + self.n().pow(j as u32)
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `F0(t) ⊗`-type lowering block `A^j_{j-1}(t)` for `j >= 2`.
    pub fn lowering_block(&self, j: usize, t: f64) -> Result<SparseMatrix> {
        let n = self.n();
        let mut f = vec![0.0; n];
        self.ode.f0.eval(t, &mut f);
        let col = SparseMatrix::from_triplets(
            n,
            1,
            f.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(r, &v)| (r, 0, v)).collect(),
        )?;
        transfer_block(&col, n, j, BlockKind::Lowering)
    }

    /// Explicit `Δ x Δ` matrix `A(t)`.
    pub fn assemble(&self, t: f64) -> Result<SparseMatrix> {
        let mut entries = Vec::new();
        for j in 1..=self.level {
            let row0 = self.offsets[j - 1];
            let mut push = |blk: &SparseMatrix, col0: usize| {
                entries.extend(blk.iter().map(|(r, c, v)| (row0 + r, col0 + c, v)));
            };
            push(&self.diagonal[j - 1], self.offsets[j - 1]);
            if j < self.level {
                push(&self.raising[j - 1], self.offsets[j]);
            }
            if j > 1 && !self.ode.f0.is_zero() {
                push(&self.lowering_block(j, t)?, self.offsets[j - 2]);
            }
        }
        SparseMatrix::from_triplets(self.delta, self.delta, entries)
    }

    /// Matrix-free `out = A(t) y`.
    pub fn apply(&self, t: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.delta);
        let n = self.n();
        out.iter_mut().for_each(|v| *v = 0.0);
        let homogeneous = self.ode.f0.is_zero();
        let f0_entries: Vec<(usize, usize, f64)> = if homogeneous {
            Vec::new()
        } else {
            let mut f = vec![0.0; n];
            self.ode.f0.eval(t, &mut f);
            f.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(r, &v)| (r, 0, v)).collect()
        };
        for j in 1..=self.level {
            let out_j = &mut out[self.block_range(j)];
            add_kron_sum(&self.f1_entries, n, n, j, &y[self.block_range(j)], out_j);
            if j < self.level {
                add_kron_sum(&self.f2_entries, n * n, n, j, &y[self.block_range(j + 1)], out_j);
            }
            if j > 1 && !f0_entries.is_empty() {
                add_kron_sum(&f0_entries, 1, n, j, &y[self.block_range(j - 1)], out_j);
            }
        }
    }

    /// Inhomogeneous term `b(t)`: only the first block is nonzero.
    pub fn forcing(&self, t: f64, out: &mut [f64]) {
        self.ode.f0.eval(t, out);
    }

    pub fn initial_vector(&self) -> Vec<f64> {
        initial_vector(&self.ode.u_in, self.level)
    }

    /// Block norms `||y_j||` for `j = 1..N`.
    pub fn block_norms(&self, y: &[f64]) -> Vec<f64> {
        (1..=self.level).map(|j| norm(&y[self.block_range(j)])).collect()
    }

    /// Exact lift `(u, u⊗u, ..., u^{⊗N})` of a state.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        initial_vector(u, self.level)
    }
}

/// `(u, u⊗u, ..., u^{⊗N})`.
pub fn initial_vector(u: &[f64], level: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = vec![1.0];
    for _ in 0..level {
        t = crate::linalg::kron(&t, u);
        out.extend_from_slice(&t);
    }
    out
}

/// Layout with every level padded to `n^N` entries, block `j` holding
/// `u^{⊗j} ⊗ e_0^{⊗(N-j)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaddedLayout {
    pub n: usize,
    pub level: usize,
}

impl PaddedLayout {
    pub fn len(&self) -> usize {
        self.level * self.n.pow(self.level as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position in the padded vector of unpadded index `idx`.
    pub fn to_padded(&self, idx: usize) -> usize {
        let mut j = 1;
        let mut start = 0;
        while idx >= start + self.n.pow(j as u32) {
            start += self.n.pow(j as u32);
            j += 1;
        }
        let width = self.n.pow(self.level as u32);
        (j - 1) * width + (idx - start) * self.n.pow((self.level - j) as u32)
    }

    /// Inverse of [`PaddedLayout::to_padded`]; `None` for padding slots.
    pub fn to_unpadded(&self, padded: usize) -> Option<usize> {
        let width = self.n.pow(self.level as u32);
        let j = padded / width + 1;
        if j > self.level {
            return None;
        }
        let within = padded % width;
        let stride = self.n.pow((self.level - j) as u32);
        if !within.is_multiple_of(stride) {
            return None;
        }
        let (offsets, _) = block_offsets(self.n, self.level);
        Some(offsets[j - 1] + within / stride)
    }

    pub fn pad(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &v) in y.iter().enumerate() {
            out[self.to_padded(i)] = v;
        }
        out
    }

    pub fn unpad(&self, padded: &[f64]) -> Vec<f64> {
        let (_, delta) = block_offsets(self.n, self.level);
        (0..delta).map(|i| padded[self.to_padded(i)]).collect()
    }
}

/// Padded initial vector, blocks `u^{⊗j} ⊗ e_0^{⊗(N-j)}`.
pub fn padded_initial_vector(u: &[f64], level: usize) -> Vec<f64> {
    let n = u.len();
    let width = n.pow(level as u32);
    let mut out = vec![0.0; level * width];
    for j in 1..=level {
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let block = crate::linalg::kron(&tensor_power(u, j), &tensor_power(&e0, level - j));
        out[(j - 1) * width..j * width].copy_from_slice(&block);
    }
    out
}

/// Truncation level, time step and horizon chosen for a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelinePlan {
    pub epsilon: f64,
    /// Absolute error budget `δ = g ε / (1 + ε)`.
    pub delta_err: f64,
    pub level: usize,
    pub h: f64,
    pub m: usize,
    pub p: usize,
    pub g: f64,
}

pub const DEFAULT_LEVEL_CAP: usize = 12;

/// `ceil(log(2 T ||F2|| / δ) / log(1 / ||u_in||))`, at least 1.
pub fn truncation_formula(summary: &SpectralSummary, t_final: f64, delta_err: f64) -> Result<usize> {
    let u = summary.u_in_norm;
    if u >= 1.0 {
        return Err(Error::NotRescaled { u_in_norm: u });
    }
    if summary.norm_f2 == 0.0 {
        return Ok(1);
    }
    let x = (2.0 * t_final * summary.norm_f2 / delta_err).ln() / (1.0 / u).ln();
    Ok(if x.is_finite() && x > 1.0 { x.ceil() as usize } else { 1 })
}

/// Smallest level at or above [`truncation_formula`] whose truncation
/// bound `T N ||F2|| ||u_in||^{N+1}` is at most `δ/2`.
pub fn choose_truncation(summary: &SpectralSummary, t_final: f64, delta_err: f64, cap: usize) -> Result<usize> {
    let mut level = truncation_formula(summary, t_final, delta_err)?;
    let bound = |k: usize| t_final * k as f64 * summary.norm_f2 * summary.u_in_norm.powi(k as i32 + 1);
    while bound(level) > 0.5 * delta_err {
        level += 1;
        if level > cap {
            break;
        }
    }
    if level > cap {
        return Err(Error::TruncationCap { required: level, cap });
    }
    Ok(level)
}

/// Largest step keeping `||I + A h|| <= 1` by the eigenvalue argument:
/// `min(1/(N ||F1||), 2(|Re λ1| - ||F2|| - ||F0||) / (N(|Re λ1|^2 - (||F2|| + ||F0||)^2 + J^2)))`.
/// The second term is dropped for a real spectrum; `J` falls back to
/// `||F1||` when unknown.
pub fn stability_limit(summary: &SpectralSummary, level: usize) -> Result<f64> {
    let nf = level as f64;
    let mut limit = if summary.norm_f1 > 0.0 {
        1.0 / (nf * summary.norm_f1)
    } else {
        f64::INFINITY
    };
    if !summary.real_spectrum() {
        let lam = summary.re_lambda1.abs();
        let ac = summary.norm_f2 + summary.norm_f0;
        if lam <= ac {
            return Err(Error::HypothesisUnverified(format!(
                "|Re lambda_1| = {lam} does not exceed ||F2|| + ||F0|| = {ac}"
            )));
        }
        let j = summary.imag_max.unwrap_or(summary.norm_f1);
        limit = limit.min(2.0 * (lam - ac) / (nf * (lam * lam - ac * ac + j * j)));
    }
    Ok(limit)
}

/// Step size meeting both the accuracy target `gε/4` and the stability limit.
pub fn choose_step(summary: &SpectralSummary, level: usize, t_final: f64, g: f64, epsilon: f64) -> Result<f64> {
    let s = summary.norm_f2 + summary.norm_f1 + summary.norm_f0;
    let accuracy = g * epsilon
        / (12.0 * (level as f64).powf(2.5) * t_final * (s * s + summary.norm_f0_prime));
    Ok(accuracy.min(stability_limit(summary, level)?))
}

/// `δ`, `N`, `h`, `m = p = ceil(T/h)` for a rescaled summary. The step is
/// then shortened to `T/m` so the grid ends exactly at `T`.
pub fn plan(summary: &SpectralSummary, t_final: f64, epsilon: f64, level_cap: usize) -> Result<PipelinePlan> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let g = summary.g;
    let delta_err = g * epsilon / (1.0 + epsilon);
    let level = choose_truncation(summary, t_final, delta_err, level_cap)?;
    let h = choose_step(summary, level, t_final, g, epsilon)?;
    let m = (t_final / h).ceil().max(1.0) as usize;
    Ok(PipelinePlan {
        epsilon,
        delta_err,
        level,
        h: t_final / m as f64,
        m,
        p: m,
        g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::PowerIteration;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> SparseMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut e = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = next();
                if v.abs() > 0.3 {
                    e.push((r, c, v));
                }
            }
        }
        SparseMatrix::from_triplets(rows, cols, e).unwrap()
    }

    fn sample_ode(n: usize, seed: u64, forced: bool) -> QuadraticOde {
        let f0 = if forced {
            Forcing::Harmonic {
                profile: (0..n).map(|i| 0.1 * (i as f64 + 1.0)).collect(),
                omega: 3.0,
                phase: 0.2,
            }
        } else {
            Forcing::Zero
        };
        let u: Vec<f64> = (0..n).map(|i| 0.3 - 0.1 * i as f64).collect();
        QuadraticOde::new(random_matrix(n, n * n, seed), random_matrix(n, n, seed + 1), f0, u, 1.0).unwrap()
    }

    #[test]
    fn raising_block_norm_scales_with_level() {
        let f2 = random_matrix(2, 4, 7);
        let a = crate::linalg::singular_values(&f2.to_dense())[0];
        for j in 1..=4 {
            let blk = transfer_block(&f2, 2, j, BlockKind::Raising).unwrap();
            let dense = crate::linalg::singular_values(&blk.to_dense())[0];
            assert!(dense <= j as f64 * a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn scalar_blocks_are_level_multiples() {
        let f = SparseMatrix::from_triplets(1, 1, vec![(0, 0, 0.7)]).unwrap();
        for j in 1..=5 {
            for kind in [BlockKind::Raising, BlockKind::Diagonal] {
                let blk = transfer_block(&f, 1, j, kind).unwrap();
                assert_eq!(blk.nnz(), 1);
                assert_relative_eq!(blk.get(0, 0), 0.7 * j as f64, max_relative = 1e-15);
                assert_relative_eq!(
                    blk.spectral_norm(PowerIteration::default()),
                    j as f64 * 0.7,
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn diagonal_block_acts_on_tensor_powers_as_derivative() {
        // A^j_j u^{⊗j} = d/dt u^{⊗j} for du/dt = F1 u.
        let f1 = random_matrix(3, 3, 11);
        let u = [0.4, -0.2, 0.7];
        let f1u = f1.apply(&u);
        let blk = transfer_block(&f1, 3, 2, BlockKind::Diagonal).unwrap();
        let lhs = blk.apply(&crate::linalg::kron(&u, &u));
        let rhs: Vec<f64> = crate::linalg::kron(&f1u, &u)
            .iter()
            .zip(crate::linalg::kron(&u, &f1u))
            .map(|(a, b)| a + b)
            .collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert_relative_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn transfer_block_rejects_wrong_factor_shape() {
        let f = SparseMatrix::zeros(2, 3);
        assert!(matches!(
            transfer_block(&f, 2, 2, BlockKind::Raising),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn dimension_matches_geometric_sum() {
        for (n, level) in [(1, 4), (2, 3), (3, 4), (14, 4)] {
            let (_, delta) = block_offsets(n, level);
            let expect = if n == 1 { level } else { (n.pow(level as u32 + 1) - n) / (n - 1) };
            assert_eq!(delta, expect);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let ode = sample_ode(3, 5, true);
        assert!(matches!(CarlemanSystem::build(&ode, 6, 1000), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn exact_lift_is_fixed_by_carleman_dynamics_up_to_truncation() {
        // For N large enough, A y(u) + b reproduces d/dt of the lift except in the last block.
        let ode = sample_ode(2, 3, true);
        let sys = CarlemanSystem::build(&ode, 3, DEFAULT_NNZ_BUDGET).unwrap();
        let u = [0.25, -0.15];
        let y = sys.lift(&u);
        let mut ay = vec![0.0; sys.delta];
        sys.apply(0.4, &y, &mut ay);
        let mut b = vec![0.0; 2];
        sys.forcing(0.4, &mut b);
        let mut du = vec![0.0; 2];
        let mut scratch = vec![0.0; 2];
        ode.rhs(0.4, &u, &mut du, &mut scratch);
        for k in 0..2 {
            assert_relative_eq!(ay[k] + b[k], du[k], epsilon = 1e-14);
        }
        // Block 2: d/dt (u⊗u) = du⊗u + u⊗du.
        let d2: Vec<f64> = crate::linalg::kron(&du, &u)
            .iter()
            .zip(crate::linalg::kron(&u, &du))
            .map(|(a, b)| a + b)
            .collect();
        for (k, v) in d2.iter().enumerate() {
            assert_relative_eq!(ay[2 + k], *v, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn matrix_free_matches_explicit(seed in 0u64..500, n in 1usize..4, level in 1usize..5, t in 0.0f64..2.0, forced in any::<bool>()) {
            let ode = sample_ode(n, seed, forced);
            let sys = CarlemanSystem::build(&ode, level, DEFAULT_NNZ_BUDGET).unwrap();
            let y: Vec<f64> = (0..sys.delta).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
            let a = sys.assemble(t).unwrap();
            let explicit = a.apply(&y);
            let mut free = vec![0.0; sys.delta];
            sys.apply(t, &y, &mut free);
            let scale = explicit.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (e, f) in explicit.iter().zip(&free) {
                prop_assert!((e - f).abs() <= 1e-13 * scale);
            }
        }

        #[test]
        fn initial_vector_norm_identity(u in prop::collection::vec(-0.9f64..0.9, 1..4), level in 1usize..6) {
            let y = initial_vector(&u, level);
            let un = norm(&u);
            let expect: f64 = (1..=level).map(|j| un.powi(2 * j as i32)).sum();
            prop_assert!((norm(&y).powi(2) - expect).abs() <= 1e-13 * expect.max(1e-300));
        }

        #[test]
        fn padded_layout_round_trips(u in prop::collection::vec(-1.0f64..1.0, 1..4), level in 1usize..5) {
            let layout = PaddedLayout { n: u.len(), level };
            let y = initial_vector(&u, level);
            let padded = layout.pad(&y);
            prop_assert_eq!(&padded, &padded_initial_vector(&u, level));
            prop_assert_eq!(layout.unpad(&padded), y.clone());
            for i in 0..y.len() {
                prop_assert_eq!(layout.to_unpadded(layout.to_padded(i)), Some(i));
            }
        }
    }

    fn summary(a: f64, lam: f64, c: f64, u: f64) -> SpectralSummary {
        SpectralSummary {
            n: 1,
            norm_f2: a,
            norm_f1: lam,
            norm_f0: c,
            norm_f0_prime: 0.0,
            re_lambda1: -lam,
            imag_max: Some(0.0),
            u_in_norm: u,
            r: (u * a + c / u) / lam,
            r_minus: None,
            r_plus: None,
            g: u,
            q: 1.0,
            dissipative: true,
            homogeneous: c == 0.0,
        }
    }

    #[test]
    fn truncation_formula_example() {
        let s = summary(0.25, 1.0, 0.0, 0.5);
        assert_eq!(truncation_formula(&s, 1.0, 0.05).unwrap(), 4);
        // N = 4 leaves 4 * 0.25 * 0.5^5 = 0.03125 > δ/2; one more level suffices.
        assert_eq!(choose_truncation(&s, 1.0, 0.05, 12).unwrap(), 5);
    }

    #[test]
    fn truncation_requires_rescaled_input() {
        let s = summary(0.25, 1.0, 0.0, 1.5);
        assert!(matches!(truncation_formula(&s, 1.0, 0.05), Err(Error::NotRescaled { .. })));
        assert_eq!(truncation_formula(&summary(0.0, 1.0, 0.1, 0.5), 1.0, 0.05).unwrap(), 1);
    }

    #[test]
    fn truncation_cap_is_reported() {
        let s = summary(0.25, 1.0, 0.0, 0.99);
        assert!(matches!(choose_truncation(&s, 1.0, 1e-6, 12), Err(Error::TruncationCap { .. })));
    }

    #[test]
    fn complex_spectrum_tightens_step() {
        let mut s = summary(0.1, 1.0, 0.1, 0.5);
        s.norm_f1 = 5.0;
        let real = stability_limit(&s, 3).unwrap();
        assert_relative_eq!(real, 1.0 / 15.0, max_relative = 1e-15);
        s.imag_max = Some(4.0);
        let complex = stability_limit(&s, 3).unwrap();
        let term: f64 = 2.0 * (1.0 - 0.2) / (3.0 * (1.0 - 0.04 + 16.0));
        assert_relative_eq!(complex, term.min(real), max_relative = 1e-15);
        s.imag_max = None;
        let unknown = stability_limit(&s, 3).unwrap();
        let term: f64 = 2.0 * (1.0 - 0.2) / (3.0 * (1.0 - 0.04 + 25.0));
        assert_relative_eq!(unknown, term.min(real), max_relative = 1e-15);
    }

    #[test]
    fn plan_grid_ends_at_final_time() {
        let s = summary(0.3, 1.0, 0.0, 0.49);
        let p = plan(&s, 1.0, 0.1, 12).unwrap();
        assert_relative_eq!(p.h * p.m as f64, 1.0, max_relative = 1e-14);
        assert_eq!(p.m, p.p);
        assert!(choose_step(&s, p.level, 1.0, s.g, 0.1).unwrap() >= p.h);
    }
}
