//! Nonlinear amplification of the distinguishability of two pure states.
//!
//! Two states `ψ = (1, 1)/√2` and `φ = (cos(θ+π/4), sin(θ+π/4))` with
//! `2 sin²(θ/2) = ε` overlap in `1 - ε`. Evolving their amplitudes under
//! `x' = -x + r x²` (componentwise) leaves `ψ` fixed up to normalization
//! while driving `φ` towards the `w` axis; after time `T = O(log 1/ε)` the
//! overlap is at most `3/√10`. Linear, norm-preserving evolution would need
//! `Ω(1/ε)` copies for the same task.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::io::Write;

use crate::error::{Error, Result};
use crate::integrate::{analytic_1d, blowup_time};

/// `1 - 3/√10`: the largest ε for which the target overlap is nontrivial.
pub fn epsilon_limit() -> f64 {
    1.0 - 3.0 / 10f64.sqrt()
}

/// Overlap threshold `3/√10` reached when `w/v >= 2`.
pub fn target_overlap() -> f64 {
    3.0 / 10f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminationRun {
    pub epsilon: f64,
    pub r: f64,
    pub theta: f64,
    pub v0: f64,
    pub w0: f64,
    /// First time at which `w(T) = 2 max_t v(t)`.
    pub t: f64,
    /// Blow-up time of the `w` component.
    pub t_star: f64,
    /// `w(T) / v(T)`.
    pub k_ratio: f64,
    /// `|<ψ(T)|φ(T)>|` after normalization, `(K+1)/√(2K²+2)`.
    pub overlap: f64,
}

impl DiscriminationRun {
    /// Closed-form `log(1 + 1/(√(2ε-ε²) - ε))`, equal to `t*` when `r = √2`.
    pub fn t_star_bound(&self) -> f64 {
        t_star_bound(self.epsilon)
    }
}

pub fn t_star_bound(epsilon: f64) -> f64 {
    (1.0 + 1.0 / ((2.0 * epsilon - epsilon * epsilon).sqrt() - epsilon)).ln()
}

fn evolve(r: f64, x0: f64, t: f64) -> Result<f64> {
    analytic_1d(r, -1.0, 0.0, x0, t)
}

/// Finds the amplification time for one overlap defect `ε`.
pub fn run(epsilon: f64, r: f64) -> Result<DiscriminationRun> {
    if !(epsilon > 0.0 && epsilon < epsilon_limit()) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if r < SQRT_2 {
        return Err(Error::RTooSmall(r));
    }
    let theta = 2.0 * (epsilon / 2.0).sqrt().asin();
    let v0 = (theta + FRAC_PI_4).cos();
    let w0 = (theta + FRAC_PI_4).sin();
    let t_star = blowup_time(r, -1.0, 0.0, w0)?.ok_or_else(|| {
        Error::ParameterOutOfRange(format!("w0 = {w0} does not exceed 1/r; no amplification"))
    })?;
    // v starts below the repelling point 1/r and decays, so its maximum is
    // at t = 0; the probe near t* covers the remaining case.
    let v_max = v0.max(evolve(r, v0, t_star * (1.0 - 1e-9))?);
    let target = 2.0 * v_max;
    let (mut lo, mut hi) = (0.0, t_star);
    if w0 >= target {
        hi = 0.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match evolve(r, w0, mid) {
            Ok(w) if w < target => lo = mid,
            _ => hi = mid,
        }
    }
    let t = hi;
    let v = evolve(r, v0, t)?;
    let w = evolve(r, w0, t)?;
    let k = w / v;
    Ok(DiscriminationRun {
        epsilon,
        r,
        theta,
        v0,
        w0,
        t,
        t_star,
        k_ratio: k,
        overlap: (k + 1.0) / (2.0 * k * k + 2.0).sqrt(),
    })
}

pub fn sweep(epsilons: &[f64], r: f64) -> Result<Vec<DiscriminationRun>> {
    epsilons.iter().map(|&e| run(e, r)).collect()
}

/// Slope of `T` against `log(1/(2ε))` between the two smallest `ε`.
pub fn time_scaling_slope(runs: &[DiscriminationRun]) -> Option<f64> {
    let mut sorted: Vec<&DiscriminationRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let (a, b) = (sorted.first()?, sorted.get(1)?);
    let la = (1.0 / (2.0 * a.epsilon)).ln();
    let lb = (1.0 / (2.0 * b.epsilon)).ln();
    Some((a.t - b.t) / (la - lb))
}

/// Trace distance of `k` copies of states with overlap `1 - ε`.
pub fn copies_trace_distance(epsilon: f64, k: u32) -> f64 {
    (1.0 - (1.0 - epsilon).powi(2 * k as i32)).sqrt()
}

/// CSV with columns `epsilon,r,T,t_star,K_T,overlap_T`.
pub fn write_sweep_csv<W: Write>(runs: &[DiscriminationRun], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epsilon", "r", "T", "t_star", "K_T", "overlap_T"])
        .map_err(crate::integrate::csv_err)?;
    for run in runs {
        wr.write_record(
            [run.epsilon, run.r, run.t, run.t_star, run.k_ratio, run.overlap]
                .iter()
                .map(|v| format!("{v:.16e}")),
        )
        .map_err(crate::integrate::csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn overlap_reaches_target() {
        for eps in [1e-2, 1e-3, 1e-4] {
            let run = run(eps, SQRT_2).unwrap();
            assert!(run.overlap <= target_overlap() + 1e-12);
            assert!(run.t < run.t_star_bound());
            assert_relative_eq!(run.t_star, run.t_star_bound(), max_relative = 1e-12);
            assert_relative_eq!((run.theta / 2.0).sin().powi(2) * 2.0, eps, max_relative = 1e-12);
        }
    }

    #[test]
    fn small_epsilon_reference_values() {
        let r = run(1e-4, SQRT_2).unwrap();
        assert!((r.t - 3.572).abs() < 1e-3, "T = {}", r.t);
        assert!((r.k_ratio - 2.985).abs() < 1e-3, "K = {}", r.k_ratio);
    }

    #[test]
    fn slope_approaches_one_half() {
        let runs = sweep(&[1e-3, 1e-4], SQRT_2).unwrap();
        let s = time_scaling_slope(&runs).unwrap();
        assert!((s - 0.5).abs() < 0.05, "slope {s}");
    }

    #[test]
    fn out_of_range_inputs() {
        assert!(matches!(run(0.06, SQRT_2), Err(Error::EpsilonOutOfRange(_))));
        assert!(matches!(run(0.0, SQRT_2), Err(Error::EpsilonOutOfRange(_))));
        assert!(matches!(run(1e-3, 1.2), Err(Error::RTooSmall(_))));
    }

    #[test]
    fn copies_distance_is_below_linear_bound() {
        for k in [1, 10, 100, 1000] {
            let eps = 1e-3;
            assert!(copies_trace_distance(eps, k) <= (2.0 * k as f64 * eps).sqrt());
        }
    }

    proptest! {
        #[test]
        fn amplification_invariants(log_eps in -6.0f64..-1.4, extra in 0.0f64..2.0) {
            let eps = 10f64.powf(log_eps);
            let r = SQRT_2 + extra;
            let run = run(eps, r).unwrap();
            prop_assert!(run.w0 > run.v0);
            prop_assert!(run.t < run.t_star);
            prop_assert!(run.k_ratio >= 2.0 * (1.0 - 1e-9));
            prop_assert!(run.overlap <= target_overlap() + 1e-9);
            // w increases; v decreases whenever it starts below 1/r.
            let w_half = evolve(r, run.w0, 0.5 * run.t).unwrap();
            let v_half = evolve(r, run.v0, 0.5 * run.t).unwrap();
            prop_assert!(w_half >= run.w0);
            if run.v0 <= 1.0 / r {
                prop_assert!(v_half <= run.v0);
            }
        }
    }

    #[test]
    fn sweep_csv_has_documented_header() {
        let runs = sweep(&[1e-2], SQRT_2).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&runs, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("epsilon,r,T,t_star,K_T,overlap_T\n"));
    }
}
