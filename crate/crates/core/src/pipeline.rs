//! End-to-end runs: the ε-driven linearize, discretize and solve chain,
//! and the truncation-level convergence experiment for Burgers.

use crate::bounds::{carleman_bound, carleman_bound_homogeneous, end_to_end_error, euler_bound_formula, BoundsReport, BoundsSample};
use crate::carleman::{choose_step, choose_truncation, nnz_budget, stability_limit, CarlemanSystem, PipelinePlan, DEFAULT_LEVEL_CAP};
use crate::error::{Error, Result};
use crate::integrate::{euler_carleman_observe, integrate_reference_observe, rk4_carleman_observe, Method, Trajectory};
use crate::linalg::distance;
use crate::linear_system::{BlockLinearSystem, SolutionDiagnostics, DENSE_SVD_LIMIT};
use crate::ode::{rescale, spectral_summary, QuadraticOde, Rescaled, SpectralOptions, SpectralSummary};

/// Largest `(m + p + 1) Δ` for which `Y` is formed and its residual checked.
pub const EXPLICIT_SOLVE_LIMIT: usize = 2_000_000;

/// Default RK4 substeps per Euler step for the pipeline oracles. The
/// planned steps are small enough that RK4 error is far below Euler error.
pub const DEFAULT_REFINE: usize = 4;

/// Work cap, in vector entries touched, for the RK4 oracles.
pub const ORACLE_WORK_CAP: f64 = 4e9;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub epsilon: f64,
    pub level: Option<usize>,
    pub h: Option<f64>,
    /// Copies of the final block; defaults to `m`.
    pub p: Option<usize>,
    pub level_cap: usize,
    /// RK4 substeps per Euler step for the oracles; adaptive when `None`.
    pub refine: Option<usize>,
    /// Number of recorded times (plus the final time).
    pub samples: usize,
    pub spectral: SpectralOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            epsilon: 0.1,
            level: None,
            h: None,
            p: None,
            level_cap: DEFAULT_LEVEL_CAP,
            refine: None,
            samples: 200,
            spectral: SpectralOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    /// Summary of the original system.
    pub summary: SpectralSummary,
    pub rescaled: Rescaled,
    pub plan: PipelinePlan,
    pub delta: usize,
    pub refine: usize,
    /// First block of the Euler iterates, mapped back to original units.
    pub trajectory: Trajectory,
    /// RK4 solution of the original system at the same times.
    pub reference: Trajectory,
    pub bounds: BoundsReport,
    pub diagnostics: SolutionDiagnostics,
}

impl PipelineOutcome {
    /// Plan and outcome lines; the spectral summary is reported separately.
    pub fn plan_lines(&self) -> crate::report::KeyValues {
        let mut kv = crate::report::KeyValues::default();
        kv.push_f64("gamma", self.rescaled.gamma);
        kv.push_f64("epsilon", self.plan.epsilon);
        kv.push_f64("delta_err", self.plan.delta_err);
        kv.push("level", self.plan.level);
        kv.push("delta", self.delta);
        kv.push_f64("h", self.plan.h);
        kv.push("m", self.plan.m);
        kv.push("p", self.plan.p);
        kv.push("oracle_refine", self.refine);
        kv.push_f64("end_to_end_error", self.bounds.end_to_end.error);
        kv
    }
}

fn refine_factor(requested: Option<usize>, m: usize, delta: usize) -> usize {
    requested.unwrap_or_else(|| {
        let cap = ORACLE_WORK_CAP / (4.0 * m as f64 * delta as f64);
        (cap.floor() as usize).clamp(1, DEFAULT_REFINE)
    })
}

/// Applies the accuracy plan, or the explicit `level` / `h` overrides.
pub fn resolve_plan(summary: &SpectralSummary, t_final: f64, opts: &PipelineOptions) -> Result<PipelinePlan> {
    if !(opts.epsilon > 0.0 && opts.epsilon <= 1.0) {
        return Err(Error::EpsilonOutOfRange(opts.epsilon));
    }
    let g = summary.g;
    let delta_err = g * opts.epsilon / (1.0 + opts.epsilon);
    let level = match opts.level {
        Some(0) => return Err(Error::ParameterOutOfRange("truncation level must be at least 1".into())),
        Some(n) => n,
        None => choose_truncation(summary, t_final, delta_err, opts.level_cap)?,
    };
    let h = match opts.h {
        Some(h) if !(h > 0.0) => return Err(Error::ParameterOutOfRange(format!("step {h}"))),
        Some(h) => h,
        None => choose_step(summary, level, t_final, g, opts.epsilon)?,
    };
    let m = (t_final / h).ceil().max(1.0) as usize;
    Ok(PipelinePlan {
        epsilon: opts.epsilon,
        delta_err,
        level,
        h: t_final / m as f64,
        m,
        p: opts.p.unwrap_or(m),
        g,
    })
}

/// Checks the hypotheses that make the chain meaningful at all.
pub fn check_admissible(summary: &SpectralSummary) -> Result<()> {
    if !summary.dissipative {
        return Err(Error::NonDissipative { re_lambda1: summary.re_lambda1 });
    }
    if !(summary.r < 1.0) {
        return Err(Error::RNotBelowOne { r: summary.r });
    }
    Ok(())
}

/// Rescale, choose `N` and `h`, integrate, and compare against RK4
/// oracles for both the nonlinear and the linearized systems.
pub fn run_pipeline(ode: &QuadraticOde, opts: &PipelineOptions) -> Result<PipelineOutcome> {
    let summary = spectral_summary(ode, &opts.spectral)?;
    check_admissible(&summary)?;
    let rescaled = rescale(ode, &summary)?;
    let rs = &rescaled.summary;
    let t_final = ode.t_final;
    let plan = resolve_plan(rs, t_final, opts)?;
    let (level, h, m) = (plan.level, plan.h, plan.m);
    let sys = CarlemanSystem::build(&rescaled.ode, level, nnz_budget())?;
    let delta = sys.delta;
    let refine = refine_factor(opts.refine, m, delta);
    let stride = (m / opts.samples.max(1)).max(1);
    let sampled = |k: usize| k.is_multiple_of(stride) || k == m;
    let gamma = rescaled.gamma;

    // Euler: first block at the sample times, all block norms, final state.
    let mut trajectory = Trajectory::with_capacity(m / stride + 2);
    let mut euler_norms = Vec::with_capacity(m + 1);
    let store_full = (m / stride + 2) * delta <= 20_000_000;
    let mut euler_samples: Vec<Vec<f64>> = Vec::new();
    let y_final = euler_carleman_observe(&sys, h, m, |k, t, y| {
        euler_norms.push(sys.block_norms(y));
        if sampled(k) {
            trajectory.push(t, &y[..sys.n()].iter().map(|v| v / gamma).collect::<Vec<_>>());
            if store_full {
                euler_samples.push(y.to_vec());
            }
        }
    })?;

    // Nonlinear oracle on the rescaled system.
    let hf = h / refine as f64;
    let mut u_samples: Vec<Vec<f64>> = Vec::with_capacity(m / stride + 2);
    let mut reference = Trajectory::with_capacity(m / stride + 2);
    let u_final = integrate_reference_observe(&rescaled.ode, hf, m * refine, Method::Rk4, |k, _, u| {
        if k % refine == 0 && sampled(k / refine) {
            let t = (k / refine) as f64 * h;
            u_samples.push(u.to_vec());
            reference.push(t, &u.iter().map(|v| v / gamma).collect::<Vec<_>>());
        }
    })?;

    // Linear oracle ŷ and the per-time comparisons.
    let homogeneous = rs.homogeneous;
    let mut samples = Vec::with_capacity(u_samples.len());
    let mut bound_err = None;
    let mut idx = 0;
    let y_hat = rk4_carleman_observe(&sys, hf, m * refine, |k, _, y| {
        if k % refine != 0 || !sampled(k / refine) {
            return;
        }
        let t = (k / refine) as f64 * h;
        let lift = sys.lift(&u_samples[idx]);
        let eta = distance(&lift, y);
        let eta1 = distance(&lift[..sys.n()], &y[..sys.n()]);
        let euler = if store_full { distance(&euler_samples[idx], y) } else { f64::NAN };
        let eta_bound = match carleman_bound(rs, level, t) {
            Ok(b) => b,
            Err(e) => {
                bound_err.get_or_insert(e);
                f64::NAN
            }
        };
        samples.push(BoundsSample {
            t,
            eta_bound,
            eta_empirical: eta,
            eta1_empirical: eta1,
            euler_empirical: euler,
        });
        idx += 1;
    })?;
    if let Some(e) = bound_err {
        return Err(e);
    }
    let euler_empirical = distance(&y_hat, &y_final);

    let eta_bound = carleman_bound(rs, level, t_final)?;
    let euler_bound = euler_bound_formula(rs, level, t_final, h);
    let limit = stability_limit(rs, level)?;
    let end_to_end = end_to_end_error(&u_final, &y_final[..sys.n()])?;
    let delta_b = eta_bound + euler_bound;
    let epsilon_bound = if delta_b < rs.g { delta_b / (rs.g - delta_b) } else { f64::INFINITY };
    let hypotheses = vec![
        ("dissipative".to_string(), rs.dissipative),
        ("R_below_one".to_string(), rs.r < 1.0),
        ("rescaled".to_string(), rs.u_in_norm < 1.0),
        ("step_stable".to_string(), h <= limit * (1.0 + 1e-12)),
        ("eta_below_g4".to_string(), eta_bound <= rs.g / 4.0),
        ("euler_below_g4".to_string(), euler_bound <= rs.g / 4.0),
    ];
    let bounds = BoundsReport {
        level,
        h,
        m,
        t_final,
        epsilon: opts.epsilon,
        r: rs.r,
        eta_bound,
        eta1_bound_homogeneous: if homogeneous {
            Some(carleman_bound_homogeneous(rs, level, 1, t_final)?)
        } else {
            None
        },
        euler_bound,
        eta_empirical_max: samples.iter().map(|s| s.eta_empirical).fold(0.0, f64::max),
        euler_empirical,
        end_to_end,
        epsilon_bound,
        hypotheses,
        samples,
    };

    let dim = (m + plan.p + 1) * delta;
    let diagnostics = if dim <= EXPLICIT_SOLVE_LIMIT {
        let bls = if dim <= DENSE_SVD_LIMIT {
            BlockLinearSystem::assemble(&sys, h, m, plan.p, rs.q, nnz_budget())?
        } else {
            BlockLinearSystem::new(&sys, h, m, plan.p, rs.q)?
        };
        let (_, mut diag) = bls.solve()?;
        if bls.matrix.is_some() {
            diag.kappa_est = Some(bls.condition_number()?);
        }
        diag
    } else {
        SolutionDiagnostics::from_euler_norms(euler_norms, plan.p, level, rs.q)
    };

    Ok(PipelineOutcome {
        summary,
        rescaled: rescaled.clone(),
        plan,
        delta,
        refine,
        trajectory,
        reference,
        bounds,
        diagnostics,
    })
}

/// Per-level error series of the truncation-level experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub levels: Vec<usize>,
    pub deltas: Vec<usize>,
    pub times: Vec<f64>,
    /// `errors[i][k]`: `||y_1 - u||` at `times[k]` for `levels[i]`.
    pub errors: Vec<Vec<f64>>,
    /// Maximum over every step, not only the recorded ones.
    pub max_errors: Vec<f64>,
}

impl ConvergenceRun {
    pub fn strictly_decreasing(&self) -> bool {
        self.max_errors.windows(2).all(|w| w[1] < w[0])
    }

    /// Columns `t, err_N1, err_N2, ...`.
    pub fn write_series_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.levels.iter().map(|n| format!("err_N{n}")));
        wr.write_record(&header).map_err(crate::integrate::csv_err)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(self.errors.iter().map(|e| format!("{:.16e}", e[k])));
            wr.write_record(&row).map_err(crate::integrate::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Columns `N, delta, max_error`.
    pub fn write_max_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["N", "delta", "max_error"]).map_err(crate::integrate::csv_err)?;
        for ((n, d), e) in self.levels.iter().zip(&self.deltas).zip(&self.max_errors) {
            wr.write_record(&[n.to_string(), d.to_string(), format!("{e:.16e}")])
                .map_err(crate::integrate::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Euler on the Carleman system for each level, against forward Euler
/// on the nonlinear system with the same `nt` steps.
pub fn truncation_convergence(ode: &QuadraticOde, levels: &[usize], nt: usize, record_every: usize) -> Result<ConvergenceRun> {
    if nt == 0 || levels.is_empty() {
        return Err(Error::ParameterOutOfRange("need at least one level and one step".into()));
    }
    let h = ode.t_final / nt as f64;
    let every = record_every.max(1);
    let mut reference = Vec::with_capacity(nt + 1);
    let mut times = Vec::new();
    integrate_reference_observe(ode, h, nt, Method::Euler, |k, t, u| {
        reference.push(u.to_vec());
        if k % every == 0 || k == nt {
            times.push(t);
        }
    })?;
    let n = ode.dim();
    let mut deltas = Vec::with_capacity(levels.len());
    let mut errors = Vec::with_capacity(levels.len());
    let mut max_errors = Vec::with_capacity(levels.len());
    for &level in levels {
        let sys = CarlemanSystem::build(ode, level, nnz_budget())?;
        let mut series = Vec::with_capacity(times.len());
        let mut worst: f64 = 0.0;
        euler_carleman_observe(&sys, h, nt, |k, _, y| {
            let e = distance(&y[..n], &reference[k]);
            worst = worst.max(e);
            if k % every == 0 || k == nt {
                series.push(e);
            }
        })?;
        deltas.push(sys.delta);
        errors.push(series);
        max_errors.push(worst);
    }
    Ok(ConvergenceRun {
        levels: levels.to_vec(),
        deltas,
        times,
        errors,
        max_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::analytic_1d;
    use crate::models::build_logistic;

    #[test]
    fn logistic_meets_requested_accuracy() {
        let ode = build_logistic(0.3, 0.8, 1.0).unwrap();
        let out = run_pipeline(&ode, &PipelineOptions { epsilon: 0.2, ..Default::default() }).unwrap();
        assert!(out.bounds.end_to_end.error <= 0.2);
        assert!(out.bounds.all_certified(), "{:?}", out.bounds.hypotheses);
        // The RK4 reference agrees with the closed form.
        let s = out.summary;
        let exact = analytic_1d(s.norm_f2, s.re_lambda1, 0.0, 0.8, 1.0).unwrap();
        assert!((out.reference.final_state()[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn empirical_errors_stay_below_bounds() {
        let ode = build_logistic(0.3, 0.8, 1.0).unwrap();
        let out = run_pipeline(&ode, &PipelineOptions { epsilon: 0.2, ..Default::default() }).unwrap();
        for s in &out.bounds.samples {
            assert!(s.eta_empirical <= s.eta_bound + 1e-9);
            assert!(s.eta1_empirical <= s.eta_empirical + 1e-15);
        }
        assert!(out.bounds.euler_empirical <= out.bounds.euler_bound);
    }

    #[test]
    fn rejects_non_contracting_models() {
        let ode = build_logistic(1.5, 0.8, 1.0).unwrap();
        let err = run_pipeline(&ode, &PipelineOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RNotBelowOne { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn level_one_convergence_matches_linear_part() {
        let ode = build_logistic(0.3, 0.8, 1.0).unwrap();
        let run = truncation_convergence(&ode, &[1, 2, 3], 100, 10).unwrap();
        assert!(run.strictly_decreasing());
        assert_eq!(run.times.len(), 11);
    }
}
