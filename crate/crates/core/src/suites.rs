//! Seeded random instances and the empirical checks of the error bounds
//! run over them.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bounds::{carleman_bound, carleman_bound_homogeneous, carleman_bound_homogeneous_uniform, euler_bound};
use crate::carleman::{plan, CarlemanSystem, PipelinePlan};
use crate::error::{Error, Result};
use crate::integrate::{analytic_1d, euler_carleman_observe, integrate_reference, rk4_carleman_observe, Method};
use crate::linalg::{distance, norm, singular_values};
use crate::linear_system::{kappa_bound, BlockLinearSystem};
use crate::ode::{rescale, spectral_summary, Forcing, QuadraticOde, Rescaled, SpectralOptions, SpectralSummary};
use crate::sparse::SparseMatrix;

/// Ranges for random dissipative systems. `F1` is normal, so its
/// logarithmic norm equals `Re λ1`.
#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub n_max: usize,
    pub r_range: (f64, f64),
    /// Magnitudes of the real parts of the eigenvalues of `F1`.
    pub rate_range: (f64, f64),
    pub t_range: (f64, f64),
    pub forcing: bool,
    pub complex: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            n_max: 3,
            r_range: (0.1, 0.9),
            rate_range: (0.5, 2.0),
            t_range: (0.5, 2.0),
            forcing: true,
            complex: true,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let nv = norm(&v);
        if nv > 1e-3 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

fn to_sparse(m: &DMatrix<f64>) -> SparseMatrix {
    SparseMatrix::from_dense(m)
}

/// Draws one system with `R` inside `spec.r_range`.
pub fn random_ode(rng: &mut ChaCha8Rng, spec: &InstanceSpec) -> Result<QuadraticOde> {
    let n = rng.gen_range(1..=spec.n_max);
    let (lo, hi) = spec.rate_range;
    // Block-diagonal spectrum: real eigenvalues or rotation-scaling pairs.
    let mut d = DMatrix::<f64>::zeros(n, n);
    let mut i = 0;
    let mut lead = f64::NEG_INFINITY;
    while i < n {
        let re = -rng.gen_range(lo..hi);
        lead = lead.max(re);
        if spec.complex && i + 1 < n && rng.gen_bool(0.5) {
            let im = rng.gen_range(0.2..2.0);
            d[(i, i)] = re;
            d[(i + 1, i + 1)] = re;
            d[(i, i + 1)] = im;
            d[(i + 1, i)] = -im;
            i += 2;
        } else {
            d[(i, i)] = re;
            i += 1;
        }
    }
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| gaussian(rng));
    let q = g.qr().q();
    let f1 = &q * d * q.transpose();

    let mut f2 = DMatrix::<f64>::from_fn(n, n * n, |_, _| if rng.gen_bool(0.6) { gaussian(rng) } else { 0.0 });
    if f2.iter().all(|&v| v == 0.0) {
        f2[(0, 0)] = 1.0;
    }
    let f2_norm = singular_values(&f2)[0];

    let x0 = rng.gen_range(0.2..2.0);
    let u_in: Vec<f64> = unit_vector(rng, n).into_iter().map(|v| v * x0).collect();
    let r = rng.gen_range(spec.r_range.0..spec.r_range.1);
    let forcing_kind = if spec.forcing { rng.gen_range(0..3) } else { 0 };
    let alpha = if forcing_kind == 0 { 1.0 } else { rng.gen_range(0.2..1.0) };
    let lam = lead.abs();
    let a = alpha * r * lam / x0;
    let c = (1.0 - alpha) * r * lam * x0;
    let f2 = f2 * (a / f2_norm);
    let profile: Vec<f64> = unit_vector(rng, n).into_iter().map(|v| v * c).collect();
    let f0 = match forcing_kind {
        0 => Forcing::Zero,
        1 => Forcing::Constant(profile),
        _ => Forcing::Harmonic {
            profile,
            omega: rng.gen_range(0.5..5.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        },
    };
    let t_final = rng.gen_range(spec.t_range.0..spec.t_range.1);
    QuadraticOde::new(to_sparse(&f2), to_sparse(&f1), f0, u_in, t_final)
}

/// A random system together with its summary and dissipative rescaling.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ode: QuadraticOde,
    pub summary: SpectralSummary,
    pub rescaled: Rescaled,
}

pub fn prepare(ode: QuadraticOde) -> Result<Instance> {
    let summary = spectral_summary(&ode, &SpectralOptions::default())?;
    if !(summary.r < 1.0) {
        return Err(Error::RNotBelowOne { r: summary.r });
    }
    let rescaled = rescale(&ode, &summary)?;
    Ok(Instance { ode, summary, rescaled })
}

/// Outcome of one randomized suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Largest `empirical / bound` over the suite (or the suite's own metric).
    pub worst_ratio: f64,
    pub rows: Vec<Vec<f64>>,
    pub columns: Vec<&'static str>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.instances > 0
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns).map_err(crate::integrate::csv_err)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .map_err(crate::integrate::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Largest `||ŷ(t) - lift(u(t))||` and bound excess on a uniform grid.
///
/// Both trajectories use RK4 with `steps` steps, so their own errors are
/// far below the tolerance of the comparison.
pub fn truncation_errors(rescaled: &Rescaled, level: usize, steps: usize) -> Result<Vec<(f64, f64, f64)>> {
    let ode = &rescaled.ode;
    let h = ode.t_final / steps as f64;
    let reference = integrate_reference(ode, h, steps, Method::Rk4, 1)?;
    let sys = CarlemanSystem::build(ode, level, crate::carleman::nnz_budget())?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut failure = None;
    rk4_carleman_observe(&sys, h, steps, |k, t, y| {
        let lift = sys.lift(&reference.states[k]);
        let eta = distance(&lift, y);
        match carleman_bound(&rescaled.summary, level, t) {
            Ok(b) => out.push((t, eta, b)),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(out)
}

/// Truncation-bound suite over `count` random rescaled systems.
pub fn truncation_suite(seed: u64, count: usize, spec: &InstanceSpec, max_level: usize, steps: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    while rows.len() < count {
        let inst = match random_ode(&mut rng, spec).and_then(prepare) {
            Ok(i) => i,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        let level = rng.gen_range(1..=max_level);
        let errs = truncation_errors(&inst.rescaled, level, steps)?;
        let mut excess = f64::NEG_INFINITY;
        let mut eta_max: f64 = 0.0;
        for &(_, eta, b) in &errs {
            excess = excess.max(eta - b);
            eta_max = eta_max.max(eta);
            if b > 0.0 {
                worst = worst.max(eta / b);
            }
        }
        if excess > 1e-9 {
            failures += 1;
        }
        let bound_t = errs.last().map_or(0.0, |e| e.2);
        rows.push(vec![
            rows.len() as f64,
            inst.ode.dim() as f64,
            level as f64,
            inst.summary.r,
            eta_max,
            bound_t,
            excess,
        ]);
    }
    Ok(SuiteReport {
        name: "truncation".into(),
        instances: rows.len(),
        failures,
        worst_ratio: worst,
        rows,
        columns: vec!["instance", "n", "level", "R", "eta_max", "bound_T", "max_excess"],
        notes: vec![format!("{rejected} draws rejected before reaching {count} instances")],
    })
}

/// Homogeneous scalar suite: `x' = -λ x + a x²` checked against both
/// per-block bounds on `[0, t_final]`.
pub fn homogeneous_suite(seed: u64, count: usize, max_level: usize, t_final: f64, steps: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    while rows.len() < count {
        let lam = rng.gen_range(0.3..3.0);
        let x0 = rng.gen_range(0.05..2.0);
        let r = rng.gen_range(0.05..0.95);
        let a = r * lam / x0;
        let level = rng.gen_range(1..=max_level);
        let ode = QuadraticOde::new(
            SparseMatrix::from_triplets(1, 1, vec![(0, 0, a)])?,
            SparseMatrix::from_triplets(1, 1, vec![(0, 0, -lam)])?,
            Forcing::Zero,
            vec![x0],
            t_final,
        )?;
        let summary = spectral_summary(
            &ode,
            &SpectralOptions {
                g: Some(analytic_1d(a, -lam, 0.0, x0, t_final)?),
                ..SpectralOptions::default()
            },
        )?;
        let sys = CarlemanSystem::build(&ode, level, crate::carleman::nnz_budget())?;
        let h = t_final / steps as f64;
        let mut excess = f64::NEG_INFINITY;
        let mut ordering_ok = true;
        let mut fail = None;
        rk4_carleman_observe(&sys, h, steps, |_, t, y| {
            let x = match analytic_1d(a, -lam, 0.0, x0, t) {
                Ok(x) => x,
                Err(e) => {
                    fail = Some(e);
                    return;
                }
            };
            for j in 1..=level {
                let eta = (x.powi(j as i32) - y[j - 1]).abs();
                let bound = carleman_bound_homogeneous(&summary, level, j, t).unwrap_or(f64::NAN);
                excess = excess.max(eta - bound);
                if bound > 1e-12 {
                    worst = worst.max(eta / bound);
                }
            }
            let tight = carleman_bound_homogeneous(&summary, level, 1, t).unwrap_or(f64::NAN);
            if !(tight <= carleman_bound_homogeneous_uniform(&summary, level, 1) * (1.0 + 1e-15)) {
                ordering_ok = false;
            }
        })?;
        if let Some(e) = fail {
            return Err(e);
        }
        if excess > 1e-9 || !ordering_ok {
            failures += 1;
        }
        rows.push(vec![rows.len() as f64, level as f64, lam, x0, summary.r, excess, ordering_ok as u8 as f64]);
    }
    Ok(SuiteReport {
        name: "homogeneous".into(),
        instances: rows.len(),
        failures,
        worst_ratio: worst,
        rows,
        columns: vec!["instance", "level", "rate", "x0", "R", "max_excess", "tight_below_uniform"],
        notes: Vec::new(),
    })
}

/// A random system with a full accuracy plan.
#[derive(Debug, Clone)]
pub struct PlannedInstance {
    pub instance: Instance,
    pub plan: PipelinePlan,
}

fn draw_planned(rng: &mut ChaCha8Rng, spec: &InstanceSpec, level_cap: usize, max_steps: usize) -> Option<PlannedInstance> {
    let instance = random_ode(rng, spec).and_then(prepare).ok()?;
    let eps = rng.gen_range(0.1..1.0);
    let plan = plan(&instance.rescaled.summary, instance.ode.t_final, eps, level_cap).ok()?;
    if plan.m > max_steps {
        return None;
    }
    Some(PlannedInstance { instance, plan })
}

/// Draws `count` planned instances, rejecting those whose plan needs a
/// level above `level_cap` or more than `max_steps` steps.
pub fn planned_instances(seed: u64, count: usize, spec: &InstanceSpec, level_cap: usize, max_steps: usize) -> (Vec<PlannedInstance>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    while out.len() < count {
        match draw_planned(&mut rng, spec, level_cap, max_steps) {
            Some(p) => out.push(p),
            None => rejected += 1,
        }
    }
    (out, rejected)
}

/// `ŷ(T)` by RK4 with `refine` substeps per Euler step.
pub fn carleman_oracle(sys: &CarlemanSystem, h: f64, m: usize, refine: usize) -> Result<Vec<f64>> {
    rk4_carleman_observe(sys, h / refine as f64, m * refine, |_, _, _| {})
}

/// `||ŷ(T) - y^m||` for a step `h` and `m` steps.
pub fn euler_error(sys: &CarlemanSystem, oracle: &[f64], h: f64, m: usize) -> Result<f64> {
    let y = euler_carleman_observe(sys, h, m, |_, _, _| {})?;
    Ok(distance(oracle, &y))
}

/// Euler global-error suite: the bound and the first-order ratio under
/// step halving.
pub fn euler_suite(instances: &[PlannedInstance], refine: usize) -> Result<SuiteReport> {
    let mut rows = Vec::with_capacity(instances.len());
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (idx, p) in instances.iter().enumerate() {
        let r = &p.instance.rescaled;
        let sys = CarlemanSystem::build(&r.ode, p.plan.level, crate::carleman::nnz_budget())?;
        let bound = euler_bound(&r.summary, p.plan.level, r.ode.t_final, p.plan.h)?;
        let oracle = carleman_oracle(&sys, p.plan.h, p.plan.m, refine)?;
        let e1 = euler_error(&sys, &oracle, p.plan.h, p.plan.m)?;
        let e2 = euler_error(&sys, &oracle, p.plan.h / 2.0, 2 * p.plan.m)?;
        let ratio = e1 / e2;
        let ok_bound = e1 <= bound;
        let ok_ratio = (ratio - 2.0).abs() <= 0.1;
        if !ok_bound || !ok_ratio {
            failures += 1;
            notes.push(format!("instance {idx}: error {e1:e}, bound {bound:e}, ratio {ratio}"));
        }
        worst = worst.max(e1 / bound);
        rows.push(vec![idx as f64, p.plan.level as f64, p.plan.h, p.plan.m as f64, e1, bound, ratio]);
    }
    Ok(SuiteReport {
        name: "euler".into(),
        instances: rows.len(),
        failures,
        worst_ratio: worst,
        rows,
        columns: vec!["instance", "level", "h", "m", "error", "bound", "halving_ratio"],
        notes,
    })
}

/// Success-probability suite on planned instances with `m = p`.
pub fn probability_suite(instances: &[PlannedInstance]) -> Result<SuiteReport> {
    let mut rows = Vec::with_capacity(instances.len());
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (idx, p) in instances.iter().enumerate() {
        let r = &p.instance.rescaled;
        let sys = CarlemanSystem::build(&r.ode, p.plan.level, crate::carleman::nnz_budget())?;
        let bls = BlockLinearSystem::new(&sys, p.plan.h, p.plan.m, p.plan.p, r.summary.q)?;
        let (_, diag) = bls.solve()?;
        let exact = 1.0 / (18.0 * (p.plan.level as f64 * r.summary.q * r.summary.q));
        let ok = diag.p_measure >= diag.p_lower_general && diag.p_lower == exact;
        if !ok {
            failures += 1;
            notes.push(format!(
                "instance {idx}: p_measure {}, general bound {}",
                diag.p_measure, diag.p_lower_general
            ));
        }
        worst = worst.max(diag.p_lower_general / diag.p_measure);
        rows.push(vec![idx as f64, p.plan.level as f64, p.plan.m as f64, r.summary.q, diag.p_measure, diag.p_lower_general, diag.p_lower]);
    }
    Ok(SuiteReport {
        name: "probability".into(),
        instances: rows.len(),
        failures,
        worst_ratio: worst,
        rows,
        columns: vec!["instance", "level", "m", "q", "p_measure", "p_lower_general", "p_lower"],
        notes,
    })
}

/// Condition-number suite: dense `κ(L) <= 3(m+p+1)` and `||L|| <= 3`.
pub fn conditioning_suite(seed: u64, count: usize, spec: &InstanceSpec, max_level: usize, max_dim: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    while rows.len() < count {
        let Some(inst) = random_ode(&mut rng, spec).and_then(prepare).ok() else {
            continue;
        };
        let summary = &inst.rescaled.summary;
        let level = rng.gen_range(1..=max_level);
        let eps = rng.gen_range(0.1..1.0);
        let Ok(h) = crate::carleman::choose_step(summary, level, inst.ode.t_final, summary.g, eps) else {
            continue;
        };
        let sys = CarlemanSystem::build(&inst.rescaled.ode, level, crate::carleman::nnz_budget())?;
        let blocks = (max_dim / sys.delta).max(3);
        let m = rng.gen_range(1..=(blocks - 1) / 2);
        let p = rng.gen_range(1..=(blocks - 1 - m).min(m + 4));
        if (m + p + 1) * sys.delta > max_dim {
            continue;
        }
        let bls = BlockLinearSystem::assemble(&sys, h, m, p, summary.q, crate::carleman::nnz_budget())?;
        let kappa = bls.condition_number()?;
        let norm_l = bls.norm()?;
        let bound = kappa_bound(m, p);
        let ok = kappa <= bound && norm_l <= 3.0;
        if !ok {
            failures += 1;
            notes.push(format!("instance {}: kappa {kappa}, bound {bound}, ||L|| {norm_l}", rows.len()));
        }
        worst = worst.max(kappa / bound);
        rows.push(vec![rows.len() as f64, level as f64, h, m as f64, p as f64, kappa, bound, norm_l]);
    }
    Ok(SuiteReport {
        name: "conditioning".into(),
        instances: rows.len(),
        failures,
        worst_ratio: worst,
        rows,
        columns: vec!["instance", "level", "h", "m", "p", "kappa", "kappa_bound", "norm_L"],
        notes,
    })
}

/// Largest `||I + A(t) h||` over `samples` times, by dense SVD.
pub fn step_operator_norm(sys: &CarlemanSystem, h: f64, t_final: f64, samples: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..samples.max(1) {
        let t = t_final * i as f64 / (samples.max(2) - 1) as f64;
        let mut m = sys.assemble(t)?.to_dense() * h;
        for d in 0..sys.delta {
            m[(d, d)] += 1.0;
        }
        worst = worst.max(singular_values(&m)[0]);
    }
    Ok(worst)
}

/// Contractivity of one Euler step, `max_t ||I + A(t) h|| <= 1`, with `h`
/// from the step rule.
pub fn contraction_suite(seed: u64, count: usize, spec: &InstanceSpec, max_level: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    while rows.len() < count {
        let Some(inst) = random_ode(&mut rng, spec).and_then(prepare).ok() else {
            continue;
        };
        let summary = &inst.rescaled.summary;
        let level = rng.gen_range(1..=max_level);
        let Ok(h) = crate::carleman::stability_limit(summary, level) else {
            continue;
        };
        let sys = CarlemanSystem::build(&inst.rescaled.ode, level, crate::carleman::nnz_budget())?;
        let nrm = step_operator_norm(&sys, h, inst.ode.t_final, 16)?;
        if nrm > 1.0 + 1e-12 {
            failures += 1;
            notes.push(format!("instance {}: ||I + A h|| = {nrm}, R = {}", rows.len(), summary.r));
        }
        worst = worst.max(nrm);
        rows.push(vec![rows.len() as f64, level as f64, summary.r, h, nrm]);
    }
    Ok(SuiteReport {
        name: "contraction".into(),
        instances: rows.len(),
        failures,
        worst_ratio: worst,
        rows,
        columns: vec!["instance", "level", "R", "h", "step_norm"],
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_hit_the_target_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = InstanceSpec::default();
        for _ in 0..20 {
            let ode = random_ode(&mut rng, &spec).unwrap();
            let s = spectral_summary(&ode, &SpectralOptions::default()).unwrap();
            assert!(s.r < 0.9 + 1e-6, "R = {}", s.r);
            // Normal F1: ||F1|| equals the spectral radius.
            let f1 = ode.f1.to_dense();
            let ev = crate::linalg::dense_eigenvalues(&f1).unwrap();
            let rho = ev.iter().map(|e| e.0.hypot(e.1)).fold(0.0, f64::max);
            assert!((s.norm_f1 - rho).abs() <= 1e-8 * rho);
        }
    }

    #[test]
    fn seeded_suites_are_reproducible() {
        let spec = InstanceSpec::default();
        let a = truncation_suite(11, 3, &spec, 3, 200).unwrap();
        let b = truncation_suite(11, 3, &spec, 3, 200).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_truncation_suite_holds() {
        let r = truncation_suite(1, 10, &InstanceSpec::default(), 4, 500).unwrap();
        assert!(r.passed(), "{:?}", r.notes);
    }

    #[test]
    fn short_contraction_suite_holds() {
        let spec = InstanceSpec {
            n_max: 2,
            ..InstanceSpec::default()
        };
        let r = contraction_suite(5, 10, &spec, 3).unwrap();
        assert!(r.passed(), "{:?}", r.notes);
    }
}
