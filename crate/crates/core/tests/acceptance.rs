//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any
//! criterion fails.

use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

use carleman::carleman::{nnz_budget, CarlemanSystem};
use carleman::discrimination::{epsilon_limit, sweep, target_overlap, time_scaling_slope};
use carleman::integrate::euler_carleman;
use carleman::linear_system::BlockLinearSystem;
use carleman::models::{build_burgers, build_logistic, build_seir, build_uncoupled, BurgersParams, SeirParams, UncoupledParams};
use carleman::ode::{rescale, spectral_summary, Forcing, QuadraticOde, SpectralOptions};
use carleman::pipeline::{run_pipeline, truncation_convergence, PipelineOptions};
use carleman::sparse::SparseMatrix;
use carleman::suites::{
    conditioning_suite, euler_suite, homogeneous_suite, planned_instances, probability_suite, truncation_suite, InstanceSpec,
};

struct Ledger {
    failed: usize,
}

impl Ledger {
    fn record(&mut self, id: usize, name: &str, pass: bool, elapsed: Duration, details: &[String]) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} criterion {id}: {name} ({:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        for d in details {
            println!("    {d}");
        }
    }
}

fn seir(ledger: &mut Ledger) {
    let start = Instant::now();
    let p = SeirParams::default();
    let ode = build_seir(&p).unwrap();
    let s = spectral_summary(&ode, &SpectralOptions { spectrum: Some(p.spectrum()), ..Default::default() }).unwrap();
    let elapsed = start.elapsed();
    let pass = (s.r - 0.956).abs() <= 1e-3 && elapsed < Duration::from_secs(1);
    ledger.record(1, "SEIR R = 0.956 +- 0.001 in under 1 s", pass, elapsed, &[format!("R = {:.6}", s.r)]);
}

fn burgers(ledger: &mut Ledger) {
    let start = Instant::now();
    let p = BurgersParams::default();
    let ode = build_burgers(&p).unwrap();
    let s = spectral_summary(&ode, &SpectralOptions { spectrum: Some(p.spectrum()), ..Default::default() }).unwrap();
    let run = truncation_convergence(&ode, &[1, 2, 3, 4], 4000, 40).unwrap();
    let elapsed = start.elapsed();
    let e = &run.max_errors;
    let decreasing = run.strictly_decreasing();
    let tenfold = e[3] <= e[0] / 10.0;
    let r_ok = (39.0..=48.0).contains(&s.r);
    let pass = decreasing && tenfold && r_ok && elapsed < Duration::from_secs(600);
    ledger.record(
        2,
        "Burgers nx=16 nt=4000 Re=20: max error decreasing in N, error(4) <= error(1)/10, R in [39, 48]",
        pass,
        elapsed,
        &[
            format!("R = {:.4}, Delta(N=4) = {}", s.r, run.deltas[3]),
            format!("max errors N=1..4: {:.4e} {:.4e} {:.4e} {:.4e}", e[0], e[1], e[2], e[3]),
            format!("strictly decreasing: {decreasing}; error(1)/error(4) = {:.3}", e[0] / e[3]),
        ],
    );
}

fn truncation(ledger: &mut Ledger) {
    let start = Instant::now();
    let spec = InstanceSpec { n_max: 3, ..InstanceSpec::default() };
    let r = truncation_suite(2024, 200, &spec, 5, 2000).unwrap();
    ledger.record(
        3,
        "truncation bound on 200 random rescaled systems (n <= 3, N <= 5)",
        r.passed() && r.instances == 200,
        start.elapsed(),
        &[format!("violations = {}, largest eta/bound = {:.4}", r.failures, r.worst_ratio)],
    );
}

fn homogeneous(ledger: &mut Ledger) {
    let start = Instant::now();
    let r = homogeneous_suite(2025, 200, 8, 5.0, 2000).unwrap();
    ledger.record(
        4,
        "homogeneous per-block bounds on 1-D systems (N <= 8, t in [0, 5]), tight j=1 bound below uniform",
        r.passed(),
        start.elapsed(),
        &[format!("instances = {}, violations = {}", r.instances, r.failures)],
    );
}

fn euler_and_probability(ledger: &mut Ledger) {
    let start = Instant::now();
    let spec = InstanceSpec { n_max: 2, ..InstanceSpec::default() };
    let (inst, rejected) = planned_instances(2026, 50, &spec, 6, 20_000);
    let r = euler_suite(&inst, 100).unwrap();
    let ratios: Vec<f64> = r.rows.iter().map(|row| row[6]).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let mut details = vec![
        format!("instances = {}, rejected draws (plan above N = 6 or m > 20000) = {rejected}", r.instances),
        format!("violations = {}, largest error/bound = {:.4e}", r.failures, r.worst_ratio),
        format!("halving ratio range [{lo:.4}, {hi:.4}]"),
    ];
    details.extend(r.notes.iter().take(5).cloned());
    ledger.record(5, "Euler global error bound and first-order halving ratio 2.0 +- 0.1 on 50 systems", r.passed(), start.elapsed(), &details);

    let start = Instant::now();
    let r = probability_suite(&inst).unwrap();
    let mut details = vec![format!(
        "instances = {}, violations = {}, largest general_bound/p_measure = {:.4e}",
        r.instances, r.failures, r.worst_ratio
    )];
    details.extend(r.notes.iter().take(5).cloned());
    ledger.record(7, "p_measure above the general bound; p_lower = 1/(18 N q^2) exactly for m = p", r.passed(), start.elapsed(), &details);
}

fn conditioning(ledger: &mut Ledger) {
    let start = Instant::now();
    let spec = InstanceSpec { n_max: 2, ..InstanceSpec::default() };
    let r = conditioning_suite(2027, 50, &spec, 3, 2000).unwrap();
    let norm_max = r.rows.iter().map(|row| row[7]).fold(0.0, f64::max);
    let mut details = vec![format!(
        "instances = {}, violations = {}, largest kappa/bound = {:.4}, largest ||L|| = {:.4}",
        r.instances, r.failures, r.worst_ratio, norm_max
    )];
    details.extend(r.notes.iter().take(5).cloned());
    ledger.record(6, "dense-SVD kappa(L) <= 3(m+p+1) and ||L|| <= 3 on 50 systems with (m+p+1) Delta <= 2000", r.passed(), start.elapsed(), &details);
}

fn end_to_end(ledger: &mut Ledger) {
    let models: [(&str, QuadraticOde); 2] = [
        ("logistic", build_logistic(0.3, 0.8, 1.0).unwrap()),
        ("uncoupled", build_uncoupled(&UncoupledParams::default()).unwrap()),
    ];
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (name, ode) in &models {
        for eps in [0.2, 0.1, 0.05] {
            let t = Instant::now();
            let out = run_pipeline(ode, &PipelineOptions { epsilon: eps, ..Default::default() }).unwrap();
            let elapsed = t.elapsed();
            let e = &out.bounds.end_to_end;
            let ok = e.error <= eps && out.bounds.all_certified() && elapsed < Duration::from_secs(60);
            pass &= ok;
            details.push(format!(
                "{name} eps = {eps}: N = {}, m = {}, normalized error = {:.3e}, delta/(g - delta) = {:.3e}, certified bound = {:.3e}, {:.1} s",
                out.plan.level,
                out.plan.m,
                e.error,
                e.bound,
                out.bounds.epsilon_bound,
                elapsed.as_secs_f64()
            ));
        }
    }
    ledger.record(8, "requested eps in {0.2, 0.1, 0.05} met for logistic and uncoupled models, under 1 min each", pass, start.elapsed(), &details);
}

fn discrimination(ledger: &mut Ledger) {
    let start = Instant::now();
    let eps = [1e-2, 1e-3, 1e-4];
    let runs = sweep(&eps, SQRT_2).unwrap();
    let slope = time_scaling_slope(&runs).unwrap();
    let mut pass = (slope - 0.5).abs() <= 0.05;
    let mut details = Vec::new();
    for run in &runs {
        let ok = run.overlap <= target_overlap() + 1e-12 && run.t < run.t_star_bound();
        pass &= ok;
        details.push(format!(
            "eps = {:e}: T = {:.6}, bound = {:.6}, overlap = {:.6}, T/log(1/(2 eps)) = {:.4}",
            run.epsilon,
            run.t,
            run.t_star_bound(),
            run.overlap,
            run.t / (1.0 / (2.0 * run.epsilon)).ln()
        ));
    }
    details.push(format!("local slope dT/dlog(1/(2 eps)) at the smallest eps = {slope:.4} (eps limit {:.4})", epsilon_limit()));
    ledger.record(9, "discrimination overlap <= 3/sqrt(10), T below blow-up bound, time scaling 0.5 within 10%", pass, start.elapsed(), &details);
}

fn structural(ledger: &mut Ledger) {
    let start = Instant::now();
    let f2 = SparseMatrix::from_triplets(2, 4, vec![(0, 1, 0.2), (1, 0, -0.1), (1, 3, 0.15)]).unwrap();
    let f1 = SparseMatrix::from_triplets(2, 2, vec![(0, 0, -1.0), (0, 1, 0.3), (1, 0, -0.3), (1, 1, -1.2)]).unwrap();
    let f0 = Forcing::Harmonic { profile: vec![0.05, 0.02], omega: 3.0, phase: 0.4 };
    let ode = QuadraticOde::new(f2, f1, f0, vec![0.6, -0.4], 1.0).unwrap();
    let summary = spectral_summary(&ode, &SpectralOptions::default()).unwrap();
    let rescaled = rescale(&ode, &summary).unwrap();
    let sys = CarlemanSystem::build(&rescaled.ode, 3, nnz_budget()).unwrap();
    let (m, p) = (200, 150);
    let h = 1.0 / m as f64;
    let euler = euler_carleman(&sys, h, m).unwrap();
    let bls = BlockLinearSystem::new(&sys, h, m, p, rescaled.summary.q).unwrap();
    let (y, diag) = bls.solve().unwrap();
    let d = sys.delta;
    let bitwise = (0..=m).all(|k| y[k * d..(k + 1) * d] == euler.states[k][..]);
    let copies = (m + 1..=m + p).all(|k| y[k * d..(k + 1) * d] == y[m * d..(m + 1) * d]);
    let pass = bitwise && copies && diag.residual < 1e-12;
    ledger.record(
        10,
        "forward substitution equals Euler bitwise, blocks after m equal block m, residual < 1e-12",
        pass,
        start.elapsed(),
        &[format!("bitwise = {bitwise}, copies = {copies}, residual = {:.3e}", diag.residual)],
    );
}

fn main() {
    let mut ledger = Ledger { failed: 0 };
    seir(&mut ledger);
    burgers(&mut ledger);
    truncation(&mut ledger);
    homogeneous(&mut ledger);
    euler_and_probability(&mut ledger);
    conditioning(&mut ledger);
    end_to_end(&mut ledger);
    discrimination(&mut ledger);
    structural(&mut ledger);
    println!("{} of 10 criteria failed", ledger.failed);
    if ledger.failed > 0 {
        std::process::exit(1);
    }
}
