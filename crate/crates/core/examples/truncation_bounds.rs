//! Truncation error of the Carleman embedding against its bounds for
//! x' = -x + r x², using the closed-form solution as reference.
//!
//! cargo run --example truncation_bounds

use carleman::bounds::{carleman_bound, carleman_bound_homogeneous, carleman_bound_homogeneous_uniform};
use carleman::carleman::{nnz_budget, CarlemanSystem};
use carleman::integrate::{analytic_1d, rk4_carleman};
use carleman::models::build_logistic;
use carleman::ode::{spectral_summary, SpectralOptions};

fn main() -> carleman::Result<()> {
    let (r, x0, t_final, level) = (0.3, 0.8, 2.0, 6);
    let ode = build_logistic(r, x0, t_final)?;
    let summary = spectral_summary(&ode, &SpectralOptions::default())?;
    let sys = CarlemanSystem::build(&ode, level, nnz_budget())?;
    let steps = 2000;
    let traj = rk4_carleman(&sys, t_final / steps as f64, steps, 200)?;
    println!("R = {:.3}, N = {level}", summary.r);
    println!("{:>5} {:>11} {:>11} {:>11} {:>11} {:>11}", "t", "|eta|", "bound", "|eta_1|", "tight_1", "uniform_1");
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let x = analytic_1d(r, -1.0, 0.0, x0, *t)?;
        let eta: f64 = (1..=level).map(|j| (x.powi(j as i32) - y[j - 1]).powi(2)).sum::<f64>().sqrt();
        println!(
            "{t:>5.2} {eta:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            carleman_bound(&summary, level, *t)?,
            (x - y[0]).abs(),
            carleman_bound_homogeneous(&summary, level, 1, *t)?,
            carleman_bound_homogeneous_uniform(&summary, level, 1)
        );
    }
    Ok(())
}
