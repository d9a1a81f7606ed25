//! The accuracy-driven pipeline on x' = -x + r x², checked against the
//! closed-form solution.
//!
//! cargo run --release --example logistic_pipeline

use carleman::integrate::analytic_1d;
use carleman::models::build_logistic;
use carleman::pipeline::{run_pipeline, PipelineOptions};

fn main() -> carleman::Result<()> {
    let (r, x0, t_final) = (0.3, 0.8, 1.0);
    let ode = build_logistic(r, x0, t_final)?;
    let exact = analytic_1d(r, -1.0, 0.0, x0, t_final)?;
    println!("exact x(T) = {exact:.12}");
    for eps in [0.2, 0.1, 0.05] {
        let out = run_pipeline(&ode, &PipelineOptions { epsilon: eps, ..Default::default() })?;
        let y = out.trajectory.final_state()[0];
        println!(
            "eps = {eps:<5} N = {:<2} m = {:<7} y_1(T) = {y:.12}  |y_1 - x| = {:.2e}  certified eps = {:.3e}",
            out.plan.level,
            out.plan.m,
            (y - exact).abs(),
            out.bounds.epsilon_bound
        );
    }
    Ok(())
}
