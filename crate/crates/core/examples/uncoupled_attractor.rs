//! Identical uncoupled copies of x' = f2 x² + f1 x + f0 decay to the
//! stable root x1 instead of zero, so ||u(t)|| stays inside
//! (sqrt(n) x1, sqrt(n) x0).
//!
//! cargo run --release --example uncoupled_attractor

use carleman::integrate::{integrate_reference, Method};
use carleman::linalg::norm;
use carleman::models::{build_uncoupled, UncoupledParams};
use carleman::pipeline::{run_pipeline, PipelineOptions};

fn main() -> carleman::Result<()> {
    let p = UncoupledParams { t_final: 20.0, ..UncoupledParams::default() };
    let ode = build_uncoupled(&p)?;
    let root_n = (p.n as f64).sqrt();
    println!("R = {:.4}, x1 = {:.6}", p.ratio(), p.stable_root());
    let traj = integrate_reference(&ode, 1e-3, 20_000, Method::Rk4, 2000)?;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        println!("t = {t:>5.1}  ||u|| = {:.6}  in ({:.6}, {:.6})", norm(u), root_n * p.stable_root(), root_n * p.x0);
    }

    let ode = build_uncoupled(&UncoupledParams::default())?;
    let out = run_pipeline(&ode, &PipelineOptions { epsilon: 0.05, ..Default::default() })?;
    let b = &out.bounds;
    println!(
        "\npipeline eps = 0.05: N = {}, h = {:.3e}, ||u - y_1|| / (||u|| - ||u - y_1||) = {:.3e}",
        out.plan.level, out.plan.h, b.end_to_end.bound
    );
    Ok(())
}
