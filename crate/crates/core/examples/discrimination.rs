//! Nonlinear amplification of the distinguishability of two nearly
//! parallel states.
//!
//! cargo run --example discrimination

use std::f64::consts::SQRT_2;

use carleman::discrimination::{copies_trace_distance, sweep, target_overlap, time_scaling_slope};

fn main() -> carleman::Result<()> {
    let eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5];
    let runs = sweep(&eps, SQRT_2)?;
    println!("target overlap 3/sqrt(10) = {:.6}", target_overlap());
    println!("{:>8} {:>10} {:>10} {:>10} {:>14}", "eps", "T", "t*", "overlap", "copies needed");
    for run in &runs {
        // Linear evolution: copies until the trace distance reaches the same level.
        let goal = (1.0 - target_overlap().powi(2)).sqrt();
        let copies = (1..).find(|&k| copies_trace_distance(run.epsilon, k) >= goal).unwrap();
        println!("{:>8.0e} {:>10.5} {:>10.5} {:>10.6} {:>14}", run.epsilon, run.t, run.t_star, run.overlap, copies);
    }
    if let Some(slope) = time_scaling_slope(&runs) {
        println!("dT / dlog(1/(2 eps)) at the smallest eps: {slope:.4}");
    }
    Ok(())
}
