//! SEIR epidemic model: spectral summary, the contraction ratio R and a
//! reference trajectory.
//!
//! cargo run --example seir

use carleman::integrate::{integrate_reference, Method};
use carleman::models::{build_seir, SeirParams};
use carleman::ode::{rescale, spectral_summary, SpectralOptions};

fn main() -> carleman::Result<()> {
    let p = SeirParams::default();
    let ode = build_seir(&p)?;
    let summary = spectral_summary(&ode, &SpectralOptions { spectrum: Some(p.spectrum()), ..Default::default() })?;
    println!("R = {:.3}", summary.r);
    println!("Re(lambda_1) = {:.6}, ||F2|| = {:.3e}, ||F0|| = {}", summary.re_lambda1, summary.norm_f2, summary.norm_f0);
    if let (Some(lo), Some(hi)) = (summary.r_minus, summary.r_plus) {
        println!("norm envelope roots: r- = {lo:.4}, r+ = {hi:.4e}");
    }
    let rescaled = rescale(&ode, &summary)?;
    println!("rescaling factor = {:.4e}, rescaled ||u_in|| = {:.4}", rescaled.gamma, rescaled.summary.u_in_norm);

    let steps = 1000;
    let traj = integrate_reference(&ode, ode.t_final / steps as f64, steps, Method::Rk4, 100)?;
    println!("\n{:>6} {:>14} {:>12} {:>12}", "day", "S", "E", "I");
    for (t, u) in traj.times.iter().zip(&traj.states) {
        println!("{t:>6.1} {:>14.1} {:>12.1} {:>12.1}", u[0], u[1], u[2]);
    }
    Ok(())
}
