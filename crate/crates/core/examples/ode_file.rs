//! Reads a system from an `.ode` file, prints its summary and the size of
//! its Carleman embedding at increasing levels.
//!
//! cargo run --example ode_file -- [path]

use carleman::carleman::{nnz_budget, CarlemanSystem};
use carleman::config::{format_ode, read_ode};
use carleman::ode::{spectral_summary, SpectralOptions};

fn main() -> carleman::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/forced_pair.ode").to_string());
    let ode = read_ode(path.as_ref())?;
    let s = spectral_summary(&ode, &SpectralOptions::default())?;
    println!("n = {}, T = {}, R = {:.4}, Re(lambda_1) = {:.4}, dissipative = {}", s.n, ode.t_final, s.r, s.re_lambda1, s.dissipative);
    for level in 1..=6 {
        let sys = CarlemanSystem::build(&ode, level, nnz_budget())?;
        println!("N = {level}: Delta = {:>5}, nnz(A(0)) = {}", sys.delta, sys.assemble(0.0)?.nnz());
    }
    print!("\n{}", format_ode(&ode)?);
    Ok(())
}
