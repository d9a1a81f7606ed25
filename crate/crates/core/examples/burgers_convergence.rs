//! Truncation-level convergence for the forced viscous Burgers equation.
//! Writes the error series as CSV to stdout.
//!
//! cargo run --release --example burgers_convergence -- [N_max] [nt]

use carleman::models::{build_burgers, BurgersParams};
use carleman::ode::{spectral_summary, SpectralOptions};
use carleman::pipeline::truncation_convergence;

fn main() -> carleman::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_max: usize = args.next().map_or(4, |s| s.parse().expect("N_max"));
    let nt: usize = args.next().map_or(4000, |s| s.parse().expect("nt"));
    let p = BurgersParams::default();
    let ode = build_burgers(&p)?;
    let summary = spectral_summary(&ode, &SpectralOptions { spectrum: Some(p.spectrum()), ..Default::default() })?;
    eprintln!("unknowns = {}, viscosity = {}, T = {:.4}, R = {:.2}", p.unknowns(), p.viscosity(), ode.t_final, summary.r);

    let levels: Vec<usize> = (1..=n_max).collect();
    let run = truncation_convergence(&ode, &levels, nt, nt / 100)?;
    for ((n, d), e) in run.levels.iter().zip(&run.deltas).zip(&run.max_errors) {
        eprintln!("N = {n}: Delta = {d:>6}, max_t error = {e:.4e}");
    }
    run.write_series_csv(std::io::stdout().lock())
}
