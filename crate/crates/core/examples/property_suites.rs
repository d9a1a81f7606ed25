//! Seeded random-instance checks of the error bounds.
//!
//! cargo run --release --example property_suites -- [seed] [count]

use carleman::suites::{contraction_suite, homogeneous_suite, truncation_suite, InstanceSpec};

fn main() -> carleman::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let count: usize = args.next().map_or(50, |s| s.parse().expect("count"));
    let spec = InstanceSpec::default();
    let reports = [
        truncation_suite(seed, count, &spec, 5, 2000)?,
        homogeneous_suite(seed, count, 8, 5.0, 2000)?,
        contraction_suite(seed, count, &InstanceSpec { n_max: 2, ..spec }, 4)?,
    ];
    for r in &reports {
        println!("{:<12} instances = {:<4} failures = {:<3} worst ratio = {:.4}", r.name, r.instances, r.failures, r.worst_ratio);
        for note in &r.notes {
            println!("    {note}");
        }
    }
    reports[0].write_csv(std::io::stdout().lock())
}
