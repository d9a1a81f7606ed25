//! Command-line entry point. Every command reads an optional experiment
//! config, applies flag overrides, validates paths and then writes its
//! results as CSV and `key = value` text into the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::carleman::{nnz_budget, CarlemanSystem};
use crate::config::{format_ode, DiscriminationParams, ExperimentConfig, LogisticParams, ModelConfig};
use crate::discrimination::{sweep, time_scaling_slope, write_sweep_csv};
use crate::error::{Error, Result};
use crate::integrate::{integrate_reference, Method};
use crate::models::{BurgersParams, SeirParams};
use crate::ode::{spectral_summary, QuadraticOde, SpectralOptions, SpectralSummary};
use crate::pipeline::{check_admissible, run_pipeline, truncation_convergence, PipelineOptions, PipelineOutcome};
use crate::report::KeyValues;
use crate::suites::{homogeneous_suite, truncation_suite, InstanceSpec};

#[derive(Debug, Parser)]
#[command(name = "carleman", version, about = "Carleman linearization of dissipative quadratic ODEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Truncation level (largest level for `burgers`).
    #[arg(long = "n", global = true)]
    pub level: Option<usize>,
    /// Euler step size.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Requested accuracy ε (overlap defect for `discriminate`).
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Rescale, choose N and h, integrate, and report bounds and diagnostics.
    Pipeline,
    /// Truncation-level convergence for forced viscous Burgers.
    Burgers,
    /// Spectral summary and reference trajectory of the SEIR model.
    Seir,
    /// Nonlinear state discrimination over a sweep of overlap defects.
    Discriminate,
    /// Truncation and Euler bounds against measured errors.
    Bounds,
    /// Write the system and its Carleman matrix at t = 0.
    DumpSystem,
}

impl Command {
    fn default_model(self) -> ModelConfig {
        match self {
            Command::Burgers => ModelConfig::Burgers(BurgersParams::default()),
            Command::Seir => ModelConfig::Seir(SeirParams::default()),
            Command::Discriminate => ModelConfig::Discrimination(DiscriminationParams::default()),
            _ => ModelConfig::Logistic(LogisticParams::default()),
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR USAGE: {first}");
            return 1;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), single_line(&e.to_string()));
            e.exit_code()
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Loads the config (or the command's default model) and applies flags.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::with_model(cli.command.default_model()),
    };
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.clone();
    }
    if let Some(n) = cli.level {
        cfg.run.level = Some(n);
        if cli.command == Command::Burgers {
            cfg.run.levels = (1..=n).collect();
        }
    }
    if let Some(h) = cli.h {
        cfg.run.h = Some(h);
    }
    if let Some(eps) = cli.eps {
        cfg.run.epsilon = eps;
        if let ModelConfig::Discrimination(d) = &mut cfg.model {
            d.epsilon = eps;
            d.epsilons = vec![eps];
        }
    }
    let expected = match cli.command {
        Command::Burgers => Some("burgers"),
        Command::Seir => Some("seir"),
        Command::Discriminate => Some("discrimination"),
        _ => None,
    };
    if let Some(kind) = expected {
        if model_name(&cfg.model) != kind {
            return Err(Error::Config(format!(
                "command needs a {kind} model, config has {}",
                model_name(&cfg.model)
            )));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_name(m: &ModelConfig) -> &'static str {
    match m {
        ModelConfig::Logistic(_) => "logistic",
        ModelConfig::Seir(_) => "seir",
        ModelConfig::Burgers(_) => "burgers",
        ModelConfig::Discrimination(_) => "discrimination",
        ModelConfig::Uncoupled(_) => "uncoupled",
        ModelConfig::File(_) => "file",
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cfg.output.directory)?;
    match cli.command {
        Command::Pipeline => cmd_pipeline(&cfg, true),
        Command::Bounds => cmd_pipeline(&cfg, false),
        Command::Burgers => cmd_burgers(&cfg),
        Command::Seir => cmd_seir(&cfg),
        Command::Discriminate => cmd_discriminate(&cfg),
        Command::DumpSystem => cmd_dump_system(&cfg),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_kv(dir: &Path, name: &str, kv: &KeyValues) -> Result<()> {
    let mut w = create(dir, name)?;
    kv.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn spectral_options(cfg: &ExperimentConfig) -> SpectralOptions {
    let spectrum = match &cfg.model {
        ModelConfig::Seir(p) => Some(p.spectrum()),
        ModelConfig::Burgers(p) => Some(p.spectrum()),
        _ => None,
    };
    SpectralOptions {
        spectrum,
        ..SpectralOptions::default()
    }
}

fn summary_kv(s: &SpectralSummary) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.push("n", s.n);
    kv.push("R", format!("{:.3}", s.r));
    kv.push_f64("R_exact", s.r);
    kv.push_f64("norm_f2", s.norm_f2);
    kv.push_f64("norm_f1", s.norm_f1);
    kv.push_f64("norm_f0", s.norm_f0);
    kv.push_f64("norm_f0_prime", s.norm_f0_prime);
    kv.push_f64("re_lambda1", s.re_lambda1);
    kv.push_opt("imag_max", s.imag_max);
    kv.push_f64("u_in_norm", s.u_in_norm);
    kv.push_opt("r_minus", s.r_minus);
    kv.push_opt("r_plus", s.r_plus);
    kv.push_f64("g", s.g);
    kv.push_f64("q", s.q);
    kv.push("dissipative", s.dissipative);
    kv.push("homogeneous", s.homogeneous);
    kv
}

fn pipeline_options(cfg: &ExperimentConfig, ode: &QuadraticOde) -> PipelineOptions {
    let h = match cfg.run.m {
        Some(m) if m > 0 => Some(ode.t_final / m as f64),
        _ => cfg.run.h,
    };
    PipelineOptions {
        epsilon: cfg.run.epsilon,
        level: cfg.run.level,
        h,
        p: cfg.run.p,
        refine: cfg.run.refine,
        samples: cfg.run.samples,
        spectral: spectral_options(cfg),
        ..PipelineOptions::default()
    }
}

/// `pipeline` writes everything; `bounds` only the bounds report.
fn cmd_pipeline(cfg: &ExperimentConfig, full: bool) -> Result<()> {
    let dir = &cfg.output.directory;
    let ode = cfg.build_ode()?;
    let opts = pipeline_options(cfg, &ode);
    // The summary is written before planning so that inadmissible or
    // oversized models still leave their parameters behind.
    let summary = spectral_summary(&ode, &opts.spectral)?;
    let kv = summary_kv(&summary);
    write_kv(dir, "summary.txt", &kv)?;
    print!("{}", kv.render());
    check_admissible(&summary)?;
    let out = run_pipeline(&ode, &opts)?;
    write_outcome(dir, &out, full)?;
    if !full && cfg.run.instances > 0 {
        run_suites(dir, cfg.run.seed, cfg.run.instances)?;
    }
    let b = &out.bounds;
    println!("level = {}\nh = {:e}\nm = {}", out.plan.level, out.plan.h, out.plan.m);
    println!("end_to_end_error = {:e}\nepsilon = {}", b.end_to_end.error, b.epsilon);
    if !b.all_certified() {
        let failed: Vec<&str> = b.hypotheses.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
        return Err(Error::HypothesisUnverified(failed.join(", ")));
    }
    Ok(())
}

pub fn write_outcome(dir: &Path, out: &PipelineOutcome, full: bool) -> Result<()> {
    let mut kv = summary_kv(&out.summary);
    kv.extend(out.plan_lines());
    write_kv(dir, "summary.txt", &kv)?;
    write_kv(dir, "bounds.txt", &out.bounds.key_values())?;
    let mut w = create(dir, "bounds.csv")?;
    out.bounds.write_samples_csv(&mut w)?;
    w.flush()?;
    if full {
        let mut w = create(dir, "trajectory.csv")?;
        out.trajectory.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "reference.csv")?;
        out.reference.write_csv(&mut w)?;
        w.flush()?;
        write_kv(dir, "diagnostics.txt", &out.diagnostics.summary())?;
        let stride = (out.diagnostics.block_norms.len() / 200).max(1);
        let mut w = create(dir, "block_norms.csv")?;
        out.diagnostics.write_norms_csv(&mut w, stride)?;
        w.flush()?;
    }
    Ok(())
}

/// Seeded truncation and homogeneous suites, one CSV each.
fn run_suites(dir: &Path, seed: u64, count: usize) -> Result<()> {
    let spec = InstanceSpec::default();
    let reports = [
        truncation_suite(seed, count, &spec, 5, 2000)?,
        homogeneous_suite(seed, count, 8, 5.0, 2000)?,
    ];
    let mut kv = KeyValues::default();
    for r in &reports {
        let mut w = create(dir, &format!("suite_{}.csv", r.name))?;
        r.write_csv(&mut w)?;
        w.flush()?;
        kv.push(&format!("{}.instances", r.name), r.instances);
        kv.push(&format!("{}.violations", r.name), r.failures);
    }
    write_kv(dir, "suites.txt", &kv)?;
    print!("{}", kv.render());
    Ok(())
}

fn cmd_burgers(cfg: &ExperimentConfig) -> Result<()> {
    let ModelConfig::Burgers(p) = &cfg.model else {
        unreachable!("checked in resolve_config")
    };
    let dir = &cfg.output.directory;
    let ode = cfg.build_ode()?;
    let summary = spectral_summary(&ode, &spectral_options(cfg))?;
    let run = truncation_convergence(&ode, &cfg.run.levels, cfg.run.nt, cfg.run.record_every)?;
    let mut w = create(dir, "burgers_errors.csv")?;
    run.write_series_csv(&mut w)?;
    w.flush()?;
    let mut w = create(dir, "burgers_max_error.csv")?;
    run.write_max_csv(&mut w)?;
    w.flush()?;
    let mut kv = summary_kv(&summary);
    kv.push("nx", p.nx);
    kv.push("nt", cfg.run.nt);
    kv.push_f64("reynolds", p.reynolds);
    kv.push_f64("t_final", ode.t_final);
    for (n, e) in run.levels.iter().zip(&run.max_errors) {
        kv.push_f64(&format!("max_error.N{n}"), *e);
    }
    kv.push("strictly_decreasing", run.strictly_decreasing());
    write_kv(dir, "summary.txt", &kv)?;
    print!("{}", kv.render());
    Ok(())
}

fn cmd_seir(cfg: &ExperimentConfig) -> Result<()> {
    let dir = &cfg.output.directory;
    let ode = cfg.build_ode()?;
    let summary = spectral_summary(&ode, &spectral_options(cfg))?;
    let kv = summary_kv(&summary);
    write_kv(dir, "summary.txt", &kv)?;
    let steps = cfg.run.nt;
    let traj = integrate_reference(&ode, ode.t_final / steps as f64, steps, Method::Rk4, cfg.run.record_every)?;
    let mut w = create(dir, "seir_trajectory.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    print!("{}", kv.render());
    Ok(())
}

fn cmd_discriminate(cfg: &ExperimentConfig) -> Result<()> {
    let ModelConfig::Discrimination(p) = &cfg.model else {
        unreachable!("checked in resolve_config")
    };
    let dir = &cfg.output.directory;
    let eps = if p.epsilons.is_empty() { vec![p.epsilon] } else { p.epsilons.clone() };
    let runs = sweep(&eps, p.r)?;
    let mut w = create(dir, "discrimination.csv")?;
    write_sweep_csv(&runs, &mut w)?;
    w.flush()?;
    let mut kv = KeyValues::default();
    kv.push_f64("r", p.r);
    for run in &runs {
        kv.push_f64(&format!("T.{:e}", run.epsilon), run.t);
        kv.push_f64(&format!("overlap.{:e}", run.epsilon), run.overlap);
    }
    kv.push_opt("time_scaling_slope", time_scaling_slope(&runs));
    write_kv(dir, "summary.txt", &kv)?;
    print!("{}", kv.render());
    Ok(())
}

fn cmd_dump_system(cfg: &ExperimentConfig) -> Result<()> {
    let dir = &cfg.output.directory;
    let ode = cfg.build_ode()?;
    let level = cfg.run.level.unwrap_or(2);
    let sys = CarlemanSystem::build(&ode, level, nnz_budget())?;
    std::fs::write(dir.join("system.ode"), format_ode(&ode)?)?;
    let a = sys.assemble(0.0)?;
    let mut w = create(dir, "carleman_matrix.txt")?;
    a.write_triplets(&mut w)?;
    w.flush()?;
    let mut b = vec![0.0; sys.delta];
    sys.forcing(0.0, &mut b[..sys.n()]);
    let mut w = create(dir, "carleman_initial.csv")?;
    let mut wr = csv::Writer::from_writer(&mut w);
    wr.write_record(["index", "y_in", "b0"]).map_err(crate::integrate::csv_err)?;
    for (i, (y, f)) in sys.initial_vector().iter().zip(&b).enumerate() {
        wr.write_record(&[i.to_string(), format!("{y:.16e}"), format!("{f:.16e}")])
            .map_err(crate::integrate::csv_err)?;
    }
    wr.flush()?;
    drop(wr);
    w.flush()?;
    let mut kv = KeyValues::default();
    kv.push("n", ode.dim());
    kv.push("level", level);
    kv.push("delta", sys.delta);
    kv.push("nnz", a.nnz());
    write_kv(dir, "summary.txt", &kv)?;
    print!("{}", kv.render());
    Ok(())
}
