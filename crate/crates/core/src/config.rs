//! Text formats: the `.ode` system description and the experiment TOML.
//!
//! # ODE files
//!
//! ```text
//! # comments start with '#'
//! [system]
//! n = 2
//! T = 1.5
//!
//! [F2]            # "row col value", col = i * n + j for u_i u_j
//! 0 0 -0.25
//!
//! [F1]            # "row col value"
//! 0 0 -1
//! 1 1 -2
//!
//! [F0]
//! kind = harmonic # zero | constant | harmonic
//! omega = 6.283185307179586
//! phase = 0
//! 0 0 0.1         # "row 0 value" (a column vector)
//!
//! [initial]       # dense, whitespace separated
//! 0.5 0.25
//! ```
//!
//! Indices are zero based. `[system]` and `[initial]` are required, the
//! matrix sections default to empty and `[F0]` to `kind = zero`. Sections,
//! keys and matrix entries may appear only once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BurgersParams, SeirParams, UncoupledParams};
use crate::ode::{Forcing, QuadraticOde};
use crate::sparse::SparseMatrix;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

#[derive(Default)]
struct Section {
    line: usize,
    keys: BTreeMap<String, (usize, String)>,
    triplets: Vec<(usize, usize, usize, f64)>,
    values: Vec<(usize, f64)>,
}

fn parse_number<T: std::str::FromStr>(line: usize, token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{token}' as a number")))
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    const KNOWN: [&str; 5] = ["system", "F2", "F1", "F0", "initial"];
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !KNOWN.contains(&name) {
                return Err(parse_err(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(parse_err(line, format!("duplicate section [{name}]")));
            }
            sections.insert(name.to_string(), Section { line, ..Section::default() });
            current = Some(name.to_string());
            continue;
        }
        let Some(name) = current.as_deref() else {
            return Err(parse_err(line, "content before the first section"));
        };
        let sec = sections.get_mut(name).expect("current section exists");
        if let Some((k, v)) = content.split_once('=') {
            let key = k.trim().to_string();
            if sec.keys.contains_key(&key) {
                return Err(parse_err(line, format!("duplicate key '{key}' in [{name}]")));
            }
            sec.keys.insert(key, (line, v.trim().to_string()));
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match name {
            "initial" => {
                for tok in tokens {
                    sec.values.push((line, parse_number(line, tok)?));
                }
            }
            "F2" | "F1" | "F0" => {
                if tokens.len() != 3 {
                    return Err(parse_err(line, "expected 'row col value'"));
                }
                sec.triplets.push((
                    line,
                    parse_number(line, tokens[0])?,
                    parse_number(line, tokens[1])?,
                    parse_number(line, tokens[2])?,
                ));
            }
            _ => return Err(parse_err(line, format!("expected 'key = value' in [{name}]"))),
        }
    }
    Ok(sections)
}

fn take_key<T: std::str::FromStr>(sec: &mut Section, name: &str, key: &str) -> Result<Option<T>> {
    match sec.keys.remove(key) {
        Some((line, v)) => parse_number(line, &v).map(Some),
        None => {
            let _ = name;
            Ok(None)
        }
    }
}

fn reject_leftover_keys(sec: &Section, name: &str) -> Result<()> {
    if let Some((key, (line, _))) = sec.keys.iter().next() {
        return Err(parse_err(*line, format!("unknown key '{key}' in [{name}]")));
    }
    Ok(())
}

fn sparse_from(sec: &Section, name: &str, rows: usize, cols: usize) -> Result<SparseMatrix> {
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::with_capacity(sec.triplets.len());
    for &(line, r, c, v) in &sec.triplets {
        if r >= rows || c >= cols {
            return Err(parse_err(line, format!("[{name}] entry ({r}, {c}) outside {rows}x{cols}")));
        }
        if !v.is_finite() {
            return Err(parse_err(line, format!("[{name}] entry is not finite")));
        }
        if !seen.insert((r, c)) {
            return Err(parse_err(line, format!("duplicate [{name}] entry ({r}, {c})")));
        }
        entries.push((r, c, v));
    }
    SparseMatrix::from_unique_triplets(rows, cols, entries)
}

/// Parses an `.ode` document.
pub fn parse_ode(text: &str) -> Result<QuadraticOde> {
    let mut sections = split_sections(text)?;
    let mut system = sections
        .remove("system")
        .ok_or_else(|| parse_err(0, "missing [system] section"))?;
    let n: usize = take_key(&mut system, "system", "n")?.ok_or_else(|| parse_err(system.line, "[system] needs n"))?;
    let t_final: f64 = take_key(&mut system, "system", "T")?.ok_or_else(|| parse_err(system.line, "[system] needs T"))?;
    reject_leftover_keys(&system, "system")?;
    if n == 0 {
        return Err(parse_err(system.line, "n must be positive"));
    }

    let empty = Section::default();
    for name in ["F2", "F1"] {
        if let Some(sec) = sections.get(name) {
            reject_leftover_keys(sec, name)?;
        }
    }
    let f2 = sparse_from(sections.get("F2").unwrap_or(&empty), "F2", n, n * n)?;
    let f1 = sparse_from(sections.get("F1").unwrap_or(&empty), "F1", n, n)?;

    let f0 = match sections.remove("F0") {
        None => Forcing::Zero,
        Some(mut sec) => {
            let kind = sec.keys.remove("kind").map(|(_, v)| v).unwrap_or_else(|| "zero".into());
            let profile = || -> Result<Vec<f64>> {
                let m = sparse_from(&sec, "F0", n, 1)?;
                Ok((0..n).map(|i| m.get(i, 0)).collect())
            };
            let forcing = match kind.as_str() {
                "zero" => {
                    if !sec.triplets.is_empty() {
                        return Err(parse_err(sec.line, "[F0] kind = zero takes no entries"));
                    }
                    Forcing::Zero
                }
                "constant" => Forcing::Constant(profile()?),
                "harmonic" => {
                    let p = profile()?;
                    let omega: f64 = take_key(&mut sec, "F0", "omega")?.ok_or_else(|| parse_err(sec.line, "harmonic forcing needs omega"))?;
                    let phase: f64 = take_key(&mut sec, "F0", "phase")?.unwrap_or(0.0);
                    Forcing::Harmonic { profile: p, omega, phase }
                }
                other => return Err(parse_err(sec.line, format!("unknown forcing kind '{other}'"))),
            };
            reject_leftover_keys(&sec, "F0")?;
            forcing
        }
    };

    let initial = sections
        .remove("initial")
        .ok_or_else(|| parse_err(0, "missing [initial] section"))?;
    reject_leftover_keys(&initial, "initial")?;
    if initial.values.len() != n {
        return Err(parse_err(initial.line, format!("[initial] has {} values, expected {n}", initial.values.len())));
    }
    let u_in = initial.values.iter().map(|&(_, v)| v).collect();
    QuadraticOde::new(f2, f1, f0, u_in, t_final)
}

pub fn read_ode(path: &Path) -> Result<QuadraticOde> {
    let text = std::fs::read_to_string(path)?;
    parse_ode(&text)
}

fn write_matrix(out: &mut String, name: &str, m: &SparseMatrix) {
    let _ = writeln!(out, "\n[{name}]");
    for (r, c, v) in m.iter() {
        let _ = writeln!(out, "{r} {c} {v:e}");
    }
}

fn write_profile(out: &mut String, profile: &[f64]) {
    for (i, v) in profile.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(out, "{i} 0 {v:e}");
        }
    }
}

/// Serializes a system in the `.ode` format. Values use the shortest
/// representation that round-trips exactly.
pub fn format_ode(ode: &QuadraticOde) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "[system]\nn = {}\nT = {:e}", ode.dim(), ode.t_final);
    write_matrix(&mut out, "F2", &ode.f2);
    write_matrix(&mut out, "F1", &ode.f1);
    out.push_str("\n[F0]\n");
    match &ode.f0 {
        Forcing::Zero => out.push_str("kind = zero\n"),
        Forcing::Constant(p) => {
            out.push_str("kind = constant\n");
            write_profile(&mut out, p);
        }
        Forcing::Harmonic { profile, omega, phase } => {
            let _ = writeln!(out, "kind = harmonic\nomega = {omega:e}\nphase = {phase:e}");
            write_profile(&mut out, profile);
        }
        Forcing::Custom { .. } => {
            return Err(Error::Config("custom forcing has no file representation".into()));
        }
    }
    out.push_str("\n[initial]\n");
    let values: Vec<String> = ode.u_in.iter().map(|v| format!("{v:e}")).collect();
    out.push_str(&values.join(" "));
    out.push('\n');
    Ok(out)
}

/// Scalar `x' = -x + r x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticParams {
    pub r: f64,
    pub x0: f64,
    pub t_final: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { r: 0.3, x0: 0.8, t_final: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminationParams {
    pub r: f64,
    pub epsilon: f64,
    /// Sweep values for `discriminate`; `epsilon` alone is used when empty.
    pub epsilons: Vec<f64>,
}

impl Default for DiscriminationParams {
    fn default() -> Self {
        DiscriminationParams {
            r: std::f64::consts::SQRT_2,
            epsilon: 1e-2,
            epsilons: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileModel {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelConfig {
    Logistic(LogisticParams),
    Seir(SeirParams),
    Burgers(BurgersParams),
    Discrimination(DiscriminationParams),
    Uncoupled(UncoupledParams),
    File(FileModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub epsilon: f64,
    /// Overrides the model's final time.
    pub t_final: Option<f64>,
    /// Truncation level override (`levels` for the convergence experiment).
    pub level: Option<usize>,
    pub h: Option<f64>,
    /// Euler steps; overrides `h` with `T / m`.
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub seed: u64,
    pub levels: Vec<usize>,
    pub nt: usize,
    pub record_every: usize,
    pub samples: usize,
    pub refine: Option<usize>,
    /// Random instances per property suite run by `bounds`; none when 0.
    pub instances: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: 0.1,
            t_final: None,
            level: None,
            h: None,
            m: None,
            p: None,
            seed: 0,
            levels: vec![1, 2, 3, 4],
            nt: 4000,
            record_every: 10,
            samples: 200,
            refine: None,
            instances: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a config; relative model file paths resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let ModelConfig::File(f) = &mut cfg.model {
            if f.path.is_relative() {
                if let Some(dir) = path.parent() {
                    f.path = dir.join(&f.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn with_model(model: ModelConfig) -> Self {
        ExperimentConfig {
            model,
            run: RunConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Checks values and paths before any computation.
    pub fn validate(&self) -> Result<()> {
        if let ModelConfig::File(f) = &self.model {
            if !f.path.is_file() {
                return Err(Error::Config(format!("model file {} does not exist", f.path.display())));
            }
        }
        for fmt in &self.output.formats {
            if fmt != "csv" {
                return Err(Error::Config(format!("unsupported output format '{fmt}'")));
            }
        }
        if let Some(t) = self.run.t_final {
            if !(t > 0.0) {
                return Err(Error::Config(format!("run.t_final = {t} must be positive")));
            }
        }
        if self.run.nt == 0 || self.run.record_every == 0 || self.run.samples == 0 {
            return Err(Error::Config("nt, record_every and samples must be positive".into()));
        }
        if self.run.levels.contains(&0) {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        let out = &self.output.directory;
        if out.exists() && !out.is_dir() {
            return Err(Error::Config(format!("output path {} is not a directory", out.display())));
        }
        Ok(())
    }

    /// Builds the configured system, honouring `run.t_final`.
    pub fn build_ode(&self) -> Result<QuadraticOde> {
        let ode = match &self.model {
            ModelConfig::Logistic(p) => crate::models::build_logistic(p.r, p.x0, p.t_final)?,
            ModelConfig::Seir(p) => crate::models::build_seir(p)?,
            ModelConfig::Burgers(p) => crate::models::build_burgers(p)?,
            ModelConfig::Uncoupled(p) => crate::models::build_uncoupled(p)?,
            ModelConfig::File(f) => read_ode(&f.path)?,
            ModelConfig::Discrimination(p) => {
                let run = crate::discrimination::run(p.epsilon, p.r)?;
                crate::models::build_discrimination(p.r, [run.v0, run.w0], run.t)?
            }
        };
        match self.run.t_final {
            Some(t) => Ok(ode.with_t_final(t)),
            None => Ok(ode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_burgers, build_seir};

    const SAMPLE: &str = "\
# two modes
[system]
n = 2
T = 1.5

[F2]
0 0 -0.25
1 3 0.5

[F1]
0 0 -1
1 1 -2   # diagonal

[F0]
kind = harmonic
omega = 3
0 0 0.1

[initial]
0.5
0.25
";

    #[test]
    fn parses_sample() {
        let ode = parse_ode(SAMPLE).unwrap();
        assert_eq!(ode.dim(), 2);
        assert_eq!(ode.t_final, 1.5);
        assert_eq!(ode.f2.get(1, 3), 0.5);
        assert_eq!(ode.u_in, vec![0.5, 0.25]);
        assert!(matches!(ode.f0, Forcing::Harmonic { omega, phase, .. } if omega == 3.0 && phase == 0.0));
    }

    #[test]
    fn round_trips_models_exactly() {
        for ode in [
            build_seir(&SeirParams::default()).unwrap(),
            build_burgers(&BurgersParams::default()).unwrap(),
            parse_ode(SAMPLE).unwrap(),
        ] {
            let text = format_ode(&ode).unwrap();
            let back = parse_ode(&text).unwrap();
            assert_eq!(back.f2, ode.f2);
            assert_eq!(back.f1, ode.f1);
            assert_eq!(back.u_in, ode.u_in);
            assert_eq!(back.t_final, ode.t_final);
            let (mut a, mut b) = (vec![0.0; ode.dim()], vec![0.0; ode.dim()]);
            back.f0.eval(0.3, &mut a);
            ode.f0.eval(0.3, &mut b);
            assert_eq!(a, b);
            assert_eq!(format_ode(&back).unwrap(), text);
        }
    }

    #[test]
    fn rejects_duplicates_and_unknowns() {
        let dup_entry = SAMPLE.replace("1 1 -2", "0 0 -2");
        assert!(matches!(parse_ode(&dup_entry), Err(Error::Parse { line: 12, .. })));
        let dup_key = SAMPLE.replace("T = 1.5", "T = 1.5\nT = 2");
        assert!(parse_ode(&dup_key).is_err());
        let dup_section = format!("{SAMPLE}\n[F1]\n");
        assert!(parse_ode(&dup_section).is_err());
        let unknown = SAMPLE.replace("omega = 3", "omega = 3\nwidth = 1");
        assert!(parse_ode(&unknown).is_err());
        let out_of_range = SAMPLE.replace("1 3 0.5", "1 4 0.5");
        assert!(parse_ode(&out_of_range).is_err());
        let short = SAMPLE.replace("0.25\n", "");
        assert!(parse_ode(&short).is_err());
    }

    #[test]
    fn experiment_config_rejects_unknown_keys() {
        let ok = "[model]\ntype = \"seir\"\nr_tra = 0.13\n[run]\nepsilon = 0.2\n";
        let cfg = ExperimentConfig::parse(ok).unwrap();
        assert!(matches!(cfg.model, ModelConfig::Seir(p) if p.r_tra == 0.13));
        assert_eq!(cfg.run.epsilon, 0.2);
        for bad in [
            "[model]\ntype = \"seir\"\nbeta = 1\n",
            "[model]\ntype = \"logistic\"\n[run]\nepsilon = 0.2\nspeed = 3\n",
            "[model]\ntype = \"logistic\"\n[extra]\n",
            "[model]\ntype = \"weather\"\n",
        ] {
            assert!(ExperimentConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn validation_checks_paths() {
        let cfg = ExperimentConfig::with_model(ModelConfig::File(FileModel {
            path: PathBuf::from("/nonexistent/system.ode"),
        }));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
