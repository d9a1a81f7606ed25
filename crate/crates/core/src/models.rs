//! Concrete quadratic ODEs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Forcing, QuadraticOde, Spectrum};
use crate::sparse::SparseMatrix;

fn diagonal(values: &[f64]) -> SparseMatrix {
    SparseMatrix::from_triplets(
        values.len(),
        values.len(),
        values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
    )
    .expect("diagonal indices are in range")
}

/// Epidemic model with susceptible, exposed and infected compartments;
/// the recovered compartment is implied by the constant population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeirParams {
    pub population: f64,
    /// Individuals per day entering (and, proportionally, leaving).
    pub influx: f64,
    pub t_lat: f64,
    pub t_inf: f64,
    pub r_tra: f64,
    pub r_vac: f64,
    pub exposed_fraction: f64,
    pub infected_fraction: f64,
    pub t_final: f64,
}

impl Default for SeirParams {
    fn default() -> Self {
        SeirParams {
            population: 1e7,
            influx: 1.0,
            t_lat: 5.2,
            t_inf: 2.3,
            r_tra: 0.13,
            r_vac: 0.193,
            exposed_fraction: 1e-5,
            infected_fraction: 1e-5,
            t_final: 10.0,
        }
    }
}

impl SeirParams {
    pub fn initial_state(&self) -> Vec<f64> {
        let e = self.exposed_fraction * self.population;
        let i = self.infected_fraction * self.population;
        vec![self.population - e - i, e, i]
    }

    /// Rate of change of the recovered compartment.
    pub fn recovered_rate(&self, s: f64, _e: f64, i: f64, r: f64) -> f64 {
        -self.influx * r / self.population + self.r_vac * s + i / self.t_inf
    }

    /// `Re λ1 = -Λ/P - min(r_vac, 1/T_lat, 1/T_inf)`; `F1` is triangular.
    pub fn spectrum(&self) -> Spectrum {
        let leak = self.influx / self.population;
        Spectrum {
            re_lambda1: -leak - self.r_vac.min(1.0 / self.t_lat).min(1.0 / self.t_inf),
            imag_max: Some(0.0),
        }
    }
}

pub fn build_seir(p: &SeirParams) -> Result<QuadraticOde> {
    for (name, v) in [
        ("population", p.population),
        ("t_lat", p.t_lat),
        ("t_inf", p.t_inf),
        ("t_final", p.t_final),
    ] {
        if !(v > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("{name} = {v}")));
        }
    }
    if p.influx < 0.0 || p.r_tra < 0.0 || p.r_vac < 0.0 {
        return Err(Error::ParameterOutOfRange("rates must be non-negative".into()));
    }
    let leak = p.influx / p.population;
    let f1 = SparseMatrix::from_triplets(
        3,
        3,
        vec![
            (0, 0, -leak - p.r_vac),
            (1, 1, -leak - 1.0 / p.t_lat),
            (2, 1, 1.0 / p.t_lat),
            (2, 2, -leak - 1.0 / p.t_inf),
        ],
    )?;
    // S * I sits at column 0 * 3 + 2 of u ⊗ u.
    let tra = p.r_tra / p.population;
    let f2 = SparseMatrix::from_triplets(3, 9, vec![(0, 2, -tra), (1, 2, tra)])?;
    let f0 = Forcing::Constant(vec![p.influx, 0.0, 0.0]);
    QuadraticOde::new(f2, f1, f0, p.initial_state(), p.t_final)
}

/// Forced viscous Burgers equation on `[-L0/2, L0/2]` with homogeneous
/// Dirichlet ends, central differences on `nx` grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurgersParams {
    /// Grid points including both boundaries; `nx - 2` unknowns.
    pub nx: usize,
    pub reynolds: f64,
    pub u0: f64,
    pub l0: f64,
    /// Defaults to a third of the nonlinear time, `L0 / (3 U0)`.
    pub t_final: Option<f64>,
    /// Forcing amplitude; defaults to `U0`.
    pub forcing_amplitude: Option<f64>,
    /// Temporal frequency of the forcing in cycles per unit time.
    pub forcing_frequency: f64,
}

impl Default for BurgersParams {
    fn default() -> Self {
        BurgersParams {
            nx: 16,
            reynolds: 20.0,
            u0: 1.0,
            l0: 1.0,
            t_final: None,
            forcing_amplitude: None,
            forcing_frequency: 1.0,
        }
    }
}

impl BurgersParams {
    pub fn unknowns(&self) -> usize {
        self.nx - 2
    }

    pub fn dx(&self) -> f64 {
        self.l0 / (self.nx - 1) as f64
    }

    pub fn viscosity(&self) -> f64 {
        self.u0 * self.l0 / self.reynolds
    }

    pub fn t_final(&self) -> f64 {
        self.t_final.unwrap_or(self.l0 / (3.0 * self.u0))
    }

    /// Interior grid coordinates.
    pub fn grid(&self) -> Vec<f64> {
        (1..self.nx - 1).map(|i| -0.5 * self.l0 + i as f64 * self.dx()).collect()
    }

    /// Eigenvalues of the Dirichlet Laplacian stencil are
    /// `-(4ν/Δx²) sin²(kπ / (2(n+1)))`; the least negative is `k = 1`.
    pub fn spectrum(&self) -> Spectrum {
        let n = self.unknowns() as f64;
        let s = (PI / (2.0 * (n + 1.0))).sin();
        Spectrum {
            re_lambda1: -4.0 * self.viscosity() / (self.dx() * self.dx()) * s * s,
            imag_max: Some(0.0),
        }
    }
}

pub fn build_burgers(p: &BurgersParams) -> Result<QuadraticOde> {
    if p.nx < 3 {
        return Err(Error::ParameterOutOfRange(format!("nx = {} must be at least 3", p.nx)));
    }
    if !(p.reynolds > 0.0 && p.u0 > 0.0 && p.l0 > 0.0 && p.t_final() > 0.0) {
        return Err(Error::ParameterOutOfRange("Reynolds number, U0, L0 and T must be positive".into()));
    }
    let n = p.unknowns();
    let dx = p.dx();
    let nu = p.viscosity();
    let diff = nu / (dx * dx);
    let adv = 1.0 / (4.0 * dx);
    let mut f1 = Vec::with_capacity(3 * n);
    let mut f2 = Vec::with_capacity(2 * n);
    for i in 0..n {
        f1.push((i, i, -2.0 * diff));
        if i > 0 {
            f1.push((i, i - 1, diff));
            f2.push((i, (i - 1) * n + (i - 1), adv));
        }
        if i + 1 < n {
            f1.push((i, i + 1, diff));
            f2.push((i, (i + 1) * n + (i + 1), -adv));
        }
    }
    let grid = p.grid();
    let amp = p.forcing_amplitude.unwrap_or(p.u0);
    let width = p.l0 / 32.0;
    let profile = grid
        .iter()
        .map(|&x| amp * (-(x - p.l0 / 4.0).powi(2) / (2.0 * width * width)).exp())
        .collect();
    let u_in = grid.iter().map(|&x| p.u0 * (2.0 * PI * x / p.l0).sin()).collect();
    QuadraticOde::new(
        SparseMatrix::from_triplets(n, n * n, f2)?,
        SparseMatrix::from_triplets(n, n, f1)?,
        Forcing::Harmonic {
            profile,
            omega: 2.0 * PI * p.forcing_frequency,
            phase: 0.0,
        },
        u_in,
        p.t_final(),
    )
}

/// Two decoupled copies of `x' = -x + r x²`. The state `(v, w)` encodes
/// the amplitudes of a two-level pure state.
pub fn build_discrimination(r: f64, u_in: [f64; 2], t_final: f64) -> Result<QuadraticOde> {
    if !(r > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("r = {r} must be positive")));
    }
    QuadraticOde::new(
        SparseMatrix::from_triplets(2, 4, vec![(0, 0, r), (1, 3, r)])?,
        diagonal(&[-1.0, -1.0]),
        Forcing::Zero,
        u_in.to_vec(),
        t_final,
    )
}

/// Scalar logistic-type decay `x' = -x + r x²`.
pub fn build_logistic(r: f64, x0: f64, t_final: f64) -> Result<QuadraticOde> {
    if !(r > 0.0 && x0 > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("r = {r}, x0 = {x0}")));
    }
    QuadraticOde::new(
        SparseMatrix::from_triplets(1, 1, vec![(0, 0, r)])?,
        diagonal(&[-1.0]),
        Forcing::Zero,
        vec![x0],
        t_final,
    )
}

/// `n` identical uncoupled copies of `x' = f2 x² + f1 x + f0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncoupledParams {
    pub n: usize,
    pub f2: f64,
    pub f1: f64,
    pub f0: f64,
    pub x0: f64,
    pub t_final: f64,
}

impl Default for UncoupledParams {
    fn default() -> Self {
        UncoupledParams {
            n: 2,
            f2: 0.1,
            f1: -1.0,
            f0: 0.1,
            x0: 0.5,
            t_final: 1.0,
        }
    }
}

impl UncoupledParams {
    /// Attracting fixed point `(-f1 - sqrt(f1² - 4 f2 f0)) / (2 f2)`.
    pub fn stable_root(&self) -> f64 {
        let disc = self.f1 * self.f1 - 4.0 * self.f2 * self.f0;
        (-self.f1 - disc.sqrt()) / (2.0 * self.f2)
    }

    /// `R` in closed form: `||u_in|| = √n x0`, `||F2|| = f2`, `||F0|| = √n f0`.
    pub fn ratio(&self) -> f64 {
        let s = (self.n as f64).sqrt();
        (s * self.x0 * self.f2 + self.f0 / self.x0) / self.f1.abs()
    }
}

pub fn build_uncoupled(p: &UncoupledParams) -> Result<QuadraticOde> {
    if p.n == 0 || !(p.f2 > 0.0) || !(p.f1 < 0.0) || p.f0 < 0.0 || !(p.x0 > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "need n >= 1, f2 > 0, f1 < 0, f0 >= 0, x0 > 0; got {p:?}"
        )));
    }
    if !(p.ratio() < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("R = {} is not below 1", p.ratio())));
    }
    let n = p.n;
    let f2 = SparseMatrix::from_triplets(n, n * n, (0..n).map(|i| (i, i * n + i, p.f2)).collect())?;
    let f0 = if p.f0 == 0.0 {
        Forcing::Zero
    } else {
        Forcing::Constant(vec![p.f0; n])
    };
    QuadraticOde::new(f2, diagonal(&vec![p.f1; n]), f0, vec![p.x0; n], p.t_final)
}
