//! Time stepping: forward Euler on Carleman systems, Euler and RK4
//! references on the original quadratic ODE, RK4 on the linear Carleman
//! system, and the closed-form solution of the scalar Riccati equation.

use std::io::{Read, Write};

use crate::carleman::CarlemanSystem;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::ode::{quadratic_roots, QuadraticOde};

/// Iterates whose norm exceeds this are treated as divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
}

/// States recorded on a uniform grid `t_k = k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn with_capacity(cap: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.states.push(y.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], |s| s.as_slice())
    }

    /// Keeps only the first `width` components of every state.
    pub fn truncated(&self, width: usize) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(|s| s[..width].to_vec()).collect(),
        }
    }

    /// CSV with header `t,comp_0,...` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let width = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..width).map(|i| format!("comp_{i}")));
        wr.write_record(&header).map_err(csv_err)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut rec = vec![format!("{t:.16e}")];
            rec.extend(s.iter().map(|v| format!("{v:.16e}")));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Trajectory> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(csv_err)?.clone();
        if headers.get(0) != Some("t") {
            return Err(Error::Parse {
                line: 1,
                msg: "first column must be `t`".into(),
            });
        }
        let mut traj = Trajectory::with_capacity(0);
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Parse {
                line: i + 2,
                msg: e.to_string(),
            })?;
            traj.times.push(vals[0]);
            traj.states.push(vals[1..].to_vec());
        }
        Ok(traj)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    }
}

fn guard(step: usize, y: &[f64]) -> Result<()> {
    let nrm = norm(y);
    if !(nrm <= OVERFLOW_GUARD) {
        return Err(Error::Overflow { step, norm: nrm });
    }
    Ok(())
}

fn recorded(k: usize, m: usize, every: usize) -> bool {
    k == m || k.is_multiple_of(every.max(1))
}

/// Integrates the quadratic ODE with `m` steps of size `h`, recording
/// every `record_every` steps and the final state.
///
/// The Euler update is `u + h (F1 u + F2 u⊗u) + h F0(t)`, the same
/// arithmetic as the first Carleman block, so an `N = 1` Carleman run
/// matches this reference with `F2` dropped bit for bit.
pub fn integrate_reference(ode: &QuadraticOde, h: f64, m: usize, method: Method, record_every: usize) -> Result<Trajectory> {
    let mut traj = Trajectory::with_capacity(m / record_every.max(1) + 2);
    integrate_reference_observe(ode, h, m, method, |k, t, u| {
        if recorded(k, m, record_every) {
            traj.push(t, u);
        }
    })?;
    Ok(traj)
}

pub fn integrate_reference_observe<F>(ode: &QuadraticOde, h: f64, m: usize, method: Method, mut observe: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &[f64]),
{
    let n = ode.dim();
    let mut u = ode.u_in.clone();
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    observe(0, 0.0, &u);
    for k in 0..m {
        let t = k as f64 * h;
        match method {
            Method::Euler => {
                ode.autonomous_rhs(&u, &mut k1);
                ode.f0.eval(t, &mut scratch);
                for i in 0..n {
                    next[i] = u[i] + h * k1[i] + h * scratch[i];
                }
            }
            Method::Rk4 => {
                ode.rhs(t, &u, &mut k1, &mut scratch);
                for i in 0..n {
                    tmp[i] = u[i] + 0.5 * h * k1[i];
                }
                ode.rhs(t + 0.5 * h, &tmp, &mut k2, &mut scratch);
                for i in 0..n {
                    tmp[i] = u[i] + 0.5 * h * k2[i];
                }
                ode.rhs(t + 0.5 * h, &tmp, &mut k3, &mut scratch);
                for i in 0..n {
                    tmp[i] = u[i] + h * k3[i];
                }
                ode.rhs(t + h, &tmp, &mut k4, &mut scratch);
                for i in 0..n {
                    next[i] = u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        std::mem::swap(&mut u, &mut next);
        guard(k + 1, &u)?;
        observe(k + 1, (k + 1) as f64 * h, &u);
    }
    Ok(u)
}

/// One forward-Euler step of a Carleman system.
///
/// Computes `out = (y + h A(t) y) + hb`, where `hb` is `h b(t)` restricted
/// to the first block. The block linear solver calls this same routine.
pub struct EulerStepper<'a> {
    pub system: &'a CarlemanSystem,
    pub h: f64,
    ay: Vec<f64>,
}

impl<'a> EulerStepper<'a> {
    pub fn new(system: &'a CarlemanSystem, h: f64) -> Self {
        EulerStepper {
            system,
            h,
            ay: vec![0.0; system.delta],
        }
    }

    /// `h b(t)` restricted to the first block.
    pub fn scaled_forcing(&self, t: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.system.n()];
        self.system.forcing(t, &mut b);
        b.iter_mut().for_each(|v| *v *= self.h);
        b
    }

    pub fn step(&mut self, t: f64, y: &[f64], hb: &[f64], out: &mut [f64]) {
        self.system.apply(t, y, &mut self.ay);
        let h = self.h;
        for ((o, yi), ai) in out.iter_mut().zip(y).zip(&self.ay) {
            *o = yi + h * ai;
        }
        for (o, f) in out.iter_mut().zip(hb) {
            *o += f;
        }
    }
}

/// Forward Euler `y^{k+1} = y^k + h (A(kh) y^k + b(kh))`, all states kept.
pub fn euler_carleman(system: &CarlemanSystem, h: f64, m: usize) -> Result<Trajectory> {
    let mut traj = Trajectory::with_capacity(m + 1);
    euler_carleman_observe(system, h, m, |_, t, y| traj.push(t, y))?;
    Ok(traj)
}

/// Forward Euler reporting every iterate to `observe`; returns `y^m`.
pub fn euler_carleman_observe<F>(system: &CarlemanSystem, h: f64, m: usize, mut observe: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &[f64]),
{
    let mut stepper = EulerStepper::new(system, h);
    let mut y = system.initial_vector();
    let mut next = vec![0.0; system.delta];
    observe(0, 0.0, &y);
    for k in 0..m {
        let t = k as f64 * h;
        let hb = stepper.scaled_forcing(t);
        stepper.step(t, &y, &hb, &mut next);
        std::mem::swap(&mut y, &mut next);
        guard(k + 1, &y)?;
        observe(k + 1, (k + 1) as f64 * h, &y);
    }
    Ok(y)
}

/// Classical RK4 on `dy/dt = A(t) y + b(t)`; used as the oracle for the
/// exact Carleman solution `ŷ(t)`.
pub fn rk4_carleman_observe<F>(system: &CarlemanSystem, h: f64, m: usize, mut observe: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &[f64]),
{
    let d = system.delta;
    let n = system.n();
    let mut b = vec![0.0; n];
    let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        system.apply(t, y, out);
        system.forcing(t, &mut b);
        for i in 0..n {
            out[i] += b[i];
        }
    };
    let mut y = system.initial_vector();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    observe(0, 0.0, &y);
    for k in 0..m {
        let t = k as f64 * h;
        rhs(t, &y, &mut k1);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        guard(k + 1, &y)?;
        observe(k + 1, (k + 1) as f64 * h, &y);
    }
    Ok(y)
}

pub fn rk4_carleman(system: &CarlemanSystem, h: f64, m: usize, record_every: usize) -> Result<Trajectory> {
    let mut traj = Trajectory::with_capacity(m / record_every.max(1) + 2);
    rk4_carleman_observe(system, h, m, |k, t, y| {
        if recorded(k, m, record_every) {
            traj.push(t, y);
        }
    })?;
    Ok(traj)
}

/// Blow-up time of `x' = a x^2 + b x + c`, `x(0) = x0`, if finite.
pub fn blowup_time(a: f64, b: f64, c: f64, x0: f64) -> Result<Option<f64>> {
    if a == 0.0 {
        return Ok(None);
    }
    let (r1, r2) = quadratic_roots(a, b, c)?;
    let d = r2 - r1;
    let y0 = x0 - r1;
    if y0 == 0.0 || y0 == d || d == 0.0 {
        return Ok(None);
    }
    let ratio = y0 / (y0 - d);
    if ratio <= 0.0 {
        return Ok(None);
    }
    let t = ratio.ln() / (a * d);
    Ok(if t > 0.0 { Some(t) } else { None })
}

/// Closed-form solution of `x' = a x^2 + b x + c`, `x(0) = x0`.
///
/// With roots `r1 < r2` and `d = r2 - r1`,
/// `x(t) = r1 + d / (1 - e^{a d t} (1 - d / (x0 - r1)))`.
/// Fails with `ComplexRoots` when `b^2 - 4ac < 0` and with
/// `SingularTime` at or past a finite blow-up.
pub fn analytic_1d(a: f64, b: f64, c: f64, x0: f64, t: f64) -> Result<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Ok(x0 + c * t);
        }
        let fixed = -c / b;
        return Ok(fixed + (x0 - fixed) * (b * t).exp());
    }
    if let Some(t_star) = blowup_time(a, b, c, x0)? {
        if t >= t_star {
            return Err(Error::SingularTime { t_star });
        }
    }
    let (r1, r2) = quadratic_roots(a, b, c)?;
    let d = r2 - r1;
    let y0 = x0 - r1;
    if y0 == 0.0 {
        return Ok(r1);
    }
    if y0 == d || d == 0.0 {
        return Ok(x0);
    }
    let e = (a * d * t).exp();
    // 1 - e(1 - d/y0) written as -(e - 1) + e d / y0 for accuracy at small t.
    let denom = -(a * d * t).exp_m1() + e * d / y0;
    Ok(r1 + d / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::{CarlemanSystem, DEFAULT_NNZ_BUDGET};
    use crate::ode::Forcing;
    use crate::sparse::SparseMatrix;
    use approx::assert_relative_eq;

    fn logistic(r: f64, x0: f64, t: f64) -> QuadraticOde {
        QuadraticOde::new(
            SparseMatrix::from_triplets(1, 1, vec![(0, 0, r)]).unwrap(),
            SparseMatrix::from_triplets(1, 1, vec![(0, 0, -1.0)]).unwrap(),
            Forcing::Zero,
            vec![x0],
            t,
        )
        .unwrap()
    }

    #[test]
    fn analytic_matches_logistic_formula() {
        let (r, x0) = (0.3, 0.8);
        for &t in &[0.0f64, 0.1, 1.0, 5.0] {
            let exact = 1.0 / (r - t.exp() * (r - 1.0 / x0));
            assert_relative_eq!(analytic_1d(r, -1.0, 0.0, x0, t).unwrap(), exact, max_relative = 1e-14);
        }
    }

    #[test]
    fn fixed_point_is_constant() {
        let r = 2f64.sqrt();
        let x = analytic_1d(r, -1.0, 0.0, 1.0 / r, 3.0).unwrap();
        assert_relative_eq!(x, 1.0 / r, max_relative = 1e-15);
        assert_eq!(analytic_1d(0.5, -1.0, 0.0, 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn blowup_is_detected() {
        let (r, x0) = (2f64.sqrt(), 0.9);
        let t_star = (r / (r - 1.0 / x0)).ln();
        assert_relative_eq!(blowup_time(r, -1.0, 0.0, x0).unwrap().unwrap(), t_star, max_relative = 1e-14);
        assert!(matches!(analytic_1d(r, -1.0, 0.0, x0, t_star + 0.1), Err(Error::SingularTime { .. })));
        assert!(analytic_1d(r, -1.0, 0.0, x0, 0.99 * t_star).unwrap() > 10.0);
    }

    #[test]
    fn complex_roots_are_rejected() {
        assert!(matches!(analytic_1d(1.0, -1.0, 1.0, 0.5, 1.0), Err(Error::ComplexRoots { .. })));
    }

    #[test]
    fn forced_scalar_solution_solves_the_ode() {
        // Check x' = a x^2 + b x + c by central differences.
        let (a, b, c, x0) = (0.4, -2.0, 0.3, 1.1);
        for &t in &[0.2, 0.7, 2.0] {
            let dt = 1e-5;
            let xp = analytic_1d(a, b, c, x0, t + dt).unwrap();
            let xm = analytic_1d(a, b, c, x0, t - dt).unwrap();
            let x = analytic_1d(a, b, c, x0, t).unwrap();
            assert_relative_eq!((xp - xm) / (2.0 * dt), a * x * x + b * x + c, epsilon = 1e-8);
        }
    }

    #[test]
    fn rk4_reference_is_fourth_order() {
        let ode = logistic(0.3, 0.8, 2.0);
        let exact = analytic_1d(0.3, -1.0, 0.0, 0.8, 2.0).unwrap();
        let err = |m: usize| {
            let tr = integrate_reference(&ode, 2.0 / m as f64, m, Method::Rk4, m).unwrap();
            (tr.final_state()[0] - exact).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn euler_reference_is_first_order() {
        let ode = logistic(0.3, 0.8, 2.0);
        let exact = analytic_1d(0.3, -1.0, 0.0, 0.8, 2.0).unwrap();
        let err = |m: usize| {
            let tr = integrate_reference(&ode, 2.0 / m as f64, m, Method::Euler, m).unwrap();
            (tr.final_state()[0] - exact).abs()
        };
        let ratio = err(2000) / err(4000);
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn level_one_carleman_is_linearized_euler_bitwise() {
        let ode = QuadraticOde::new(
            SparseMatrix::from_triplets(2, 4, vec![(0, 1, 0.3), (1, 3, -0.2)]).unwrap(),
            SparseMatrix::from_triplets(2, 2, vec![(0, 0, -1.0), (0, 1, 0.3), (1, 0, -0.3), (1, 1, -0.7)]).unwrap(),
            Forcing::Harmonic {
                profile: vec![0.1, 0.05],
                omega: 6.0,
                phase: 0.0,
            },
            vec![0.4, -0.3],
            1.0,
        )
        .unwrap();
        let linear = QuadraticOde {
            f2: SparseMatrix::zeros(2, 4),
            ..ode.clone()
        };
        let sys = CarlemanSystem::build(&ode, 1, DEFAULT_NNZ_BUDGET).unwrap();
        let a = euler_carleman(&sys, 1e-3, 1000).unwrap();
        let b = integrate_reference(&linear, 1e-3, 1000, Method::Euler, 1).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn overflow_guard_trips() {
        let ode = QuadraticOde::new(
            SparseMatrix::zeros(1, 1),
            SparseMatrix::from_triplets(1, 1, vec![(0, 0, 50.0)]).unwrap(),
            Forcing::Zero,
            vec![1.0],
            10.0,
        )
        .unwrap();
        let err = integrate_reference(&ode, 0.1, 100, Method::Euler, 1).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let ode = logistic(0.3, 0.8, 1.0);
        let tr = integrate_reference(&ode, 0.01, 100, Method::Rk4, 7).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,comp_0\n"));
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }
}
