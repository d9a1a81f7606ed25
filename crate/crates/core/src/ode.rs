//! Quadratic ODEs `du/dt = F2 (u ⊗ u) + F1 u + F0(t)` and their scalar
//! summaries: operator norms, the leading eigenvalue of `F1`, the
//! nonlinearity ratio `R`, the roots of the norm-envelope quadratic and
//! the dissipative rescaling.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrate::{analytic_1d, integrate_reference, Method};
use crate::linalg::{dense_eigenvalues, norm, PowerIteration};
use crate::sparse::SparseMatrix;

type VectorFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// How the time derivative of a custom forcing is obtained.
#[derive(Clone)]
pub enum DerivativeRule {
    Analytic(VectorFn),
    /// Central difference with the given half-width.
    CentralDifference { half_width: f64 },
}

/// The inhomogeneous term `F0(t)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Constant(Vec<f64>),
    /// `profile * cos(omega t + phase)`.
    Harmonic { profile: Vec<f64>, omega: f64, phase: f64 },
    Custom { value: VectorFn, derivative: DerivativeRule },
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Forcing::Harmonic { profile, omega, phase } => f
                .debug_struct("Harmonic")
                .field("profile", profile)
                .field("omega", omega)
                .field("phase", phase)
                .finish(),
            Forcing::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Constant(v) => v.iter().all(|&x| x == 0.0),
            Forcing::Harmonic { profile, .. } => profile.iter().all(|&x| x == 0.0),
            Forcing::Custom { .. } => false,
        }
    }

    /// Declared length, if the variant carries one.
    pub fn len_hint(&self) -> Option<usize> {
        match self {
            Forcing::Constant(v) => Some(v.len()),
            Forcing::Harmonic { profile, .. } => Some(profile.len()),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero => out.iter_mut().for_each(|x| *x = 0.0),
            Forcing::Constant(v) => out.copy_from_slice(v),
            Forcing::Harmonic { profile, omega, phase } => {
                let c = (omega * t + phase).cos();
                for (o, p) in out.iter_mut().zip(profile) {
                    *o = p * c;
                }
            }
            Forcing::Custom { value, .. } => value(t, out),
        }
    }

    pub fn derivative(&self, t: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero | Forcing::Constant(_) => out.iter_mut().for_each(|x| *x = 0.0),
            Forcing::Harmonic { profile, omega, phase } => {
                let s = -omega * (omega * t + phase).sin();
                for (o, p) in out.iter_mut().zip(profile) {
                    *o = p * s;
                }
            }
            Forcing::Custom { value, derivative } => match derivative {
                DerivativeRule::Analytic(d) => d(t, out),
                DerivativeRule::CentralDifference { half_width } => {
                    let mut lo = vec![0.0; out.len()];
                    value(t + half_width, out);
                    value(t - half_width, &mut lo);
                    for (o, l) in out.iter_mut().zip(&lo) {
                        *o = (*o - l) / (2.0 * half_width);
                    }
                }
            },
        }
    }

    pub fn scaled(&self, s: f64) -> Forcing {
        match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::Constant(v) => Forcing::Constant(v.iter().map(|x| x * s).collect()),
            Forcing::Harmonic { profile, omega, phase } => Forcing::Harmonic {
                profile: profile.iter().map(|x| x * s).collect(),
                omega: *omega,
                phase: *phase,
            },
            Forcing::Custom { value, derivative } => {
                let v = value.clone();
                let value: VectorFn = Arc::new(move |t, out: &mut [f64]| {
                    v(t, out);
                    out.iter_mut().for_each(|x| *x *= s);
                });
                let derivative = match derivative {
                    DerivativeRule::Analytic(d) => {
                        let d = d.clone();
                        DerivativeRule::Analytic(Arc::new(move |t, out: &mut [f64]| {
                            d(t, out);
                            out.iter_mut().for_each(|x| *x *= s);
                        }))
                    }
                    fd => fd.clone(),
                };
                Forcing::Custom { value, derivative }
            }
        }
    }

    /// `(max ||F0(t)||, max ||F0'(t)||)` over `samples` uniform points of `[0, T]`.
    pub fn norm_bounds(&self, n: usize, t_final: f64, samples: usize) -> (f64, f64) {
        match self {
            Forcing::Zero => (0.0, 0.0),
            Forcing::Constant(v) => (norm(v), 0.0),
            _ => {
                let mut buf = vec![0.0; n];
                let (mut f, mut fp) = (0.0f64, 0.0f64);
                let samples = samples.max(2);
                for i in 0..samples {
                    let t = t_final * i as f64 / (samples - 1) as f64;
                    self.eval(t, &mut buf);
                    f = f.max(norm(&buf));
                    self.derivative(t, &mut buf);
                    fp = fp.max(norm(&buf));
                }
                (f, fp)
            }
        }
    }

    /// Largest gap between the derivative rule and a central difference
    /// with half-width `dt`, relative to `max(1, |F0'|)`.
    pub fn derivative_discrepancy(&self, n: usize, t_final: f64, samples: usize, dt: f64) -> f64 {
        let (mut d, mut hi, mut lo) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut worst = 0.0f64;
        for i in 0..samples.max(2) {
            let t = t_final * i as f64 / (samples.max(2) - 1) as f64;
            self.derivative(t, &mut d);
            self.eval(t + dt, &mut hi);
            self.eval(t - dt, &mut lo);
            for k in 0..n {
                let fd = (hi[k] - lo[k]) / (2.0 * dt);
                worst = worst.max((fd - d[k]).abs() / d[k].abs().max(1.0));
            }
        }
        worst
    }
}

/// `du/dt = F2 (u ⊗ u) + F1 u + F0(t)` on `[0, T]` with `u(0) = u_in`.
#[derive(Debug, Clone)]
pub struct QuadraticOde {
    pub f2: SparseMatrix,
    pub f1: SparseMatrix,
    pub f0: Forcing,
    pub u_in: Vec<f64>,
    pub t_final: f64,
}

impl QuadraticOde {
    pub fn new(f2: SparseMatrix, f1: SparseMatrix, f0: Forcing, u_in: Vec<f64>, t_final: f64) -> Result<Self> {
        let n = u_in.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("state dimension is zero".into()));
        }
        if f1.rows() != n || f1.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "F1 is {}x{}, expected {n}x{n}",
                f1.rows(),
                f1.cols()
            )));
        }
        if f2.rows() != n || f2.cols() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "F2 is {}x{}, expected {n}x{}",
                f2.rows(),
                f2.cols(),
                n * n
            )));
        }
        if let Some(len) = f0.len_hint() {
            if len != n {
                return Err(Error::ShapeMismatch(format!("F0 has length {len}, expected {n}")));
            }
        }
        if norm(&u_in) == 0.0 {
            return Err(Error::ZeroVector("initial condition".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!("final time {t_final}")));
        }
        Ok(QuadraticOde { f2, f1, f0, u_in, t_final })
    }

    pub fn dim(&self) -> usize {
        self.u_in.len()
    }

    /// `out = F1 u + F2 (u ⊗ u)`, accumulated in that order.
    pub fn autonomous_rhs(&self, u: &[f64], out: &mut [f64]) {
        self.f1.matvec(u, out);
        let n = self.dim();
        for (r, c, v) in self.f2.iter() {
            out[r] += v * (u[c / n] * u[c % n]);
        }
    }

    /// Full right-hand side including the forcing.
    pub fn rhs(&self, t: f64, u: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.autonomous_rhs(u, out);
        self.f0.eval(t, scratch);
        for (o, f) in out.iter_mut().zip(scratch.iter()) {
            *o += f;
        }
    }

    pub fn with_t_final(&self, t_final: f64) -> Self {
        QuadraticOde { t_final, ..self.clone() }
    }
}

/// Leading spectral data of `F1` supplied by the caller (e.g. analytically).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub re_lambda1: f64,
    /// Largest imaginary part magnitude; `None` when unknown.
    pub imag_max: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    pub power: PowerIteration,
    pub forcing_samples: usize,
    /// Largest `n` for which the dense eigensolver is used.
    pub dense_cap: usize,
    pub spectrum: Option<Spectrum>,
    /// Skip the reference integration and use this `||u(T)||`.
    pub g: Option<f64>,
    pub reference_steps: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            power: PowerIteration::default(),
            forcing_samples: 1024,
            dense_cap: 512,
            spectrum: None,
            g: None,
            reference_steps: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub n: usize,
    pub norm_f2: f64,
    pub norm_f1: f64,
    pub norm_f0: f64,
    pub norm_f0_prime: f64,
    pub re_lambda1: f64,
    pub imag_max: Option<f64>,
    pub u_in_norm: f64,
    pub r: f64,
    pub r_minus: Option<f64>,
    pub r_plus: Option<f64>,
    /// `||u(T)||`.
    pub g: f64,
    /// `||u_in|| / ||u(T)||`.
    pub q: f64,
    pub dissipative: bool,
    pub homogeneous: bool,
}

impl SpectralSummary {
    /// True when every eigenvalue of `F1` is known to be real.
    pub fn real_spectrum(&self) -> bool {
        matches!(self.imag_max, Some(j) if j <= 1e-12 * self.re_lambda1.abs().max(1.0))
    }

    fn from_norms(
        n: usize,
        (norm_f2, norm_f1, norm_f0, norm_f0_prime): (f64, f64, f64, f64),
        spectrum: Spectrum,
        u_in_norm: f64,
        g: f64,
        homogeneous: bool,
    ) -> Self {
        let re = spectrum.re_lambda1;
        let r = (u_in_norm * norm_f2 + norm_f0 / u_in_norm) / re.abs();
        let (r_minus, r_plus) = match quadratic_roots(norm_f2, re, norm_f0) {
            Ok((lo, hi)) => (Some(lo), Some(hi)),
            Err(_) => (None, None),
        };
        SpectralSummary {
            n,
            norm_f2,
            norm_f1,
            norm_f0,
            norm_f0_prime,
            re_lambda1: re,
            imag_max: spectrum.imag_max,
            u_in_norm,
            r,
            r_minus,
            r_plus,
            g,
            q: u_in_norm / g,
            dissipative: re < 0.0,
            homogeneous,
        }
    }

    /// Summary of the system after `F2 -> F2/γ`, `F0 -> γ F0`, `u -> γ u`.
    pub fn rescaled(&self, gamma: f64) -> Self {
        Self::from_norms(
            self.n,
            (
                self.norm_f2 / gamma,
                self.norm_f1,
                self.norm_f0 * gamma,
                self.norm_f0_prime * gamma,
            ),
            Spectrum {
                re_lambda1: self.re_lambda1,
                imag_max: self.imag_max,
            },
            self.u_in_norm * gamma,
            self.g * gamma,
            self.homogeneous,
        )
    }
}

/// Computes norms, the leading eigenvalue of `F1`, `R`, the envelope roots
/// and `g = ||u(T)||`. Non-dissipative systems are flagged, not rejected.
pub fn spectral_summary(ode: &QuadraticOde, opts: &SpectralOptions) -> Result<SpectralSummary> {
    let n = ode.dim();
    let spectrum = match opts.spectrum {
        Some(s) => s,
        None => {
            if n > opts.dense_cap {
                return Err(Error::EigenFailure(format!(
                    "n = {n} exceeds the dense eigensolver cap {}; supply the spectrum",
                    opts.dense_cap
                )));
            }
            let ev = dense_eigenvalues(&ode.f1.to_dense())?;
            let re = ev.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
            let im = ev.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
            Spectrum {
                re_lambda1: re,
                imag_max: Some(im),
            }
        }
    };
    let norm_f2 = ode.f2.spectral_norm(opts.power);
    let norm_f1 = ode.f1.spectral_norm(opts.power);
    let (norm_f0, norm_f0_prime) = ode.f0.norm_bounds(n, ode.t_final, opts.forcing_samples);
    let g = match opts.g {
        Some(g) => g,
        None => {
            let steps = opts.reference_steps.max(1);
            let traj = integrate_reference(ode, ode.t_final / steps as f64, steps, Method::Rk4, steps)?;
            norm(traj.states.last().expect("trajectory has a final state"))
        }
    };
    if g == 0.0 {
        return Err(Error::ZeroVector("solution vanishes at T".into()));
    }
    Ok(SpectralSummary::from_norms(
        n,
        (norm_f2, norm_f1, norm_f0, norm_f0_prime),
        spectrum,
        norm(&ode.u_in),
        g,
        ode.f0.is_zero(),
    ))
}

/// Roots `r- <= r+` of `a x^2 + b x + c = 0` in the envelope convention
/// (`a = ||F2||`, `b = Re λ1`, `c = ||F0||`).
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    if a == 0.0 {
        return Err(Error::DegenerateQuadratic);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::ComplexRoots { discriminant: disc });
    }
    // Cancellation-free form.
    let s = disc.sqrt();
    let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
    let (x1, x2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Ok((x1.min(x2), x1.max(x2)))
}

pub fn roots(summary: &SpectralSummary) -> Result<(f64, f64)> {
    quadratic_roots(summary.norm_f2, summary.re_lambda1, summary.norm_f0)
}

#[derive(Debug, Clone)]
pub struct Rescaled {
    pub ode: QuadraticOde,
    pub summary: SpectralSummary,
    pub gamma: f64,
}

/// Scaling `γ` that places `||u_in||` strictly between the envelope roots.
///
/// With a quadratic part, `γ = 1/sqrt(||u_in|| r+)`. Without one, any
/// `γ < 1/||u_in||` works: the identity is kept when `||u_in|| < 1`,
/// otherwise `||γ u_in|| = 1/2`.
pub fn rescale_factor(summary: &SpectralSummary) -> Result<f64> {
    if !summary.dissipative {
        return Err(Error::NonDissipative {
            re_lambda1: summary.re_lambda1,
        });
    }
    if summary.norm_f2 == 0.0 {
        return Ok(if summary.u_in_norm < 1.0 {
            1.0
        } else {
            0.5 / summary.u_in_norm
        });
    }
    let (_, r_plus) = roots(summary)?;
    Ok(1.0 / (summary.u_in_norm * r_plus).sqrt())
}

pub fn rescale(ode: &QuadraticOde, summary: &SpectralSummary) -> Result<Rescaled> {
    let gamma = rescale_factor(summary)?;
    let ode = QuadraticOde {
        f2: ode.f2.scaled(1.0 / gamma),
        f1: ode.f1.clone(),
        f0: ode.f0.scaled(gamma),
        u_in: ode.u_in.iter().map(|x| x * gamma).collect(),
        t_final: ode.t_final,
    };
    Ok(Rescaled {
        ode,
        summary: summary.rescaled(gamma),
        gamma,
    })
}

/// Upper envelope `x(t) >= ||u(t)||` solving `x' = a x^2 + b x + c`.
pub fn norm_envelope(summary: &SpectralSummary, t: f64) -> Result<f64> {
    analytic_1d(
        summary.norm_f2,
        summary.re_lambda1,
        summary.norm_f0,
        summary.u_in_norm,
        t,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> SparseMatrix {
        SparseMatrix::from_triplets(
            values.len(),
            values.len(),
            values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
        )
        .unwrap()
    }

    fn scalar(a: f64, b: f64, c: f64, x0: f64, t: f64) -> QuadraticOde {
        let f2 = SparseMatrix::from_triplets(1, 1, vec![(0, 0, a)]).unwrap();
        let f0 = if c == 0.0 { Forcing::Zero } else { Forcing::Constant(vec![c]) };
        QuadraticOde::new(f2, diag(&[b]), f0, vec![x0], t).unwrap()
    }

    #[test]
    fn roots_match_closed_form() {
        let (lo, hi) = quadratic_roots(1.0, -3.0, 1.0).unwrap();
        assert_relative_eq!(lo, (3.0 - 5f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(hi, (3.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert!(matches!(quadratic_roots(1.0, -1.0, 1.0), Err(Error::ComplexRoots { .. })));
        assert!(matches!(quadratic_roots(0.0, -1.0, 1.0), Err(Error::DegenerateQuadratic)));
    }

    #[test]
    fn homogeneous_root_is_exactly_zero() {
        let (lo, hi) = quadratic_roots(0.5, -1.0, 0.0).unwrap();
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn summary_of_scalar_logistic() {
        let ode = scalar(0.3, -1.0, 0.0, 0.8, 1.0);
        let s = spectral_summary(&ode, &SpectralOptions::default()).unwrap();
        assert_relative_eq!(s.r, 0.24, max_relative = 1e-12);
        assert!(s.dissipative && s.homogeneous && s.real_spectrum());
        // Exact solution 1/(R - e^t (R - 1/x0)).
        let exact = 1.0 / (0.3 - 1f64.exp() * (0.3 - 1.0 / 0.8));
        assert_relative_eq!(s.g, exact, max_relative = 1e-12);
    }

    #[test]
    fn forced_linear_system_has_finite_ratio() {
        let ode = QuadraticOde::new(
            SparseMatrix::zeros(1, 1),
            diag(&[-2.0]),
            Forcing::Constant(vec![0.5]),
            vec![1.0],
            1.0,
        )
        .unwrap();
        let s = spectral_summary(&ode, &SpectralOptions::default()).unwrap();
        assert_relative_eq!(s.r, 0.25, max_relative = 1e-12);
        assert!(s.r_plus.is_none());
        let res = rescale(&ode, &s).unwrap();
        assert_eq!(res.gamma, 0.5);
    }

    #[test]
    fn non_dissipative_is_flagged() {
        let ode = scalar(0.1, 0.5, 0.0, 0.5, 1.0);
        let s = spectral_summary(&ode, &SpectralOptions::default()).unwrap();
        assert!(!s.dissipative);
        assert!(matches!(rescale(&ode, &s), Err(Error::NonDissipative { .. })));
    }

    #[test]
    fn rescaled_summary_matches_recomputation() {
        let ode = scalar(0.4, -1.5, 0.2, 0.9, 1.0);
        let s = spectral_summary(&ode, &SpectralOptions::default()).unwrap();
        let res = rescale(&ode, &s).unwrap();
        let fresh = spectral_summary(&res.ode, &SpectralOptions::default()).unwrap();
        assert_relative_eq!(fresh.r, s.r, max_relative = 1e-10);
        assert_relative_eq!(res.summary.r, s.r, max_relative = 1e-12);
        assert_relative_eq!(fresh.g, res.summary.g, max_relative = 1e-10);
        let (lo, hi) = roots(&fresh).unwrap();
        assert!(lo < fresh.u_in_norm && fresh.u_in_norm < 1.0 && 1.0 < hi);
    }

    proptest! {
        #[test]
        fn rescaling_is_idempotent(a in 0.05f64..2.0, lam in 0.5f64..3.0, x0 in 0.05f64..3.0, frac in 0.0f64..0.9) {
            // Choose c so that R < 1 holds.
            let c_max = (lam - x0 * a).max(0.0) * x0;
            let c = frac * c_max;
            prop_assume!(x0 * a < lam);
            let summary = SpectralSummary::from_norms(
                1, (a, lam, c, 0.0),
                Spectrum { re_lambda1: -lam, imag_max: Some(0.0) }, x0, x0, c == 0.0);
            prop_assert!(summary.r < 1.0);
            let g1 = rescale_factor(&summary).unwrap();
            let once = summary.rescaled(g1);
            let g2 = rescale_factor(&once).unwrap();
            prop_assert!((g2 - 1.0).abs() < 1e-12);
            prop_assert!((once.r - summary.r).abs() <= 1e-12 * summary.r.max(1e-300));
            let (lo, hi) = roots(&once).unwrap();
            prop_assert!(lo <= once.u_in_norm && once.u_in_norm < 1.0 && 1.0 < hi);
            prop_assert!(once.norm_f2 + once.norm_f0 < lam);
        }

        #[test]
        fn envelope_is_monotone_towards_lower_root(a in 0.05f64..2.0, lam in 0.5f64..3.0, x0 in 0.05f64..3.0, frac in 0.0f64..0.9) {
            prop_assume!(x0 * a < lam);
            let c = frac * (lam - x0 * a) * x0;
            let summary = SpectralSummary::from_norms(
                1, (a, lam, c, 0.0),
                Spectrum { re_lambda1: -lam, imag_max: Some(0.0) }, x0, x0, c == 0.0);
            let (lo, _) = roots(&summary).unwrap();
            let mut prev = norm_envelope(&summary, 0.0).unwrap();
            prop_assert!((prev - x0).abs() <= 1e-12 * x0);
            for k in 1..50 {
                let x = norm_envelope(&summary, 0.2 * k as f64).unwrap();
                if x0 >= lo {
                    prop_assert!(x <= prev * (1.0 + 1e-12) && x >= lo * (1.0 - 1e-12));
                }
                prev = x;
            }
            let far = norm_envelope(&summary, 200.0).unwrap();
            prop_assert!((far - lo).abs() <= 1e-9 * lo.max(1e-3));
        }
    }

    #[test]
    fn harmonic_derivative_agrees_with_difference_quotient() {
        let f = Forcing::Harmonic {
            profile: vec![1.0, -0.5],
            omega: 2.0 * std::f64::consts::PI,
            phase: 0.3,
        };
        assert!(f.derivative_discrepancy(2, 1.0, 64, 1e-5) < 1e-6);
        let custom = Forcing::Custom {
            value: Arc::new(|t, out: &mut [f64]| out[0] = t.sin()),
            derivative: DerivativeRule::CentralDifference { half_width: 1e-6 },
        };
        assert!(custom.derivative_discrepancy(1, 2.0, 32, 1e-4) < 1e-7);
    }

    #[test]
    fn shape_errors_are_reported() {
        let bad = QuadraticOde::new(
            SparseMatrix::zeros(2, 2),
            diag(&[-1.0, -1.0]),
            Forcing::Zero,
            vec![1.0, 0.0],
            1.0,
        );
        assert!(matches!(bad, Err(Error::ShapeMismatch(_))));
        let zero = QuadraticOde::new(SparseMatrix::zeros(1, 1), diag(&[-1.0]), Forcing::Zero, vec![0.0], 1.0);
        assert!(matches!(zero, Err(Error::ZeroVector(_))));
    }
}
