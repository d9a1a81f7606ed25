//! Closed-form error bounds and their empirical counterparts.

use std::io::Write;

use crate::carleman::stability_limit;
use crate::error::{Error, Result};
use crate::linalg::{distance, norm};
use crate::ode::SpectralSummary;
use crate::report::KeyValues;

fn require_convergent(summary: &SpectralSummary) -> Result<()> {
    if !summary.dissipative {
        return Err(Error::NonDissipative {
            re_lambda1: summary.re_lambda1,
        });
    }
    if !(summary.r < 1.0) {
        return Err(Error::RNotBelowOne { r: summary.r });
    }
    Ok(())
}

/// Truncation error bound `||η(t)|| <= t N ||F2|| ||u_in||^{N+1}` for a
/// rescaled system with `R < 1`.
pub fn carleman_bound(summary: &SpectralSummary, level: usize, t: f64) -> Result<f64> {
    require_convergent(summary)?;
    if summary.u_in_norm >= 1.0 {
        return Err(Error::NotRescaled {
            u_in_norm: summary.u_in_norm,
        });
    }
    Ok(t * level as f64 * summary.norm_f2 * summary.u_in_norm.powi(level as i32 + 1))
}

/// Truncation error of block `j` without forcing.
///
/// For `j = 1`: `||u_in|| R^N (1 - e^{Re λ1 t})^N`; otherwise the
/// time-uniform `||u_in||^j R^{N+1-j}`.
pub fn carleman_bound_homogeneous(summary: &SpectralSummary, level: usize, j: usize, t: f64) -> Result<f64> {
    if !summary.homogeneous {
        return Err(Error::NotHomogeneous);
    }
    require_convergent(summary)?;
    if j == 0 || j > level {
        return Err(Error::ParameterOutOfRange(format!("block {j} of level {level}")));
    }
    if j == 1 {
        let decay = 1.0 - (summary.re_lambda1 * t).exp();
        Ok(summary.u_in_norm * (summary.r * decay).powi(level as i32))
    } else {
        Ok(carleman_bound_homogeneous_uniform(summary, level, j))
    }
}

/// `||u_in||^j R^{N+1-j}`, valid for every block including `j = 1`.
pub fn carleman_bound_homogeneous_uniform(summary: &SpectralSummary, level: usize, j: usize) -> f64 {
    summary.u_in_norm.powi(j as i32) * summary.r.powi((level + 1 - j) as i32)
}

/// `3 N^{2.5} T h [(||F2|| + ||F1|| + ||F0||)^2 + ||F0'||]`.
pub fn euler_bound_formula(summary: &SpectralSummary, level: usize, t_final: f64, h: f64) -> f64 {
    let s = summary.norm_f2 + summary.norm_f1 + summary.norm_f0;
    3.0 * (level as f64).powf(2.5) * t_final * h * (s * s + summary.norm_f0_prime)
}

/// Global Euler error bound `||ŷ(T) - y^m||`, after checking the step
/// against the stability limit and the truncation bound against `g/4`.
pub fn euler_bound(summary: &SpectralSummary, level: usize, t_final: f64, h: f64) -> Result<f64> {
    let limit = stability_limit(summary, level)?;
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { h, limit });
    }
    let eta = carleman_bound(summary, level, t_final)?;
    if eta > summary.g / 4.0 {
        return Err(Error::HypothesisUnverified(format!(
            "truncation bound {eta:e} exceeds g/4 = {:e}",
            summary.g / 4.0
        )));
    }
    Ok(euler_bound_formula(summary, level, t_final, h))
}

/// Normalized-state error at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEnd {
    /// `|| u/||u|| - y/||y|| ||`.
    pub error: f64,
    /// `||u - y||`.
    pub delta: f64,
    /// `δ / (g - δ)` with `g = ||u||`; infinite when `δ >= g`.
    pub bound: f64,
}

pub fn end_to_end_error(u_ref: &[f64], y1: &[f64]) -> Result<EndToEnd> {
    if u_ref.len() != y1.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} components", u_ref.len(), y1.len())));
    }
    let (gu, gy) = (norm(u_ref), norm(y1));
    if gu == 0.0 || gy == 0.0 {
        return Err(Error::ZeroVector("normalizing a final state".into()));
    }
    let error = u_ref
        .iter()
        .zip(y1)
        .map(|(a, b)| (a / gu - b / gy).powi(2))
        .sum::<f64>()
        .sqrt();
    let delta = distance(u_ref, y1);
    let bound = if delta < gu { delta / (gu - delta) } else { f64::INFINITY };
    Ok(EndToEnd { error, delta, bound })
}

/// One recorded time of a bounds comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsSample {
    pub t: f64,
    pub eta_bound: f64,
    /// `||ŷ(t) - (u, u⊗u, ...)||`.
    pub eta_empirical: f64,
    /// `||ŷ_1(t) - u(t)||`.
    pub eta1_empirical: f64,
    /// `||ŷ(t) - y^k||`.
    pub euler_empirical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub level: usize,
    pub h: f64,
    pub m: usize,
    pub t_final: f64,
    pub epsilon: f64,
    pub r: f64,
    pub eta_bound: f64,
    pub eta1_bound_homogeneous: Option<f64>,
    pub euler_bound: f64,
    pub eta_empirical_max: f64,
    pub euler_empirical: f64,
    pub end_to_end: EndToEnd,
    pub epsilon_bound: f64,
    /// `(name, certified)` for each hypothesis of the error chain.
    pub hypotheses: Vec<(String, bool)>,
    pub samples: Vec<BoundsSample>,
}

impl BoundsReport {
    pub fn all_certified(&self) -> bool {
        self.hypotheses.iter().all(|(_, ok)| *ok)
    }

    pub fn key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("level", self.level);
        kv.push_f64("h", self.h);
        kv.push("m", self.m);
        kv.push_f64("t_final", self.t_final);
        kv.push_f64("epsilon", self.epsilon);
        kv.push_f64("R", self.r);
        kv.push_f64("eta_bound", self.eta_bound);
        kv.push_opt("eta1_bound_homogeneous", self.eta1_bound_homogeneous);
        kv.push_f64("euler_bound", self.euler_bound);
        kv.push_f64("eta_empirical_max", self.eta_empirical_max);
        kv.push_f64("euler_empirical", self.euler_empirical);
        kv.push_f64("end_to_end_error", self.end_to_end.error);
        kv.push_f64("end_to_end_delta", self.end_to_end.delta);
        kv.push_f64("end_to_end_bound", self.end_to_end.bound);
        kv.push_f64("epsilon_bound", self.epsilon_bound);
        for (name, ok) in &self.hypotheses {
            kv.push(&format!("hypothesis.{name}"), if *ok { "certified" } else { "unverified" });
        }
        kv
    }

    pub fn write_samples_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "eta_bound", "eta_empirical", "eta1_empirical", "euler_empirical"])
            .map_err(crate::integrate::csv_err)?;
        for s in &self.samples {
            wr.write_record(&[
                format!("{:.16e}", s.t),
                format!("{:.16e}", s.eta_bound),
                format!("{:.16e}", s.eta_empirical),
                format!("{:.16e}", s.eta1_empirical),
                format!("{:.16e}", s.euler_empirical),
            ])
            .map_err(crate::integrate::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn summary(a: f64, lam: f64, c: f64, u: f64) -> SpectralSummary {
        SpectralSummary {
            n: 1,
            norm_f2: a,
            norm_f1: lam,
            norm_f0: c,
            norm_f0_prime: 0.0,
            re_lambda1: -lam,
            imag_max: Some(0.0),
            u_in_norm: u,
            r: (u * a + c / u) / lam,
            r_minus: None,
            r_plus: None,
            g: u * 0.5,
            q: 2.0,
            dissipative: true,
            homogeneous: c == 0.0,
        }
    }

    #[test]
    fn truncation_bound_value() {
        let s = summary(0.25, 1.0, 0.0, 0.5);
        assert_relative_eq!(carleman_bound(&s, 4, 1.0).unwrap(), 4.0 * 0.25 * 0.5f64.powi(5));
        assert!(matches!(
            carleman_bound(&summary(0.25, 1.0, 0.0, 1.2), 4, 1.0),
            Err(Error::NotRescaled { .. })
        ));
    }

    #[test]
    fn homogeneous_bound_rejects_forcing() {
        let s = summary(0.25, 1.0, 0.1, 0.5);
        assert!(matches!(
            carleman_bound_homogeneous(&s, 3, 1, 1.0),
            Err(Error::NotHomogeneous)
        ));
    }

    #[test]
    fn uniform_bound_value() {
        let s = summary(0.4, 1.0, 0.0, 0.5);
        assert_relative_eq!(
            carleman_bound_homogeneous(&s, 3, 2, 7.0).unwrap(),
            0.25 * 0.2f64.powi(2),
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn first_block_bound_is_tighter(a in 0.01f64..1.0, lam in 0.2f64..3.0, u in 0.01f64..0.99, level in 1usize..9, t in 0.0f64..5.0) {
            prop_assume!(u * a < lam);
            let s = summary(a, lam, 0.0, u);
            let tight = carleman_bound_homogeneous(&s, level, 1, t).unwrap();
            let uniform = carleman_bound_homogeneous_uniform(&s, level, 1);
            prop_assert!(tight <= uniform * (1.0 + 1e-15));
        }
    }

    #[test]
    fn euler_bound_checks_step() {
        let s = summary(0.1, 1.0, 0.0, 0.5);
        assert!(matches!(euler_bound(&s, 2, 1.0, 0.6), Err(Error::StepTooLarge { .. })));
        assert_relative_eq!(
            euler_bound(&s, 2, 1.0, 0.01).unwrap(),
            3.0 * 2f64.powf(2.5) * 0.01 * 1.1f64.powi(2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn end_to_end_is_scale_invariant() {
        let u = [0.3, 0.4];
        let y = [0.31, 0.39];
        let e = end_to_end_error(&u, &y).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| v * 7.0).collect();
        let u2: Vec<f64> = u.iter().map(|v| v * 7.0).collect();
        assert_relative_eq!(end_to_end_error(&u2, &scaled).unwrap().error, e.error, max_relative = 1e-14);
        assert!(e.error <= e.bound);
    }
}
