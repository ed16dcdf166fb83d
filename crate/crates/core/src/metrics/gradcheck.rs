use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    /// `max_i |a_i - n_i| / max(|a|_inf, |n|_inf)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Finite-difference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `(f(x + h) - f(x - h)) / 2h`, error `O(h^2)`.
    #[default]
    Central,
    /// `(-f(x + 2h) + 8 f(x + h) - 8 f(x - h) + f(x - 2h)) / 12h`, error
    /// `O(h^4)`. Allows a larger step, which suppresses rounding noise in
    /// low-precision evaluations.
    FivePoint,
}

impl Stencil {
    fn taps(&self) -> &'static [(f64, f64)] {
        match self {
            Stencil::Central => &[(1.0, 0.5), (-1.0, -0.5)],
            Stencil::FivePoint => &[
                (2.0, -1.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (-2.0, 1.0 / 12.0),
            ],
        }
    }
}

/// Central differences `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps`.
pub fn numeric_gradient(f: impl FnMut(&[f64]) -> f64, input: &[f64], eps: f64) -> Result<Vec<f64>> {
    numeric_gradient_with(f, input, eps, Stencil::Central)
}

pub fn numeric_gradient_with(
    mut f: impl FnMut(&[f64]) -> f64,
    input: &[f64],
    eps: f64,
    stencil: Stencil,
) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(MetricsError::InvalidStep(eps));
    }
    let mut x = input.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        let mut acc = 0.0;
        for &(offset, weight) in stencil.taps() {
            x[i] = orig + offset * eps;
            let v = f(&x);
            if !v.is_finite() {
                return Err(MetricsError::NonFinite(i));
            }
            acc += weight * v;
        }
        x[i] = orig;
        grad.push(acc / eps);
    }
    Ok(grad)
}

/// Compare an analytic gradient of the scalar function `f` at `input`
/// against central differences.
///
/// The error of each element is taken relative to the largest gradient
/// magnitude, so components that are zero up to rounding do not dominate.
pub fn grad_check(f: impl FnMut(&[f64]) -> f64, input: &[f64], analytic: &[f64], eps: f64) -> Result<GradCheck> {
    grad_check_with(f, input, analytic, eps, Stencil::Central)
}

/// [`grad_check`] with a chosen finite-difference formula.
pub fn grad_check_with(
    f: impl FnMut(&[f64]) -> f64,
    input: &[f64],
    analytic: &[f64],
    eps: f64,
    stencil: Stencil,
) -> Result<GradCheck> {
    if analytic.len() != input.len() {
        return Err(MetricsError::LengthMismatch {
            what: "grad_check",
            left: analytic.len(),
            right: input.len(),
        });
    }
    if let Some(i) = analytic.iter().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let numeric = numeric_gradient_with(f, input, eps, stencil)?;
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = inf(analytic).max(inf(&numeric));
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: numeric.first().copied().unwrap_or(0.0),
        checked: input.len(),
    };
    if scale == 0.0 {
        return Ok(report);
    }
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / scale;
        if err > report.max_rel_error {
            report = GradCheck {
                max_rel_error: err,
                worst_index: i,
                analytic: a,
                numeric: n,
                checked: input.len(),
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exact() {
        let w = [0.5, -2.0, 3.0];
        let f = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let r = grad_check(f, &[1.0, 2.0, 3.0], &w, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-10);
    }

    #[test]
    fn detects_corruption() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x = [1.0, -3.0, 0.5];
        let mut g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        g[1] *= 1.1;
        let r = grad_check(f, &x, &g, 1e-5).unwrap();
        assert_eq!(r.worst_index, 1);
        assert!(r.max_rel_error > 0.05);
    }

    #[test]
    fn five_point_is_exact_on_quartics() {
        let f = |x: &[f64]| x[0].powi(4) - 2.0 * x[0].powi(3);
        let g = numeric_gradient_with(f, &[1.5], 0.1, Stencil::FivePoint).unwrap();
        let exact = 4.0 * 1.5f64.powi(3) - 6.0 * 1.5f64.powi(2);
        assert!((g[0] - exact).abs() < 1e-12);
        let c = numeric_gradient(f, &[1.5], 0.1).unwrap();
        assert!((c[0] - exact).abs() > 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(grad_check(|_| f64::NAN, &[1.0], &[0.0], 1e-5).is_err());
        assert!(grad_check(|x| x[0], &[1.0], &[1.0], 0.0).is_err());
    }
}
