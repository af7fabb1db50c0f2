//! Convex time cost functions with exact derivatives and inverses.
//!
//! Every shipped family has a closed-form inverse, so threshold crossing
//! times can be solved analytically instead of polled.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Relative tolerance for analytic identities (`f(f⁻¹(y)) = y` and friends).
pub const ANALYTIC_TOL: f64 = 1e-9;

/// Errors from evaluating a cost function outside its domain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostFnError {
    #[error("time cost functions are defined on t >= 0, got {0}")]
    NegativeTime(f64),
    #[error("inverse is defined on y >= 0, got {0}")]
    NegativeValue(f64),
    #[error("rate is unbounded at t = 0 for monomial exponent {alpha} < 1")]
    UnboundedRate { alpha: f64 },
    #[error("monomial exponent must be > 0, got {0}")]
    BadExponent(f64),
    #[error("cannot parse time cost spec {0:?}; expected \"monomial:<alpha>\" or \"linear\"")]
    BadSpec(String),
}

/// A delay penalty `f` with `f(0) = 0`, nondecreasing on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimeCostFunction {
    /// `f(t) = t^alpha`. Convex for `alpha > 1`.
    Monomial { alpha: f64 },
    /// `f(t) = t`. Kept as its own kind for baseline comparisons.
    Linear,
}

impl TimeCostFunction {
    pub fn monomial(alpha: f64) -> Result<Self, CostFnError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(CostFnError::BadExponent(alpha));
        }
        Ok(TimeCostFunction::Monomial { alpha })
    }

    /// Exponent of the function. `Linear` reports 1.
    pub fn alpha(&self) -> f64 {
        match *self {
            TimeCostFunction::Monomial { alpha } => alpha,
            TimeCostFunction::Linear => 1.0,
        }
    }

    /// `f(t)`.
    pub fn evaluate(&self, t: f64) -> Result<f64, CostFnError> {
        if t < 0.0 || t.is_nan() {
            return Err(CostFnError::NegativeTime(t));
        }
        Ok(self.eval_unchecked(t))
    }

    /// `f(t)` without the domain check; callers guarantee `t >= 0`.
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        match *self {
            TimeCostFunction::Monomial { alpha } => t.powf(alpha),
            TimeCostFunction::Linear => t,
        }
    }

    /// `f'(t)`, the instantaneous growth rate of the penalty.
    pub fn rate(&self, t: f64) -> Result<f64, CostFnError> {
        if t < 0.0 || t.is_nan() {
            return Err(CostFnError::NegativeTime(t));
        }
        match *self {
            TimeCostFunction::Monomial { alpha } => {
                if alpha < 1.0 && t == 0.0 {
                    return Err(CostFnError::UnboundedRate { alpha });
                }
                Ok(alpha * t.powf(alpha - 1.0))
            }
            TimeCostFunction::Linear => Ok(1.0),
        }
    }

    /// `f⁻¹(y)`: the `t` with `f(t) = y`.
    pub fn invert(&self, y: f64) -> Result<f64, CostFnError> {
        if y < 0.0 || y.is_nan() {
            return Err(CostFnError::NegativeValue(y));
        }
        Ok(self.invert_unchecked(y))
    }

    /// `f⁻¹(y)` without the domain check; callers guarantee `y >= 0`.
    #[inline]
    pub fn invert_unchecked(&self, y: f64) -> f64 {
        match *self {
            TimeCostFunction::Monomial { alpha } => y.powf(1.0 / alpha),
            TimeCostFunction::Linear => y,
        }
    }

    /// Truncated value of `x` with respect to `y`:
    /// `0` when `x <= y`, otherwise `f(f⁻¹(x) − f⁻¹(y))`.
    pub fn truncated_value(&self, x: f64, y: f64) -> Result<f64, CostFnError> {
        if x < 0.0 || x.is_nan() {
            return Err(CostFnError::NegativeValue(x));
        }
        if y < 0.0 || y.is_nan() {
            return Err(CostFnError::NegativeValue(y));
        }
        if x <= y {
            return Ok(0.0);
        }
        let d = self.invert_unchecked(x) - self.invert_unchecked(y);
        Ok(self.eval_unchecked(d.max(0.0)))
    }

    /// Checks the admissibility conditions for the competitive guarantees:
    /// `f(0) = 0`, `f'(0) = 0`, monotone and convex on the sample grid.
    pub fn check_admissible(&self, grid: &[f64]) -> AdmissibilityReport {
        let zero_at_origin = self.eval_unchecked(0.0) == 0.0;
        let zero_rate_at_origin = matches!(self.rate(0.0), Ok(r) if r.abs() <= ANALYTIC_TOL);

        let mut monotone = true;
        let mut convex = true;
        let mut prev_slope: Option<f64> = None;
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let (fa, fb) = (self.eval_unchecked(a), self.eval_unchecked(b));
            if fb < fa - ANALYTIC_TOL * fa.abs().max(1.0) {
                monotone = false;
            }
            let slope = (fb - fa) / (b - a);
            if let Some(p) = prev_slope {
                if slope < p - ANALYTIC_TOL * p.abs().max(1.0) {
                    convex = false;
                }
            }
            prev_slope = Some(slope);
        }

        AdmissibilityReport {
            zero_at_origin,
            zero_rate_at_origin,
            monotone,
            convex,
        }
    }
}

/// Per-condition outcome of [`TimeCostFunction::check_admissible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AdmissibilityReport {
    pub zero_at_origin: bool,
    pub zero_rate_at_origin: bool,
    pub monotone: bool,
    pub convex: bool,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.zero_at_origin && self.zero_rate_at_origin && self.monotone && self.convex
    }
}

impl fmt::Display for TimeCostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TimeCostFunction::Monomial { alpha } => write!(f, "monomial:{alpha}"),
            TimeCostFunction::Linear => write!(f, "linear"),
        }
    }
}

impl FromStr for TimeCostFunction {
    type Err = CostFnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "linear" {
            return Ok(TimeCostFunction::Linear);
        }
        if let Some(rest) = lower.strip_prefix("monomial:") {
            let alpha: f64 = rest
                .trim()
                .parse()
                .map_err(|_| CostFnError::BadSpec(s.to_string()))?;
            return TimeCostFunction::monomial(alpha);
        }
        Err(CostFnError::BadSpec(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(alpha: f64) -> TimeCostFunction {
        TimeCostFunction::monomial(alpha).unwrap()
    }

    #[test]
    fn evaluate_matches_closed_forms() {
        assert_eq!(mono(2.0).evaluate(3.0).unwrap(), 9.0);
        assert_eq!(mono(2.0).evaluate(0.0).unwrap(), 0.0);
        assert_eq!(TimeCostFunction::Linear.evaluate(0.0).unwrap(), 0.0);
        assert!((mono(1.5).evaluate(4.0).unwrap() - 8.0).abs() < 1e-12);
        assert!(mono(2.0).evaluate(-1.0).is_err());
    }

    #[test]
    fn rate_matches_closed_forms() {
        assert_eq!(mono(2.0).rate(3.0).unwrap(), 6.0);
        assert_eq!(mono(2.0).rate(0.0).unwrap(), 0.0);
        assert_eq!(mono(1.5).rate(0.0).unwrap(), 0.0);
        assert_eq!(TimeCostFunction::Linear.rate(0.0).unwrap(), 1.0);
        assert!(matches!(
            mono(0.5).rate(0.0),
            Err(CostFnError::UnboundedRate { .. })
        ));
    }

    #[test]
    fn rate_agrees_with_finite_differences() {
        // Independent oracle: central difference at h = 1e-6.
        let h = 1e-6;
        for &alpha in &[1.5, 2.0, 3.0] {
            let f = mono(alpha);
            for &t in &[0.5, 1.0, 2.0, 5.0] {
                let fd = (f.evaluate(t + h).unwrap() - f.evaluate(t - h).unwrap()) / (2.0 * h);
                let an = f.rate(t).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-5 * an.max(1.0),
                    "alpha={alpha} t={t}: fd={fd} analytic={an}"
                );
            }
        }
    }

    #[test]
    fn invert_matches_closed_forms() {
        assert_eq!(mono(2.0).invert(9.0).unwrap(), 3.0);
        assert_eq!(mono(2.0).invert(0.0).unwrap(), 0.0);
        assert!((mono(3.0).invert(8.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(mono(2.0).invert(-0.5).is_err());
    }

    #[test]
    fn invert_is_two_sided_inverse() {
        for &alpha in &[1.2, 1.5, 2.0, 3.0, 4.0] {
            let f = mono(alpha);
            for &y in &[0.0, 1e-6, 0.3, 1.0, 7.0, 1e4] {
                let t = f.invert(y).unwrap();
                let back = f.evaluate(t).unwrap();
                assert!((back - y).abs() <= ANALYTIC_TOL * y.max(1.0));
            }
            for &t in &[0.0, 0.1, 1.0, 42.0] {
                let y = f.evaluate(t).unwrap();
                let back = f.invert(y).unwrap();
                assert!((back - t).abs() <= ANALYTIC_TOL * t.max(1.0));
            }
        }
    }

    #[test]
    fn truncated_value_branches() {
        let f = mono(2.0);
        // x <= y branch, including the boundary.
        assert_eq!(f.truncated_value(1.0, 2.0).unwrap(), 0.0);
        assert_eq!(f.truncated_value(5.0, 5.0).unwrap(), 0.0);
        // (sqrt(8) - sqrt(2))^2 = 2.
        let v = f.truncated_value(8.0, 2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        // trun(x; 0) = x.
        for &x in &[0.0, 0.25, 3.0, 100.0] {
            let v = f.truncated_value(x, 0.0).unwrap();
            assert!((v - x).abs() <= ANALYTIC_TOL * x.max(1.0));
        }
    }

    #[test]
    fn admissibility_report() {
        let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
        assert!(mono(2.0).check_admissible(&grid).all_pass());

        let lin = TimeCostFunction::Linear.check_admissible(&grid);
        assert!(lin.zero_at_origin && lin.monotone && lin.convex);
        assert!(!lin.zero_rate_at_origin);

        // Second differences of sqrt(t) on the grid are negative.
        let sqrt = mono(0.5).check_admissible(&grid);
        assert!(!sqrt.convex);
        assert!(!sqrt.zero_rate_at_origin);
    }

    #[test]
    fn spec_strings_round_trip() {
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        assert_eq!(f, mono(2.0));
        let f: TimeCostFunction = "MONOMIAL:1.5".parse().unwrap();
        assert_eq!(f, mono(1.5));
        let f: TimeCostFunction = "Linear".parse().unwrap();
        assert_eq!(f, TimeCostFunction::Linear);
        assert!("monomial:".parse::<TimeCostFunction>().is_err());
        assert!("cubic".parse::<TimeCostFunction>().is_err());
        for f in [mono(2.0), mono(1.5), TimeCostFunction::Linear] {
            let s = f.to_string();
            assert_eq!(s.parse::<TimeCostFunction>().unwrap(), f);
        }
    }
}
