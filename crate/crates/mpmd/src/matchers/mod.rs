//! Online matching policies: the timer-based deterministic matcher and
//! the threshold baselines it improves on, plus a greedy control.

mod greedy;
mod strategies;
mod timer;

pub use greedy::Greedy;
pub use strategies::{StrategyI, StrategyII, StrategyIII};
pub use timer::{TimerInvariants, TimerMatcher};

use std::fmt;
use std::str::FromStr;

use crate::costfn::TimeCostFunction;
use crate::engine::OnlineMatcher;
use crate::metric::MetricSpace;

/// Relative unit for threshold comparisons at analytically computed
/// crossing times.
pub(crate) const THRESHOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatcherSpecError {
    #[error("unknown matcher spec {0:?}; expected algA, greedy, s1:<theta>, s2:<theta> or s3:<theta>")]
    Unknown(String),
    #[error("threshold must be a positive real, got {0:?}")]
    BadTheta(String),
}

/// Parsed form of the CLI matcher strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatcherSpec {
    AlgA,
    S1(f64),
    S2(f64),
    S3(f64),
    Greedy,
}

impl MatcherSpec {
    pub fn build(&self, space: &MetricSpace, f: TimeCostFunction) -> Box<dyn OnlineMatcher> {
        match *self {
            MatcherSpec::AlgA => Box::new(TimerMatcher::new(space, f)),
            MatcherSpec::S1(theta) => Box::new(StrategyI::new(space.k(), theta)),
            MatcherSpec::S2(theta) => Box::new(StrategyII::new(space.k(), f, theta)),
            MatcherSpec::S3(theta) => Box::new(StrategyIII::new(space.k(), f, theta)),
            MatcherSpec::Greedy => Box::new(Greedy::new(space.clone())),
        }
    }
}

impl fmt::Display for MatcherSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatcherSpec::AlgA => write!(f, "algA"),
            MatcherSpec::S1(t) => write!(f, "s1:{t}"),
            MatcherSpec::S2(t) => write!(f, "s2:{t}"),
            MatcherSpec::S3(t) => write!(f, "s3:{t}"),
            MatcherSpec::Greedy => write!(f, "greedy"),
        }
    }
}

impl FromStr for MatcherSpec {
    type Err = MatcherSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "alga" => return Ok(MatcherSpec::AlgA),
            "greedy" => return Ok(MatcherSpec::Greedy),
            _ => {}
        }
        for (prefix, ctor) in [
            ("s1:", MatcherSpec::S1 as fn(f64) -> MatcherSpec),
            ("s2:", MatcherSpec::S2),
            ("s3:", MatcherSpec::S3),
        ] {
            if let Some(rest) = lower.strip_prefix(prefix) {
                let theta: f64 = rest
                    .trim()
                    .parse()
                    .map_err(|_| MatcherSpecError::BadTheta(s.to_string()))?;
                if !(theta > 0.0) || !theta.is_finite() {
                    return Err(MatcherSpecError::BadTheta(s.to_string()));
                }
                return Ok(ctor(theta));
            }
        }
        Err(MatcherSpecError::Unknown(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_strings_parse() {
        assert_eq!("algA".parse::<MatcherSpec>().unwrap(), MatcherSpec::AlgA);
        assert_eq!("greedy".parse::<MatcherSpec>().unwrap(), MatcherSpec::Greedy);
        assert_eq!("s1:0.5".parse::<MatcherSpec>().unwrap(), MatcherSpec::S1(0.5));
        assert_eq!("S3:2".parse::<MatcherSpec>().unwrap(), MatcherSpec::S3(2.0));
        assert!("s2:-1".parse::<MatcherSpec>().is_err());
        assert!("s4:1".parse::<MatcherSpec>().is_err());
    }
}
