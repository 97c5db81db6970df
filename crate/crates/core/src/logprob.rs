//! Log-domain probabilities.
//!
//! Seed-set probabilities routinely underflow f64 in the linear domain (a
//! 133-digit set count is attested in real inputs), so every probability in
//! this crate is carried as a natural log, with `-inf` encoding exactly zero.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A probability stored as its natural logarithm. Values are `<= 0`, with
/// `-inf` meaning probability zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wrap a log-probability. Values a hair above zero (accumulated
    /// round-off) are clamped; anything larger is rejected.
    pub fn new(log_value: f64) -> Result<LogProb> {
        if log_value.is_nan() {
            return Err(Error::degenerate("log-probability is NaN"));
        }
        if log_value > 1e-9 {
            return Err(Error::degenerate(format!(
                "log-probability {log_value} exceeds 0 (probability > 1)"
            )));
        }
        Ok(LogProb(log_value.min(0.0)))
    }

    pub fn from_prob(p: f64) -> Result<LogProb> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::degenerate(format!("{p} is not a probability")));
        }
        Ok(LogProb(p.ln()))
    }

    pub fn log(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl From<LogProb> for f64 {
    fn from(lp: LogProb) -> f64 {
        lp.log()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_roundoff_but_rejects_real_overflow() {
        assert_eq!(LogProb::new(1e-12).unwrap().log(), 0.0);
        assert!(LogProb::new(0.1).is_err());
        assert!(LogProb::new(f64::NAN).is_err());
        assert!(LogProb::new(f64::NEG_INFINITY).unwrap().is_zero());
    }

    #[test]
    fn prob_round_trip() {
        let lp = LogProb::from_prob(0.25).unwrap();
        assert!((lp.prob() - 0.25).abs() < 1e-15);
        assert!(LogProb::from_prob(1.5).is_err());
    }
}
