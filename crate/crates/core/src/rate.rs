use std::fmt;

use crate::error::{Error, Result};

/// Rate sequences `r_n` and shrinking radii `t_n`, indexed from `n = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateSequence {
    /// `r_n = n^beta`
    Power { beta: f64 },
    /// `r_n = n^beta * ln(n + 1)^gamma`
    PowerLog { beta: f64, gamma: f64 },
    /// Explicit values; entry 0 is `r_1`.
    Table(Vec<f64>),
    /// Shrinking radii `t_n = n^(-1/beta)`.
    Shrinking { beta: f64 },
}

impl RateSequence {
    pub fn power(beta: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        Ok(RateSequence::Power { beta })
    }

    pub fn power_log(beta: f64, gamma: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::invalid("gamma", "must be finite and >= 0"));
        }
        Ok(RateSequence::PowerLog { beta, gamma })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("table", "must not be empty"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("table", format!("entry {v} is not a positive real")));
        }
        Ok(RateSequence::Table(values))
    }

    pub fn shrinking(beta: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        Ok(RateSequence::Shrinking { beta })
    }

    /// Value at `n >= 1`. Table lookups past the end panic; call
    /// [`RateSequence::check_horizon`] first.
    #[inline]
    pub fn value(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        let x = n as f64;
        match self {
            RateSequence::Power { beta } => x.powf(*beta),
            RateSequence::PowerLog { beta, gamma } => x.powf(*beta) * (x + 1.0).ln().powf(*gamma),
            RateSequence::Table(v) => v[(n - 1) as usize],
            RateSequence::Shrinking { beta } => x.powf(-1.0 / beta),
        }
    }

    /// Errors if a table does not cover indices `1..=horizon`.
    pub fn check_horizon(&self, horizon: u64) -> Result<()> {
        match self {
            RateSequence::Table(v) if (v.len() as u64) < horizon => Err(Error::RateTableTooShort {
                len: v.len(),
                index: horizon,
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateSequence::Power { beta } => write!(f, "pow:{beta}"),
            RateSequence::PowerLog { beta, gamma } => write!(f, "powlog:{beta}:{gamma}"),
            RateSequence::Table(v) => write!(f, "table:{}", v.len()),
            RateSequence::Shrinking { beta } => write!(f, "shrink:{beta}"),
        }
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} is not a positive real")))
    }
}
