use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concavity recommended for the MCP penalty.
pub const DEFAULT_MCP_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Mcp,
    Lasso,
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcp" => Ok(PenaltyFamily::Mcp),
            "lasso" => Ok(PenaltyFamily::Lasso),
            other => Err(Error::InvalidParameter(format!("unknown penalty '{other}'"))),
        }
    }
}

/// A sparsity penalty on the off-diagonal precision entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    /// Concavity; only read for MCP.
    pub gamma: f64,
}

impl PenaltySpec {
    pub fn mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, gamma)
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Lasso, lambda, f64::INFINITY)
    }

    pub fn new(family: PenaltyFamily, lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if family == PenaltyFamily::Mcp && !(gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("MCP gamma must be > 1, got {gamma}")));
        }
        Ok(PenaltySpec { family, lambda, gamma })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda, self.gamma)
    }

    /// Penalty value `P(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self.family {
            PenaltyFamily::Lasso => self.lambda * x.abs(),
            PenaltyFamily::Mcp => mcp_value(x, self.lambda, self.gamma),
        }
    }

    /// Minimiser of `½(x − θ)² + P_{λ·scale}(θ)`.
    pub fn prox(&self, x: f64, scale: f64) -> f64 {
        let lambda = self.lambda * scale;
        match self.family {
            PenaltyFamily::Lasso => soft_threshold(x, lambda),
            PenaltyFamily::Mcp => mcp_prox(x, lambda, self.gamma),
        }
    }
}

/// `sign(x) · max(|x| − λ, 0)`.
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    let mag = x.abs() - lambda;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Closed-form MCP proximal map with unit curvature.
pub fn mcp_prox(x: f64, lambda: f64, gamma: f64) -> f64 {
    if x.abs() > lambda * gamma {
        x
    } else {
        gamma / (gamma - 1.0) * soft_threshold(x, lambda)
    }
}

/// `λ ∫₀^|x| (1 − t/(γλ))₊ dt`.
pub fn mcp_value(x: f64, lambda: f64, gamma: f64) -> f64 {
    let a = x.abs();
    if a <= gamma * lambda {
        lambda * a - a * a / (2.0 * gamma)
    } else {
        0.5 * gamma * lambda * lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert!((soft_threshold(0.5, 0.3) - 0.2).abs() < 1e-15);
        assert!((soft_threshold(-0.5, 0.3) + 0.2).abs() < 1e-15);
        assert_eq!(soft_threshold(0.1, 0.3), 0.0);
    }

    #[test]
    fn mcp_prox_cases() {
        assert_eq!(mcp_prox(0.0, 0.3, 3.0), 0.0);
        assert_eq!(mcp_prox(2.0, 0.3, 3.0), 2.0);
        assert!((mcp_prox(0.5, 0.3, 3.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mcp_value_is_continuous_at_knee() {
        let (l, g) = (0.4, 3.0);
        let knee = l * g;
        assert!((mcp_value(knee, l, g) - 0.5 * g * l * l).abs() < 1e-15);
        assert_eq!(mcp_value(-5.0, l, g), mcp_value(5.0, l, g));
    }

    #[test]
    fn spec_validation() {
        assert!(PenaltySpec::mcp(0.1, 1.0).is_err());
        assert!(PenaltySpec::mcp(-0.1, 3.0).is_err());
        assert!(PenaltySpec::lasso(0.0).is_ok());
        assert_eq!("MCP".parse::<PenaltyFamily>().unwrap(), PenaltyFamily::Mcp);
    }
}
