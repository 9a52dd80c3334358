use std::env;

use anyhow::{bail, Context};

/// Name of the environment variable that overrides tolerances, e.g.
/// `ATVKIT_TOL_OVERRIDE=slack=1e-6,oracle=1e-7`. For experiments only; every
/// documented guarantee uses the defaults.
pub const OVERRIDE_VAR: &str = "ATVKIT_TOL_OVERRIDE";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute tolerance for identities such as the entropy chain rule.
    pub equality: f64,
    /// Agreement between float solvers and the exact adapted oracle.
    pub oracle: f64,
    /// Agreement between the transport simplex and the exact classical oracle.
    pub classical_oracle: f64,
    /// An inequality is violated when `lhs > rhs · (1 + slack)`.
    pub slack: f64,
    /// Largest entry of a bicausality discrepancy table.
    pub bicausal: f64,
    /// Largest atomwise marginal deviation of a coupling.
    pub marginal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            equality: 1e-10,
            oracle: 1e-8,
            classical_oracle: 1e-9,
            slack: 1e-9,
            bicausal: 1e-9,
            marginal: 1e-10,
        }
    }
}

impl Tolerances {
    /// Defaults, with any `key=value` pairs from the override variable applied.
    pub fn from_env() -> anyhow::Result<Self> {
        match env::var(OVERRIDE_VAR) {
            Ok(spec) => Self::default().with_overrides(&spec),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_overrides(mut self, spec: &str) -> anyhow::Result<Self> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("{OVERRIDE_VAR}: expected key=value, got {item:?}"))?;
            let value: f64 = value
                .trim()
                .parse()
                .with_context(|| format!("{OVERRIDE_VAR}: bad number in {item:?}"))?;
            if !(value >= 0.0) || !value.is_finite() {
                bail!("{OVERRIDE_VAR}: {key} must be finite and nonnegative");
            }
            let slot = match key.trim() {
                "equality" => &mut self.equality,
                "oracle" => &mut self.oracle,
                "classical_oracle" => &mut self.classical_oracle,
                "slack" => &mut self.slack,
                "bicausal" => &mut self.bicausal,
                "marginal" => &mut self.marginal,
                other => bail!("{OVERRIDE_VAR}: unknown key {other:?}"),
            };
            *slot = value;
        }
        Ok(self)
    }

    pub fn slack_factor(&self) -> f64 {
        1.0 + self.slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let t = Tolerances::default()
            .with_overrides("slack=1e-6, oracle=0.5")
            .unwrap();
        assert_eq!(t.slack, 1e-6);
        assert_eq!(t.oracle, 0.5);
        assert_eq!(t.equality, 1e-10);
        assert!(Tolerances::default().with_overrides("speed=1").is_err());
        assert!(Tolerances::default().with_overrides("slack").is_err());
    }
}
