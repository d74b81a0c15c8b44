//! Variance-preserving noise schedules: per-step signal/noise coefficient
//! pairs with `alpha_0 = 1`, `sigma_0 = 0`, and `alpha_t^2 + sigma_t^2 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            other => Err(Error::invalid(format!(
                "unknown schedule kind '{other}' (expected linear or cosine)"
            ))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleKind::Linear => write!(f, "linear"),
            ScheduleKind::Cosine => write!(f, "cosine"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    alpha: Vec<f64>,
    sigma: Vec<f64>,
}

const BETA_START: f64 = 1e-4;
const BETA_END: f64 = 2e-2;

/// Builds a schedule with `t_steps` entries indexed 0..t_steps.
///
/// Step 0 is the identity (`alpha = 1`, `sigma = 0`); the linear kind
/// accumulates a linearly spaced beta ramp into cumulative products, the
/// cosine kind follows the squared-cosine profile.
pub fn make_schedule(t_steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if t_steps < 2 {
        return Err(Error::invalid(format!(
            "schedule needs at least 2 steps, got {t_steps}"
        )));
    }
    let mut alpha = Vec::with_capacity(t_steps);
    let mut sigma = Vec::with_capacity(t_steps);
    match kind {
        ScheduleKind::Linear => {
            let mut abar = 1.0f64;
            alpha.push(1.0);
            sigma.push(0.0);
            for t in 1..t_steps {
                let frac = if t_steps > 2 {
                    (t - 1) as f64 / (t_steps - 2) as f64
                } else {
                    0.0
                };
                let beta = BETA_START + (BETA_END - BETA_START) * frac;
                abar *= 1.0 - beta;
                alpha.push(abar.sqrt());
                sigma.push((1.0 - abar).sqrt());
            }
        }
        ScheduleKind::Cosine => {
            let s = 0.008;
            let f = |t: f64| ((t + s) / (1.0 + s) * std::f64::consts::FRAC_PI_2).cos().powi(2);
            let f0 = f(0.0);
            let mut prev = 1.0f64;
            for t in 0..t_steps {
                let mut abar = (f(t as f64 / (t_steps - 1) as f64) / f0).clamp(1e-12, 1.0);
                // Guard monotonicity against floating-point wiggle.
                abar = abar.min(prev);
                prev = abar;
                alpha.push(abar.sqrt());
                sigma.push((1.0 - abar).sqrt());
            }
            alpha[0] = 1.0;
            sigma[0] = 0.0;
        }
    }
    Ok(NoiseSchedule { kind, alpha, sigma })
}

impl NoiseSchedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t]
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t >= self.len() {
            return Err(Error::invalid(format!(
                "timestep {t} outside schedule of length {}",
                self.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_invariants(sched: &NoiseSchedule) {
        assert_eq!(sched.alpha(0), 1.0);
        assert_eq!(sched.sigma(0), 0.0);
        for t in 0..sched.len() {
            let sq = sched.alpha(t).powi(2) + sched.sigma(t).powi(2);
            assert!((sq - 1.0).abs() < 1e-9, "t={t}: alpha^2+sigma^2={sq}");
            if t > 0 {
                assert!(sched.alpha(t) <= sched.alpha(t - 1), "alpha not monotone at {t}");
                assert!(sched.sigma(t) >= sched.sigma(t - 1), "sigma not monotone at {t}");
            }
        }
    }

    #[test]
    fn linear_schedule_invariants() {
        for t in [10, 100, 1000] {
            assert_invariants(&make_schedule(t, ScheduleKind::Linear).unwrap());
        }
    }

    #[test]
    fn cosine_schedule_invariants() {
        for t in [10, 100, 1000] {
            assert_invariants(&make_schedule(t, ScheduleKind::Cosine).unwrap());
        }
    }

    #[test]
    fn linear_matches_cumulative_product_oracle() {
        // Independent oracle: accumulate the beta ramp step by step and
        // compare alpha_500 / sigma_500 of the default 1000-step schedule.
        let sched = make_schedule(1000, ScheduleKind::Linear).unwrap();
        let mut abar = 1.0f64;
        for t in 1..=500usize {
            let beta = 1e-4 + (2e-2 - 1e-4) * ((t - 1) as f64 / 998.0);
            abar *= 1.0 - beta;
        }
        assert!((sched.alpha(500) - abar.sqrt()).abs() < 1e-12);
        assert!((sched.sigma(500) - (1.0 - abar).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(make_schedule(1, ScheduleKind::Linear).is_err());
        assert!(make_schedule(0, ScheduleKind::Linear).is_err());
    }
}
