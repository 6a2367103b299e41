//! Second-order link whose position runs into rigid mechanical stops.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Mat;

use super::discretize::{candidate_matrix, discretize, CandidateMode};
use super::sim::Plant;

/// How stop contact is resolved at a sample boundary.
///
/// The impact itself is inelastic: position sticks at the stop and the
/// approach velocity is destroyed. `Strict` applies that reset verbatim
/// (velocity jumps to zero on contact, state held while the drive pushes
/// outward). `Companion` removes velocity in proportion to the position
/// overshoot, `x₂⁺ = c₂ − (c₁ − clamp(c₁))/dt`, which is continuous and
/// piecewise-linear in the candidate — hence exactly representable by a
/// ReLU layer — and converges to the strict reset as `dt → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    Companion,
    Strict,
}

/// Rigid-mechanical-stop limiter link.
///
/// Free dynamics `ẋ₁ = x₂`, `ẋ₂ = (k·u − x₁)/T² − 2ζ·x₂/T` with the
/// position bounded, `|x₁| ≤ D`.
#[derive(Debug, Clone)]
pub struct StopLink {
    pub gain: f64,
    pub time_constant: f64,
    pub damping: f64,
    pub bound: f64,
    pub dt: f64,
    pub candidate_mode: CandidateMode,
    pub contact_mode: ContactMode,
    cand: Mat,
    inv_dt: f64,
}

impl StopLink {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gain: f64,
        time_constant: f64,
        damping: f64,
        bound: f64,
        dt: f64,
        candidate_mode: CandidateMode,
        contact_mode: ContactMode,
    ) -> Result<Self> {
        if !(time_constant > 0.0) || !time_constant.is_finite() {
            return Err(Error::InvalidParam(format!(
                "time constant must be positive, got {time_constant}"
            )));
        }
        if !(damping >= 0.0) || !damping.is_finite() {
            return Err(Error::InvalidParam(format!(
                "damping ratio must be non-negative, got {damping}"
            )));
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidParam(format!("bound must be positive, got {bound}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
        }
        ensure_finite(gain, "gain")?;
        let t2 = time_constant * time_constant;
        let a_c = Mat::from_rows(&[
            vec![0.0, 1.0],
            vec![-1.0 / t2, -2.0 * damping / time_constant],
        ])?;
        let b_c = vec![0.0, gain / t2];
        let (a_d, b_d) = discretize(&a_c, &b_c, dt, candidate_mode);
        Ok(StopLink {
            gain,
            time_constant,
            damping,
            bound,
            dt,
            candidate_mode,
            contact_mode,
            cand: candidate_matrix(&a_d, &b_d),
            inv_dt: 1.0 / dt,
        })
    }

    /// The discretized candidate map `[A_d | B_d]` (2×3, applied to `[x₁, x₂, u]`).
    pub fn candidate_map(&self) -> &Mat {
        &self.cand
    }

    pub fn candidate(&self, x1: f64, x2: f64, u: f64) -> (f64, f64) {
        let c = self.cand.matvec(&[x1, x2, u]);
        (c[0], c[1])
    }

    /// One sample of the constrained dynamics.
    pub fn step_pair(&self, x1: f64, x2: f64, u: f64) -> Result<(f64, f64)> {
        ensure_finite(u, "u")?;
        ensure_finite(x1, "x1")?;
        ensure_finite(x2, "x2")?;
        let d = self.bound;
        match self.contact_mode {
            ContactMode::Companion => {
                let (c1, c2) = self.candidate(x1, x2, u);
                let x1n = c1.clamp(-d, d);
                Ok((x1n, c2 - self.inv_dt * (c1 - x1n)))
            }
            ContactMode::Strict => {
                // Resting on a stop with the drive still pushing outward:
                // the state is held.
                if x1.abs() >= d && x2 == 0.0 && (self.gain * u - x1) * x1.signum() > 0.0 {
                    return Ok((x1, x2));
                }
                let (c1, c2) = self.candidate(x1, x2, u);
                if c1.abs() >= d {
                    // Inelastic impact: position sticks, velocity dies.
                    Ok((d.copysign(c1), 0.0))
                } else {
                    Ok((c1, c2))
                }
            }
        }
    }
}

impl Plant for StopLink {
    fn state_dim(&self) -> usize {
        2
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, state: &[f64], u: f64) -> Result<Vec<f64>> {
        let (x1, x2) = self.step_pair(state[0], state[1], u)?;
        Ok(vec![x1, x2])
    }

    fn output(&self, state: &[f64]) -> f64 {
        state[0]
    }

    fn limiters_at_bound(&self, state: &[f64]) -> Vec<usize> {
        if state[0].abs() >= self.bound {
            vec![0]
        } else {
            vec![]
        }
    }

    fn n_limiters(&self) -> usize {
        1
    }

    fn limiter_bounds(&self) -> Vec<(usize, f64)> {
        vec![(0, self.bound)]
    }
}
