//! First-order lag whose state saturates at a symmetric bound.

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Mat;

use super::discretize::{discretize, CandidateMode};
use super::sim::Plant;

/// Saturation-type limiter link.
///
/// In the interior the state follows `ẋ = (k·u − x)/T`; at the bound it
/// is held while the drive pushes outward and released as soon as it
/// pushes inward. At sample resolution that is realized as
/// candidate-then-clamp: the linear candidate `c = a_d·x + b_d·u` is
/// clamped to `[−D, +D]`.
#[derive(Debug, Clone)]
pub struct SaturationLink {
    pub gain: f64,
    pub time_constant: f64,
    pub bound: f64,
    pub dt: f64,
    pub mode: CandidateMode,
    a_d: f64,
    b_d: f64,
}

impl SaturationLink {
    pub fn new(
        gain: f64,
        time_constant: f64,
        bound: f64,
        dt: f64,
        mode: CandidateMode,
    ) -> Result<Self> {
        if !(time_constant > 0.0) || !time_constant.is_finite() {
            return Err(Error::InvalidParam(format!(
                "time constant must be positive, got {time_constant}"
            )));
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidParam(format!("bound must be positive, got {bound}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
        }
        ensure_finite(gain, "gain")?;
        let a_c = Mat::from_rows(&[vec![-1.0 / time_constant]])?;
        let (a_d, b_d) = discretize(&a_c, &[gain / time_constant], dt, mode);
        Ok(SaturationLink {
            gain,
            time_constant,
            bound,
            dt,
            mode,
            a_d: a_d.at(0, 0),
            b_d: b_d[0],
        })
    }

    /// The discretized pair `(a_d, b_d)` of the unconstrained dynamics.
    pub fn discretized(&self) -> (f64, f64) {
        (self.a_d, self.b_d)
    }

    /// Unclamped one-sample candidate.
    pub fn candidate(&self, x: f64, u: f64) -> f64 {
        self.a_d * x + self.b_d * u
    }

    /// One sample: candidate, then clamp to the bound.
    pub fn step_one(&self, x: f64, u: f64) -> Result<f64> {
        ensure_finite(u, "u")?;
        ensure_finite(x, "x")?;
        Ok(self.candidate(x, u).clamp(-self.bound, self.bound))
    }
}

impl Plant for SaturationLink {
    fn state_dim(&self) -> usize {
        1
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, state: &[f64], u: f64) -> Result<Vec<f64>> {
        Ok(vec![self.step_one(state[0], u)?])
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
