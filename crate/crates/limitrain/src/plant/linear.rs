//! Linear plants as difference equations on past inputs and outputs.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, ensure_finite, Error, Result};

use super::sim::Plant;

/// Z-domain coefficients of a linear plant,
///
/// ```text
/// y(i) = b₀·u(i) + b₁·u(i−1) + … + b_M·u(i−M)
///        − a₁·y(i−1) − … − a_K·y(i−K)
/// ```
///
/// `b` holds `b₀..b_M`; `a` holds `a₁..a_K` (`a₀ ≡ 1` is implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDifferenceModel {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl LinearDifferenceModel {
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() && a.is_empty() {
            return Err(Error::InvalidParam(
                "difference model needs at least one coefficient".into(),
            ));
        }
        ensure_all_finite(&b, "b")?;
        ensure_all_finite(&a, "a")?;
        Ok(LinearDifferenceModel { b, a })
    }

    /// Number of past inputs the model looks at.
    pub fn input_lags(&self) -> usize {
        self.b.len().saturating_sub(1)
    }

    /// Number of past outputs the model looks at.
    pub fn output_lags(&self) -> usize {
        self.a.len()
    }

    /// System order used for network sizing.
    pub fn order(&self) -> usize {
        self.input_lags().max(self.output_lags()).max(1)
    }

    /// Steady-state output per unit constant input, `Σb / (1 + Σa)`.
    pub fn dc_gain(&self) -> f64 {
        let bs: f64 = self.b.iter().sum();
        let as_: f64 = self.a.iter().sum();
        bs / (1.0 + as_)
    }
}

/// One step of the difference equation.
///
/// Histories are newest-first: `u_history[0] = u(i−1)`,
/// `y_history[0] = y(i−1)`. Entries beyond the provided length are
/// treated as zero (start-up padding).
pub fn step_linear(
    model: &LinearDifferenceModel,
    u_history: &[f64],
    y_history: &[f64],
    u_now: f64,
) -> Result<f64> {
    ensure_finite(u_now, "u_now")?;
    ensure_all_finite(u_history, "u_history")?;
    ensure_all_finite(y_history, "y_history")?;
    let mut y = 0.0;
    if let Some(b0) = model.b.first() {
        y += b0 * u_now;
    }
    for (m, bm) in model.b.iter().enumerate().skip(1) {
        y += bm * u_history.get(m - 1).copied().unwrap_or(0.0);
    }
    for (idx, ak) in model.a.iter().enumerate() {
        y -= ak * y_history.get(idx).copied().unwrap_or(0.0);
    }
    Ok(y)
}

/// Difference model adapted to the [`Plant`] interface.
///
/// The simulation state is the newest-first history pair
/// `[y(i), …, y(i−K+1), u(i), …, u(i−M+1)]` (at least one `y` slot is
/// always kept so the output is addressable).
#[derive(Debug, Clone)]
pub struct LinearPlant {
    pub model: LinearDifferenceModel,
    pub dt: f64,
}

impl LinearPlant {
    pub fn new(model: LinearDifferenceModel, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
        }
        Ok(LinearPlant { model, dt })
    }

    fn y_slots(&self) -> usize {
        self.model.output_lags().max(1)
    }
}

impl Plant for LinearPlant {
    fn state_dim(&self) -> usize {
        self.y_slots() + self.model.input_lags()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    /// Row alignment: the input applied at row `k` plays `u(k)` of the
    /// difference equation, reaching `y(k+1)` through `b₁`. The direct
    /// feedthrough term `b₀·u(k+1)` is evaluated on the held input
    /// (exact for strictly proper models, `b₀ = 0`).
    fn step(&self, state: &[f64], u: f64) -> Result<Vec<f64>> {
        let ny = self.y_slots();
        let (y_hist, u_hist) = state.split_at(ny);
        let mut u_with_now = Vec::with_capacity(u_hist.len() + 1);
        u_with_now.push(u);
        u_with_now.extend_from_slice(u_hist);
        let y_now = step_linear(&self.model, &u_with_now, y_hist, u)?;
        let mut next = Vec::with_capacity(state.len());
        next.push(y_now);
        next.extend_from_slice(&y_hist[..ny - 1]);
        if self.model.input_lags() > 0 {
            next.push(u);
            next.extend_from_slice(&u_hist[..u_hist.len() - 1]);
        }
        Ok(next)
    }

    fn output(&self, state: &[f64]) -> f64 {
        state[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::sim::simulate;
    use approx::assert_relative_eq;

    #[test]
    fn direct_substitution() {
        // b=[0, 0.5], a=[−0.9], u(i−1)=2, y(i−1)=0 → y(i) = 0.5·2 = 1.0
        let m = LinearDifferenceModel::new(vec![0.0, 0.5], vec![-0.9]).unwrap();
        let y = step_linear(&m, &[2.0], &[0.0], 0.0).unwrap();
        assert_eq!(y, 1.0);
    }

    #[test]
    fn zero_histories_zero_input() {
        let m = LinearDifferenceModel::new(vec![0.0, 0.5], vec![-0.9]).unwrap();
        assert_eq!(step_linear(&m, &[], &[], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn identity_passthrough() {
        let m = LinearDifferenceModel::new(vec![1.0], vec![]).unwrap();
        assert_eq!(step_linear(&m, &[], &[], 3.0).unwrap(), 3.0);
    }

    #[test]
    fn rejects_non_finite_input() {
        let m = LinearDifferenceModel::new(vec![1.0], vec![]).unwrap();
        assert!(step_linear(&m, &[], &[], f64::NAN).is_err());
    }

    #[test]
    fn unit_step_reaches_dc_gain() {
        let m = LinearDifferenceModel::new(vec![0.0, 0.5], vec![-0.9]).unwrap();
        assert_relative_eq!(m.dc_gain(), 5.0, epsilon = 1e-12);
        let plant = LinearPlant::new(m, 1.0).unwrap();
        let steps = 400;
        let input = vec![1.0; steps + 1];
        let x0 = vec![0.0; plant.state_dim()];
        let traj = simulate(&plant, &input, &x0, steps).unwrap();
        assert_relative_eq!(*traj.output.last().unwrap(), 5.0, epsilon = 1e-9);
    }
}
