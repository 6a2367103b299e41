//! Tracking hydraulic drive: variable-displacement pump, hydraulic motor,
//! inertial load.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Mat;

use super::discretize::{candidate_matrix, discretize, CandidateMode};
use super::sim::Plant;

/// Physical constants of the drive (normalized units).
///
/// The state is `[γ, p, ω, φ]`: pump-cradle angle, line pressure drop,
/// shaft speed, shaft angle. Two hard limiters are built in: the cradle
/// angle saturates at `±cradle_bound` and the pressure drop is clamped
/// (inertia-free) at `±pressure_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HydraulicParams {
    /// Valve gain from control signal to commanded cradle angle.
    pub valve_gain: f64,
    /// Cradle servo lag, seconds.
    pub cradle_lag: f64,
    /// Pump flow per unit cradle angle.
    pub pump_flow_gain: f64,
    /// Total leakage coefficient.
    pub leakage: f64,
    /// Reduced bulk modulus of the fluid.
    pub bulk_modulus: f64,
    /// Fluid volume in the high-pressure line.
    pub line_volume: f64,
    /// Motor displacement (flow per unit shaft speed, torque per unit pressure).
    pub motor_displacement: f64,
    /// Load inertia.
    pub inertia: f64,
    /// Viscous friction on the shaft.
    pub viscous_friction: f64,
    /// Cradle angle bound D₁.
    pub cradle_bound: f64,
    /// Pressure bound D₂.
    pub pressure_bound: f64,
    /// Sample period, seconds.
    pub dt: f64,
    pub candidate_mode: CandidateMode,
}

impl Default for HydraulicParams {
    /// Defaults are chosen so the open loop is stable, both limiters are
    /// reachable by modest sine/meander excitation, and the regulation
    /// demo (1 rad, 50 rad/s) resolves in a few seconds of simulated time.
    fn default() -> Self {
        HydraulicParams {
            valve_gain: 1.0,
            cradle_lag: 0.05,
            pump_flow_gain: 1.0,
            leakage: 0.05,
            bulk_modulus: 1000.0,
            line_volume: 1.0,
            motor_displacement: 0.1,
            inertia: 0.01,
            viscous_friction: 0.001,
            cradle_bound: 1.0,
            pressure_bound: 25.0,
            dt: 0.01,
            candidate_mode: CandidateMode::Zoh,
        }
    }
}

/// The drive with its one-sample candidate map precomputed.
#[derive(Debug, Clone)]
pub struct HydraulicDrive {
    pub params: HydraulicParams,
    cand: Mat,
}

/// State indices.
pub const CRADLE: usize = 0;
pub const PRESSURE: usize = 1;
pub const SPEED: usize = 2;
pub const ANGLE: usize = 3;

impl HydraulicDrive {
    pub fn new(params: HydraulicParams) -> Result<Self> {
        for (name, v) in [
            ("cradle_lag", params.cradle_lag),
            ("leakage", params.leakage),
            ("bulk_modulus", params.bulk_modulus),
            ("line_volume", params.line_volume),
            ("inertia", params.inertia),
            ("cradle_bound", params.cradle_bound),
            ("pressure_bound", params.pressure_bound),
            ("dt", params.dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        let (a_c, b_c) = continuous_matrices(&params);
        let (a_d, b_d) = discretize(&a_c, &b_c, params.dt, params.candidate_mode);
        Ok(HydraulicDrive {
            params,
            cand: candidate_matrix(&a_d, &b_d),
        })
    }

    /// Continuous-time `(A, B)` of the limiter-free drive.
    pub fn continuous(&self) -> (Mat, Vec<f64>) {
        continuous_matrices(&self.params)
    }

    /// Discretized candidate map `[A_d | B_d]` (4×5, applied to `[x; u]`).
    pub fn candidate_map(&self) -> &Mat {
        &self.cand
    }

    /// Pressure-loop rate constant `L·E/V`.
    pub fn pressure_rate_constant(&self) -> f64 {
        self.params.leakage * self.params.bulk_modulus / self.params.line_volume
    }

    pub fn step_state(&self, state: &[f64; 4], u: f64) -> Result<[f64; 4]> {
        ensure_finite(u, "u")?;
        for (i, v) in state.iter().enumerate() {
            ensure_finite(*v, &format!("state[{i}]"))?;
        }
        let c = self.cand.matvec(&[state[0], state[1], state[2], state[3], u]);
        let d1 = self.params.cradle_bound;
        let d2 = self.params.pressure_bound;
        Ok([c[0].clamp(-d1, d1), c[1].clamp(-d2, d2), c[2], c[3]])
    }
}

fn continuous_matrices(p: &HydraulicParams) -> (Mat, Vec<f64>) {
    let ev = p.bulk_modulus / p.line_volume;
    let a = Mat::from_rows(&[
        vec![-1.0 / p.cradle_lag, 0.0, 0.0, 0.0],
        vec![ev * p.pump_flow_gain, -ev * p.leakage, -ev * p.motor_displacement, 0.0],
        vec![0.0, p.motor_displacement / p.inertia, -p.viscous_friction / p.inertia, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ])
    .expect("static shape");
    let b = vec![p.valve_gain / p.cradle_lag, 0.0, 0.0, 0.0];
    (a, b)
}

impl Plant for HydraulicDrive {
    fn state_dim(&self) -> usize {
        4
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn step(&self, state: &[f64], u: f64) -> Result<Vec<f64>> {
        let s: &[f64; 4] = state
            .try_into()
            .map_err(|_| Error::Dimension(format!("hydraulic state needs 4 entries, got {}", state.len())))?;
        Ok(self.step_state(s, u)?.to_vec())
    }

    /// Regulated output: shaft angle φ.
    fn output(&self, state: &[f64]) -> f64 {
        state[ANGLE]
    }

    fn limiters_at_bound(&self, state: &[f64]) -> Vec<usize> {
        let mut ids = Vec::new();
        if state[CRADLE].abs() >= self.params.cradle_bound {
            ids.push(0);
        }
        if state[PRESSURE].abs() >= self.params.pressure_bound {
            ids.push(1);
        }
        ids
    }

    fn n_limiters(&self) -> usize {
        2
    }

    fn limiter_bounds(&self) -> Vec<(usize, f64)> {
        vec![(0, self.params.cradle_bound), (1, self.params.pressure_bound)]
    }
}
