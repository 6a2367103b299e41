//! Closed-loop evaluation: running a controller on the true plant,
//! transient metrics, and side-by-side comparison of two runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerSpec;
use crate::error::{ensure_all_finite, Error, Result};
use crate::net::Mlp;
use crate::plant::{Plant, Trajectory};

/// A feedback law evaluated each sample. Laws may keep history (the
/// inverse-dynamics law does), hence `&mut self`.
pub trait FeedbackLaw {
    fn control(&mut self, r: f64, state: &[f64]) -> Result<f64>;
}

/// Network controller with its feature map.
pub struct NetController<'a> {
    pub net: &'a Mlp,
    pub spec: &'a ControllerSpec,
}

impl FeedbackLaw for NetController<'_> {
    fn control(&mut self, r: f64, state: &[f64]) -> Result<f64> {
        let feat = self.spec.features(state, r)?;
        Ok(self.net.forward(&feat)?[0])
    }
}

/// Linear state feedback `u = −K·(x − x_ref)` with the reference entering
/// on one regulated coordinate.
pub struct GainController {
    pub gain: Vec<f64>,
    pub regulated: usize,
}

impl FeedbackLaw for GainController {
    fn control(&mut self, r: f64, state: &[f64]) -> Result<f64> {
        if state.len() != self.gain.len() {
            return Err(Error::Dimension(format!(
                "gain has {} entries, state has {}",
                self.gain.len(),
                state.len()
            )));
        }
        Ok(-self
            .gain
            .iter()
            .enumerate()
            .map(|(j, k)| {
                let xr = if j == self.regulated { r } else { 0.0 };
                k * (state[j] - xr)
            })
            .sum::<f64>())
    }
}

/// Transient-response figures of one run.
///
/// The settling time is the first entry into the `±band·|step|` tube
/// around the final value with no later exit, measured from the start of
/// the trajectory; `band` is a fraction of the step size (the distance
/// from the initial to the final output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` means "not settled" within the record.
    pub settling_time: Option<f64>,
    /// Peak excursion beyond the target, as a fraction of the commanded step.
    pub overshoot: f64,
    pub steady_state_error: f64,
    pub band: f64,
}

/// Metrics of `traj.output` against a constant target.
pub fn compute_metrics(traj: &Trajectory, target: f64, band: f64) -> Result<Metrics> {
    let y = &traj.output;
    if y.is_empty() {
        return Err(Error::InvalidParam("metrics over an empty trajectory".into()));
    }
    ensure_all_finite(y, "output")?;
    let n = y.len();
    let y0 = y[0];
    let y_final = y[n - 1];

    // Settling: last sample outside the tube decides everything.
    let step_size = (y_final - y0).abs();
    let band_abs = band * step_size;
    let last_violation = (0..n).rev().find(|&i| (y[i] - y_final).abs() > band_abs);
    let settling_time = match last_violation {
        None => Some(0.0),
        // Settling only at the final sample leaves nothing to confirm it.
        Some(v) if v + 2 >= n => None,
        Some(v) => Some(traj.time[v + 1] - traj.time[0]),
    };

    let step_to_target = target - y0;
    let overshoot = if step_to_target.abs() > 1e-300 {
        let dir = step_to_target.signum();
        let peak = y
            .iter()
            .map(|&yi| (yi - target) * dir)
            .fold(f64::NEG_INFINITY, f64::max);
        peak.max(0.0) / step_to_target.abs()
    } else {
        // Degenerate start-at-target case: absolute excursion, scaled by
        // the target magnitude (or 1 near zero).
        let peak = y.iter().map(|&yi| (yi - target).abs()).fold(0.0, f64::max);
        peak / target.abs().max(1.0)
    };

    Ok(Metrics {
        settling_time,
        overshoot,
        steady_state_error: (y_final - target).abs(),
        band,
    })
}

/// Closed loop on the true plant: `u[i] = law(r[i], x[i])`, one row per
/// sample. A non-finite state aborts with the step index attached.
pub fn run_closed_loop(
    plant: &dyn Plant,
    law: &mut dyn FeedbackLaw,
    reference: &[f64],
    x0: &[f64],
    n_steps: usize,
    band: f64,
) -> Result<(Trajectory, Metrics)> {
    if n_steps == 0 {
        return Err(Error::InvalidParam("need at least one step".into()));
    }
    if reference.len() < n_steps + 1 {
        return Err(Error::Dimension(format!(
            "reference has {} samples, need {}",
            reference.len(),
            n_steps + 1
        )));
    }
    if x0.len() != plant.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, plant expects {}",
            x0.len(),
            plant.state_dim()
        )));
    }
    let dt = plant.dt();
    let rows = n_steps + 1;
    let mut traj = Trajectory {
        dt,
        time: Vec::with_capacity(rows),
        reference: reference[..rows].to_vec(),
        control: Vec::with_capacity(rows),
        states: Vec::with_capacity(rows),
        output: Vec::with_capacity(rows),
    };
    let mut state = x0.to_vec();
    for i in 0..rows {
        traj.time.push(i as f64 * dt);
        traj.states.push(state.clone());
        traj.output.push(plant.output(&state));
        let u = law
            .control(reference[i], &state)
            .map_err(|e| Error::Simulation { step: i, source: Box::new(e) })?;
        traj.control.push(u);
        if i < n_steps {
            state = plant
                .step(&state, u)
                .map_err(|e| Error::Simulation { step: i, source: Box::new(e) })?;
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation {
                    step: i,
                    source: Box::new(Error::NonFinite("closed-loop state".into())),
                });
            }
        }
    }
    let target = *reference.last().unwrap();
    let metrics = compute_metrics(&traj, target, band)?;
    Ok((traj, metrics))
}

/// Scenario fingerprint two runs must share to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioKey {
    pub plant_config_hash: String,
    pub initial_state: Vec<f64>,
    pub duration: f64,
    pub reference: f64,
}

/// One evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub scenario: ScenarioKey,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: String,
    pub b: String,
    /// `a / b`, where defined.
    pub ratio: String,
}

/// Side-by-side metric table with ratio rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ComparisonRow>,
}

fn fmt_opt_time(t: Option<f64>) -> String {
    match t {
        Some(v) => format!("{v:.4}"),
        None => "not settled".to_string(),
    }
}

fn fmt_ratio(a: Option<f64>, b: Option<f64>) -> String {
    match (a, b) {
        (Some(x), Some(y)) if y != 0.0 => format!("{:.4}", x / y),
        _ => "-".to_string(),
    }
}

/// Builds the comparison table; the two runs must describe the same
/// scenario. A run that never settled is shown as "not settled" rather
/// than failing the comparison.
pub fn compare(a: &RunRecord, b: &RunRecord) -> Result<Comparison> {
    if a.scenario != b.scenario {
        return Err(Error::InvalidParam(format!(
            "runs describe different scenarios: {:?} vs {:?}",
            a.scenario, b.scenario
        )));
    }
    let rows = vec![
        ComparisonRow {
            metric: "settling_time_s".into(),
            a: fmt_opt_time(a.metrics.settling_time),
            b: fmt_opt_time(b.metrics.settling_time),
            ratio: fmt_ratio(a.metrics.settling_time, b.metrics.settling_time),
        },
        ComparisonRow {
            metric: "overshoot_fraction".into(),
            a: format!("{:.6}", a.metrics.overshoot),
            b: format!("{:.6}", b.metrics.overshoot),
            ratio: fmt_ratio(Some(a.metrics.overshoot), Some(b.metrics.overshoot)),
        },
        ComparisonRow {
            metric: "steady_state_error".into(),
            a: format!("{:.6e}", a.metrics.steady_state_error),
            b: format!("{:.6e}", b.metrics.steady_state_error),
            ratio: fmt_ratio(Some(a.metrics.steady_state_error), Some(b.metrics.steady_state_error)),
        },
    ];
    Ok(Comparison {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        rows,
    })
}

impl Comparison {
    pub fn to_csv_string(&self) -> String {
        let mut s = format!("metric,{},{},ratio\n", self.label_a, self.label_b);
        for row in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", row.metric, row.a, row.b, row.ratio));
        }
        s
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>16} {:>16} {:>10}",
            "metric", self.label_a, self.label_b, "ratio"
        )?;
        for row in &self.rows {
            writeln!(f, "{:<22} {:>16} {:>16} {:>10}", row.metric, row.a, row.b, row.ratio)?;
        }
        Ok(())
    }
}
