//! The plant interface, trajectory records, and open-loop simulation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Discrete-time plant: a pure one-sample transition on a state vector.
///
/// Implementations must not hold mutable state; stepping the same
/// `(state, u)` twice returns the same result, so trajectories can be
/// evaluated in parallel.
pub trait Plant: Sync {
    fn state_dim(&self) -> usize;
    fn dt(&self) -> f64;
    /// State at `t` plus the input held over `[t, t+dt)` → state at `t+dt`.
    fn step(&self, state: &[f64], u: f64) -> Result<Vec<f64>>;
    /// Measured (regulated) output.
    fn output(&self, state: &[f64]) -> f64;
    /// Ids of limiters sitting at their bound in `state`.
    fn limiters_at_bound(&self, _state: &[f64]) -> Vec<usize> {
        Vec::new()
    }
    fn n_limiters(&self) -> usize {
        0
    }
    /// `(limiter id, bound magnitude)` pairs, for excitation sizing.
    fn limiter_bounds(&self) -> Vec<(usize, f64)> {
        Vec::new()
    }
}

/// Time-indexed closed- or open-loop record.
///
/// Row `i` holds the state at `t = i·dt` and the input applied over the
/// sample that starts there, so `states[i+1] = step(states[i], control[i])`.
/// Open-loop records carry `reference = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub time: Vec<f64>,
    pub reference: Vec<f64>,
    pub control: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// CSV with header `t,r,u,x1,...,xn,y`; floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_csv_string(&self) -> String {
        let n = self.state_dim();
        let mut s = String::new();
        s.push_str("t,r,u");
        for i in 1..=n {
            let _ = write!(s, ",x{i}");
        }
        s.push_str(",y\n");
        for i in 0..self.len() {
            let _ = write!(s, "{},{},{}", self.time[i], self.reference[i], self.control[i]);
            for v in &self.states[i] {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{}", self.output[i]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty trajectory file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 4 || cols[0] != "t" || cols[1] != "r" || cols[2] != "u" || *cols.last().unwrap() != "y" {
            return Err(Error::Format(format!("unexpected trajectory header: {header}")));
        }
        let n = cols.len() - 4;
        let mut traj = Trajectory {
            dt: 0.0,
            time: vec![],
            reference: vec![],
            control: vec![],
            states: vec![],
            output: vec![],
        };
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Format(format!("row {}: {e}", lineno + 2)))
                })
                .collect::<Result<_>>()?;
            if fields.len() != n + 4 {
                return Err(Error::Format(format!(
                    "row {}: expected {} fields, got {}",
                    lineno + 2,
                    n + 4,
                    fields.len()
                )));
            }
            traj.time.push(fields[0]);
            traj.reference.push(fields[1]);
            traj.control.push(fields[2]);
            traj.states.push(fields[3..3 + n].to_vec());
            traj.output.push(fields[n + 3]);
        }
        if traj.time.len() >= 2 {
            traj.dt = traj.time[1] - traj.time[0];
        }
        Ok(traj)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// Open-loop rollout: applies `input[i]` at sample `i`, records
/// `n_steps + 1` rows. Errors from the plant are tagged with the step
/// they occurred at.
pub fn simulate(plant: &dyn Plant, input: &[f64], x0: &[f64], n_steps: usize) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidParam("n_steps must be at least 1".into()));
    }
    if x0.len() != plant.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, plant expects {}",
            x0.len(),
            plant.state_dim()
        )));
    }
    if input.len() < n_steps {
        return Err(Error::Dimension(format!(
            "input signal has {} samples, need at least {n_steps}",
            input.len()
        )));
    }
    let dt = plant.dt();
    let rows = n_steps + 1;
    let mut traj = Trajectory {
        dt,
        time: Vec::with_capacity(rows),
        reference: vec![0.0; rows],
        control: Vec::with_capacity(rows),
        states: Vec::with_capacity(rows),
        output: Vec::with_capacity(rows),
    };
    let mut state = x0.to_vec();
    for i in 0..rows {
        traj.time.push(i as f64 * dt);
        traj.output.push(plant.output(&state));
        traj.states.push(state.clone());
        let u = if i < n_steps {
            input[i]
        } else {
            *input.get(i).unwrap_or(&input[n_steps - 1])
        };
        traj.control.push(u);
        if i < n_steps {
            state = plant
                .step(&state, u)
                .map_err(|e| Error::Simulation { step: i, source: Box::new(e) })?;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::discretize::CandidateMode;
    use crate::plant::saturation::SaturationLink;

    #[test]
    fn zero_everything_gives_zero_trajectory() {
        let link = SaturationLink::new(1.0, 1.0, 1.0, 0.1, CandidateMode::Zoh).unwrap();
        let traj = simulate(&link, &[0.0; 20], &[0.0], 20).unwrap();
        assert!(traj.output.iter().all(|&y| y == 0.0));
        assert!(traj.states.iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn saturation_reaches_and_holds_bound() {
        let link = SaturationLink::new(1.0, 1.0, 1.0, 0.1, CandidateMode::Zoh).unwrap();
        let traj = simulate(&link, &[100.0; 100], &[0.0], 100).unwrap();
        assert_eq!(*traj.output.last().unwrap(), 1.0);
        // Once at the bound it never leaves under the constant drive.
        let first_at = traj.output.iter().position(|&y| y == 1.0).unwrap();
        assert!(traj.output[first_at..].iter().all(|&y| y == 1.0));
    }

    #[test]
    fn step_error_carries_index() {
        let link = SaturationLink::new(1.0, 1.0, 1.0, 0.1, CandidateMode::Zoh).unwrap();
        let mut input = vec![0.0; 10];
        input[3] = f64::NAN;
        let err = simulate(&link, &input, &[0.0], 10).unwrap_err();
        match err {
            Error::Simulation { step, .. } => assert_eq!(step, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let link = SaturationLink::new(1.0, 0.7, 1.0, 0.1, CandidateMode::Zoh).unwrap();
        let input: Vec<f64> = (0..50).map(|i| (0.3 * i as f64).sin() * 3.0).collect();
        let traj = simulate(&link, &input, &[0.1], 49).unwrap();
        let text = traj.to_csv_string();
        let back = Trajectory::from_csv_str(&text).unwrap();
        assert_eq!(traj.output, back.output);
        assert_eq!(traj.states, back.states);
        assert_eq!(traj.control, back.control);
        assert_eq!(traj.time, back.time);
    }

    #[test]
    fn time_column_strictly_increases() {
        let link = SaturationLink::new(1.0, 1.0, 1.0, 0.05, CandidateMode::Euler).unwrap();
        let traj = simulate(&link, &[1.0; 30], &[0.0], 30).unwrap();
        for w in traj.time.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
