//! Training-sample formation: excitation signals, response recording,
//! single-step pair extraction, limiter-reach categorization, balancing,
//! and the train/test split.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Sample;
use crate::plant::{simulate, Plant, Trajectory};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Sine,
    /// Symmetric square wave, 50% duty.
    Meander,
}

/// One excitation signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Seconds; must cover at least one period.
    pub duration: f64,
    /// Sample period, seconds.
    pub dt: f64,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::InvalidParam(format!(
                "signal amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::InvalidParam(format!(
                "signal frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParam(format!("signal dt must be positive, got {}", self.dt)));
        }
        if self.duration < 1.0 / self.frequency {
            return Err(Error::InvalidParam(format!(
                "duration {}s is shorter than one period ({}s)",
                self.duration,
                1.0 / self.frequency
            )));
        }
        Ok(())
    }

    /// Samples at `t = 0, dt, …` up to and including `duration`.
    pub fn samples(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let count = (self.duration / self.dt).floor() as usize + 1;
        Ok((0..count)
            .map(|i| {
                let t = i as f64 * self.dt;
                match self.kind {
                    SignalKind::Sine => {
                        self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t).sin()
                    }
                    SignalKind::Meander => {
                        let phase = self.frequency * t;
                        let frac = phase - phase.floor();
                        if frac < 0.5 {
                            self.amplitude
                        } else {
                            -self.amplitude
                        }
                    }
                }
            })
            .collect())
    }
}

/// Samples every spec in the grid.
pub fn generate_signals(grid: &[SignalSpec]) -> Result<Vec<Vec<f64>>> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("signal grid is empty".into()));
    }
    grid.iter().map(SignalSpec::samples).collect()
}

/// Limiter-reach label of a pair, from the end state of its step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    NoLimit,
    /// Limiter ids that sat at their bound (the transition sample counts).
    LimitReached(Vec<usize>),
}

impl Category {
    pub fn is_limited(&self) -> bool {
        matches!(self, Category::LimitReached(_))
    }

    pub fn encode(&self) -> String {
        match self {
            Category::NoLimit => "no_limit".to_string(),
            Category::LimitReached(ids) => {
                let tags: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                format!("limit_reached:{}", tags.join("+"))
            }
        }
    }

    pub fn decode(text: &str) -> Result<Self> {
        if text == "no_limit" {
            return Ok(Category::NoLimit);
        }
        if let Some(rest) = text.strip_prefix("limit_reached:") {
            let ids = rest
                .split('+')
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|e| Error::Format(format!("bad limiter id `{p}`: {e}")))
                })
                .collect::<Result<Vec<usize>>>()?;
            return Ok(Category::LimitReached(ids));
        }
        Err(Error::Format(format!("unknown category `{text}`")))
    }
}

/// One self-contained input→target record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub category: Category,
}

impl Sample for TrainingPair {
    fn input(&self) -> &[f64] {
        &self.input
    }
    fn target(&self) -> &[f64] {
        &self.target
    }
}

/// How trajectory rows become pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFormat {
    /// `[x(i−1), u] → x(i)` — for state-feedback imitators.
    ImitatorState,
    /// `[u(i)…u(i−n+1), y(i−1)…y(i−n)] → y(i)` — for delayed-output imitators.
    ImitatorDelayed { order: usize },
    /// `[y(i) (as the reference that demanded it), x(i−1)] → u` — direct
    /// inverse modeling for controller cloning.
    ControllerCloning,
}

/// Balance subsampling record, kept so a dataset can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRecord {
    pub tolerance: f64,
    pub seed: u64,
}

/// Everything needed to regenerate the dataset bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub signals: Vec<SignalSpec>,
    pub plant_config_hash: String,
    pub seed: u64,
    pub pair_format: PairFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balance: Option<BalanceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<TrainingPair>,
    pub provenance: Provenance,
}

impl Dataset {
    /// `(no_limit, limit_reached)` counts.
    pub fn category_counts(&self) -> (usize, usize) {
        let limited = self.pairs.iter().filter(|p| p.category.is_limited()).count();
        (self.pairs.len() - limited, limited)
    }

    /// Counts per exact category label, including which limiters were hit
    /// separately and together.
    pub fn subcategory_counts(&self) -> BTreeMap<String, usize> {
        let mut map = BTreeMap::new();
        for p in &self.pairs {
            *map.entry(p.category.encode()).or_insert(0) += 1;
        }
        map
    }

    pub fn input_dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.input.len())
    }

    pub fn target_dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.target.len())
    }

    /// CSV with header `category,in_0..in_m,out_0..out_n`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("category");
        for i in 0..self.input_dim() {
            let _ = write!(s, ",in_{i}");
        }
        for i in 0..self.target_dim() {
            let _ = write!(s, ",out_{i}");
        }
        s.push('\n');
        for p in &self.pairs {
            s.push_str(&p.category.encode());
            for v in &p.input {
                let _ = write!(s, ",{v}");
            }
            for v in &p.target {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Writes `<path>` plus the `.provenance.json` sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        let sidecar = provenance_path(path);
        let text = serde_json::to_string_pretty(&self.provenance)
            .map_err(|e| Error::Format(format!("provenance: {e}")))?;
        std::fs::write(sidecar, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sidecar = std::fs::read_to_string(provenance_path(path))?;
        let provenance: Provenance =
            serde_json::from_str(&sidecar).map_err(|e| Error::Format(format!("provenance: {e}")))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty dataset".into()))?;
        let n_in = header.split(',').filter(|c| c.starts_with("in_")).count();
        let n_out = header.split(',').filter(|c| c.starts_with("out_")).count();
        let mut pairs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let category = Category::decode(
                fields
                    .next()
                    .ok_or_else(|| Error::Format(format!("row {}: empty", lineno + 2)))?,
            )?;
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Format(format!("row {}: {e}", lineno + 2)))
                })
                .collect::<Result<_>>()?;
            if values.len() != n_in + n_out {
                return Err(Error::Format(format!(
                    "row {}: expected {} values, got {}",
                    lineno + 2,
                    n_in + n_out,
                    values.len()
                )));
            }
            pairs.push(TrainingPair {
                input: values[..n_in].to_vec(),
                target: values[n_in..].to_vec(),
                category,
            });
        }
        Ok(Dataset { pairs, provenance })
    }
}

fn provenance_path(path: &Path) -> PathBuf {
    let mut side = path.as_os_str().to_owned();
    side.push(".provenance.json");
    PathBuf::from(side)
}

/// Pairs from one recorded trajectory.
pub fn extract_pairs(traj: &Trajectory, plant: &dyn Plant, format: PairFormat) -> Vec<TrainingPair> {
    let rows = traj.len();
    let mut pairs = Vec::new();
    let label = |i: usize| {
        let ids = plant.limiters_at_bound(&traj.states[i]);
        if ids.is_empty() {
            Category::NoLimit
        } else {
            Category::LimitReached(ids)
        }
    };
    match format {
        PairFormat::ImitatorState => {
            for i in 1..rows {
                let mut input = traj.states[i - 1].clone();
                input.push(traj.control[i - 1]);
                pairs.push(TrainingPair {
                    input,
                    target: traj.states[i].clone(),
                    category: label(i),
                });
            }
        }
        PairFormat::ImitatorDelayed { order } => {
            // Delay registers are zero-padded at start-up (the recording
            // begins from rest), so pairs start at the first step.
            let lagged = |col: &[f64], i: usize, k: usize| {
                if k > i {
                    0.0
                } else {
                    col[i - k]
                }
            };
            for i in 1..rows {
                let mut input = Vec::with_capacity(2 * order);
                for k in 1..=order {
                    input.push(lagged(&traj.control, i, k));
                }
                for k in 1..=order {
                    input.push(lagged(&traj.output, i, k));
                }
                pairs.push(TrainingPair {
                    input,
                    target: vec![traj.output[i]],
                    category: label(i),
                });
            }
        }
        PairFormat::ControllerCloning => {
            for i in 1..rows {
                let mut input = vec![traj.output[i]];
                input.extend_from_slice(&traj.states[i - 1]);
                pairs.push(TrainingPair {
                    input,
                    target: vec![traj.control[i - 1]],
                    category: label(i),
                });
            }
        }
    }
    pairs
}

/// Simulates every signal from the zero state, labels each step by the
/// limiters at their bound in its end state, and extracts pairs.
///
/// Per-signal simulations run in parallel; pairs are merged in grid
/// order, so the result does not depend on scheduling.
pub fn record_and_extract(
    plant: &dyn Plant,
    specs: &[SignalSpec],
    format: PairFormat,
    plant_config_hash: &str,
    seed: u64,
) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::InvalidParam("signal grid is empty".into()));
    }
    for spec in specs {
        spec.validate()?;
        if (spec.dt - plant.dt()).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "signal dt {} does not match plant dt {}",
                spec.dt,
                plant.dt()
            )));
        }
    }
    let x0 = vec![0.0; plant.state_dim()];
    let per_signal: Vec<Result<Vec<TrainingPair>>> = specs
        .par_iter()
        .map(|spec| {
            let samples = spec.samples()?;
            let traj = simulate(plant, &samples, &x0, samples.len() - 1)?;
            Ok(extract_pairs(&traj, plant, format))
        })
        .collect();
    let mut pairs = Vec::new();
    for chunk in per_signal {
        pairs.extend(chunk?);
    }
    Ok(Dataset {
        pairs,
        provenance: Provenance {
            signals: specs.to_vec(),
            plant_config_hash: plant_config_hash.to_string(),
            seed,
            pair_format: format,
            balance: None,
        },
    })
}

/// Subsamples the majority category until the two top-level counts are
/// within `tolerance` (majority ≤ ⌊minority·(1 + tolerance)⌋).
pub fn balance(dataset: Dataset, tolerance: f64, seed: u64) -> Result<Dataset> {
    let (no_limit, limited) = dataset.category_counts();
    if no_limit == 0 || limited == 0 {
        return Err(Error::InvalidParam(format!(
            "cannot balance: category counts are ({no_limit} no_limit, {limited} limit_reached); \
             widen the signal grid so both categories appear"
        )));
    }
    let (minority, majority, majority_is_limited) = if limited < no_limit {
        (limited, no_limit, false)
    } else {
        (no_limit, limited, true)
    };
    let target = ((minority as f64) * (1.0 + tolerance)).floor() as usize;
    if majority <= target {
        return Ok(dataset);
    }
    // Seeded choice of which majority rows survive; original order kept.
    let majority_idx: Vec<usize> = dataset
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.category.is_limited() == majority_is_limited)
        .map(|(i, _)| i)
        .collect();
    let mut shuffled = majority_idx.clone();
    shuffled.shuffle(&mut seeded(seed));
    let mut keep: Vec<bool> = vec![true; dataset.pairs.len()];
    for &drop_idx in &shuffled[target..] {
        keep[drop_idx] = false;
    }
    let pairs: Vec<TrainingPair> = dataset
        .pairs
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect();
    let mut provenance = dataset.provenance;
    provenance.balance = Some(BalanceRecord { tolerance, seed });
    Ok(Dataset { pairs, provenance })
}

/// Column scales that map a dataset to unit range and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitScales {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Rescales every input and target column to peak magnitude 1 (columns
/// that are identically zero are left alone). Returns the scales so
/// predictions can be mapped back.
pub fn normalize_unit(dataset: &mut Dataset) -> UnitScales {
    let dim_in = dataset.input_dim();
    let dim_out = dataset.target_dim();
    let mut input = vec![0.0f64; dim_in];
    let mut target = vec![0.0f64; dim_out];
    for p in &dataset.pairs {
        for (m, v) in input.iter_mut().zip(&p.input) {
            *m = m.max(v.abs());
        }
        for (m, v) in target.iter_mut().zip(&p.target) {
            *m = m.max(v.abs());
        }
    }
    for p in &mut dataset.pairs {
        for (v, m) in p.input.iter_mut().zip(&input) {
            if *m > 0.0 {
                *v /= m;
            }
        }
        for (v, m) in p.target.iter_mut().zip(&target) {
            if *m > 0.0 {
                *v /= m;
            }
        }
    }
    UnitScales { input, target }
}

/// Seeded shuffle then split: `⌊ratio·k⌋` training pairs, the rest held out.
pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Vec<TrainingPair>, Vec<TrainingPair>)> {
    let k = dataset.pairs.len();
    if k < 10 {
        return Err(Error::InvalidParam(format!("need at least 10 pairs to split, got {k}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParam(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut seeded(seed));
    let n_train = ((k as f64) * ratio).floor() as usize;
    let train = order[..n_train].iter().map(|&i| dataset.pairs[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| dataset.pairs[i].clone()).collect();
    Ok((train, test))
}

/// Finds the smallest meander amplitude that reaches any limiter, by
/// doubling then bisection, and builds the default excitation grid:
/// amplitudes ×{0.25, 0.5, 1, 2, 4} of that threshold, frequencies
/// ×{0.1, 0.3, 1, 3} of `1/(2πT)`, both signal kinds.
pub fn default_grid(plant: &dyn Plant, characteristic_time: f64) -> Result<Vec<SignalSpec>> {
    if plant.n_limiters() == 0 {
        return Err(Error::InvalidParam(
            "default grid sizing needs a plant with limiters".into(),
        ));
    }
    let base_freq = 1.0 / (2.0 * std::f64::consts::PI * characteristic_time);
    let probe_duration = 4.0 / base_freq;
    let reaches = |amplitude: f64| -> Result<bool> {
        let spec = SignalSpec {
            kind: SignalKind::Meander,
            amplitude,
            frequency: base_freq,
            duration: probe_duration,
            dt: plant.dt(),
        };
        let samples = spec.samples()?;
        let x0 = vec![0.0; plant.state_dim()];
        let traj = simulate(plant, &samples, &x0, samples.len() - 1)?;
        Ok(traj
            .states
            .iter()
            .any(|s| !plant.limiters_at_bound(s).is_empty()))
    };

    let mut hi = plant
        .limiter_bounds()
        .iter()
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min)
        .max(1e-6);
    let mut doublings = 0;
    while !reaches(hi)? {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Numerical(
                "no meander amplitude reaches a limiter; check the plant configuration".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let threshold = hi;

    let mut grid = Vec::new();
    for freq_scale in [0.1, 0.3, 1.0, 3.0] {
        let frequency = base_freq * freq_scale;
        let duration = 3.0 / frequency;
        for amp_scale in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for kind in [SignalKind::Sine, SignalKind::Meander] {
                grid.push(SignalSpec {
                    kind,
                    amplitude: threshold * amp_scale,
                    frequency,
                    duration,
                    dt: plant.dt(),
                });
            }
        }
    }
    Ok(grid)
}
