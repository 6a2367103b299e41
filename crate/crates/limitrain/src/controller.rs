//! Controller synthesis: the inverse-dynamics law for linear plants,
//! controller structure rules, and training by back-propagation through
//! the frozen imitator.
//!
//! Training rolls the loop forward `H` steps *inside the model*: the
//! controller produces `u_t` from features of the current state, the
//! imitator predicts the next state, and the mean tracking error over
//! the horizon is pushed back through every step. The imitator's weights
//! participate in the chain rule but are never updated — only the
//! controller learns.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SignalKind;
use crate::error::{Error, Result};
use crate::net::{AdamConfig, AdamState, Activation, Gradients, Mlp};
use crate::plant::{LinearDifferenceModel, Plant};
use crate::rng::{seeded, substream};

/// Inverse-dynamics control for a linear difference model:
///
/// ```text
/// u(i) = [r(i) + a₁·y(i) + … + a_K·y(i−K+1)
///              − b₂·u(i−1) − … − b_M·u(i−M+1)] / b₁
/// ```
///
/// Histories are newest-first: `y_history[0] = y(i)` (the current
/// output), `u_history[0] = u(i−1)`; missing entries count as zero.
/// Applied to the matching strictly proper plant (`b₀ = 0`) this yields
/// `y(i+1) = r(i)` exactly.
pub fn inverse_dynamics_control(
    model: &LinearDifferenceModel,
    r_now: f64,
    y_history: &[f64],
    u_history: &[f64],
) -> Result<f64> {
    let b1 = model.b.get(1).copied().unwrap_or(0.0);
    if b1 == 0.0 {
        return Err(Error::InvalidParam(
            "inverse dynamics needs b₁ ≠ 0 (the one-step input gain)".into(),
        ));
    }
    let mut numerator = r_now;
    for (idx, ak) in model.a.iter().enumerate() {
        numerator += ak * y_history.get(idx).copied().unwrap_or(0.0);
    }
    for (m, bm) in model.b.iter().enumerate().skip(2) {
        numerator -= bm * u_history.get(m - 2).copied().unwrap_or(0.0);
    }
    Ok(numerator / b1)
}

/// How plant signals become controller inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FeatureMode {
    /// Full state with the reference subtracted on the regulated
    /// coordinate: `n` inputs.
    Regulation,
    /// Full state plus an explicit reference input: `n + 1` inputs.
    Tracking,
    /// Reference plus delayed outputs and controls: `2n` inputs
    /// (`r, y(i)…y(i−n+1), u(i−1)…u(i−n+1)` — the inverse-law signal set).
    DelayedFeedback,
}

/// Controller shape and feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    /// Plant order n.
    pub state_dim: usize,
    /// Index of the regulated state coordinate.
    pub regulated: usize,
    pub feature_mode: FeatureMode,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Per-feature scaling applied before the first layer (all ones when
    /// omitted). Brings wide-ranging states to comparable magnitudes.
    #[serde(default)]
    pub feature_scale: Vec<f64>,
}

impl ControllerSpec {
    pub fn input_dim(&self) -> usize {
        match self.feature_mode {
            FeatureMode::Regulation => self.state_dim,
            FeatureMode::Tracking => self.state_dim + 1,
            FeatureMode::DelayedFeedback => 2 * self.state_dim,
        }
    }

    /// The hydraulic preset: 4 state inputs, hidden 24 → 8 leaky-ReLU,
    /// scalar output; shaft angle regulated.
    pub fn hydraulic_default() -> Self {
        ControllerSpec {
            state_dim: 4,
            regulated: crate::plant::ANGLE,
            feature_mode: FeatureMode::Regulation,
            hidden: vec![24, 8],
            hidden_activation: Activation::leaky_default(),
            feature_scale: vec![1.0, 1.0 / 25.0, 1.0 / 50.0, 1.0 / 8.0],
        }
    }

    fn scale(&self, j: usize) -> f64 {
        self.feature_scale.get(j).copied().unwrap_or(1.0)
    }

    /// Feature vector for the state-feedback modes.
    pub fn features(&self, state: &[f64], r: f64) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension(format!(
                "state has {} entries, controller expects {}",
                state.len(),
                self.state_dim
            )));
        }
        match self.feature_mode {
            FeatureMode::Regulation => Ok(state
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let v = if j == self.regulated { x - r } else { x };
                    self.scale(j) * v
                })
                .collect()),
            FeatureMode::Tracking => {
                let mut f: Vec<f64> = state
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| self.scale(j) * x)
                    .collect();
                f.push(self.scale(self.state_dim) * r);
                Ok(f)
            }
            FeatureMode::DelayedFeedback => Err(Error::InvalidParam(
                "delayed-feedback controllers take signal histories, not a state vector".into(),
            )),
        }
    }

    /// ∂feature_j/∂state = a single diagonal entry; used to push feature
    /// gradients back onto the state.
    fn accumulate_state_gradient(&self, d_features: &[f64], d_state: &mut [f64]) {
        for j in 0..self.state_dim {
            d_state[j] += d_features[j] * self.scale(j);
        }
    }

    /// Seeded skeleton `[input, hidden…, 1]` with identity output.
    pub fn build_skeleton(&self, seed: u64) -> Result<Mlp> {
        let mut dims = vec![self.input_dim()];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        let mut acts = vec![self.hidden_activation; self.hidden.len()];
        acts.push(Activation::Identity);
        Mlp::from_dims(&dims, &acts, &mut seeded(seed))
    }

    /// The step-by-step growth rule: the next candidate doubles the last
    /// hidden width.
    pub fn widen(&self) -> Self {
        let mut next = self.clone();
        if let Some(last) = next.hidden.last_mut() {
            *last *= 2;
        } else {
            next.hidden.push(2);
        }
        next
    }
}

/// Builds the seeded controller skeleton for a spec.
pub fn build_controller_structure(spec: &ControllerSpec, seed: u64) -> Result<Mlp> {
    spec.build_skeleton(seed)
}

/// Per-episode reference sequence generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceGen {
    /// The same setpoint every episode.
    Constant { value: f64 },
    /// A setpoint drawn uniformly per episode, held over the horizon.
    UniformSetpoint { lo: f64, hi: f64 },
    /// A sine or meander reference with per-episode amplitude/frequency.
    Excitation {
        signal: SignalKind,
        amplitude_lo: f64,
        amplitude_hi: f64,
        frequency_lo: f64,
        frequency_hi: f64,
    },
}

impl ReferenceGen {
    fn sequence(&self, horizon: usize, dt: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        match *self {
            ReferenceGen::Constant { value } => vec![value; horizon],
            ReferenceGen::UniformSetpoint { lo, hi } => {
                let r = rng.random_range(lo..=hi);
                vec![r; horizon]
            }
            ReferenceGen::Excitation {
                signal,
                amplitude_lo,
                amplitude_hi,
                frequency_lo,
                frequency_hi,
            } => {
                let a = rng.random_range(amplitude_lo..=amplitude_hi);
                let f = rng.random_range(frequency_lo..=frequency_hi);
                (0..horizon)
                    .map(|i| {
                        let t = i as f64 * dt;
                        match signal {
                            SignalKind::Sine => a * (2.0 * std::f64::consts::PI * f * t).sin(),
                            SignalKind::Meander => {
                                let phase = f * t;
                                if phase - phase.floor() < 0.5 {
                                    a
                                } else {
                                    -a
                                }
                            }
                        }
                    })
                    .collect()
            }
        }
    }
}

/// What the rollout loss is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Squared error of the regulated output against the reference.
    RegulatedOutput,
    /// Mean squared error of the full state against the reference target
    /// (reference on the regulated coordinate, zero elsewhere).
    FullState,
}

/// Episode shape for controller training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    /// Steps per episode, H ≥ 1.
    pub horizon: usize,
    pub reference: ReferenceGen,
    /// Uniform box the initial state is drawn from.
    pub init_lo: Vec<f64>,
    pub init_hi: Vec<f64>,
    /// Optional per-episode radius mixing: the sampled state is shrunk by
    /// a log-uniform factor from this range, so episodes near the origin
    /// (where fine regulation is learned) carry weight comparable to the
    /// far field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<(f64, f64)>,
    pub loss: LossMode,
    /// Sample period the imitator was built at (used by excitation
    /// references).
    pub dt: f64,
}

impl RolloutConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParam("rollout horizon must be at least 1".into()));
        }
        if self.init_lo.len() != n || self.init_hi.len() != n {
            return Err(Error::Dimension(format!(
                "initial-state box needs {n} entries per side, got {}/{}",
                self.init_lo.len(),
                self.init_hi.len()
            )));
        }
        Ok(())
    }

    fn sample_initial(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        let mut state: Vec<f64> = self
            .init_lo
            .iter()
            .zip(&self.init_hi)
            .map(|(&lo, &hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
            .collect();
        if let Some((lo, hi)) = self.init_scale {
            let factor = (rng.random_range(lo.ln()..=hi.ln())).exp();
            for v in state.iter_mut() {
                *v *= factor;
            }
        }
        state
    }
}

/// Optimization loop parameters for [`train_controller`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerTrainConfig {
    /// Adam steps.
    pub batches: usize,
    /// Episodes averaged per Adam step.
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Early-stop threshold on the batch-mean rollout loss.
    pub target_loss: f64,
    pub seed: u64,
}

impl Default for ControllerTrainConfig {
    fn default() -> Self {
        ControllerTrainConfig {
            batches: 1500,
            batch_size: 16,
            adam: AdamConfig::default(),
            target_loss: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerReport {
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub batches_run: usize,
    pub reached_target: bool,
}

/// Sidecar stored next to a trained controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerMeta {
    pub spec: ControllerSpec,
    pub rollout: RolloutConfig,
}

impl ControllerMeta {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("controller meta: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("controller meta: {e}")))
    }
}

fn check_wiring(controller: &Mlp, spec: &ControllerSpec, imitator: &Mlp) -> Result<usize> {
    let n = spec.state_dim;
    if controller.input_dim() != spec.input_dim() || controller.output_dim() != 1 {
        return Err(Error::Dimension(format!(
            "controller is {}→{}, spec wants {}→1",
            controller.input_dim(),
            controller.output_dim(),
            spec.input_dim()
        )));
    }
    if imitator.input_dim() != n + 1 || imitator.output_dim() != n {
        return Err(Error::Dimension(format!(
            "state-vector imitator must be {}→{}, got {}→{}",
            n + 1,
            n,
            imitator.input_dim(),
            imitator.output_dim()
        )));
    }
    Ok(n)
}

/// One model-rollout episode: returns the horizon-mean loss and, when
/// `controller_grads` is given, accumulates ∂loss/∂(controller params)
/// into it by back-propagation through time. The imitator contributes
/// only its Jacobian; its parameters are untouched.
pub fn rollout(
    controller: &Mlp,
    spec: &ControllerSpec,
    imitator: &Mlp,
    x0: &[f64],
    reference: &[f64],
    loss_mode: LossMode,
    mut controller_grads: Option<&mut Gradients>,
) -> Result<f64> {
    let n = check_wiring(controller, spec, imitator)?;
    let horizon = reference.len();
    if horizon == 0 {
        return Err(Error::InvalidParam("rollout needs a non-empty reference".into()));
    }
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has {} entries, need {n}", x0.len())));
    }

    // Forward sweep, caching both networks at every step.
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0.to_vec());
    let mut ctrl_caches = Vec::with_capacity(horizon);
    let mut imit_caches = Vec::with_capacity(horizon);
    let mut loss = 0.0;
    for t in 0..horizon {
        let feat = spec.features(&states[t], reference[t])?;
        let ctrl_cache = controller.forward_cached(&feat)?;
        let u = ctrl_cache.output()[0];
        let mut imit_in = states[t].clone();
        imit_in.push(u);
        let imit_cache = imitator.forward_cached(&imit_in)?;
        let next = imit_cache.output().to_vec();
        loss += step_loss(&next, reference[t], spec.regulated, loss_mode);
        states.push(next);
        ctrl_caches.push(ctrl_cache);
        imit_caches.push(imit_cache);
    }
    loss /= horizon as f64;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("rollout diverged: loss {loss}")));
    }

    if let Some(grads) = controller_grads.take() {
        let mut imit_scratch = Gradients::zeros_like(imitator);
        let inv_h = 1.0 / horizon as f64;
        let mut d_state = vec![0.0; n];
        for t in (0..horizon).rev() {
            // Direct loss term on x_{t+1}.
            add_step_loss_gradient(
                &states[t + 1],
                reference[t],
                spec.regulated,
                loss_mode,
                inv_h,
                &mut d_state,
            );
            // Through the imitator into [x_t; u_t]. Its parameter
            // gradients land in a scratch buffer that is never applied.
            let d_imit_in = imitator.backward(&imit_caches[t], &d_state, &mut imit_scratch)?;
            let d_u = d_imit_in[n];
            // Through the controller into its parameters and features.
            let d_feat = controller.backward(&ctrl_caches[t], &[d_u], grads)?;
            d_state.copy_from_slice(&d_imit_in[..n]);
            spec.accumulate_state_gradient(&d_feat, &mut d_state);
        }
    }
    Ok(loss)
}

fn step_loss(next_state: &[f64], r: f64, regulated: usize, mode: LossMode) -> f64 {
    match mode {
        LossMode::RegulatedOutput => {
            let e = next_state[regulated] - r;
            e * e
        }
        LossMode::FullState => {
            let n = next_state.len() as f64;
            next_state
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let target = if j == regulated { r } else { 0.0 };
                    let e = x - target;
                    e * e
                })
                .sum::<f64>()
                / n
        }
    }
}

fn add_step_loss_gradient(
    next_state: &[f64],
    r: f64,
    regulated: usize,
    mode: LossMode,
    inv_h: f64,
    d_state: &mut [f64],
) {
    match mode {
        LossMode::RegulatedOutput => {
            d_state[regulated] += 2.0 * (next_state[regulated] - r) * inv_h;
        }
        LossMode::FullState => {
            let inv_n = 1.0 / next_state.len() as f64;
            for (j, &x) in next_state.iter().enumerate() {
                let target = if j == regulated { r } else { 0.0 };
                d_state[j] += 2.0 * (x - target) * inv_n * inv_h;
            }
        }
    }
}

/// Trains the controller against the frozen imitator.
///
/// Episodes within a batch are evaluated in parallel but reduced in
/// episode order, and every episode derives its own RNG stream from
/// `(seed, episode index)`, so the result is a pure function of the
/// seed.
pub fn train_controller(
    controller: &mut Mlp,
    spec: &ControllerSpec,
    imitator: &Mlp,
    rollout_cfg: &RolloutConfig,
    cfg: &ControllerTrainConfig,
) -> Result<ControllerReport> {
    let n = check_wiring(controller, spec, imitator)?;
    rollout_cfg.validate(n)?;
    if cfg.batch_size == 0 || cfg.batches == 0 {
        return Err(Error::InvalidParam("batches and batch size must be at least 1".into()));
    }
    let mut adam = AdamState::new(controller, cfg.adam);
    let mut history = Vec::with_capacity(cfg.batches);
    let mut episode_counter = 0u64;

    for batch in 0..cfg.batches {
        let episodes: Vec<u64> = (0..cfg.batch_size)
            .map(|k| episode_counter + k as u64)
            .collect();
        episode_counter += cfg.batch_size as u64;

        let frozen: &Mlp = controller;
        let results: Vec<Result<(f64, Gradients)>> = episodes
            .par_iter()
            .map(|&ep| {
                let mut rng = substream(cfg.seed, ep);
                let x0 = rollout_cfg.sample_initial(&mut rng);
                let refs = rollout_cfg
                    .reference
                    .sequence(rollout_cfg.horizon, rollout_cfg.dt, &mut rng);
                let mut grads = Gradients::zeros_like(frozen);
                let loss = rollout(
                    frozen,
                    spec,
                    imitator,
                    &x0,
                    &refs,
                    rollout_cfg.loss,
                    Some(&mut grads),
                )?;
                Ok((loss, grads))
            })
            .collect();

        let mut batch_grads = Gradients::zeros_like(controller);
        let mut batch_loss = 0.0;
        for r in results {
            let (loss, grads) = r?;
            batch_loss += loss;
            batch_grads.add_assign(&grads);
        }
        let inv = 1.0 / cfg.batch_size as f64;
        batch_loss *= inv;
        batch_grads.scale(inv);
        if !batch_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "controller training diverged at batch {batch}: loss {batch_loss}"
            )));
        }
        adam.update(controller, &batch_grads)?;
        history.push(batch_loss);
        if batch_loss <= cfg.target_loss {
            break;
        }
    }

    let final_loss = history.last().copied().unwrap_or(f64::INFINITY);
    Ok(ControllerReport {
        batches_run: history.len(),
        reached_target: final_loss <= cfg.target_loss,
        final_loss,
        loss_history: history,
    })
}

/// Evaluates the controller and applies its output to the *true* plant.
pub fn closed_loop_step(
    controller: &Mlp,
    spec: &ControllerSpec,
    plant: &dyn Plant,
    r: f64,
    state: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let feat = spec.features(state, r)?;
    let u = controller.forward(&feat)?[0];
    let next = plant.step(state, u)?;
    Ok((u, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;
    use crate::plant::{step_linear, LinearDifferenceModel};
    use approx::assert_relative_eq;

    fn first_order_model() -> LinearDifferenceModel {
        LinearDifferenceModel::new(vec![0.0, 0.5], vec![-0.9]).unwrap()
    }

    #[test]
    fn inverse_law_hand_example() {
        // b=[0,0.5], a=[−0.9], r=1, y(i)=0 → u = 2; stepping the plant gives 1.0.
        let m = first_order_model();
        let u = inverse_dynamics_control(&m, 1.0, &[0.0], &[]).unwrap();
        assert_eq!(u, 2.0);
        let y_next = step_linear(&m, &[u], &[0.0], 0.0).unwrap();
        assert_eq!(y_next, 1.0);
    }

    #[test]
    fn inverse_law_holds_equilibrium() {
        let m = first_order_model();
        // Equilibrium y* under constant u*: y* = dc_gain·u*. Ask for r = y*.
        let y_star = m.dc_gain() * 0.4;
        let u = inverse_dynamics_control(&m, y_star, &[y_star], &[0.4]).unwrap();
        assert_relative_eq!(u, 0.4, epsilon = 1e-12);
        let y_next = step_linear(&m, &[u], &[y_star], 0.0).unwrap();
        assert_relative_eq!(y_next, y_star, epsilon = 1e-12);
    }

    #[test]
    fn zero_b1_rejected() {
        let m = LinearDifferenceModel::new(vec![0.0, 0.0, 1.0], vec![-0.5]).unwrap();
        assert!(inverse_dynamics_control(&m, 1.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn spec_input_dims() {
        let mut spec = ControllerSpec::hydraulic_default();
        assert_eq!(spec.input_dim(), 4);
        let skel = spec.build_skeleton(1).unwrap();
        let dims: Vec<usize> = std::iter::once(skel.input_dim())
            .chain(skel.layers().iter().map(|l| l.output_dim))
            .collect();
        assert_eq!(dims, vec![4, 24, 8, 1]);

        spec.state_dim = 2;
        spec.feature_mode = FeatureMode::DelayedFeedback;
        assert_eq!(spec.input_dim(), 4);
    }

    #[test]
    fn widen_doubles_last_hidden() {
        let spec = ControllerSpec::hydraulic_default();
        assert_eq!(spec.widen().hidden, vec![24, 16]);
    }

    /// Exact linear imitator `y⁺ = −a₁·y + b₁·u` as a one-neuron net.
    fn exact_linear_imitator(m: &LinearDifferenceModel) -> Mlp {
        Mlp::new(vec![Layer::new(
            2,
            1,
            vec![-m.a[0], m.b[1]],
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn tracking_spec() -> ControllerSpec {
        ControllerSpec {
            state_dim: 1,
            regulated: 0,
            feature_mode: FeatureMode::Tracking,
            hidden: vec![],
            hidden_activation: Activation::Identity,
            feature_scale: vec![],
        }
    }

    /// The Eq.-2 inverse law as a one-neuron controller on [y, r].
    fn inverse_law_controller(m: &LinearDifferenceModel) -> Mlp {
        let b1 = m.b[1];
        Mlp::new(vec![Layer::new(
            2,
            1,
            vec![m.a[0] / b1, 1.0 / b1],
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn inverse_law_controller_has_zero_loss_and_gradient() {
        let m = first_order_model();
        let imitator = exact_linear_imitator(&m);
        let controller = inverse_law_controller(&m);
        let spec = tracking_spec();
        let mut grads = Gradients::zeros_like(&controller);
        let loss = rollout(
            &controller,
            &spec,
            &imitator,
            &[0.7],
            &[1.3; 10],
            LossMode::RegulatedOutput,
            Some(&mut grads),
        )
        .unwrap();
        assert!(loss < 1e-25, "loss {loss}");
        assert!(grads.max_abs() < 1e-11, "gradient {}", grads.max_abs());
    }

    #[test]
    fn zero_horizon_rejected() {
        let m = first_order_model();
        let imitator = exact_linear_imitator(&m);
        let controller = inverse_law_controller(&m);
        let cfg = RolloutConfig {
            horizon: 0,
            reference: ReferenceGen::Constant { value: 0.0 },
            init_lo: vec![-1.0],
            init_hi: vec![1.0],
            init_scale: None,
            loss: LossMode::RegulatedOutput,
            dt: 1.0,
        };
        let mut c = controller.clone();
        let err = train_controller(
            &mut c,
            &tracking_spec(),
            &imitator,
            &cfg,
            &ControllerTrainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParam(_)));
    }

    #[test]
    fn bptt_matches_finite_differences() {
        // Composed controller→imitator rollout, H ∈ {1, 5}; central
        // differences at h=1e-5, relative error ≤ 1e-5. Seeds whose
        // rollouts graze a ReLU kink are skipped (the derivative is not
        // defined there), matching the oracle's validity domain.
        let m = first_order_model();
        let imitator = exact_linear_imitator(&m);
        for horizon in [1usize, 5] {
            let mut checked = 0;
            let mut seed = 0u64;
            while checked < 8 {
                seed += 1;
                let spec = ControllerSpec {
                    state_dim: 1,
                    regulated: 0,
                    feature_mode: FeatureMode::Tracking,
                    hidden: vec![4, 3],
                    hidden_activation: if seed.is_multiple_of(2) {
                        Activation::Relu
                    } else {
                        Activation::leaky_default()
                    },
                    feature_scale: vec![],
                };
                let controller = spec.build_skeleton(seed).unwrap();
                let x0 = [0.3 + 0.05 * seed as f64];
                let refs = vec![0.8 - 0.02 * seed as f64; horizon];

                // Reject rollouts that pass near a kink.
                let mut near_kink = false;
                {
                    let mut state = x0.to_vec();
                    for &r in &refs {
                        let feat = spec.features(&state, r).unwrap();
                        let cache = controller.forward_cached(&feat).unwrap();
                        if cache.min_kink_distance(&controller) < 1e-3 {
                            near_kink = true;
                            break;
                        }
                        let u = cache.output()[0];
                        state = imitator.forward(&[state[0], u]).unwrap();
                    }
                }
                if near_kink {
                    continue;
                }
                checked += 1;

                let mut grads = Gradients::zeros_like(&controller);
                rollout(&controller, &spec, &imitator, &x0, &refs, LossMode::RegulatedOutput, Some(&mut grads))
                    .unwrap();

                let h = 1e-5;
                for l in 0..controller.layers().len() {
                    for w_idx in 0..controller.layers()[l].weights.len() {
                        let mut plus = controller.clone();
                        plus.layers_mut()[l].weights[w_idx] += h;
                        let lp = rollout(&plus, &spec, &imitator, &x0, &refs, LossMode::RegulatedOutput, None)
                            .unwrap();
                        let mut minus = controller.clone();
                        minus.layers_mut()[l].weights[w_idx] -= h;
                        let lm = rollout(&minus, &spec, &imitator, &x0, &refs, LossMode::RegulatedOutput, None)
                            .unwrap();
                        let fd = (lp - lm) / (2.0 * h);
                        let bp = grads.layers[l].0[w_idx];
                        // Relative comparison above the finite-difference
                        // noise floor, absolute below it.
                        let denom = bp.abs().max(fd.abs());
                        if denom > 1e-4 {
                            assert!(
                                (fd - bp).abs() / denom <= 1e-5,
                                "H={horizon} seed={seed} layer {l} w{w_idx}: fd {fd} vs bp {bp}"
                            );
                        } else {
                            assert!((fd - bp).abs() <= 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn imitator_is_bitwise_frozen_by_training() {
        let m = first_order_model();
        let imitator = exact_linear_imitator(&m);
        let before = imitator.clone();
        let spec = tracking_spec();
        let mut controller = spec.build_skeleton(3).unwrap();
        let cfg = RolloutConfig {
            horizon: 5,
            reference: ReferenceGen::UniformSetpoint { lo: -2.0, hi: 2.0 },
            init_lo: vec![-2.0],
            init_hi: vec![2.0],
            init_scale: None,
            loss: LossMode::RegulatedOutput,
            dt: 1.0,
        };
        train_controller(
            &mut controller,
            &spec,
            &imitator,
            &cfg,
            &ControllerTrainConfig {
                batches: 50,
                batch_size: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(imitator, before);
    }

    #[test]
    fn linear_pipeline_recovers_inverse_law() {
        // One identity neuron on [y, r] trained through the exact linear
        // imitator converges to the Eq.-2 coefficients [a₁/b₁, 1/b₁].
        let m = first_order_model();
        let imitator = exact_linear_imitator(&m);
        let spec = tracking_spec();
        let mut controller = spec.build_skeleton(17).unwrap();
        let cfg = RolloutConfig {
            horizon: 5,
            reference: ReferenceGen::UniformSetpoint { lo: -2.0, hi: 2.0 },
            init_lo: vec![-2.0],
            init_hi: vec![2.0],
            init_scale: None,
            loss: LossMode::RegulatedOutput,
            dt: 1.0,
        };
        let report = train_controller(
            &mut controller,
            &spec,
            &imitator,
            &cfg,
            &ControllerTrainConfig {
                batches: 4000,
                batch_size: 8,
                adam: AdamConfig {
                    learning_rate: 0.01,
                    ..AdamConfig::default()
                },
                target_loss: 1e-10,
                seed: 2,
            },
        )
        .unwrap();
        let w = &controller.layers()[0].weights;
        let b1 = m.b[1];
        assert!(
            (w[0] - m.a[0] / b1).abs() < 1e-2 && (w[1] - 1.0 / b1).abs() < 1e-2,
            "weights {w:?} (want [{}, {}]), final loss {}",
            m.a[0] / b1,
            1.0 / b1,
            report.final_loss
        );
        assert!(controller.layers()[0].biases[0].abs() < 1e-2);
    }

    #[test]
    fn closed_loop_step_applies_true_plant() {
        // The LinearPlant state is [y, u_prev]; features are [y, u_prev, r].
        let m = first_order_model();
        let plant = crate::plant::LinearPlant::new(m.clone(), 1.0).unwrap();
        let spec = ControllerSpec {
            state_dim: 2,
            regulated: 0,
            feature_mode: FeatureMode::Tracking,
            hidden: vec![],
            hidden_activation: Activation::Identity,
            feature_scale: vec![],
        };
        // Zero controller: u = 0 everywhere.
        let zero = Mlp::new(vec![
            Layer::new(3, 1, vec![0.0; 3], vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap();
        let (u, _next) = closed_loop_step(&zero, &spec, &plant, 1.0, &[0.4, 0.0]).unwrap();
        assert_eq!(u, 0.0);
        // The inverse law u = (r + a₁·y)/b₁ as a 3-input neuron (u_prev
        // carries no weight at first order): tracks with one step of lag.
        let b1 = m.b[1];
        let ctrl = Mlp::new(vec![Layer::new(
            3,
            1,
            vec![m.a[0] / b1, 0.0, 1.0 / b1],
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let mut state = vec![0.0, 0.0];
        for step in 0..50 {
            let r = (0.1 * step as f64).sin();
            let (_, next) = closed_loop_step(&ctrl, &spec, &plant, r, &state).unwrap();
            assert!((plant.output(&next) - r).abs() <= 1e-10, "step {step}");
            state = next;
        }
        // Wrong feature dimension is rejected.
        assert!(closed_loop_step(&ctrl, &spec, &plant, 0.0, &[0.0, 0.0, 0.0]).is_err());
    }
}
