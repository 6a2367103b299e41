//! Imitator networks: structure rules, exact construction, training.
//!
//! An imitator reproduces a plant's one-sample dynamics. For the plants
//! in this crate each step is a linear candidate followed by clamping of
//! the bounded states, and a clamp is piecewise linear:
//!
//! ```text
//! clamp(c) = relu(c) − relu(−c) − relu(c − ub) + relu(lb − c)
//! ```
//!
//! so one hidden ReLU layer reproduces the step *exactly*: four neurons
//! per bounded state (identity pair + excess pair), two per free state
//! (identity pair only) — the hidden-width rule
//! `4·n_sat + 2·n_lin`. A velocity coupled to a clamped position picks
//! up `−excess/dt` from the position's excess pair, which is the
//! companion contact rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::net::{Activation, Layer, Mlp, Sample, TrainConfig, TrainReport};
use crate::plant::{
    CandidateMode, ContactMode, HydraulicDrive, Plant, SaturationLink, StopLink,
};
use crate::rng::seeded;

/// Which feedback signals the imitator consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Full state vector is measured: inputs `[x₁..xₙ, u]`, outputs the next state.
    StateVector,
    /// Only the output is measured: inputs are `n` control values and `n`
    /// delayed outputs, output is the next plant output.
    DelayedOutput,
}

/// Counts of constrained and unconstrained state variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImitatorSpec {
    pub n_sat: usize,
    pub n_lin: usize,
    pub feedback_mode: FeedbackMode,
}

impl ImitatorSpec {
    pub fn order(&self) -> usize {
        self.n_sat + self.n_lin
    }
}

/// Minimum hidden width, `4·n_sat + 2·n_lin`.
pub fn hidden_size(spec: &ImitatorSpec) -> Result<usize> {
    if spec.order() == 0 {
        return Err(Error::InvalidParam("imitator needs at least one state variable".into()));
    }
    Ok(4 * spec.n_sat + 2 * spec.n_lin)
}

/// A layer-dimension recipe: `dims.len() == activations.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Structure {
    /// Seeded Glorot skeleton with this shape.
    pub fn build_seeded(&self, seed: u64) -> Result<Mlp> {
        Mlp::from_dims(&self.dims, &self.activations, &mut seeded(seed))
    }
}

/// The minimal imitator recipe for a given spec.
pub fn build_structure(spec: &ImitatorSpec) -> Result<Structure> {
    let n = spec.order();
    let hidden = hidden_size(spec)?;
    Ok(match spec.feedback_mode {
        FeedbackMode::StateVector => Structure {
            dims: vec![n + 1, hidden, n],
            activations: vec![Activation::Relu, Activation::Identity],
        },
        FeedbackMode::DelayedOutput => Structure {
            dims: vec![2 * n, hidden, 1],
            activations: vec![Activation::Relu, Activation::Identity],
        },
    })
}

/// The hydraulic-drive imitator shape: a candidate layer of four neurons
/// without activation ahead of the twelve-neuron ReLU layer.
pub fn hydraulic_structure() -> Structure {
    Structure {
        dims: vec![5, 4, 12, 4],
        activations: vec![Activation::Identity, Activation::Relu, Activation::Identity],
    }
}

/// A one-sample step in clamp normal form: linear candidate rows, one
/// optional symmetric bound per state, and velocity/position couplings
/// `(velocity index, position index, 1/dt)`.
struct ClampedLinear {
    cand: Mat,
    bounds: Vec<Option<f64>>,
    couplings: Vec<(usize, usize, f64)>,
}

impl ClampedLinear {
    fn n(&self) -> usize {
        self.cand.rows()
    }

    fn n_sat(&self) -> usize {
        self.bounds.iter().filter(|b| b.is_some()).count()
    }

    fn hidden_width(&self) -> usize {
        4 * self.n_sat() + 2 * (self.n() - self.n_sat())
    }

    /// Hidden layer reading candidates (as pre-activations through
    /// `reader` rows), plus the output recombination rows.
    ///
    /// Hidden order per state `i`: `relu(c_i)`, `relu(−c_i)`, then for
    /// bounded states `relu(c_i − ub)`, `relu(lb − c_i)`.
    fn relu_and_output_layers(&self, reader: &Mat) -> (Layer, Layer) {
        let n = self.n();
        let in_dim = reader.cols();
        let hidden = self.hidden_width();
        let mut w_h = Vec::with_capacity(hidden * in_dim);
        let mut b_h = Vec::with_capacity(hidden);
        let mut w_o = vec![0.0; n * hidden];
        // Offsets of each state's neuron group in the hidden layer.
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0usize;

        for i in 0..n {
            offsets.push(off);
            let row = reader.row(i);
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            // Identity pair.
            w_h.extend_from_slice(row);
            b_h.push(0.0);
            w_h.extend_from_slice(&neg);
            b_h.push(0.0);
            w_o[i * hidden + off] = 1.0;
            w_o[i * hidden + off + 1] = -1.0;
            off += 2;
            // Excess pair.
            if let Some(d) = self.bounds[i] {
                w_h.extend_from_slice(row);
                b_h.push(-d); // c_i − ub
                w_h.extend_from_slice(&neg);
                b_h.push(-d); // lb − c_i with lb = −d
                w_o[i * hidden + off] = -1.0;
                w_o[i * hidden + off + 1] = 1.0;
                off += 2;
            }
        }
        for &(vel, pos, inv_dt) in &self.couplings {
            let pos_excess = offsets[pos] + 2;
            w_o[vel * hidden + pos_excess] = -inv_dt;
            w_o[vel * hidden + pos_excess + 1] = inv_dt;
        }

        let hidden_layer = Layer::new(in_dim, hidden, w_h, b_h, Activation::Relu).expect("static shape");
        let out_layer = Layer::new(hidden, n, w_o, vec![0.0; n], Activation::Identity).expect("static shape");
        (hidden_layer, out_layer)
    }

    /// `[n+1, 4·n_sat + 2·n_lin, n]` — hidden neurons read `[x; u]` directly.
    fn minimal_net(&self) -> Mlp {
        let (hidden, out) = self.relu_and_output_layers(&self.cand);
        Mlp::new(vec![hidden, out]).expect("layers chain by construction")
    }

    /// `[n+1, n (identity), hidden, n]` — an explicit candidate layer first.
    fn candidate_layer_net(&self) -> Mlp {
        let n = self.n();
        let cand_layer = Layer::new(
            n + 1,
            n,
            self.cand.data().to_vec(),
            vec![0.0; n],
            Activation::Identity,
        )
        .expect("static shape");
        // Hidden neurons select single candidates: reader = I (n×n).
        let (hidden, out) = self.relu_and_output_layers(&Mat::identity(n));
        Mlp::new(vec![cand_layer, hidden, out]).expect("layers chain by construction")
    }
}

fn saturation_form(link: &SaturationLink) -> ClampedLinear {
    let (a_d, b_d) = link.discretized();
    ClampedLinear {
        cand: Mat::from_rows(&[vec![a_d, b_d]]).expect("static shape"),
        bounds: vec![Some(link.bound)],
        couplings: vec![],
    }
}

fn stop_form(link: &StopLink) -> ClampedLinear {
    ClampedLinear {
        cand: link.candidate_map().clone(),
        bounds: vec![Some(link.bound), None],
        couplings: vec![(1, 0, 1.0 / link.dt)],
    }
}

fn hydraulic_form(drive: &HydraulicDrive) -> ClampedLinear {
    ClampedLinear {
        cand: drive.candidate_map().clone(),
        bounds: vec![
            Some(drive.params.cradle_bound),
            Some(drive.params.pressure_bound),
            None,
            None,
        ],
        couplings: vec![],
    }
}

/// Exact imitator of a saturation link: `[2, 4, 1]`.
pub fn construct_exact_saturation(link: &SaturationLink) -> Mlp {
    saturation_form(link).minimal_net()
}

/// Exact imitator of a stop link in companion contact mode: `[3, 6, 2]`.
///
/// The strict impact law jumps the velocity discontinuously, which no
/// feedforward ReLU network can reproduce, so strict mode is rejected.
pub fn construct_exact_stop(link: &StopLink) -> Result<Mlp> {
    if link.contact_mode != ContactMode::Companion {
        return Err(Error::InvalidParam(
            "exact construction needs companion contact mode; the strict velocity \
             reset is discontinuous and not ReLU-representable"
                .into(),
        ));
    }
    Ok(stop_form(link).minimal_net())
}

/// Exact imitator of the hydraulic drive: `[5, 4, 12, 4]` with an
/// identity candidate layer, matching [`hydraulic_structure`].
pub fn construct_exact_hydraulic(drive: &HydraulicDrive) -> Mlp {
    hydraulic_form(drive).candidate_layer_net()
}

/// Exact imitator of a linear plant: a single layer of neurons without
/// activation whose weights are the difference-equation coefficients
/// (plus history-shift selectors for the lag slots).
pub fn construct_exact_linear(plant: &crate::plant::LinearPlant) -> Mlp {
    let model = &plant.model;
    let n_y = model.output_lags().max(1);
    let n_u = model.input_lags();
    let n = n_y + n_u;
    // Inputs: [y(i), …, y(i−K+1), u(i−1), …, u(i−M+1), u(i)].
    let mut w = vec![0.0; n * (n + 1)];
    // Output row 0: the new output. The held-input convention folds the
    // feedthrough b₀ onto the current input alongside b₁.
    let row0 = &mut w[0..n + 1];
    for (k, ak) in model.a.iter().enumerate() {
        row0[k] = -ak;
    }
    for (m, bm) in model.b.iter().enumerate().skip(2) {
        row0[n_y + m - 2] = *bm;
    }
    row0[n] = model.b.first().copied().unwrap_or(0.0) + model.b.get(1).copied().unwrap_or(0.0);
    // Shifted output history.
    for j in 1..n_y {
        w[j * (n + 1) + (j - 1)] = 1.0;
    }
    // Shifted input history, led by the current input.
    if n_u > 0 {
        w[n_y * (n + 1) + n] = 1.0;
        for j in 1..n_u {
            w[(n_y + j) * (n + 1) + (n_y + j - 1)] = 1.0;
        }
    }
    Mlp::new(vec![Layer::new(
        n + 1,
        n,
        w,
        vec![0.0; n],
        Activation::Identity,
    )
    .expect("static shape")])
    .expect("single layer")
}

/// Sidecar metadata stored next to an imitator model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitatorMeta {
    pub n_sat: usize,
    pub n_lin: usize,
    pub feedback_mode: FeedbackMode,
    pub dt: f64,
    pub candidate_mode: CandidateMode,
}

impl ImitatorMeta {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("imitator meta: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("imitator meta: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitatorReport {
    pub train: TrainReport,
    pub held_out_mse: f64,
}

/// Folds unit-normalization scales into a network trained on normalized
/// pairs, so the result maps raw inputs to raw outputs:
/// first-layer columns absorb `1/input_scale`, last-layer rows (which
/// must carry identity activation) absorb `output_scale`.
pub fn fold_unit_scales(net: &mut Mlp, scales: &crate::dataset::UnitScales) -> Result<()> {
    if net.input_dim() != scales.input.len() || net.output_dim() != scales.target.len() {
        return Err(Error::Dimension(format!(
            "scales {}→{} do not match network {}→{}",
            scales.input.len(),
            scales.target.len(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    if net.layers().last().unwrap().activation != crate::net::Activation::Identity {
        return Err(Error::InvalidParam(
            "scale folding needs an identity output layer".into(),
        ));
    }
    let layers = net.layers_mut();
    {
        let first = &mut layers[0];
        for row in 0..first.output_dim {
            for (col, s) in scales.input.iter().enumerate() {
                if *s > 0.0 {
                    first.weights[row * first.input_dim + col] /= s;
                }
            }
        }
    }
    let last = layers.last_mut().unwrap();
    for (row, s) in scales.target.iter().enumerate() {
        if *s > 0.0 {
            for col in 0..last.input_dim {
                last.weights[row * last.input_dim + col] *= s;
            }
            last.biases[row] *= s;
        }
    }
    Ok(())
}

/// Trains an imitator on pre-split single-step pairs and reports the
/// held-out error.
pub fn train_imitator<S: Sample>(
    net: &mut Mlp,
    train: &[S],
    held_out: &[S],
    cfg: &TrainConfig,
) -> Result<ImitatorReport> {
    if train.is_empty() || held_out.is_empty() {
        return Err(Error::InvalidParam("both dataset splits must be non-empty".into()));
    }
    let report = crate::net::train_epochs(net, train, cfg)?;
    let held_out_mse = crate::net::train::evaluate_mse(net, held_out)?;
    Ok(ImitatorReport {
        train: report,
        held_out_mse,
    })
}

/// Rolls the imitator and the true plant over the same input sequence
/// and returns the largest absolute state deviation.
///
/// The imitator feeds its own predictions back, so this measures
/// accumulated model error, not single-step error.
pub fn max_rollout_deviation(
    net: &Mlp,
    plant: &dyn Plant,
    input: &[f64],
    x0: &[f64],
    n_steps: usize,
) -> Result<f64> {
    let n = plant.state_dim();
    if net.input_dim() != n + 1 || net.output_dim() != n {
        return Err(Error::Dimension(format!(
            "state-vector imitator for this plant needs {}→{} dims, got {}→{}",
            n + 1,
            n,
            net.input_dim(),
            net.output_dim()
        )));
    }
    let mut plant_state = x0.to_vec();
    let mut net_state = x0.to_vec();
    let mut features = vec![0.0; n + 1];
    let mut worst = 0.0f64;
    for (step, &u) in input.iter().take(n_steps).enumerate() {
        plant_state = plant
            .step(&plant_state, u)
            .map_err(|e| Error::Simulation { step, source: Box::new(e) })?;
        features[..n].copy_from_slice(&net_state);
        features[n] = u;
        net_state = net.forward(&features)?;
        for (a, b) in plant_state.iter().zip(&net_state) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::CandidateMode;
    use rand::Rng;

    fn spec(n_sat: usize, n_lin: usize, mode: FeedbackMode) -> ImitatorSpec {
        ImitatorSpec {
            n_sat,
            n_lin,
            feedback_mode: mode,
        }
    }

    #[test]
    fn hidden_size_rule() {
        assert_eq!(hidden_size(&spec(1, 1, FeedbackMode::StateVector)).unwrap(), 6);
        assert_eq!(hidden_size(&spec(2, 2, FeedbackMode::StateVector)).unwrap(), 12);
        assert_eq!(hidden_size(&spec(1, 0, FeedbackMode::StateVector)).unwrap(), 4);
        assert!(hidden_size(&spec(0, 0, FeedbackMode::StateVector)).is_err());
    }

    #[test]
    fn structure_recipes() {
        let s = build_structure(&spec(1, 1, FeedbackMode::StateVector)).unwrap();
        assert_eq!(s.dims, vec![3, 6, 2]);
        assert_eq!(s.activations, vec![Activation::Relu, Activation::Identity]);

        let d = build_structure(&spec(1, 0, FeedbackMode::DelayedOutput)).unwrap();
        assert_eq!(d.dims, vec![2, 4, 1]);

        let h = hydraulic_structure();
        assert_eq!(h.dims, vec![5, 4, 12, 4]);
        assert_eq!(
            h.activations,
            vec![Activation::Identity, Activation::Relu, Activation::Identity]
        );
    }

    #[test]
    fn structure_recipes_match_rule_up_to_order_six() {
        for n_sat in 0..=6usize {
            for n_lin in 0..=(6 - n_sat) {
                if n_sat + n_lin == 0 {
                    continue;
                }
                let n = n_sat + n_lin;
                for mode in [FeedbackMode::StateVector, FeedbackMode::DelayedOutput] {
                    let st = build_structure(&spec(n_sat, n_lin, mode)).unwrap();
                    assert_eq!(st.dims[1], 4 * n_sat + 2 * n_lin);
                    match mode {
                        FeedbackMode::StateVector => {
                            assert_eq!(st.dims[0], n + 1);
                            assert_eq!(st.dims[2], n);
                        }
                        FeedbackMode::DelayedOutput => {
                            assert_eq!(st.dims[0], 2 * n);
                            assert_eq!(st.dims[2], 1);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn clamp_identity_spot_checks() {
        // clamp(c) = relu(c) − relu(−c) − relu(c−ub) + relu(lb−c)
        let clamp = |c: f64, ub: f64, lb: f64| {
            let relu = |x: f64| if x > 0.0 { x } else { 0.0 };
            relu(c) - relu(-c) - relu(c - ub) + relu(lb - c)
        };
        assert_eq!(clamp(0.5, 1.0, -1.0), 0.5);
        assert_eq!(clamp(2.0, 1.0, -1.0), 1.0);
        assert_eq!(clamp(-3.0, 1.0, -1.0), -1.0);
    }

    #[test]
    fn exact_saturation_sizes_and_matches() {
        let link = SaturationLink::new(1.3, 0.8, 1.0, 0.05, CandidateMode::Zoh).unwrap();
        let net = construct_exact_saturation(&link);
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.layers()[0].output_dim, 4);
        let mut rng = crate::rng::seeded(21);
        for _ in 0..100_000 {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let u: f64 = rng.random_range(-6.0..=6.0); // large enough to overshoot
            let plant_next = link.step_one(x, u).unwrap();
            let net_next = net.forward(&[x, u]).unwrap()[0];
            assert!(
                (plant_next - net_next).abs() <= 1e-13,
                "x={x} u={u}: plant {plant_next} vs net {net_next}"
            );
        }
    }

    #[test]
    fn exact_saturation_with_huge_bound_is_pure_linear() {
        // Excess neurons never fire, the net is the linear discretization.
        let link = SaturationLink::new(1.0, 1.0, 1e12, 0.1, CandidateMode::Zoh).unwrap();
        let net = construct_exact_saturation(&link);
        let (a_d, b_d) = link.discretized();
        for (x, u) in [(0.3, 1.0), (-2.0, 4.0), (100.0, -50.0)] {
            let got = net.forward(&[x, u]).unwrap()[0];
            assert!((got - (a_d * x + b_d * u)).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_stop_sizes_and_matches_companion() {
        for mode in [CandidateMode::Zoh, CandidateMode::Euler] {
            let link = StopLink::new(1.0, 1.0, 0.5, 1.0, 0.1, mode, ContactMode::Companion).unwrap();
            let net = construct_exact_stop(&link).unwrap();
            assert_eq!(net.input_dim(), 3);
            assert_eq!(net.layers()[0].output_dim, 6);
            assert_eq!(net.output_dim(), 2);
            let mut rng = crate::rng::seeded(33);
            for _ in 0..100_000 {
                let x1: f64 = rng.random_range(-1.0..=1.0);
                let x2: f64 = rng.random_range(-3.0..=3.0);
                let u: f64 = rng.random_range(-5.0..=5.0);
                let (p1, p2) = link.step_pair(x1, x2, u).unwrap();
                let out = net.forward(&[x1, x2, u]).unwrap();
                assert!(
                    (p1 - out[0]).abs() <= 1e-13 && (p2 - out[1]).abs() <= 1e-13,
                    "state ({x1},{x2}) u={u}: plant ({p1},{p2}) vs net ({:?})",
                    out
                );
            }
        }
    }

    #[test]
    fn exact_stop_rejects_strict_mode() {
        let link = StopLink::new(1.0, 1.0, 0.5, 1.0, 0.1, CandidateMode::Zoh, ContactMode::Strict).unwrap();
        assert!(construct_exact_stop(&link).is_err());
    }

    #[test]
    fn exact_hydraulic_shape_and_single_steps() {
        let drive = HydraulicDrive::new(Default::default()).unwrap();
        let net = construct_exact_hydraulic(&drive);
        let dims: Vec<usize> = std::iter::once(net.input_dim())
            .chain(net.layers().iter().map(|l| l.output_dim))
            .collect();
        assert_eq!(dims, vec![5, 4, 12, 4]);
        let mut rng = crate::rng::seeded(55);
        for _ in 0..50_000 {
            let s = [
                rng.random_range(-1.0..=1.0),
                rng.random_range(-25.0..=25.0),
                rng.random_range(-60.0..=60.0),
                rng.random_range(-10.0..=10.0),
            ];
            let u: f64 = rng.random_range(-3.0..=3.0);
            let plant_next = drive.step_state(&s, u).unwrap();
            let net_next = net.forward(&[s[0], s[1], s[2], s[3], u]).unwrap();
            for (a, b) in plant_next.iter().zip(&net_next) {
                assert!((a - b).abs() <= 1e-11, "plant {plant_next:?} vs net {net_next:?}");
            }
        }
    }

    fn stop_dataset() -> crate::dataset::Dataset {
        let link = StopLink::new(1.0, 1.0, 0.5, 1.0, 0.1, CandidateMode::Zoh, ContactMode::Companion)
            .unwrap();
        let grid = crate::dataset::default_grid(&link, 1.0).unwrap();
        let ds = crate::dataset::record_and_extract(
            &link,
            &grid,
            crate::dataset::PairFormat::ImitatorState,
            "stop-test",
            5,
        )
        .unwrap();
        crate::dataset::balance(ds, 0.1, 5).unwrap()
    }

    #[test]
    fn scale_folding_reproduces_raw_predictions() {
        // Train-on-normalized, fold, predict-on-raw must equal
        // normalize → predict → denormalize.
        let mut ds = stop_dataset();
        let raw = ds.clone();
        let scales = crate::dataset::normalize_unit(&mut ds);
        let spec = ImitatorSpec {
            n_sat: 1,
            n_lin: 1,
            feedback_mode: FeedbackMode::StateVector,
        };
        let net_norm = build_structure(&spec).unwrap().build_seeded(8).unwrap();
        let mut net_raw = net_norm.clone();
        fold_unit_scales(&mut net_raw, &scales).unwrap();
        for (p_raw, p_norm) in raw.pairs.iter().zip(&ds.pairs).take(200) {
            let out_norm = net_norm.forward(&p_norm.input).unwrap();
            let out_raw = net_raw.forward(&p_raw.input).unwrap();
            for ((r, n), s) in out_raw.iter().zip(&out_norm).zip(&scales.target) {
                assert!((r - n * s).abs() <= 1e-12 * s.max(1.0), "{r} vs {}", n * s);
            }
        }
    }

    #[test]
    fn exact_imitator_needs_no_training() {
        // An imitator initialized from the exact construction already has
        // held-out MSE at rounding level; training changes nothing.
        let link = StopLink::new(1.0, 1.0, 0.5, 1.0, 0.1, CandidateMode::Zoh, ContactMode::Companion)
            .unwrap();
        let ds = stop_dataset();
        let (_, test) = crate::dataset::split(&ds, 0.9, 5).unwrap();
        let net = construct_exact_stop(&link).unwrap();
        let mse = crate::net::train::evaluate_mse(&net, &test).unwrap();
        assert!(mse <= 1e-20, "held-out MSE {mse}");
    }

    #[test]
    fn shuffled_labels_floor_at_target_variance() {
        // Break the input→target dependence by shuffling targets among
        // pairs: no model can beat the mean predictor on held-out data,
        // whose MSE is the target variance; (1 − 1/k) converts to the
        // biased form.
        use rand::seq::SliceRandom;
        let mut ds = stop_dataset();
        crate::dataset::normalize_unit(&mut ds);
        let mut targets: Vec<Vec<f64>> = ds.pairs.iter().map(|p| p.target.clone()).collect();
        targets.shuffle(&mut crate::rng::seeded(99));
        for (p, t) in ds.pairs.iter_mut().zip(targets) {
            p.target = t;
        }
        let (train, test) = crate::dataset::split(&ds, 0.9, 99).unwrap();
        let spec = ImitatorSpec {
            n_sat: 1,
            n_lin: 1,
            feedback_mode: FeedbackMode::StateVector,
        };
        let mut net = build_structure(&spec).unwrap().build_seeded(99).unwrap();
        let report = train_imitator(
            &mut net,
            &train,
            &test,
            &TrainConfig {
                epochs: 60,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        // Variance oracle on the held-out targets (per-component mean).
        let k = test.len() as f64;
        let dim = test[0].target.len();
        let mut mean = vec![0.0; dim];
        for p in &test {
            for (m, v) in mean.iter_mut().zip(&p.target) {
                *m += v / k;
            }
        }
        let mut var = 0.0;
        for p in &test {
            for (m, v) in mean.iter().zip(&p.target) {
                var += (v - m) * (v - m);
            }
        }
        var /= k * dim as f64;
        let bound = var * (1.0 - 1.0 / k);
        assert!(
            report.held_out_mse >= bound,
            "held-out {} fell below the variance floor {}",
            report.held_out_mse,
            bound
        );
    }

    #[test]
    fn exact_linear_matches_difference_plant() {
        let model = crate::plant::LinearDifferenceModel::new(vec![0.0, 0.5, 0.2], vec![-0.9, 0.3]).unwrap();
        let plant = crate::plant::LinearPlant::new(model, 0.1).unwrap();
        let net = construct_exact_linear(&plant);
        let mut rng = crate::rng::seeded(3);
        let mut state = vec![0.0; 4];
        for _ in 0..500 {
            let u: f64 = rng.random_range(-2.0..=2.0);
            let expected = crate::plant::Plant::step(&plant, &state, u).unwrap();
            let mut feat = state.clone();
            feat.push(u);
            let got = net.forward(&feat).unwrap();
            for (a, b) in expected.iter().zip(&got) {
                assert!((a - b).abs() <= 1e-13);
            }
            state = expected;
        }
    }

    #[test]
    fn stop_rollout_stays_exact_through_contacts() {
        let link = StopLink::new(1.0, 1.0, 0.5, 1.0, 0.1, CandidateMode::Zoh, ContactMode::Companion).unwrap();
        let net = construct_exact_stop(&link).unwrap();
        let mut rng = crate::rng::seeded(7);
        let input: Vec<f64> = (0..1000).map(|_| rng.random_range(-4.0..=4.0)).collect();
        let dev = max_rollout_deviation(&net, &link, &input, &[0.0, 0.0], 1000).unwrap();
        assert!(dev <= 1e-12, "deviation {dev}");
    }
}
