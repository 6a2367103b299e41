//! Reference simulators for the plants this crate controls.
//!
//! Everything here is sample-synchronous: continuous dynamics are
//! discretized once (zero-order hold or forward Euler), each step
//! computes a linear candidate from the previous state and the held
//! input, and limiter events are resolved at sample boundaries by
//! clamping the candidate. That "candidate then clamp" shape is shared
//! with the exact imitators, which reproduce it neuron for neuron.

pub mod discretize;
pub mod hydraulic;
pub mod linear;
pub mod saturation;
pub mod sim;
pub mod stop;

pub use discretize::{candidate_matrix, discretize, CandidateMode};
pub use hydraulic::{HydraulicDrive, HydraulicParams, ANGLE, CRADLE, PRESSURE, SPEED};
pub use linear::{step_linear, LinearDifferenceModel, LinearPlant};
pub use saturation::SaturationLink;
pub use sim::{simulate, Plant, Trajectory};
pub use stop::{ContactMode, StopLink};

use crate::imitator::{FeedbackMode, ImitatorSpec};

/// Any of the concrete plants, for config-driven dispatch.
#[derive(Debug, Clone)]
pub enum AnyPlant {
    Saturation(SaturationLink),
    Stop(StopLink),
    Hydraulic(HydraulicDrive),
    Linear(LinearPlant),
}

impl AnyPlant {
    pub fn as_plant(&self) -> &dyn Plant {
        match self {
            AnyPlant::Saturation(p) => p,
            AnyPlant::Stop(p) => p,
            AnyPlant::Hydraulic(p) => p,
            AnyPlant::Linear(p) => p,
        }
    }

    /// Index of the regulated output within the state vector.
    pub fn output_index(&self) -> usize {
        match self {
            AnyPlant::Saturation(_) | AnyPlant::Stop(_) | AnyPlant::Linear(_) => 0,
            AnyPlant::Hydraulic(_) => ANGLE,
        }
    }

    /// Constrained/unconstrained state counts for imitator sizing.
    pub fn imitator_spec(&self, feedback_mode: FeedbackMode) -> ImitatorSpec {
        let (n_sat, n_lin) = match self {
            AnyPlant::Saturation(_) => (1, 0),
            AnyPlant::Stop(_) => (1, 1),
            AnyPlant::Hydraulic(_) => (2, 2),
            AnyPlant::Linear(p) => (0, p.state_dim()),
        };
        ImitatorSpec {
            n_sat,
            n_lin,
            feedback_mode,
        }
    }
}
