//! Desk-scale transport simulator for collision trials between tray layouts.
//!
//! Bodies are oriented rectangles with a height range. Nothing has momentum:
//! every step each body is displaced inside its free slack, and contacts with
//! the powder-coated control body are recorded. The model is ordinal. It
//! ranks layouts by how many instruments touch the control; it does not
//! predict absolute collision counts.
//!
//! Generators are ChaCha8 seeded with `seed_from_u64`. Stream 1 of a trial
//! seed builds the scene and picks the control; stream 0 drives the motion.

pub mod geometry;
mod scene;
pub mod stats;
mod study;
mod trial;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::packer::{PackError, Violation};

pub use geometry::{Aabb, Obb};
pub use scene::{baseline_scene, scene_from_layout, BaselineInputs, BaselineKind, Body, SceneKind, SimScene, Slack, Wall, WallKind};
pub use stats::{cohens_d, mean, population_std, StatsError};
pub use study::{run_study, Condition, ConditionSource, StudyReport, TrialSummary};
pub use trial::{run_trial, trace_trial, ExcitationProfile, Mode, TrialReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("layout fails validation: {0:?}")]
    InvalidLayout(Vec<Violation>),
    #[error("control index {0} is out of range")]
    InvalidControl(usize),
    #[error("could not place all instruments after {attempts} attempts")]
    PlacementSamplingExhausted { attempts: usize },
    #[error("invalid excitation profile: {0}")]
    InvalidProfile(String),
    #[error("study needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error("{0}")]
    Input(String),
}

/// Tunable constants of the contact model.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParams {
    /// Powder-transfer proximity; the control footprint is grown by this much.
    pub contact_inflation_mm: f64,
    /// Fraction of slack a fully supported body travels.
    pub seated_mobility: f64,
    /// Extra mobility per unit of overhang beyond the longest support.
    pub instability_gain: f64,
    pub loose_mobility: f64,
    /// Play a holder gate leaves a retained ring instrument.
    pub gate_slack_mm: f64,
    /// Rocking of a body with no support at all.
    pub max_rock_deg: f64,
    /// Placement angle spread and rotational play of loose bodies.
    pub loose_angle_deg: f64,
    pub loose_min_gap_mm: f64,
    pub placement_attempts: usize,
    /// Offset between neighbouring instruments threaded on a stringer.
    pub stringer_pitch_mm: f64,
    /// Static friction coefficient against the tray floor.
    pub friction: f64,
    pub tilt_rate_hz: f64,
    /// Random spread of each tilt slide, as a fraction of the slide.
    pub tilt_jitter: f64,
    /// Chance per step that a loose body near the control restacks onto it.
    pub swap_probability: f64,
    pub swap_reach_mm: f64,
    /// Relative sliding between stacked bodies that smears powder.
    pub rub_threshold_mm: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            contact_inflation_mm: 0.5,
            seated_mobility: 0.3,
            instability_gain: 4.0,
            loose_mobility: 0.6,
            gate_slack_mm: 2.0,
            max_rock_deg: 8.0,
            loose_angle_deg: 10.0,
            loose_min_gap_mm: 1.0,
            placement_attempts: 10_000,
            stringer_pitch_mm: 6.0,
            friction: 0.25,
            tilt_rate_hz: 10.0,
            tilt_jitter: 0.15,
            swap_probability: 0.02,
            swap_reach_mm: 15.0,
            rub_threshold_mm: 1.0,
        }
    }
}

pub(crate) fn scene_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub(crate) fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
