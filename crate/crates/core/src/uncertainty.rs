//! Nominal trajectories from measurement histories and worst-case
//! distance/heading uncertainty propagation.
//!
//! The nominal trajectory uses each measured interval's midpoint. After every
//! stage the eight extreme endpoints (start heading `±Δθ`, each wheel at
//! either end of its measured interval) bound how far the true endpoint can be
//! from the nominal one; that distance is accumulated into the tube radius.

use crate::dynamics::{angle_between, DynamicsError, MeasuredInterval, NoiseModel, Pose, VehicleParams, Wheel};
use crate::tracegen::{Trajectory, UncertaintyTube};

/// Nominal pose with its accumulated distance and heading uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalStageState {
    pub pose: Pose,
    pub radius: f64,
    pub heading: f64,
}

impl NominalStageState {
    pub fn initial(pose: Pose) -> Self {
        NominalStageState {
            pose,
            radius: 0.0,
            heading: 0.0,
        }
    }
}

/// Representative noise value of interval `j`: its midpoint.
pub fn representative_noise(nm: &NoiseModel, wheel: Wheel, j: usize) -> Result<f64, DynamicsError> {
    nm.interval(wheel, j).map(|i| i.midpoint())
}

/// Advances the nominal state over one stage driven with the measured
/// wheel-speed intervals `m`.
pub fn propagate_stage(prev: NominalStageState, m: &MeasuredInterval, params: &VehicleParams) -> NominalStageState {
    let ch = params.chassis();
    let dt = params.stage_duration;
    let pose = ch.integrate(prev.pose, m.right.midpoint(), m.left.midpoint(), dt);

    let mut reach: f64 = 0.0;
    let mut turn: f64 = 0.0;
    for alpha in [prev.heading, -prev.heading] {
        let start = Pose {
            theta: prev.pose.theta + alpha,
            ..prev.pose
        };
        for w_r in [m.right.lo, m.right.hi] {
            for w_l in [m.left.lo, m.left.hi] {
                let q = ch.integrate(start, w_r, w_l, dt);
                reach = reach.max(q.distance(&pose));
                turn = turn.max(angle_between(q.theta, pose.theta));
            }
        }
    }
    NominalStageState {
        pose,
        radius: prev.radius + reach,
        heading: turn,
    }
}

/// Folds [`propagate_stage`] over a measurement history starting at `q_init`.
pub fn build_tube(history: &[MeasuredInterval], q_init: Pose, params: &VehicleParams) -> UncertaintyTube {
    let mut traj = Trajectory::new(params.chassis(), params.stage_duration, q_init);
    let mut state = NominalStageState::initial(q_init);
    let mut radii = Vec::with_capacity(history.len());
    let mut headings = Vec::with_capacity(history.len());
    for m in history {
        traj.push_stage(m.right.midpoint(), m.left.midpoint());
        state = propagate_stage(state, m, params);
        radii.push(state.radius);
        headings.push(state.heading);
    }
    UncertaintyTube::new(traj, radii, headings)
}

/// Measured intervals for a history of `(action, j_r, j_l)` indices.
pub fn measure_history(
    steps: impl IntoIterator<Item = (usize, usize, usize)>,
    params: &VehicleParams,
    nm: &NoiseModel,
) -> Result<Vec<MeasuredInterval>, DynamicsError> {
    steps
        .into_iter()
        .map(|(a, jr, jl)| nm.measure(params, a, jr, jl))
        .collect()
}
