//! Case-study constants: the x80Pro vehicle, its encoder noise model, the
//! pickup/test/drop-off mission and a bundled stand-in environment.

use crate::dynamics::{Action, NoiseModel, VehicleParams, WheelNoise};
use crate::env::Environment;

pub const WHEEL_RADIUS: f64 = 0.085;
pub const WHEEL_SEPARATION: f64 = 0.295;
pub const STAGE_DURATION: f64 = 2.6;
pub const ENCODER_WINDOWS: f64 = 378.0;

/// Interval masses (lowest first) used when none are configured.
pub const DEFAULT_INTERVAL_PROBS: [f64; 3] = [0.25, 0.5, 0.25];

/// Mission: pickup, then test1 or test2, then drop-off, never unsafe.
pub const MISSION: &str = "!u U[<=14] (G[<=0.8] p & !u U[<=5] ((G[<=1] t1 | G[<=0.8] t2) & !u U[<=4] d))";

/// Three-stage pickup/test/drop-off mission of the worked example.
pub const EXAMPLE_MISSION: &str = "!u U[<=6.2] (p & !u U[<=2.3] (G[<=0.2] t & !u U[<=2.3] d))";

pub const STAND_IN_ENVIRONMENT: &str = include_str!("../data/stand_in_env.json");

/// Encoder resolution `2π / (windows · Δt)` (rad/s).
pub fn encoder_resolution() -> f64 {
    std::f64::consts::TAU / (ENCODER_WINDOWS * STAGE_DURATION)
}

/// Left turn, straight and right turn at 0.25 m/s, turning at 0.5 rad/s.
pub fn x80pro_actions() -> Vec<Action> {
    let (r, l) = (WHEEL_RADIUS, WHEEL_SEPARATION);
    vec![
        Action::from([(1.0 + l) / (4.0 * r), (1.0 - l) / (4.0 * r)]),
        Action::from([1.0 / (4.0 * r), 1.0 / (4.0 * r)]),
        Action::from([(1.0 - l) / (4.0 * r), (1.0 + l) / (4.0 * r)]),
    ]
}

pub fn x80pro_params() -> VehicleParams {
    VehicleParams {
        wheel_radius: WHEEL_RADIUS,
        wheel_separation: WHEEL_SEPARATION,
        stage_duration: STAGE_DURATION,
        actions: x80pro_actions(),
    }
}

/// Three intervals per wheel, `[-1.5Δε, 1.5Δε]`, with the default masses.
pub fn x80pro_noise() -> NoiseModel {
    x80pro_noise_with(DEFAULT_INTERVAL_PROBS.to_vec())
}

pub fn x80pro_noise_with(probs: Vec<f64>) -> NoiseModel {
    let w = WheelNoise::symmetric(encoder_resolution(), probs);
    NoiseModel {
        right: w.clone(),
        left: w,
    }
}

pub fn stand_in_environment() -> Environment {
    Environment::from_json(STAND_IN_ENVIRONMENT).expect("bundled environment is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bltl::{horizon, parse_formula};

    #[test]
    fn actions_have_stated_body_velocities() {
        let p = x80pro_params();
        p.validate().unwrap();
        let expected = [(0.25, 0.5), (0.25, 0.0), (0.25, -0.5)];
        for (a, (v, w)) in p.actions.iter().zip(expected) {
            let (bv, bw) = p.wheel_to_body(a.right, a.left);
            assert!((bv - v).abs() < 1e-12 && (bw - w).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_support_matches_case_study() {
        let nm = x80pro_noise();
        nm.validate().unwrap();
        assert!((encoder_resolution() - 0.006393147443202672).abs() < 1e-15);
        assert!((nm.right.eps_min + 0.009589721164804008).abs() < 1e-15);
        assert!((nm.left.eps_max - 0.0096).abs() < 2e-5);
    }

    #[test]
    fn mission_horizon() {
        assert_eq!(horizon(&parse_formula(MISSION).unwrap(), STAGE_DURATION), 9);
    }

    #[test]
    fn bundled_environment_loads() {
        let env = stand_in_environment();
        for p in ["p", "t1", "t2", "d", "u"] {
            assert!(env.has_proposition(p));
        }
    }
}
