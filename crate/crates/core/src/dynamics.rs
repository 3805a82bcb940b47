//! Differential-drive kinematics with actuator noise and the incremental
//! encoder interval model.
//!
//! With constant wheel speeds over a stage the kinematics integrate in closed
//! form: a straight segment when the turn rate vanishes, a circular arc
//! otherwise. Interval indices are zero-based throughout the crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::wrap_angle;

/// Turn rates below this magnitude use the straight-line formula.
pub const STRAIGHT_OMEGA_EPS: f64 = 1e-12;

const TILING_REL_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("vehicle parameter `{0}` must be positive")]
    NonPositive(&'static str),
    #[error("action set is empty")]
    NoActions,
    #[error("duplicate action {0:?}")]
    DuplicateAction(Action),
    #[error("{wheel} wheel noise: {reason}")]
    Noise { wheel: Wheel, reason: String },
    #[error("action index {0} out of range")]
    ActionOutOfRange(usize),
    #[error("{wheel} noise interval index {index} out of range")]
    IntervalOutOfRange { wheel: Wheel, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wheel {
    Right,
    Left,
}

impl std::fmt::Display for Wheel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Wheel::Right => "right",
            Wheel::Left => "left",
        })
    }
}

/// Planar pose; the heading is kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Smallest absolute angle between two headings, in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(std::f64::consts::TAU - d)
}

/// Commanded wheel angular velocities (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Action {
    pub right: f64,
    pub left: f64,
}

impl From<[f64; 2]> for Action {
    fn from(v: [f64; 2]) -> Self {
        Action {
            right: v[0],
            left: v[1],
        }
    }
}

impl From<Action> for [f64; 2] {
    fn from(a: Action) -> Self {
        [a.right, a.left]
    }
}

impl Action {
    pub fn wheel(&self, wheel: Wheel) -> f64 {
        match wheel {
            Wheel::Right => self.right,
            Wheel::Left => self.left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Wheel radius (m).
    pub wheel_radius: f64,
    /// Distance between the wheels (m).
    pub wheel_separation: f64,
    /// Stage duration (s).
    pub stage_duration: f64,
    pub actions: Vec<Action>,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (name, v) in [
            ("wheel_radius", self.wheel_radius),
            ("wheel_separation", self.wheel_separation),
            ("stage_duration", self.stage_duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::NonPositive(name));
            }
        }
        if self.actions.is_empty() {
            return Err(DynamicsError::NoActions);
        }
        for (i, a) in self.actions.iter().enumerate() {
            if self.actions[..i].contains(a) {
                return Err(DynamicsError::DuplicateAction(*a));
            }
        }
        Ok(())
    }

    pub fn action(&self, index: usize) -> Result<Action, DynamicsError> {
        self.actions
            .get(index)
            .copied()
            .ok_or(DynamicsError::ActionOutOfRange(index))
    }

    pub fn chassis(&self) -> Chassis {
        Chassis {
            wheel_radius: self.wheel_radius,
            wheel_separation: self.wheel_separation,
        }
    }

    pub fn wheel_to_body(&self, w_r: f64, w_l: f64) -> (f64, f64) {
        self.chassis().wheel_to_body(w_r, w_l)
    }

    pub fn integrate(&self, q0: Pose, w_r: f64, w_l: f64, tau: f64) -> Pose {
        self.chassis().integrate(q0, w_r, w_l, tau)
    }
}

/// Wheel geometry, all that the kinematics need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chassis {
    pub wheel_radius: f64,
    pub wheel_separation: f64,
}

impl Chassis {
    /// Body forward speed (m/s) and turn rate (rad/s) for applied wheel speeds.
    pub fn wheel_to_body(&self, w_r: f64, w_l: f64) -> (f64, f64) {
        let r = self.wheel_radius;
        (r * (w_r + w_l) / 2.0, r * (w_r - w_l) / self.wheel_separation)
    }

    /// Pose after holding wheel speeds `(w_r, w_l)` for `tau` seconds.
    pub fn integrate(&self, q0: Pose, w_r: f64, w_l: f64, tau: f64) -> Pose {
        let (v, omega) = self.wheel_to_body(w_r, w_l);
        if omega.abs() < STRAIGHT_OMEGA_EPS {
            let (s, c) = q0.theta.sin_cos();
            return Pose::new(q0.x + v * tau * c, q0.y + v * tau * s, q0.theta);
        }
        let theta1 = q0.theta + omega * tau;
        let rho = v / omega;
        Pose::new(
            q0.x + rho * (theta1.sin() - q0.theta.sin()),
            q0.y - rho * (theta1.cos() - q0.theta.cos()),
            theta1,
        )
    }
}

/// Closed interval `[lo, hi]` on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Noise support of one wheel, partitioned into equal-width intervals with
/// given probability masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WheelNoise {
    pub eps_min: f64,
    pub eps_max: f64,
    /// Encoder resolution: width of every noise interval (rad/s).
    pub resolution: f64,
    /// Mass of each interval, lowest first.
    pub probs: Vec<f64>,
}

impl WheelNoise {
    /// Symmetric support `[-n·res/2, n·res/2]` with the given interval masses.
    pub fn symmetric(resolution: f64, probs: Vec<f64>) -> Self {
        let half = probs.len() as f64 * resolution / 2.0;
        WheelNoise {
            eps_min: -half,
            eps_max: half,
            resolution,
            probs,
        }
    }

    /// Noise-free wheel: one zero-width interval at 0 with mass 1.
    pub fn exact() -> Self {
        WheelNoise {
            eps_min: 0.0,
            eps_max: 0.0,
            resolution: 0.0,
            probs: vec![1.0],
        }
    }

    pub fn interval_count(&self) -> usize {
        self.probs.len()
    }

    fn validate(&self, wheel: Wheel) -> Result<(), DynamicsError> {
        let fail = |reason: String| Err(DynamicsError::Noise { wheel, reason });
        if self.probs.is_empty() {
            return fail("no noise intervals".into());
        }
        if !(self.eps_min <= self.eps_max) || !self.resolution.is_finite() {
            return fail("eps_min must not exceed eps_max".into());
        }
        if self.resolution < 0.0 {
            return fail("resolution must be non-negative".into());
        }
        let span = (self.eps_max - self.eps_min).abs();
        let tiled = self.probs.len() as f64 * self.resolution;
        if (tiled - span).abs() > TILING_REL_TOL * span.max(f64::MIN_POSITIVE) {
            return fail(format!(
                "{} intervals of width {} do not tile [{}, {}]",
                self.probs.len(),
                self.resolution,
                self.eps_min,
                self.eps_max
            ));
        }
        if self.probs.iter().any(|p| !(*p >= 0.0)) {
            return fail("interval probabilities must be non-negative".into());
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return fail(format!("interval probabilities sum to {total}, not 1"));
        }
        Ok(())
    }

    /// Noise interval `j` (zero-based).
    pub fn interval(&self, j: usize) -> Option<Interval> {
        (j < self.probs.len()).then(|| Interval {
            lo: self.eps_min + j as f64 * self.resolution,
            hi: self.eps_min + (j + 1) as f64 * self.resolution,
        })
    }

    /// Interval midpoint, the representative noise value used for nominal
    /// trajectories.
    pub fn midpoint(&self, j: usize) -> Option<f64> {
        self.interval(j).map(|i| i.midpoint())
    }

    /// Inverse-CDF draw of an interval index from a uniform `u ∈ [0, 1)`.
    pub fn sample_interval(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (j, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Noise value inside interval `j`, uniform in position for `u ∈ [0, 1)`.
    pub fn sample_in_interval(&self, j: usize, u: f64) -> Option<f64> {
        self.interval(j).map(|i| i.lo + u * (i.hi - i.lo))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub right: WheelNoise,
    pub left: WheelNoise,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.right.validate(Wheel::Right)?;
        self.left.validate(Wheel::Left)
    }

    pub fn exact() -> Self {
        NoiseModel {
            right: WheelNoise::exact(),
            left: WheelNoise::exact(),
        }
    }

    pub fn wheel(&self, wheel: Wheel) -> &WheelNoise {
        match wheel {
            Wheel::Right => &self.right,
            Wheel::Left => &self.left,
        }
    }

    pub fn sample_interval(&self, wheel: Wheel, u: f64) -> usize {
        self.wheel(wheel).sample_interval(u)
    }

    pub fn sample_in_interval(&self, wheel: Wheel, j: usize, u: f64) -> Result<f64, DynamicsError> {
        self.wheel(wheel)
            .sample_in_interval(j, u)
            .ok_or(DynamicsError::IntervalOutOfRange { wheel, index: j })
    }

    pub fn interval(&self, wheel: Wheel, j: usize) -> Result<Interval, DynamicsError> {
        self.wheel(wheel)
            .interval(j)
            .ok_or(DynamicsError::IntervalOutOfRange { wheel, index: j })
    }

    /// Encoder reading when `action` was commanded and the noise of each
    /// wheel fell in intervals `j_r` / `j_l`.
    pub fn measure(
        &self,
        params: &VehicleParams,
        action: usize,
        j_r: usize,
        j_l: usize,
    ) -> Result<MeasuredInterval, DynamicsError> {
        let a = params.action(action)?;
        let er = self.interval(Wheel::Right, j_r)?;
        let el = self.interval(Wheel::Left, j_l)?;
        Ok(MeasuredInterval {
            action,
            j_r,
            j_l,
            right: Interval {
                lo: a.right + er.lo,
                hi: a.right + er.hi,
            },
            left: Interval {
                lo: a.left + el.lo,
                hi: a.left + el.hi,
            },
        })
    }
}

/// A pair of measured wheel-speed intervals together with the action and
/// noise-interval indices that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredInterval {
    pub action: usize,
    pub j_r: usize,
    pub j_l: usize,
    pub right: Interval,
    pub left: Interval,
}

impl MeasuredInterval {
    pub fn wheel(&self, wheel: Wheel) -> Interval {
        match wheel {
            Wheel::Right => self.right,
            Wheel::Left => self.left,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: f64 = 0.085;
    const L: f64 = 0.295;

    fn params() -> VehicleParams {
        VehicleParams {
            wheel_radius: R,
            wheel_separation: L,
            stage_duration: 2.6,
            actions: vec![
                Action::from([(1.0 + L) / (4.0 * R), (1.0 - L) / (4.0 * R)]),
                Action::from([1.0 / (4.0 * R), 1.0 / (4.0 * R)]),
                Action::from([(1.0 - L) / (4.0 * R), (1.0 + L) / (4.0 * R)]),
            ],
        }
    }

    fn quoted_noise() -> WheelNoise {
        WheelNoise {
            eps_min: -0.0096,
            eps_max: 0.0096,
            resolution: 0.0064,
            probs: vec![0.2, 0.5, 0.3],
        }
    }

    #[test]
    fn body_velocities_of_case_study_actions() {
        let p = params();
        let (v, w) = p.wheel_to_body((1.0 + L) / (4.0 * R), (1.0 - L) / (4.0 * R));
        assert!((v - 0.25).abs() < 1e-15 && (w - 0.5).abs() < 1e-15);
        let (v, w) = p.wheel_to_body(1.0 / (4.0 * R), 1.0 / (4.0 * R));
        assert!((v - 0.25).abs() < 1e-15 && w == 0.0);
        let (v, w) = p.wheel_to_body(3.0, -3.0);
        assert_eq!(v, 0.0);
        assert!((w - R * 6.0 / L).abs() < 1e-15);
    }

    #[test]
    fn straight_segment() {
        let p = params();
        let q = p.integrate(Pose::new(0.0, 0.0, 0.0), 1.0 / (4.0 * R), 1.0 / (4.0 * R), 2.6);
        assert!((q.x - 0.65).abs() < 1e-15);
        assert_eq!(q.y, 0.0);
        assert_eq!(q.theta, 0.0);
    }

    #[test]
    fn flow_property_on_arc() {
        let p = params();
        let q0 = Pose::new(0.3, -0.2, 6.1);
        let (wr, wl) = (p.actions[0].right, p.actions[0].left);
        let split = p.integrate(p.integrate(q0, wr, wl, 1.1), wr, wl, 1.5);
        let whole = p.integrate(q0, wr, wl, 2.6);
        assert!(split.distance(&whole) < 1e-12);
        assert!(angle_between(split.theta, whole.theta) < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = params();
        p.wheel_radius = 0.0;
        assert_eq!(p.validate(), Err(DynamicsError::NonPositive("wheel_radius")));
        let mut p = params();
        p.actions.push(p.actions[0]);
        assert!(matches!(p.validate(), Err(DynamicsError::DuplicateAction(_))));
        let mut p = params();
        p.actions.clear();
        assert_eq!(p.validate(), Err(DynamicsError::NoActions));
    }

    #[test]
    fn noise_partition_endpoints() {
        let w = quoted_noise();
        let expect = [-0.0096, -0.0032, 0.0032, 0.0096];
        for j in 0..3 {
            let i = w.interval(j).unwrap();
            assert!((i.lo - expect[j]).abs() < 1e-15, "{j}: {i:?}");
            assert!((i.hi - expect[j + 1]).abs() < 1e-15, "{j}: {i:?}");
        }
        assert!(w.interval(3).is_none());
    }

    #[test]
    fn noise_validation() {
        let nm = NoiseModel {
            right: quoted_noise(),
            left: quoted_noise(),
        };
        assert!(nm.validate().is_ok());
        let mut bad = nm.clone();
        bad.left.probs = vec![0.2, 0.5, 0.2];
        assert!(bad.validate().is_err());
        let mut bad = nm.clone();
        bad.right.resolution = 0.005;
        assert!(bad.validate().is_err());
        let mut bad = nm;
        bad.right.probs = vec![-0.1, 0.8, 0.3];
        assert!(bad.validate().is_err());
        assert!(NoiseModel::exact().validate().is_ok());
    }

    #[test]
    fn inverse_cdf_sampling() {
        let w = quoted_noise();
        assert_eq!(w.sample_interval(0.10), 0);
        assert_eq!(w.sample_interval(0.69), 1);
        assert_eq!(w.sample_interval(0.70), 2);
        assert_eq!(w.sample_interval(0.999_999), 2);
        let degenerate = WheelNoise::exact();
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(degenerate.sample_interval(u), 0);
        }
        let skewed = WheelNoise {
            probs: vec![0.5, 0.5, 0.0],
            ..quoted_noise()
        };
        assert_eq!(skewed.sample_interval(1.0), 1);
    }

    #[test]
    fn measurement_intervals() {
        let p = params();
        let nm = NoiseModel {
            right: quoted_noise(),
            left: quoted_noise(),
        };
        let u = 1.0 / (4.0 * R);
        let m = nm.measure(&p, 1, 1, 0).unwrap();
        assert!((m.right.lo - (u - 0.0032)).abs() < 1e-15);
        assert!((m.right.hi - (u + 0.0032)).abs() < 1e-15);
        assert!((m.left.lo - (u - 0.0096)).abs() < 1e-15);
        assert!((m.right.width() - 0.0064).abs() < 1e-15);
        assert!(nm.measure(&p, 3, 0, 0).is_err());
        assert!(nm.measure(&p, 0, 3, 0).is_err());
    }

    #[test]
    fn measured_intervals_tile_the_applied_range() {
        let p = params();
        let nm = NoiseModel {
            right: quoted_noise(),
            left: quoted_noise(),
        };
        for a in 0..3 {
            let u = p.actions[a].right;
            let first = nm.measure(&p, a, 0, 0).unwrap().right;
            assert_eq!(first.lo, u + nm.right.eps_min);
            for j in 1..3 {
                let prev = nm.measure(&p, a, j - 1, 0).unwrap().right;
                let cur = nm.measure(&p, a, j, 0).unwrap().right;
                assert_eq!(prev.hi, cur.lo);
            }
            let last = nm.measure(&p, a, 2, 0).unwrap().right;
            assert!((last.hi - (u + nm.right.eps_max)).abs() < 1e-15);
        }
    }

    #[test]
    fn in_interval_sampling_endpoints() {
        let w = quoted_noise();
        assert_eq!(w.sample_in_interval(1, 0.0), Some(w.interval(1).unwrap().lo));
        let mid = w.sample_in_interval(2, 0.5).unwrap();
        assert!((mid - w.midpoint(2).unwrap()).abs() < 1e-15);
        assert!(w.sample_in_interval(5, 0.5).is_none());
    }

    #[test]
    fn angle_between_wraps() {
        assert!((angle_between(0.1, 6.2) - (0.1 + std::f64::consts::TAU - 6.2)).abs() < 1e-12);
        assert!((angle_between(3.0, 0.0) - 3.0).abs() < 1e-15);
    }
}
