//! The measurement-history MDP.
//!
//! A state is the sequence of `(action, j_r, j_l)` triples observed so far;
//! the measured intervals are fully determined by those indices, so states
//! are never materialised beyond the histories that are actually sampled.
//! Below the horizon every control is enabled; at the horizon only the idle
//! action remains and loops in place.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bltl::{check_sequential, horizon, SequentialSpec, TimedTrace};
use crate::dynamics::{DynamicsError, MeasuredInterval, NoiseModel, VehicleParams, Wheel};
use crate::env::Environment;
use crate::tracegen::{EventDetection, TraceGenerator, UncertaintyTube};
use crate::uncertainty::build_tube;

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("action {action} is not enabled in a state with {len} of {horizon} stages")]
    NotEnabled {
        action: MdpAction,
        len: usize,
        horizon: usize,
    },
    #[error("malformed state key `{0}`")]
    Key(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// One observed stage: the applied control and the noise interval of each
/// wheel (all zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HistoryStep {
    pub action: usize,
    pub j_r: usize,
    pub j_l: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MdpState {
    steps: Vec<HistoryStep>,
}

impl MdpState {
    pub fn initial() -> Self {
        Self::default()
    }

    pub fn from_steps(steps: Vec<HistoryStep>) -> Self {
        MdpState { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[HistoryStep] {
        &self.steps
    }

    pub fn extended(&self, step: HistoryStep) -> Self {
        let mut steps = Vec::with_capacity(self.steps.len() + 1);
        steps.extend_from_slice(&self.steps);
        steps.push(step);
        MdpState { steps }
    }

    /// True iff `other` is this state plus exactly one step.
    pub fn is_parent_of(&self, other: &MdpState) -> bool {
        other.steps.len() == self.steps.len() + 1 && other.steps.starts_with(&self.steps)
    }

    /// Canonical text key: `a.jr.jl` triples joined by `/`; empty for `s_0`.
    pub fn key(&self) -> String {
        self.to_string()
    }

    pub fn measured(&self, params: &VehicleParams, nm: &NoiseModel) -> Result<Vec<MeasuredInterval>, DynamicsError> {
        self.steps
            .iter()
            .map(|s| nm.measure(params, s.action, s.j_r, s.j_l))
            .collect()
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{}.{}.{}", s.action, s.j_r, s.j_l)?;
        }
        Ok(())
    }
}

impl FromStr for MdpState {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self, MdpError> {
        if s.is_empty() {
            return Ok(MdpState::initial());
        }
        let bad = || MdpError::Key(s.to_string());
        let steps = s
            .split('/')
            .map(|triple| {
                let v: Vec<usize> = triple
                    .split('.')
                    .map(|n| n.parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?;
                match v[..] {
                    [action, j_r, j_l] => Ok(HistoryStep { action, j_r, j_l }),
                    _ => Err(bad()),
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(MdpState { steps })
    }
}

/// An MDP action: one of the vehicle controls, or the idle self-loop
/// available only at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MdpAction {
    Control(usize),
    Idle,
}

impl fmt::Display for MdpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdpAction::Control(i) => write!(f, "control {i}"),
            MdpAction::Idle => f.write_str("idle"),
        }
    }
}

pub fn enabled_actions(s: &MdpState, n_actions: usize, horizon: usize) -> Vec<MdpAction> {
    if s.len() >= horizon {
        vec![MdpAction::Idle]
    } else {
        (0..n_actions).map(MdpAction::Control).collect()
    }
}

fn is_enabled(s: &MdpState, a: MdpAction, n_actions: usize, horizon: usize) -> bool {
    match a {
        MdpAction::Idle => s.len() == horizon,
        MdpAction::Control(i) => s.len() < horizon && i < n_actions,
    }
}

/// `P(s, a, s')`.
pub fn transition_prob(s: &MdpState, a: MdpAction, next: &MdpState, nm: &NoiseModel, horizon: usize) -> f64 {
    match a {
        MdpAction::Idle => (s.len() == horizon && s == next) as u8 as f64,
        MdpAction::Control(i) => {
            if s.len() >= horizon || !s.is_parent_of(next) {
                return 0.0;
            }
            let last = next.steps[s.len()];
            if last.action != i {
                return 0.0;
            }
            let pr = nm.right.probs.get(last.j_r).copied().unwrap_or(0.0);
            let pl = nm.left.probs.get(last.j_l).copied().unwrap_or(0.0);
            pr * pl
        }
    }
}

/// All successors of `s` under `a` with their probabilities.
pub fn successors(
    s: &MdpState,
    a: MdpAction,
    n_actions: usize,
    nm: &NoiseModel,
    horizon: usize,
) -> Result<Vec<(MdpState, f64)>, MdpError> {
    if !is_enabled(s, a, n_actions, horizon) {
        return Err(MdpError::NotEnabled {
            action: a,
            len: s.len(),
            horizon,
        });
    }
    let MdpAction::Control(action) = a else {
        return Ok(vec![(s.clone(), 1.0)]);
    };
    let mut out = Vec::with_capacity(nm.right.probs.len() * nm.left.probs.len());
    for (j_r, pr) in nm.right.probs.iter().enumerate() {
        for (j_l, pl) in nm.left.probs.iter().enumerate() {
            out.push((s.extended(HistoryStep { action, j_r, j_l }), pr * pl));
        }
    }
    Ok(out)
}

/// Chooses controls for non-terminal states.
pub trait ActionSelector {
    /// Control index for `state`, given a uniform draw `u ∈ [0, 1)`.
    fn select(&self, state: &MdpState, n_actions: usize, u: f64) -> usize;
}

/// Everything needed to sample paths: environment, mission, vehicle, noise
/// and the derived horizon.
#[derive(Debug, Clone)]
pub struct Problem {
    pub env: Environment,
    pub spec: SequentialSpec,
    pub params: VehicleParams,
    pub noise: NoiseModel,
    pub horizon: usize,
    generator: TraceGenerator,
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Fragment(#[from] crate::bltl::FragmentError),
}

impl Problem {
    pub fn new(
        env: Environment,
        spec: SequentialSpec,
        params: VehicleParams,
        noise: NoiseModel,
        detection: EventDetection,
    ) -> Result<Self, ProblemError> {
        params.validate()?;
        noise.validate()?;
        spec.bind(&env)?;
        let horizon = horizon(&spec.to_formula(), params.stage_duration);
        let generator = TraceGenerator::new(&env, detection);
        Ok(Problem {
            env,
            spec,
            params,
            noise,
            horizon,
            generator,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.params.actions.len()
    }

    pub fn generator(&self) -> &TraceGenerator {
        &self.generator
    }

    pub fn enabled_actions(&self, s: &MdpState) -> Vec<MdpAction> {
        enabled_actions(s, self.n_actions(), self.horizon)
    }

    pub fn successors(&self, s: &MdpState, a: MdpAction) -> Result<Vec<(MdpState, f64)>, MdpError> {
        successors(s, a, self.n_actions(), &self.noise, self.horizon)
    }

    /// Tube of a (complete or partial) history.
    pub fn tube(&self, s: &MdpState) -> UncertaintyTube {
        let measured = s.measured(&self.params, &self.noise).expect("state indices in range");
        build_tube(&measured, self.env.q_init(), &self.params)
    }

    /// Samples one path from `s_0` to the horizon under `policy`.
    pub fn sample_path<S: ActionSelector + ?Sized, R: Rng>(&self, policy: &S, rng: &mut R) -> PathSample {
        let mut state = MdpState::initial();
        let mut visited = Vec::with_capacity(self.horizon);
        for _ in 0..self.horizon {
            let action = policy.select(&state, self.n_actions(), rng.gen());
            let j_r = self.noise.sample_interval(Wheel::Right, rng.gen());
            let j_l = self.noise.sample_interval(Wheel::Left, rng.gen());
            let next = state.extended(HistoryStep { action, j_r, j_l });
            visited.push((state, action));
            state = next;
        }
        let tube = self.tube(&state);
        let trace = self.generator.from_tube(&tube);
        let satisfied = check_sequential(&trace, &self.spec);
        PathSample {
            visited,
            terminal: state,
            tube,
            trace,
            satisfied,
        }
    }
}

/// One sampled path through the MDP.
#[derive(Debug, Clone)]
pub struct PathSample {
    /// `(s_{k-1}, a_k)` for every stage.
    pub visited: Vec<(MdpState, usize)>,
    pub terminal: MdpState,
    pub tube: UncertaintyTube,
    pub trace: TimedTrace,
    pub satisfied: bool,
}

impl PathSample {
    pub fn actions(&self) -> Vec<usize> {
        self.visited.iter().map(|(_, a)| *a).collect()
    }
}
