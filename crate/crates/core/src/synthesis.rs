//! Sampling-based policy synthesis, Bayesian interval estimation and
//! validation on the continuous system.
//!
//! One synthesis round samples `N` MDP paths under the current stochastic
//! policy, folds the per state-action satisfaction ratios into a persistent
//! Q-table (`q ← h·q + (1−h)·fresh`), moves each visited state's action
//! distribution towards its best action (`μ ← (1−g)·μ + g·1[argmax]`),
//! determinizes the result and estimates its satisfaction probability with
//! sequential Bayesian interval estimation. Rounds stop once two consecutive
//! estimates differ by at most `e`.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::bltl::check_sequential;
use crate::dynamics::Wheel;
use crate::mdp::{ActionSelector, HistoryStep, MdpError, MdpState, Problem};
use crate::seeding::{stream, Purpose};
use crate::tracegen::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("δ out of (0, ½): {0}")]
    Delta(f64),
    #[error("confidence c out of (½, 1): {0}")]
    Confidence(f64),
    #[error("prior parameters α, β must be positive: α = {0}, β = {1}")]
    Prior(f64, f64),
    #[error("greediness g out of (0, 1): {0}")]
    Greediness(f64),
    #[error("history weight h out of [0, 1): {0}")]
    History(f64),
    #[error("stopping radius e must be non-negative: {0}")]
    StopRadius(f64),
    #[error("`{0}` must be at least 1")]
    Zero(&'static str),
    #[error("policy row for `{key}` is not a distribution over {n_actions} actions")]
    BadRow { key: String, n_actions: usize },
    #[error(transparent)]
    Key(#[from] MdpError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Stochastic or deterministic policy over measurement histories.
///
/// States without a stored row follow the default rule: uniform for
/// stochastic policies, the lowest action index for deterministic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_actions: usize,
    deterministic: bool,
    rows: HashMap<MdpState, Vec<f64>>,
}

impl Policy {
    pub fn uniform(n_actions: usize) -> Self {
        assert!(n_actions > 0);
        Policy {
            n_actions,
            deterministic: false,
            rows: HashMap::new(),
        }
    }

    /// Deterministic policy from a state → action table.
    pub fn from_actions(n_actions: usize, table: impl IntoIterator<Item = (MdpState, usize)>) -> Self {
        let rows = table
            .into_iter()
            .map(|(s, a)| {
                assert!(a < n_actions, "action {a} out of range");
                (s, one_hot(n_actions, a))
            })
            .collect();
        Policy {
            n_actions,
            deterministic: true,
            rows,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, s: &MdpState) -> bool {
        self.rows.contains_key(s)
    }

    /// Sets the row of `s`; it must be a probability vector.
    pub fn set_row(&mut self, s: MdpState, row: Vec<f64>) -> Result<(), SynthesisError> {
        let ok = row.len() == self.n_actions
            && row.iter().all(|p| *p >= 0.0)
            && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(SynthesisError::BadRow {
                key: s.key(),
                n_actions: self.n_actions,
            });
        }
        self.rows.insert(s, row);
        Ok(())
    }

    /// Action distribution at `s`, applying the default rule when unseen.
    pub fn probs(&self, s: &MdpState) -> Cow<'_, [f64]> {
        match self.rows.get(s) {
            Some(r) => Cow::Borrowed(r),
            None if self.deterministic => Cow::Owned(one_hot(self.n_actions, 0)),
            None => Cow::Owned(vec![1.0 / self.n_actions as f64; self.n_actions]),
        }
    }

    /// Most likely action at `s`, lowest index on ties.
    pub fn action(&self, s: &MdpState) -> usize {
        argmax(&self.probs(s))
    }

    pub fn states(&self) -> impl Iterator<Item = &MdpState> {
        self.rows.keys()
    }

    /// `(key, action)` pairs sorted by key; meaningful for deterministic
    /// policies.
    pub fn action_table(&self) -> BTreeMap<String, usize> {
        self.rows.iter().map(|(s, r)| (s.key(), argmax(r))).collect()
    }
}

impl ActionSelector for Policy {
    fn select(&self, state: &MdpState, _n_actions: usize, u: f64) -> usize {
        let probs = self.probs(state);
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub estimate: f64,
    pub visits: u64,
}

/// Persistent state-action satisfaction estimates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    entries: HashMap<MdpState, BTreeMap<usize, QEntry>>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &MdpState, a: usize) -> Option<QEntry> {
        self.entries.get(s).and_then(|m| m.get(&a)).copied()
    }

    pub fn state_count(&self) -> usize {
        self.entries.len()
    }

    pub fn pair_count(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    /// Folds one round of `(satisfying visits, visits)` counts in with
    /// history weight `h`.
    pub fn merge(&mut self, fresh: HashMap<(MdpState, usize), (u64, u64)>, h: f64) {
        for ((s, a), (sat, visits)) in fresh {
            if visits == 0 {
                continue;
            }
            let ratio = sat as f64 / visits as f64;
            self.entries
                .entry(s)
                .or_default()
                .entry(a)
                .and_modify(|e| {
                    e.estimate = h * e.estimate + (1.0 - h) * ratio;
                    e.visits += visits;
                })
                .or_insert(QEntry {
                    estimate: ratio,
                    visits,
                });
        }
    }

    /// Best visited action at `s`, lowest index on ties.
    pub fn best_action(&self, s: &MdpState) -> Option<usize> {
        let m = self.entries.get(s)?;
        let mut best: Option<(usize, f64)> = None;
        for (&a, e) in m {
            if best.is_none_or(|(_, q)| e.estimate > q) {
                best = Some((a, e.estimate));
            }
        }
        best.map(|b| b.0)
    }

    pub fn states(&self) -> impl Iterator<Item = &MdpState> {
        self.entries.keys()
    }
}

/// Satisfaction counts of one evaluation round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationStats {
    pub episodes: u64,
    pub satisfied: u64,
}

/// Samples `episodes` paths under `policy` and merges their state-action
/// statistics into `q` with history weight `h`.
pub fn evaluate_policy(
    problem: &Problem,
    policy: &Policy,
    q: &mut QTable,
    episodes: u64,
    h: f64,
    seed: u64,
    round: u64,
) -> EvaluationStats {
    let outcomes: Vec<(Vec<(MdpState, usize)>, bool)> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::Evaluate, round, i);
            let path = problem.sample_path(policy, &mut rng);
            (path.visited, path.satisfied)
        })
        .collect();
    let mut fresh: HashMap<(MdpState, usize), (u64, u64)> = HashMap::new();
    let mut satisfied = 0;
    for (visited, sat) in outcomes {
        satisfied += sat as u64;
        for pair in visited {
            let c = fresh.entry(pair).or_default();
            c.0 += sat as u64;
            c.1 += 1;
        }
    }
    q.merge(fresh, h);
    EvaluationStats { episodes, satisfied }
}

/// Reinforces, in every state with a visited action, the action with the
/// best estimate: `μ' = (1−g)·μ + g·1[a = argmax q]`.
pub fn improve_policy(policy: &Policy, q: &QTable, g: f64) -> Policy {
    let mut next = policy.clone();
    next.deterministic = false;
    for s in q.states() {
        let Some(best) = q.best_action(s) else { continue };
        let row: Vec<f64> = policy
            .probs(s)
            .iter()
            .enumerate()
            .map(|(a, p)| (1.0 - g) * p + if a == best { g } else { 0.0 })
            .collect();
        next.rows.insert(s.clone(), row);
    }
    next
}

/// Per-state argmax policy, lowest index on ties.
pub fn determinize(policy: &Policy) -> Policy {
    Policy {
        n_actions: policy.n_actions,
        deterministic: true,
        rows: policy
            .rows
            .iter()
            .map(|(s, r)| (s.clone(), one_hot(policy.n_actions, argmax(r))))
            .collect(),
    }
}

/// Action of the control strategy after observing `history`.
pub fn control_strategy_action(gamma: &Policy, history: &MdpState) -> usize {
    gamma.action(history)
}

/// Parameters of Bayesian interval estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BieParams {
    pub delta: f64,
    pub confidence: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BieParams {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(SynthesisError::Delta(self.delta));
        }
        if !(self.confidence > 0.5 && self.confidence < 1.0) {
            return Err(SynthesisError::Confidence(self.confidence));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(SynthesisError::Prior(self.alpha, self.beta));
        }
        Ok(())
    }

    /// Posterior mean, interval and its posterior mass after `x` successes
    /// in `n` trials.
    pub fn posterior(&self, n: u64, x: u64) -> BieResult {
        let a = x as f64 + self.alpha;
        let b = (n - x) as f64 + self.beta;
        let p_hat = a / (a + b);
        let lower = (p_hat - self.delta).max(0.0);
        let upper = (p_hat + self.delta).min(1.0);
        let coverage = beta_reg(a, b, upper) - beta_reg(a, b, lower);
        BieResult {
            p_hat,
            samples: n,
            successes: x,
            lower,
            upper,
            coverage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BieResult {
    pub p_hat: f64,
    pub samples: u64,
    pub successes: u64,
    pub lower: f64,
    pub upper: f64,
    pub coverage: f64,
}

/// Sequential BIE: draws verdicts until the posterior mass of
/// `[p̂−δ, p̂+δ]` reaches `c`.
pub fn bie_estimate<E>(
    params: &BieParams,
    mut next: impl FnMut() -> Result<bool, E>,
) -> Result<BieResult, E> {
    let (mut n, mut x) = (0u64, 0u64);
    loop {
        x += next()? as u64;
        n += 1;
        let r = params.posterior(n, x);
        if r.coverage >= params.confidence {
            return Ok(r);
        }
    }
}

/// BIE over an indexed verdict source evaluated `batch` indices at a time in
/// parallel. Verdicts are consumed in index order and the stopping rule is
/// applied after each one, so the result equals [`bie_estimate`] on the same
/// sequence for every batch size.
pub fn bie_estimate_indexed(
    params: &BieParams,
    batch: usize,
    verdict: impl Fn(u64) -> bool + Sync,
) -> BieResult {
    let batch = batch.max(1) as u64;
    let (mut n, mut x) = (0u64, 0u64);
    loop {
        let verdicts: Vec<bool> = (n..n + batch).into_par_iter().map(&verdict).collect();
        for v in verdicts {
            x += v as u64;
            n += 1;
            let r = params.posterior(n, x);
            if r.coverage >= params.confidence {
                return r;
            }
        }
    }
}

/// Estimates the MDP satisfaction probability of a policy.
pub fn estimate_policy(problem: &Problem, policy: &Policy, bie: &BieParams, batch: usize, seed: u64, round: u64) -> BieResult {
    bie_estimate_indexed(bie, batch, |i| {
        let mut rng = stream(seed, Purpose::Estimate, round, i);
        problem.sample_path(policy, &mut rng).satisfied
    })
}

/// Simulates the continuous system under `gamma` for one episode and
/// returns the trajectory, the observed history and the verdict.
pub fn simulate_episode<R: Rng>(problem: &Problem, gamma: &Policy, rng: &mut R) -> (Trajectory, MdpState, bool) {
    let params = &problem.params;
    let nm = &problem.noise;
    let mut traj = Trajectory::new(params.chassis(), params.stage_duration, problem.env.q_init());
    let mut state = MdpState::initial();
    for _ in 0..problem.horizon {
        let action = control_strategy_action(gamma, &state);
        let u = params.actions[action];
        let j_r = nm.sample_interval(Wheel::Right, rng.gen());
        let e_r = nm.sample_in_interval(Wheel::Right, j_r, rng.gen()).expect("sampled index");
        let j_l = nm.sample_interval(Wheel::Left, rng.gen());
        let e_l = nm.sample_in_interval(Wheel::Left, j_l, rng.gen()).expect("sampled index");
        traj.push_stage(u.right + e_r, u.left + e_l);
        state = state.extended(HistoryStep { action, j_r, j_l });
    }
    let trace = problem.generator().from_trajectory(&traj);
    let ok = check_sequential(&trace, &problem.spec);
    (traj, state, ok)
}

/// BIE estimate of the probability that the continuous system satisfies the
/// mission under `gamma`.
pub fn validate_true_system(problem: &Problem, gamma: &Policy, bie: &BieParams, batch: usize, seed: u64) -> BieResult {
    bie_estimate_indexed(bie, batch, |i| {
        let mut rng = stream(seed, Purpose::Validate, 0, i);
        simulate_episode(problem, gamma, &mut rng).2
    })
}

/// Knobs of the synthesis loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    /// Episodes per evaluation round (`N`).
    pub episodes: u64,
    /// Q-table history weight (`h`).
    pub history: f64,
    /// Greediness of policy improvement (`g`).
    pub greediness: f64,
    #[serde(flatten)]
    pub bie: BieParams,
    /// Stopping radius on consecutive estimates (`e`).
    pub stop_radius: f64,
    pub max_rounds: u32,
    /// Verdicts computed in parallel per BIE step.
    pub batch_size: usize,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            episodes: 10_000,
            history: 0.6,
            greediness: 0.6,
            bie: BieParams {
                delta: 0.05,
                confidence: 0.95,
                alpha: 1.0,
                beta: 1.0,
            },
            stop_radius: 0.05,
            max_rounds: 50,
            batch_size: 64,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        self.bie.validate()?;
        if self.episodes == 0 {
            return Err(SynthesisError::Zero("episodes"));
        }
        if self.max_rounds == 0 {
            return Err(SynthesisError::Zero("max_rounds"));
        }
        if self.batch_size == 0 {
            return Err(SynthesisError::Zero("batch_size"));
        }
        if !(self.greediness > 0.0 && self.greediness < 1.0) {
            return Err(SynthesisError::Greediness(self.greediness));
        }
        if !(0.0..1.0).contains(&self.history) {
            return Err(SynthesisError::History(self.history));
        }
        if !(self.stop_radius >= 0.0) {
            return Err(SynthesisError::StopRadius(self.stop_radius));
        }
        Ok(())
    }
}

/// Audit record of one synthesis round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub episodes: u64,
    pub satisfied_episodes: u64,
    pub q_states: usize,
    pub q_pairs: usize,
    pub policy_states: usize,
    pub estimate: BieResult,
    /// `|p̂_i − p̂_{i−1}|`, absent in the first round.
    pub change: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxRounds,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub policy: Policy,
    pub estimate: BieResult,
    pub rounds: Vec<RoundRecord>,
    pub termination: Termination,
}

/// Runs the synthesis loop. `on_round` sees every audit record as soon as
/// its round finishes.
pub fn synthesize(
    problem: &Problem,
    params: &SynthesisParams,
    seed: u64,
    mut on_round: impl FnMut(&RoundRecord),
) -> Result<SynthesisOutcome, SynthesisError> {
    params.validate()?;
    let mut mu = Policy::uniform(problem.n_actions());
    let mut q = QTable::new();
    let mut rounds = Vec::new();
    let mut prev: Option<f64> = None;
    let mut last: Option<(Policy, BieResult)> = None;
    for round in 1..=params.max_rounds {
        let r = round as u64;
        let stats = evaluate_policy(problem, &mu, &mut q, params.episodes, params.history, seed, r);
        mu = improve_policy(&mu, &q, params.greediness);
        let det = determinize(&mu);
        let est = estimate_policy(problem, &det, &params.bie, params.batch_size, seed, r);
        let change = prev.map(|p| (est.p_hat - p).abs());
        let rec = RoundRecord {
            round,
            episodes: stats.episodes,
            satisfied_episodes: stats.satisfied,
            q_states: q.state_count(),
            q_pairs: q.pair_count(),
            policy_states: det.len(),
            estimate: est,
            change,
        };
        on_round(&rec);
        rounds.push(rec);
        if change.is_some_and(|c| c <= params.stop_radius) {
            return Ok(SynthesisOutcome {
                policy: det,
                estimate: est,
                rounds,
                termination: Termination::Converged,
            });
        }
        prev = Some(est.p_hat);
        last = Some((det, est));
    }
    let (policy, estimate) = last.expect("at least one round");
    Ok(SynthesisOutcome {
        policy,
        estimate,
        rounds,
        termination: Termination::MaxRounds,
    })
}

/// Serialized deterministic policy with provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format: String,
    pub config_hash: String,
    pub seed: u64,
    pub rounds: u32,
    pub termination: Termination,
    pub horizon: usize,
    pub n_actions: usize,
    pub p_hat: f64,
    pub delta: f64,
    pub confidence: f64,
    pub estimate: BieResult,
    /// History key → action index.
    pub actions: BTreeMap<String, usize>,
}

pub const POLICY_FORMAT: &str = "bltl-drive-policy/1";

impl PolicyFile {
    pub fn new(outcome: &SynthesisOutcome, problem: &Problem, bie: &BieParams, config_hash: String, seed: u64) -> Self {
        PolicyFile {
            format: POLICY_FORMAT.to_string(),
            config_hash,
            seed,
            rounds: outcome.rounds.len() as u32,
            termination: outcome.termination,
            horizon: problem.horizon,
            n_actions: problem.n_actions(),
            p_hat: outcome.estimate.p_hat,
            delta: bie.delta,
            confidence: bie.confidence,
            estimate: outcome.estimate,
            actions: outcome.policy.action_table(),
        }
    }

    pub fn policy(&self) -> Result<Policy, SynthesisError> {
        let mut table = Vec::with_capacity(self.actions.len());
        for (k, &a) in &self.actions {
            if a >= self.n_actions {
                return Err(SynthesisError::BadRow {
                    key: k.clone(),
                    n_actions: self.n_actions,
                });
            }
            table.push((k.parse::<MdpState>()?, a));
        }
        Ok(Policy::from_actions(self.n_actions, table))
    }
}
