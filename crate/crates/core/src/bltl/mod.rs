//! Bounded LTL over timed traces.
//!
//! [`Formula`] is the general AST produced by the parser. Missions of the
//! shape `¬u U≤T1 (φ1 ∧ ¬u U≤T2 (φ2 ∧ …))`, with every `φj` a disjunction of
//! bounded-globally atom sets, are recognized by [`to_sequential`] and checked
//! by [`check_sequential`]. [`check_generic`] evaluates any formula directly
//! from the bounded semantics and is kept as an independent reference.

mod check;
mod formula;
mod parser;
mod trace;

pub use check::{check_generic, check_sequential, sequential_witness, WitnessStep};
pub use formula::{horizon, nested_bound, Formula};
pub use parser::{parse_formula, ParseError};
pub use trace::{TimedTrace, TraceError, TraceStep};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::env::Environment;

/// One disjunct `G≤dwell (∨ props)` of a phase goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Disjunct {
    pub dwell: f64,
    pub props: BTreeSet<String>,
}

/// Phase `¬u U≤bound φ`, with `φ` the disjunction of `disjuncts`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub bound: f64,
    pub disjuncts: Vec<Disjunct>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialSpec {
    pub unsafe_prop: String,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FragmentError {
    #[error("formula outside the sequential mission fragment at `{subterm}`: {reason}")]
    Shape { subterm: String, reason: String },
    #[error("sequential spec has no phases")]
    Empty,
    #[error("phase {phase}: {reason}")]
    Invalid { phase: usize, reason: String },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
}

fn shape_err(f: &Formula, reason: &str) -> FragmentError {
    FragmentError::Shape {
        subterm: f.to_string(),
        reason: reason.to_string(),
    }
}

/// Recognizes a sequential mission and extracts its phases.
///
/// A bare atom `p` in goal position is read as `G≤0 p`.
pub fn to_sequential(formula: &Formula, unsafe_prop: &str) -> Result<SequentialSpec, FragmentError> {
    let mut phases = Vec::new();
    let mut cur = formula;
    loop {
        let (bound, rhs) = match cur {
            Formula::Until { bound, lhs, rhs }
                if matches!(lhs.as_ref(), Formula::Not(a) if matches!(a.as_ref(), Formula::Atom(p) if p == unsafe_prop)) =>
            {
                (*bound, rhs.as_ref())
            }
            Formula::Until { lhs, .. } => {
                return Err(shape_err(lhs, &format!("until must be guarded by !{unsafe_prop}")))
            }
            other => return Err(shape_err(other, "expected a guarded bounded until")),
        };
        let (goal, next) = match rhs {
            Formula::And(a, b) if is_guarded_until(b, unsafe_prop) => (a.as_ref(), Some(b.as_ref())),
            Formula::And(a, b) if is_guarded_until(a, unsafe_prop) => (b.as_ref(), Some(a.as_ref())),
            other => (other, None),
        };
        let mut disjuncts = Vec::new();
        collect_disjuncts(goal, unsafe_prop, &mut disjuncts)?;
        phases.push(Phase { bound, disjuncts });
        match next {
            Some(n) => cur = n,
            None => break,
        }
    }
    let spec = SequentialSpec {
        unsafe_prop: unsafe_prop.to_string(),
        phases,
    };
    spec.validate()?;
    Ok(spec)
}

fn is_guarded_until(f: &Formula, unsafe_prop: &str) -> bool {
    matches!(f, Formula::Until { lhs, .. }
        if matches!(lhs.as_ref(), Formula::Not(a) if matches!(a.as_ref(), Formula::Atom(p) if p == unsafe_prop)))
}

fn collect_disjuncts(
    f: &Formula,
    unsafe_prop: &str,
    out: &mut Vec<Disjunct>,
) -> Result<(), FragmentError> {
    match f {
        Formula::Or(a, b) => {
            collect_disjuncts(a, unsafe_prop, out)?;
            collect_disjuncts(b, unsafe_prop, out)
        }
        Formula::Atom(p) => {
            check_goal_atom(f, p, unsafe_prop)?;
            out.push(Disjunct {
                dwell: 0.0,
                props: BTreeSet::from([p.clone()]),
            });
            Ok(())
        }
        Formula::Globally { bound, inner } => {
            let mut props = BTreeSet::new();
            collect_atoms(inner, unsafe_prop, &mut props)?;
            out.push(Disjunct {
                dwell: *bound,
                props,
            });
            Ok(())
        }
        other => Err(shape_err(
            other,
            "phase goal must be a disjunction of G[<=t] over atom disjunctions",
        )),
    }
}

fn collect_atoms(
    f: &Formula,
    unsafe_prop: &str,
    out: &mut BTreeSet<String>,
) -> Result<(), FragmentError> {
    match f {
        Formula::Atom(p) => {
            check_goal_atom(f, p, unsafe_prop)?;
            out.insert(p.clone());
            Ok(())
        }
        Formula::Or(a, b) => {
            collect_atoms(a, unsafe_prop, out)?;
            collect_atoms(b, unsafe_prop, out)
        }
        other => Err(shape_err(other, "G[<=t] must range over a disjunction of atoms")),
    }
}

fn check_goal_atom(f: &Formula, p: &str, unsafe_prop: &str) -> Result<(), FragmentError> {
    if p == unsafe_prop {
        Err(shape_err(f, "the unsafe proposition cannot be a goal"))
    } else {
        Ok(())
    }
}

impl SequentialSpec {
    pub fn validate(&self) -> Result<(), FragmentError> {
        if self.phases.is_empty() {
            return Err(FragmentError::Empty);
        }
        for (j, ph) in self.phases.iter().enumerate() {
            let invalid = |reason: &str| FragmentError::Invalid {
                phase: j + 1,
                reason: reason.to_string(),
            };
            if !(ph.bound >= 0.0 && ph.bound.is_finite()) {
                return Err(invalid("time bound must be a finite non-negative number"));
            }
            if ph.disjuncts.is_empty() {
                return Err(invalid("no goal disjuncts"));
            }
            for d in &ph.disjuncts {
                if !(d.dwell >= 0.0 && d.dwell.is_finite()) {
                    return Err(invalid("dwell bound must be a finite non-negative number"));
                }
                if d.props.is_empty() {
                    return Err(invalid("empty goal proposition set"));
                }
                if d.props.contains(&self.unsafe_prop) {
                    return Err(invalid("the unsafe proposition cannot be a goal"));
                }
            }
        }
        Ok(())
    }

    /// Checks that every proposition is known to `env` and that the unsafe
    /// propositions agree.
    pub fn bind(&self, env: &Environment) -> Result<(), FragmentError> {
        if self.unsafe_prop != env.unsafe_prop() {
            return Err(FragmentError::UnknownProposition(self.unsafe_prop.clone()));
        }
        for p in self.phases.iter().flat_map(|ph| &ph.disjuncts).flat_map(|d| &d.props) {
            if !env.has_proposition(p) {
                return Err(FragmentError::UnknownProposition(p.clone()));
            }
        }
        Ok(())
    }

    /// The BLTL formula this spec stands for.
    pub fn to_formula(&self) -> Formula {
        let guard = || Formula::not(Formula::atom(&self.unsafe_prop));
        let goal = |ph: &Phase| {
            ph.disjuncts
                .iter()
                .map(|d| {
                    let atoms = d
                        .props
                        .iter()
                        .map(Formula::atom)
                        .reduce(Formula::or)
                        .expect("validated spec has non-empty goal sets");
                    Formula::globally(d.dwell, atoms)
                })
                .reduce(Formula::or)
                .expect("validated spec has non-empty phases")
        };
        let mut iter = self.phases.iter().rev();
        let last = iter.next().expect("validated spec has at least one phase");
        let mut acc = Formula::until(last.bound, guard(), goal(last));
        for ph in iter {
            acc = Formula::until(ph.bound, guard(), Formula::and(goal(ph), acc));
        }
        acc
    }
}

impl fmt::Display for SequentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}
