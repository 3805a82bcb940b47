use super::{Formula, SequentialSpec, TimedTrace};

/// How one phase of a sequential mission is discharged on a trace.
///
/// Indices are zero-based: the phase starts at trace state `start`, its goal
/// is hit at state `start + offset`, matching goal disjunct `disjunct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessStep {
    pub start: usize,
    pub offset: usize,
    pub disjunct: usize,
}

/// Sequential-mission satisfaction.
pub fn check_sequential(trace: &TimedTrace, spec: &SequentialSpec) -> bool {
    sequential_witness(trace, spec).is_some()
}

/// Finds the chain of phase witnesses, trying goal hits in trace order.
///
/// The search is exhaustive: a first goal hit that fails its dwell bound or
/// leads to a dead end in a later phase does not stop the search.
pub fn sequential_witness(trace: &TimedTrace, spec: &SequentialSpec) -> Option<Vec<WitnessStep>> {
    if trace.is_empty() || spec.phases.is_empty() {
        return None;
    }
    let mut search = Search {
        trace,
        spec,
        memo: vec![None; spec.phases.len() * trace.len()],
    };
    search.solve(0, 0)?;
    let mut chain = Vec::with_capacity(spec.phases.len());
    let mut start = 0;
    for phase in 0..spec.phases.len() {
        let (offset, disjunct) = search.memo[phase * trace.len() + start]
            .flatten()
            .expect("solved phase is memoized");
        chain.push(WitnessStep {
            start,
            offset,
            disjunct,
        });
        start += offset;
    }
    Some(chain)
}

struct Search<'a> {
    trace: &'a TimedTrace,
    spec: &'a SequentialSpec,
    // per (phase, start): None = unvisited, Some(None) = fails, Some(Some(..)) = witness
    memo: Vec<Option<Option<(usize, usize)>>>,
}

impl Search<'_> {
    fn solve(&mut self, phase: usize, start: usize) -> Option<(usize, usize)> {
        let slot = phase * self.trace.len() + start;
        if let Some(known) = self.memo[slot] {
            return known;
        }
        let result = self.search(phase, start);
        self.memo[slot] = Some(result);
        result
    }

    fn search(&mut self, phase: usize, start: usize) -> Option<(usize, usize)> {
        let ph = &self.spec.phases[phase];
        let last = phase + 1 == self.spec.phases.len();
        let unsafe_prop = self.spec.unsafe_prop.as_str();
        let mut elapsed = 0.0;
        for hit in start..self.trace.len() {
            if hit > start {
                if self.trace.label(hit - 1) == Some(unsafe_prop) {
                    return None;
                }
                elapsed += self.trace.duration(hit - 1);
                if elapsed > ph.bound {
                    return None;
                }
            }
            let Some(label) = self.trace.label(hit) else {
                continue;
            };
            for (n, d) in ph.disjuncts.iter().enumerate() {
                if d.props.contains(label)
                    && self.trace.duration(hit) >= d.dwell
                    && (last || self.solve(phase + 1, hit).is_some())
                {
                    return Some((hit - start, n));
                }
            }
        }
        None
    }
}

/// Direct bounded semantics over trace suffixes.
///
/// `φ U≤t ψ` holds at state `i` when some state `k ≥ i` starting within `t`
/// of state `i` satisfies `ψ` and every state in `[i, k)` satisfies `φ`.
/// `G≤t` over a disjunction of atoms holds at `i` when the label of `i` is in
/// the set and state `i` lasts at least `t`. Other `G≤t φ` require `φ` at `i`
/// and at every later state starting less than `t` after it, with the trace
/// covering the whole window. Positions past the end of the trace satisfy
/// nothing.
pub fn check_generic(trace: &TimedTrace, formula: &Formula) -> bool {
    holds(trace, formula, 0)
}

fn holds(trace: &TimedTrace, f: &Formula, i: usize) -> bool {
    if i >= trace.len() {
        return false;
    }
    match f {
        Formula::Atom(p) => trace.label(i) == Some(p.as_str()),
        Formula::Not(g) => !holds(trace, g, i),
        Formula::And(a, b) => holds(trace, a, i) && holds(trace, b, i),
        Formula::Or(a, b) => holds(trace, a, i) || holds(trace, b, i),
        Formula::Until { bound, lhs, rhs } => {
            let mut offset = 0.0;
            for k in i..trace.len() {
                if k > i {
                    offset += trace.duration(k - 1);
                }
                if offset > *bound {
                    return false;
                }
                if holds(trace, rhs, k) {
                    return true;
                }
                if !holds(trace, lhs, k) {
                    return false;
                }
            }
            false
        }
        Formula::Finally { bound, inner } => {
            let mut offset = 0.0;
            for k in i..trace.len() {
                if k > i {
                    offset += trace.duration(k - 1);
                }
                if offset > *bound {
                    return false;
                }
                if holds(trace, inner, k) {
                    return true;
                }
            }
            false
        }
        Formula::Globally { bound, inner } => {
            if let Some(set) = atom_set(inner) {
                return trace.label(i).is_some_and(|l| set.contains(&l))
                    && trace.duration(i) >= *bound;
            }
            let mut offset = 0.0;
            let mut k = i;
            loop {
                if !holds(trace, inner, k) {
                    return false;
                }
                offset += trace.duration(k);
                k += 1;
                if offset >= *bound {
                    return true;
                }
                if k >= trace.len() {
                    return false;
                }
            }
        }
    }
}

fn atom_set(f: &Formula) -> Option<Vec<&str>> {
    match f {
        Formula::Atom(p) => Some(vec![p.as_str()]),
        Formula::Or(a, b) => {
            let mut v = atom_set(a)?;
            v.extend(atom_set(b)?);
            Some(v)
        }
        _ => None,
    }
}
