//! Timed traces from concrete trajectories and from uncertainty tubes.
//!
//! Both generators scan a fixed time grid (`stage_duration / substeps`) for
//! changes of the label predicates and refine every change by bisection.
//! A concrete trajectory is labelled by point membership in the (closed)
//! region rectangles. A tube is labelled by disc containment in a single
//! rectangle for goal propositions and by disc intersection for the unsafe
//! proposition; when both become true within one grid step, unsafe wins.

use std::io;

use serde::{Deserialize, Serialize};

use crate::bltl::TimedTrace;
use crate::dynamics::{Chassis, Pose};
use crate::env::{Environment, Rect};

/// True iff the closed disc of radius `d` around `center` lies in `rect`.
pub fn disc_in_region(center: (f64, f64), d: f64, rect: &Rect) -> bool {
    let (x, y) = center;
    rect.x_min <= x - d && x + d <= rect.x_max && rect.y_min <= y - d && y + d <= rect.y_max
}

/// True iff the closed disc of radius `d` around `center` meets `rect`.
pub fn disc_intersects_region(center: (f64, f64), d: f64, rect: &Rect) -> bool {
    rect.distance_to(center.0, center.1) <= d
}

/// One stage of constant wheel speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Pose,
    pub w_r: f64,
    pub w_l: f64,
}

/// Piecewise closed-form trajectory made of equal-length stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    chassis: Chassis,
    stage_duration: f64,
    start: Pose,
    end: Pose,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn new(chassis: Chassis, stage_duration: f64, start: Pose) -> Self {
        assert!(stage_duration > 0.0, "stage duration must be positive");
        Trajectory {
            chassis,
            stage_duration,
            start,
            end: start,
            segments: Vec::new(),
        }
    }

    /// Appends a stage driven at `(w_r, w_l)` and returns its end pose.
    pub fn push_stage(&mut self, w_r: f64, w_l: f64) -> Pose {
        let start = self.end;
        self.segments.push(Segment { start, w_r, w_l });
        self.end = self.chassis.integrate(start, w_r, w_l, self.stage_duration);
        self.end
    }

    pub fn stages(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn chassis(&self) -> Chassis {
        self.chassis
    }

    pub fn stage_duration(&self) -> f64 {
        self.stage_duration
    }

    pub fn duration(&self) -> f64 {
        self.segments.len() as f64 * self.stage_duration
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn end(&self) -> Pose {
        self.end
    }

    /// Zero-based stage active at time `t`; a boundary `kΔt` belongs to the
    /// stage that starts there. `None` for an empty trajectory.
    pub fn stage_at(&self, t: f64) -> Option<usize> {
        let k = self.segments.len();
        if k == 0 {
            return None;
        }
        let idx = (t.max(0.0) / self.stage_duration).floor() as usize;
        Some(idx.min(k - 1))
    }

    /// Pose at time `t`, clamped to `[0, duration]`.
    pub fn pose_at(&self, t: f64) -> Pose {
        match self.stage_at(t) {
            None => self.start,
            Some(k) => {
                let seg = &self.segments[k];
                let local = (t.min(self.duration()) - k as f64 * self.stage_duration).max(0.0);
                self.chassis.integrate(seg.start, seg.w_r, seg.w_l, local)
            }
        }
    }

    /// `per_stage` evenly spaced samples per stage plus the final pose.
    pub fn samples(&self, per_stage: usize) -> Vec<PathSample> {
        sample_rows(self, per_stage, |_| 0.0)
    }
}

/// Nominal trajectory with a piecewise-constant uncertainty radius.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyTube {
    nominal: Trajectory,
    radii: Vec<f64>,
    headings: Vec<f64>,
}

impl UncertaintyTube {
    /// `radii` and `headings` hold `d^1..d^K` and `Δθ^1..Δθ^K`, one per stage.
    pub fn new(nominal: Trajectory, radii: Vec<f64>, headings: Vec<f64>) -> Self {
        assert_eq!(radii.len(), nominal.stages(), "one radius per stage");
        assert_eq!(headings.len(), nominal.stages(), "one heading bound per stage");
        let mut r = Vec::with_capacity(radii.len() + 1);
        r.push(0.0);
        r.extend(radii);
        let mut h = Vec::with_capacity(headings.len() + 1);
        h.push(0.0);
        h.extend(headings);
        UncertaintyTube {
            nominal,
            radii: r,
            headings: h,
        }
    }

    pub fn nominal(&self) -> &Trajectory {
        &self.nominal
    }

    pub fn stages(&self) -> usize {
        self.nominal.stages()
    }

    /// `d^k` for `k ∈ 0..=K`, with `d^0 = 0`.
    pub fn radius(&self, k: usize) -> f64 {
        self.radii[k]
    }

    /// `Δθ^k` for `k ∈ 0..=K`, with `Δθ^0 = 0`.
    pub fn heading_uncertainty(&self, k: usize) -> f64 {
        self.headings[k]
    }

    /// `d(t)`: the radius of the stage active at `t`.
    pub fn radius_at(&self, t: f64) -> f64 {
        self.nominal.stage_at(t).map_or(0.0, |k| self.radii[k + 1])
    }

    pub fn samples(&self, per_stage: usize) -> Vec<PathSample> {
        sample_rows(&self.nominal, per_stage, |t| self.radius_at(t))
    }
}

/// One exported trajectory row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub d: f64,
}

fn sample_rows(traj: &Trajectory, per_stage: usize, radius: impl Fn(f64) -> f64) -> Vec<PathSample> {
    let per_stage = per_stage.max(1);
    let n = traj.stages() * per_stage;
    let step = traj.stage_duration() / per_stage as f64;
    (0..=n)
        .map(|m| {
            let t = if m == n { traj.duration() } else { m as f64 * step };
            let q = traj.pose_at(t);
            PathSample {
                t,
                x: q.x,
                y: q.y,
                theta: q.theta,
                d: radius(t),
            }
        })
        .collect()
}

/// Writes rows `t,x,y,theta,d` with a header.
pub fn write_samples_csv<W: io::Write>(w: W, rows: &[PathSample]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: io::Read>(r: R) -> Result<Vec<PathSample>, csv::Error> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r)
        .deserialize()
        .collect()
}

/// Grid resolution and bisection tolerance of the event search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDetection {
    /// Grid points per stage.
    pub substeps: usize,
    /// Width (s) below which bisection stops.
    pub tolerance: f64,
}

impl Default for EventDetection {
    fn default() -> Self {
        EventDetection {
            substeps: 256,
            tolerance: 1e-6,
        }
    }
}

/// Trace generator bound to one environment.
#[derive(Debug, Clone)]
pub struct TraceGenerator {
    names: Vec<String>,
    rects: Vec<Vec<Rect>>,
    unsafe_id: Option<usize>,
    detection: EventDetection,
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    x: f64,
    y: f64,
    r: f64,
}

#[derive(Clone, Copy)]
enum Mode {
    Point,
    Disc,
}

impl TraceGenerator {
    pub fn new(env: &Environment, detection: EventDetection) -> Self {
        assert!(detection.substeps >= 1 && detection.tolerance > 0.0);
        let names: Vec<String> = env.propositions().iter().cloned().collect();
        let rects = names
            .iter()
            .map(|p| {
                env.regions()
                    .iter()
                    .filter(|r| &r.label == p)
                    .map(|r| r.rect)
                    .collect()
            })
            .collect();
        let unsafe_id = names.iter().position(|p| p == env.unsafe_prop());
        TraceGenerator {
            names,
            rects,
            unsafe_id,
            detection,
        }
    }

    pub fn detection(&self) -> EventDetection {
        self.detection
    }

    /// Point-membership trace of a concrete trajectory.
    pub fn from_trajectory(&self, traj: &Trajectory) -> TimedTrace {
        self.scan(traj, Mode::Point, |t| {
            let q = traj.pose_at(t);
            Probe { x: q.x, y: q.y, r: 0.0 }
        })
    }

    /// Conservative trace of an uncertainty tube.
    pub fn from_tube(&self, tube: &UncertaintyTube) -> TimedTrace {
        self.scan(tube.nominal(), Mode::Disc, |t| {
            let q = tube.nominal().pose_at(t);
            Probe {
                x: q.x,
                y: q.y,
                r: tube.radius_at(t),
            }
        })
    }

    fn active(&self, mode: Mode, label: usize, p: &Probe) -> bool {
        let rects = &self.rects[label];
        match mode {
            Mode::Point => rects.iter().any(|r| r.contains(p.x, p.y)),
            Mode::Disc if Some(label) == self.unsafe_id => rects
                .iter()
                .any(|r| disc_intersects_region((p.x, p.y), p.r, r)),
            Mode::Disc => rects.iter().any(|r| disc_in_region((p.x, p.y), p.r, r)),
        }
    }

    fn entering(&self, mode: Mode, p: &Probe) -> Vec<usize> {
        let all: Vec<usize> = (0..self.names.len())
            .filter(|&l| self.active(mode, l, p))
            .collect();
        match (mode, self.unsafe_id) {
            (Mode::Disc, Some(u)) if all.contains(&u) => vec![u],
            _ => all,
        }
    }

    fn scan(&self, traj: &Trajectory, mode: Mode, probe: impl Fn(f64) -> Probe) -> TimedTrace {
        let total = traj.duration();
        let last = traj.stages() * self.detection.substeps;
        let step = traj.stage_duration() / self.detection.substeps as f64;
        let time = |m: usize| if m == last { total } else { m as f64 * step };
        let grid: Vec<Probe> = (0..=last).map(|m| probe(time(m))).collect();

        let mut trace = TimedTrace::new();
        let mut label = self.entering(mode, &grid[0]).first().copied();
        let mut t_cur = 0.0f64;
        let mut m_cur = 0;

        'events: loop {
            for m in m_cur + 1..=last {
                let lo = t_cur.max(time(m - 1));
                let hi = time(m);
                let next = match label {
                    Some(l) => {
                        if self.active(mode, l, &grid[m]) {
                            continue;
                        }
                        let te = self.bisect(lo, hi, |t| !self.active(mode, l, &probe(t)));
                        (te, None)
                    }
                    None => {
                        let cands = self.entering(mode, &grid[m]);
                        if cands.is_empty() {
                            continue;
                        }
                        let mut best: Option<(f64, usize)> = None;
                        for l in cands {
                            let te = self.bisect(lo, hi, |t| self.active(mode, l, &probe(t)));
                            if best.is_none_or(|(bt, _)| te < bt) {
                                best = Some((te, l));
                            }
                        }
                        let (te, l) = best.expect("non-empty candidates");
                        (te, Some(l))
                    }
                };
                trace.push(self.name(label), next.0 - t_cur);
                label = next.1;
                t_cur = next.0;
                m_cur = m - 1;
                continue 'events;
            }
            trace.push(self.name(label), total - t_cur);
            break;
        }
        trace
    }

    /// Earliest time in `[lo, hi]` where `pred` holds, assuming it holds at
    /// `hi`, to within the detection tolerance.
    fn bisect(&self, mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
        if pred(lo) {
            return lo;
        }
        while hi - lo > self.detection.tolerance {
            let mid = 0.5 * (lo + hi);
            if pred(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn name(&self, label: Option<usize>) -> Option<String> {
        label.map(|l| self.names[l].clone())
    }
}

/// Trace of a concrete trajectory with default event detection.
pub fn trace_from_trajectory(traj: &Trajectory, env: &Environment) -> TimedTrace {
    TraceGenerator::new(env, EventDetection::default()).from_trajectory(traj)
}

/// Trace of an uncertainty tube with default event detection.
pub fn trace_from_tube(tube: &UncertaintyTube, env: &Environment) -> TimedTrace {
    TraceGenerator::new(env, EventDetection::default()).from_tube(tube)
}
