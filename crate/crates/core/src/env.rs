//! Planar workspace: labeled rectangular regions, the unsafe proposition and
//! the vehicle's initial pose.
//!
//! Regions are closed axis-aligned rectangles. Two regions may share an edge
//! but their interiors must be disjoint.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Pose;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("malformed environment document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("region `{id}` has an empty or inverted rectangle")]
    DegenerateRect { id: String },
    #[error("workspace bounds are empty or inverted")]
    DegenerateBounds,
    #[error("regions overlap: `{0}` and `{1}`")]
    Overlap(String, String),
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("duplicate region id `{0}`")]
    DuplicateId(String),
    #[error("initial position lies outside the workspace bounds")]
    InitOutOfBounds,
    #[error("initial position lies inside unsafe region `{0}`")]
    InitUnsafe(String),
    #[error("initial heading {0} is not finite")]
    InitHeading(f64),
}

/// Closed axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x_min, r.y_min, r.x_max, r.y_max]
    }
}

impl Rect {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_proper(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }

    /// True when the open interiors intersect. Shared edges do not count.
    pub fn interiors_overlap(&self, other: &Rect) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    /// Euclidean distance from a point to the closed rectangle (0 inside).
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let cx = x.clamp(self.x_min, self.x_max);
        let cy = y.clamp(self.y_min, self.y_max);
        (x - cx).hypot(y - cy)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub label: String,
    pub rect: Rect,
}

/// Serialized form of an environment, see [`Environment::from_json`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentDoc {
    pub propositions: Vec<String>,
    #[serde(rename = "unsafe")]
    pub unsafe_prop: String,
    pub q_init: [f64; 3],
    pub bounds: [f64; 4],
    pub regions: Vec<Region>,
}

/// A validated environment. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    regions: Vec<Region>,
    propositions: BTreeSet<String>,
    unsafe_prop: String,
    q_init: Pose,
    bounds: Rect,
}

impl Environment {
    pub fn new(
        regions: Vec<Region>,
        propositions: impl IntoIterator<Item = String>,
        unsafe_prop: impl Into<String>,
        q_init: Pose,
        bounds: Rect,
    ) -> Result<Self, EnvError> {
        let mut propositions: BTreeSet<String> = propositions.into_iter().collect();
        let unsafe_prop = unsafe_prop.into();
        propositions.insert(unsafe_prop.clone());

        if !bounds.is_proper() {
            return Err(EnvError::DegenerateBounds);
        }
        let mut ids = BTreeSet::new();
        for r in &regions {
            if !r.rect.is_proper() {
                return Err(EnvError::DegenerateRect { id: r.id.clone() });
            }
            if !propositions.contains(&r.label) {
                return Err(EnvError::UnknownProposition(r.label.clone()));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(EnvError::DuplicateId(r.id.clone()));
            }
        }
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                if a.rect.interiors_overlap(&b.rect) {
                    return Err(EnvError::Overlap(a.id.clone(), b.id.clone()));
                }
            }
        }
        if !q_init.theta.is_finite() {
            return Err(EnvError::InitHeading(q_init.theta));
        }
        if !bounds.contains(q_init.x, q_init.y) {
            return Err(EnvError::InitOutOfBounds);
        }
        if let Some(r) = regions
            .iter()
            .find(|r| r.label == unsafe_prop && r.rect.contains(q_init.x, q_init.y))
        {
            return Err(EnvError::InitUnsafe(r.id.clone()));
        }

        Ok(Environment {
            regions,
            propositions,
            unsafe_prop,
            q_init: Pose::new(q_init.x, q_init.y, q_init.theta),
            bounds,
        })
    }

    /// Parses and validates an environment document.
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let doc: EnvironmentDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: EnvironmentDoc) -> Result<Self, EnvError> {
        let [x, y, theta] = doc.q_init;
        Environment::new(
            doc.regions,
            doc.propositions,
            doc.unsafe_prop,
            Pose { x, y, theta },
            Rect::from(doc.bounds),
        )
    }

    pub fn to_doc(&self) -> EnvironmentDoc {
        EnvironmentDoc {
            propositions: self.propositions.iter().cloned().collect(),
            unsafe_prop: self.unsafe_prop.clone(),
            q_init: [self.q_init.x, self.q_init.y, self.q_init.theta],
            bounds: self.bounds.into(),
            regions: self.regions.clone(),
        }
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn propositions(&self) -> &BTreeSet<String> {
        &self.propositions
    }

    pub fn has_proposition(&self, prop: &str) -> bool {
        self.propositions.contains(prop)
    }

    pub fn unsafe_prop(&self) -> &str {
        &self.unsafe_prop
    }

    pub fn q_init(&self) -> Pose {
        self.q_init
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// All regions labeled `prop`; empty when no region carries the label.
    pub fn satisfying_set(&self, prop: &str) -> Result<Vec<&Region>, EnvError> {
        if !self.has_proposition(prop) {
            return Err(EnvError::UnknownProposition(prop.to_string()));
        }
        Ok(self.regions.iter().filter(|r| r.label == prop).collect())
    }

    /// Label of the region containing the point, if any. On a shared edge the
    /// first region in document order wins.
    pub fn label_at(&self, x: f64, y: f64) -> Option<&str> {
        self.regions
            .iter()
            .find(|r| r.rect.contains(x, y))
            .map(|r| r.label.as_str())
    }
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(regions: &str, props: &str) -> String {
        format!(
            r#"{{ "propositions": {props}, "unsafe": "unsafe", "q_init": [0,0,0],
                 "bounds": [-5,-5,5,5], "regions": {regions} }}"#
        )
    }

    #[test]
    fn loads_two_disjoint_regions() {
        let text = doc(
            r#"[{"id":"a","label":"pickup","rect":[1,1,2,2]},
                {"id":"b","label":"unsafe","rect":[3,3,4,4]}]"#,
            r#"["pickup","unsafe"]"#,
        );
        let env = Environment::from_json(&text).unwrap();
        assert_eq!(env.regions().len(), 2);
        assert_eq!(env.unsafe_prop(), "unsafe");
    }

    #[test]
    fn rejects_overlapping_regions() {
        let text = doc(
            r#"[{"id":"a","label":"pickup","rect":[1,1,2,2]},
                {"id":"b","label":"unsafe","rect":[1.5,1.5,4,4]}]"#,
            r#"["pickup","unsafe"]"#,
        );
        let err = Environment::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("regions overlap"), "{err}");
    }

    #[test]
    fn shared_edges_are_allowed() {
        let text = doc(
            r#"[{"id":"a","label":"pickup","rect":[1,1,2,2]},
                {"id":"b","label":"unsafe","rect":[2,1,3,2]}]"#,
            r#"["pickup","unsafe"]"#,
        );
        assert!(Environment::from_json(&text).is_ok());
    }

    #[test]
    fn rejects_unknown_label() {
        let text = doc(
            r#"[{"id":"a","label":"dropoff","rect":[1,1,2,2]}]"#,
            r#"["pickup","unsafe"]"#,
        );
        let err = Environment::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("unknown proposition"), "{err}");
    }

    #[test]
    fn rejects_init_inside_unsafe() {
        let text = doc(
            r#"[{"id":"a","label":"unsafe","rect":[-1,-1,1,1]}]"#,
            r#"["unsafe"]"#,
        );
        assert!(matches!(
            Environment::from_json(&text),
            Err(EnvError::InitUnsafe(_))
        ));
    }

    #[test]
    fn init_may_sit_in_goal_region() {
        let text = doc(
            r#"[{"id":"a","label":"pickup","rect":[-1,-1,1,1]}]"#,
            r#"["pickup","unsafe"]"#,
        );
        let env = Environment::from_json(&text).unwrap();
        assert_eq!(env.label_at(0.0, 0.0), Some("pickup"));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(
            Environment::from_json("{ not json"),
            Err(EnvError::Parse(_))
        ));
    }

    #[test]
    fn satisfying_set_cases() {
        let text = doc(
            r#"[{"id":"a","label":"pickup","rect":[1,1,2,2]},
                {"id":"b","label":"pickup","rect":[3,3,4,4]},
                {"id":"c","label":"unsafe","rect":[-3,-3,-2,-2]}]"#,
            r#"["pickup","test","unsafe"]"#,
        );
        let env = Environment::from_json(&text).unwrap();
        let ids: Vec<_> = env
            .satisfying_set("pickup")
            .unwrap()
            .iter()
            .map(|r| r.id.as_str())
            .collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(env.satisfying_set("test").unwrap().is_empty());
        assert!(env.satisfying_set("nowhere").is_err());

        let total: usize = env
            .propositions()
            .iter()
            .map(|p| env.satisfying_set(p).unwrap().len())
            .sum();
        assert_eq!(total, env.regions().len());
    }

    #[test]
    fn rect_distance() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(r.distance_to(0.5, 0.5), 0.0);
        assert!((r.distance_to(2.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((r.distance_to(2.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        for t in [-1e-18, -7.0, 0.0, TAU, 3.0 * TAU + 0.5, -TAU] {
            let w = wrap_angle(t);
            assert!((0.0..TAU).contains(&w), "{t} -> {w}");
        }
    }
}
