use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One trace state: the satisfied proposition (`None` for no region) and
/// the time spent in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub label: Option<String>,
    pub duration: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimedTrace {
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace csv row {row}: invalid duration `{value}`")]
    Duration { row: usize, value: String },
    #[error("trace file contains no states")]
    Empty,
}

impl TimedTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a trace from `(label, duration)` pairs; an empty label means
    /// "no proposition".
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        TimedTrace {
            steps: pairs
                .into_iter()
                .map(|(l, d)| TraceStep {
                    label: (!l.is_empty()).then(|| l.to_string()),
                    duration: d,
                })
                .collect(),
        }
    }

    pub fn push(&mut self, label: Option<String>, duration: f64) {
        self.steps.push(TraceStep { label, duration });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.steps[i].label.as_deref()
    }

    pub fn duration(&self, i: usize) -> f64 {
        self.steps[i].duration
    }

    pub fn total_duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    /// No two consecutive states carry the same label.
    pub fn labels_alternate(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].label != w[1].label)
    }

    /// Writes `label,duration` rows with a header; the empty label is written
    /// as an empty field.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), TraceError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["label", "duration"])?;
        for s in &self.steps {
            wtr.write_record([s.label.as_deref().unwrap_or(""), &s.duration.to_string()])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut trace = TimedTrace::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let label = rec.get(0).unwrap_or("");
            let raw = rec.get(1).unwrap_or("");
            let duration: f64 = raw.parse().map_err(|_| TraceError::Duration {
                row: row + 1,
                value: raw.to_string(),
            })?;
            if !(duration >= 0.0 && duration.is_finite()) {
                return Err(TraceError::Duration {
                    row: row + 1,
                    value: raw.to_string(),
                });
            }
            trace.push((!label.is_empty()).then(|| label.to_string()), duration);
        }
        if trace.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(trace)
    }
}
