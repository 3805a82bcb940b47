use std::fmt;

/// BLTL abstract syntax. Time bounds are non-negative seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until {
        bound: f64,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Finally {
        bound: f64,
        inner: Box<Formula>,
    },
    Globally {
        bound: f64,
        inner: Box<Formula>,
    },
}

impl Formula {
    pub fn atom(name: impl AsRef<str>) -> Self {
        Formula::Atom(name.as_ref().to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn until(bound: f64, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until {
            bound,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn finally(bound: f64, inner: Formula) -> Self {
        Formula::Finally {
            bound,
            inner: Box::new(inner),
        }
    }

    pub fn globally(bound: f64, inner: Formula) -> Self {
        Formula::Globally {
            bound,
            inner: Box::new(inner),
        }
    }

    /// Visits every atom name.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_atoms(&mut out);
        out
    }

    fn visit_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Atom(p) => out.push(p),
            Formula::Not(f) | Formula::Finally { inner: f, .. } | Formula::Globally { inner: f, .. } => {
                f.visit_atoms(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until { lhs: a, rhs: b, .. } => {
                a.visit_atoms(out);
                b.visit_atoms(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until { .. } => 3,
            Formula::Not(_) | Formula::Finally { .. } | Formula::Globally { .. } => 4,
            Formula::Atom(_) => 5,
        }
    }
}

/// Maximum nested sum of time bounds.
pub fn nested_bound(f: &Formula) -> f64 {
    match f {
        Formula::Atom(_) => 0.0,
        Formula::Not(g) => nested_bound(g),
        Formula::And(a, b) | Formula::Or(a, b) => nested_bound(a).max(nested_bound(b)),
        Formula::Until { bound, lhs, rhs } => bound + nested_bound(lhs).max(nested_bound(rhs)),
        Formula::Finally { bound, inner } | Formula::Globally { bound, inner } => {
            bound + nested_bound(inner)
        }
    }
}

/// Smallest stage count `K ≥ 1` with `nested_bound(f) ≤ K·stage_duration`.
pub fn horizon(f: &Formula, stage_duration: f64) -> usize {
    assert!(stage_duration > 0.0, "stage duration must be positive");
    let ratio = nested_bound(f) / stage_duration;
    let k = (ratio - 1e-9).ceil();
    (k as usize).max(1)
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Formula, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(p) => f.write_str(p),
            Formula::Not(g) => {
                f.write_str("!")?;
                write_child(f, g, 4)
            }
            Formula::Finally { bound, inner } => {
                write!(f, "F[<={bound}] ")?;
                write_child(f, inner, 4)
            }
            Formula::Globally { bound, inner } => {
                write!(f, "G[<={bound}] ")?;
                write_child(f, inner, 4)
            }
            Formula::And(a, b) => {
                write_child(f, a, 2)?;
                f.write_str(" & ")?;
                write_child(f, b, 3)
            }
            Formula::Or(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" | ")?;
                write_child(f, b, 2)
            }
            Formula::Until { bound, lhs, rhs } => {
                write_child(f, lhs, 4)?;
                write!(f, " U[<={bound}] ")?;
                write_child(f, rhs, 3)
            }
        }
    }
}
