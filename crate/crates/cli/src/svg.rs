//! Static SVG rendering of an environment with sampled trajectories.

use std::fmt::Write;

use bltl_drive::env::{Environment, Rect};

const SCALE: f64 = 200.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#edc948", "#76b7b2"];
const UNSAFE_FILL: &str = "#9c9c9c";

/// One trajectory polyline; `satisfied` selects the stroke style.
#[derive(Debug, Clone)]
pub struct Polyline {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub satisfied: Option<bool>,
}

/// Renders the SVG; returns the document and the names of trajectories
/// that had to be clipped to the workspace.
pub fn render(env: &Environment, paths: &[Polyline]) -> (String, Vec<String>) {
    let b = env.bounds();
    let width = b.width() * SCALE + 2.0 * MARGIN;
    let height = b.height() * SCALE + 2.0 * MARGIN;
    let px = |x: f64, y: f64| (MARGIN + (x - b.x_min) * SCALE, MARGIN + (b.y_max - y) * SCALE);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}">"#
    )
    .unwrap();
    let (x0, y0) = px(b.x_min, b.y_max);
    writeln!(
        out,
        r##"<rect class="workspace" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="black"/>"##,
        b.width() * SCALE,
        b.height() * SCALE
    )
    .unwrap();

    let colors: Vec<&String> = env.propositions().iter().filter(|p| *p != env.unsafe_prop()).collect();
    for region in env.regions() {
        let fill = if region.label == env.unsafe_prop() {
            UNSAFE_FILL
        } else {
            let i = colors.iter().position(|p| **p == region.label).unwrap_or(0);
            PALETTE[i % PALETTE.len()]
        };
        let Rect { x_min, y_min, x_max, y_max } = region.rect;
        let (rx, ry) = px(x_min, y_max);
        writeln!(
            out,
            r#"<rect class="region" data-label="{}" x="{rx:.2}" y="{ry:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.5" stroke="{fill}"/>"#,
            escape(&region.label),
            (x_max - x_min) * SCALE,
            (y_max - y_min) * SCALE
        )
        .unwrap();
        let (tx, ty) = px(x_min, y_max);
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{} ({})</text>"#,
            tx + 3.0,
            ty + 12.0,
            escape(&region.id),
            escape(&region.label)
        )
        .unwrap();
    }

    let q = env.q_init();
    let (qx, qy) = px(q.x, q.y);
    writeln!(out, r#"<circle class="start" cx="{qx:.2}" cy="{qy:.2}" r="4" fill="black"/>"#).unwrap();

    let mut clipped = Vec::new();
    for path in paths {
        let mut was_clipped = false;
        let pts: Vec<String> = path
            .points
            .iter()
            .map(|&(x, y)| {
                let cx = x.clamp(b.x_min, b.x_max);
                let cy = y.clamp(b.y_min, b.y_max);
                was_clipped |= cx != x || cy != y;
                let (sx, sy) = px(cx, cy);
                format!("{sx:.2},{sy:.2}")
            })
            .collect();
        if was_clipped {
            clipped.push(path.name.clone());
        }
        let (class, style) = match path.satisfied {
            Some(true) => ("satisfying", r##"stroke="#1a7f37" stroke-width="1.2""##),
            Some(false) => ("violating", r##"stroke="#c62828" stroke-width="1.2" stroke-dasharray="4 3""##),
            None => ("trajectory", r##"stroke="#333333" stroke-width="1.2""##),
        };
        writeln!(
            out,
            r#"<polyline class="{class}" data-name="{}" fill="none" {style} points="{}"/>"#,
            escape(&path.name),
            pts.join(" ")
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    (out, clipped)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bltl_drive::presets;

    fn line(points: Vec<(f64, f64)>, satisfied: Option<bool>) -> Polyline {
        Polyline {
            name: "p".into(),
            points,
            satisfied,
        }
    }

    #[test]
    fn one_polyline_per_trajectory_and_styles() {
        let env = presets::stand_in_environment();
        let paths: Vec<Polyline> = (0..20)
            .map(|i| line(vec![(0.3, 1.5), (1.0, 1.0 + i as f64 * 0.05)], Some(i % 2 == 0)))
            .collect();
        let (svg, clipped) = render(&env, &paths);
        assert_eq!(svg.matches("<polyline").count(), 20);
        assert_eq!(svg.matches(r#"class="satisfying""#).count(), 10);
        assert_eq!(svg.matches(r#"class="violating""#).count(), 10);
        assert_eq!(svg.matches(r#"class="region""#).count(), env.regions().len());
        assert!(clipped.is_empty());
    }

    #[test]
    fn points_outside_the_workspace_are_clamped() {
        let env = presets::stand_in_environment();
        let (svg, clipped) = render(&env, &[line(vec![(0.3, 1.5), (9.0, -2.0)], None)]);
        assert_eq!(clipped, ["p"]);
        let b = env.bounds();
        let expected = format!("{:.2},{:.2}", MARGIN + b.width() * SCALE, MARGIN + b.height() * SCALE);
        assert!(svg.contains(&expected), "{svg}");
    }
}
