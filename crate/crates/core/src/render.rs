//! Static SVG pictures of an instance and its trajectories.

use std::fmt::Write;

use crate::geometry::{footprint, State};
use crate::sim::{Instance, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Pixels per map unit.
    pub scale: f64,
    /// Draw a footprint every this many steps; zero draws none.
    pub footprint_stride: usize,
    pub show_goals: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            scale: 8.0,
            footprint_stride: 4,
            show_goals: true,
        }
    }
}

/// Colour of robot `id`, spread around the hue circle by the golden angle.
pub fn robot_color(id: usize) -> String {
    let hue = (id as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},70%,45%)")
}

/// The SVG uses map units with y pointing up; `scale` only sets the
/// document size.
pub fn render_svg(inst: &Instance, trajs: &[Trajectory], opts: &RenderOptions) -> String {
    let (w, h) = (inst.workspace.width(), inst.workspace.height());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {w} {h}">"#,
        w * opts.scale,
        h * opts.scale
    );
    let _ = writeln!(s, r#"<g transform="translate(0 {h}) scale(1 -1)">"#);
    let _ = writeln!(
        s,
        r##"<rect class="map" x="0" y="0" width="{w}" height="{h}" fill="#fff" stroke="#000" stroke-width="0.2"/>"##
    );
    for o in inst.workspace.obstacles() {
        let _ = writeln!(
            s,
            r##"<circle class="obstacle" cx="{}" cy="{}" r="{}" fill="#555"/>"##,
            o.x, o.y, o.r
        );
    }
    let shape = &inst.model.shape;
    let rect = |s: &mut String, st: &State, color: &str, style: &str| {
        let c = footprint(st, shape).corners();
        let pts: Vec<String> = c.iter().map(|(x, y)| format!("{x:.4},{y:.4}")).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="0.1" {style}/>"#,
            pts.join(" ")
        );
    };
    for tr in trajs {
        let color = robot_color(tr.robot);
        let mut pts = vec![tr.start];
        for st in &tr.steps {
            pts.extend(st.samples.iter().skip(1).copied());
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.4},{:.4}", p.x, p.y)).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="path" data-robot="{}" points="{}" fill="none" stroke="{color}" stroke-width="0.15"/>"#,
            tr.robot,
            line.join(" ")
        );
        if opts.footprint_stride > 0 {
            for k in (0..=tr.steps.len()).step_by(opts.footprint_stride) {
                rect(&mut s, &tr.state_at(k), &color, r#"stroke-opacity="0.5""#);
            }
        }
    }
    for (i, start) in inst.starts.iter().enumerate() {
        let color = robot_color(i);
        rect(&mut s, start, &color, r#"class="start""#);
        let _ = writeln!(
            s,
            r#"<circle class="start" cx="{}" cy="{}" r="0.4" fill="{color}"/>"#,
            start.x, start.y
        );
        if opts.show_goals {
            for g in &inst.goals[i] {
                rect(&mut s, g, &color, r#"class="goal" stroke-dasharray="0.3 0.2""#);
            }
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}
