//! Independent trajectory checker. It rebuilds every pose between steps
//! from the step labels and tests overlap by polygon clipping, sharing no
//! collision code with the planners.

use std::fmt;

use crate::geometry::{wrap_angle, State};
use crate::primitives::{apply_primitive, KinematicParams, Primitive};
use crate::reeds_shepp::{rs_sample, rs_shortest};
use crate::sim::{Instance, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    StartMismatch { robot: usize },
    GoalMismatch { robot: usize },
    Discontinuity { robot: usize, t: usize },
    Kinematics { robot: usize, t: usize, detail: String },
    OutOfBounds { robot: usize, t: usize },
    Obstacle { robot: usize, t: usize, obstacle: usize },
    RobotCollision { i: usize, j: usize, t: usize },
    MissingRobot { robot: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartMismatch { robot } => write!(f, "robot {robot}: trajectory does not begin at its start"),
            Violation::GoalMismatch { robot } => write!(f, "robot {robot}: trajectory does not end at its goal"),
            Violation::Discontinuity { robot, t } => write!(f, "robot {robot}: step {t} does not start where step {} ended", t.wrapping_sub(1)),
            Violation::Kinematics { robot, t, detail } => write!(f, "robot {robot}: step {t} is not reproducible ({detail})"),
            Violation::OutOfBounds { robot, t } => write!(f, "robot {robot}: leaves the map near t = {t}"),
            Violation::Obstacle { robot, t, obstacle } => write!(f, "robot {robot}: hits obstacle {obstacle} near t = {t}"),
            Violation::RobotCollision { i, j, t } => write!(f, "robots {i} and {j} overlap near t = {t}"),
            Violation::MissingRobot { robot } => write!(f, "robot {robot}: no trajectory"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Require every trajectory to end at the robot's last goal.
    pub check_goals: bool,
    pub endpoint_tol: f64,
    pub kinematic_tol: f64,
    /// Overlap areas at or below this are treated as touching.
    pub area_tol: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            check_goals: true,
            endpoint_tol: 1e-6,
            kinematic_tol: 1e-9,
            area_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        write!(f, "{} violation(s)", self.violations.len())
    }
}

type Poly = [(f64, f64); 4];

fn body(s: &State, length: f64, width: f64, wheelbase: f64) -> Poly {
    let (c, sn) = (s.theta.cos(), s.theta.sin());
    let rear = 0.5 * (wheelbase - length);
    let front = rear + length;
    let hw = 0.5 * width;
    let at = |a: f64, b: f64| (s.x + a * c - b * sn, s.y + a * sn + b * c);
    [at(rear, -hw), at(front, -hw), at(front, hw), at(rear, hw)]
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Area of the intersection of two counter-clockwise convex polygons.
fn overlap_area(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut out: Vec<(f64, f64)> = a.to_vec();
    for k in 0..b.len() {
        let (p, q) = (b[k], b[(k + 1) % b.len()]);
        let input = std::mem::take(&mut out);
        for m in 0..input.len() {
            let (u, v) = (input[m], input[(m + 1) % input.len()]);
            let (du, dv) = (cross(p, q, u), cross(p, q, v));
            if du >= 0.0 {
                out.push(u);
            }
            if (du >= 0.0) != (dv >= 0.0) {
                let s = du / (du - dv);
                out.push((u.0 + s * (v.0 - u.0), u.1 + s * (v.1 - u.1)));
            }
        }
        if out.is_empty() {
            return 0.0;
        }
    }
    let n = out.len();
    (0..n)
        .map(|k| out[k].0 * out[(k + 1) % n].1 - out[(k + 1) % n].0 * out[k].1)
        .sum::<f64>()
        * 0.5
}

fn disc_depth(poly: &Poly, cx: f64, cy: f64, r: f64) -> f64 {
    let inside = (0..4).all(|k| cross(poly[k], poly[(k + 1) % 4], (cx, cy)) >= 0.0);
    if inside {
        return f64::INFINITY;
    }
    let d = (0..4)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % 4]);
            let (ex, ey) = (b.0 - a.0, b.1 - a.1);
            let t = (((cx - a.0) * ex + (cy - a.1) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
            (a.0 + t * ex - cx).hypot(a.1 + t * ey - cy)
        })
        .fold(f64::INFINITY, f64::min);
    r - d
}

/// Poses at the sub-sample times of one step, rebuilt from its label.
fn rebuild(
    from: &State,
    to: &State,
    label: Primitive,
    arc_len: f64,
    kin: &KinematicParams,
    n_sub: usize,
    tol: f64,
) -> Result<Vec<State>, String> {
    let n = n_sub + 1;
    match label {
        Primitive::Wait => {
            if from.pose_error(to) > tol {
                return Err("WAIT moves the robot".into());
            }
            if arc_len.abs() > tol {
                return Err(format!("WAIT with arc length {arc_len}"));
            }
            Ok(vec![*from; n + 1])
        }
        Primitive::GM => {
            let path = rs_shortest(from, to, kin.r_m);
            let len = path.length();
            if len > kin.u_m * kin.dt + 1e-9 {
                return Err(format!("greedy motion of length {len} exceeds one step"));
            }
            if (len - arc_len).abs() > 1e-6 {
                return Err(format!("recorded arc length {arc_len} but path is {len}"));
            }
            let m = 64;
            let mut prev = *from;
            for k in 1..=m {
                let s = len * k as f64 / m as f64;
                let cur = rs_sample(&path, s).map_err(|e| e.to_string())?;
                if len > 0.0 {
                    let turn = wrap_angle(cur.theta - prev.theta).abs();
                    if turn / (len / m as f64) > 1.0 / kin.r_m + 1e-6 {
                        return Err("curvature above the steering limit".into());
                    }
                }
                prev = cur;
            }
            (0..=n)
                .map(|k| rs_sample(&path, len * k as f64 / n as f64).map_err(|e| e.to_string()))
                .collect()
        }
        p => {
            let end = apply_primitive(from, p, kin);
            let err = end.pose_error(to);
            if err > tol {
                return Err(format!("{p} endpoint off by {err:.3e}"));
            }
            if (arc_len - kin.u_m * kin.dt).abs() > 1e-6 {
                return Err(format!("recorded arc length {arc_len} for {p}"));
            }
            Ok((0..=n)
                .map(|k| {
                    let part = KinematicParams {
                        dt: kin.dt * k as f64 / n as f64,
                        ..*kin
                    };
                    apply_primitive(from, p, &part)
                })
                .collect())
        }
    }
}

/// Checks endpoints, step reproducibility, map bounds, obstacles and
/// robot pairs at every sub-sample. Shorter trajectories are held at their
/// final pose.
pub fn validate(inst: &Instance, trajectories: &[Trajectory], opts: &ValidateOptions) -> ValidationReport {
    let mut out = Vec::new();
    let shape = inst.model.shape;
    let kin = inst.model.kin;
    let n_sub = inst.model.n_sub;
    let per_step = n_sub + 1;
    let (w, h) = (inst.workspace.width(), inst.workspace.height());

    let mut by_robot: Vec<Option<&Trajectory>> = vec![None; inst.starts.len()];
    for tr in trajectories {
        if let Some(slot) = by_robot.get_mut(tr.robot) {
            *slot = Some(tr);
        }
    }

    // Poses at times k / per_step for every robot.
    let mut poses: Vec<Vec<State>> = Vec::with_capacity(inst.starts.len());
    for (robot, tr) in by_robot.iter().enumerate() {
        let Some(tr) = tr else {
            out.push(Violation::MissingRobot { robot });
            poses.push(vec![inst.starts[robot]]);
            continue;
        };
        if tr.start.pose_error(&inst.starts[robot]) > opts.endpoint_tol {
            out.push(Violation::StartMismatch { robot });
        }
        if opts.check_goals {
            let goal = inst.goals[robot].last().copied().unwrap_or(inst.starts[robot]);
            if tr.end().pose_error(&goal) > opts.endpoint_tol {
                out.push(Violation::GoalMismatch { robot });
            }
        }
        let mut seq = vec![tr.start];
        let mut prev = tr.start;
        for (t, step) in tr.steps.iter().enumerate() {
            if step.from.pose_error(&prev) > opts.kinematic_tol {
                out.push(Violation::Discontinuity { robot, t });
            }
            match rebuild(&step.from, &step.to, step.primitive, step.arc_len, &kin, n_sub, opts.kinematic_tol) {
                Ok(samples) => seq.extend_from_slice(&samples[1..]),
                Err(detail) => {
                    out.push(Violation::Kinematics { robot, t, detail });
                    seq.extend(std::iter::repeat_n(step.to, per_step));
                }
            }
            prev = step.to;
        }
        poses.push(seq);
    }

    let horizon = poses.iter().map(|p| p.len()).max().unwrap_or(0);
    let nearest_t = |k: usize| (k + per_step / 2) / per_step;
    let bodies: Vec<Vec<Poly>> = poses
        .iter()
        .map(|seq| seq.iter().map(|s| body(s, shape.length, shape.width, shape.wheelbase)).collect())
        .collect();
    let at = |r: usize, k: usize| &bodies[r][k.min(bodies[r].len() - 1)];

    for (robot, seq) in bodies.iter().enumerate() {
        let mut last_oob = None;
        let mut last_hit = None;
        for (k, poly) in seq.iter().enumerate() {
            let t = nearest_t(k);
            let outside = poly
                .iter()
                .any(|&(x, y)| x < -1e-9 || y < -1e-9 || x > w + 1e-9 || y > h + 1e-9);
            if outside && last_oob != Some(t) {
                out.push(Violation::OutOfBounds { robot, t });
                last_oob = Some(t);
            }
            for (oi, o) in inst.workspace.obstacles().iter().enumerate() {
                if disc_depth(poly, o.x, o.y, o.r) > 1e-9 && last_hit != Some((t, oi)) {
                    out.push(Violation::Obstacle { robot, t, obstacle: oi });
                    last_hit = Some((t, oi));
                }
            }
        }
    }

    let reach = 2.0 * 0.5 * shape.length.hypot(shape.width) + 1e-6;
    let n = bodies.len();
    for i in 0..n {
        for j in i + 1..n {
            let mut last = None;
            for k in 0..horizon {
                let (a, b) = (at(i, k), at(j, k));
                let ca = ((a[0].0 + a[2].0) * 0.5, (a[0].1 + a[2].1) * 0.5);
                let cb = ((b[0].0 + b[2].0) * 0.5, (b[0].1 + b[2].1) * 0.5);
                if (ca.0 - cb.0).hypot(ca.1 - cb.1) > reach {
                    continue;
                }
                let t = nearest_t(k);
                if last != Some(t) && overlap_area(a, b) > opts.area_tol {
                    out.push(Violation::RobotCollision { i, j, t });
                    last = Some(t);
                }
            }
        }
    }
    ValidationReport { violations: out }
}
