//! The discrete action set: six constant-control arcs and straights, WAIT,
//! and the greedy motion (GM) that follows a shortest path toward the goal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RobotShape, State, Workspace};
use crate::reeds_shepp::{integrate_arc, rs_shortest, Direction, RSPath, SegmentKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicParams {
    /// Maximum linear speed.
    pub u_m: f64,
    /// Maximum steering angle in radians.
    pub phi_m: f64,
    /// Turning radius used by the arc primitives.
    pub r_m: f64,
    /// Duration of one step.
    pub dt: f64,
}

impl KinematicParams {
    pub fn new(u_m: f64, phi_m: f64, r_m: f64, dt: f64) -> Result<Self> {
        let k = Self { u_m, phi_m, r_m, dt };
        k.validate()?;
        Ok(k)
    }

    /// Parameters with `dt = r_m * dtheta / u_m`, so that one arc step turns
    /// by exactly `dtheta`.
    pub fn with_heading_step(u_m: f64, phi_m: f64, r_m: f64, dtheta: f64) -> Result<Self> {
        Self::new(u_m, phi_m, r_m, r_m * dtheta / u_m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.u_m, self.phi_m, self.r_m, self.dt]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(Error::InvalidInput(format!(
                "kinematic parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Distance covered by one moving primitive, `u_m * dt`.
    pub fn step_length(&self) -> f64 {
        self.u_m * self.dt
    }

    /// Heading change of one arc primitive.
    pub fn arc_angle(&self) -> f64 {
        self.step_length() / self.r_m
    }
}

impl Default for KinematicParams {
    fn default() -> Self {
        let dtheta = 40.1_f64.to_radians();
        Self {
            u_m: 2.0,
            phi_m: dtheta,
            r_m: 3.0,
            dt: 3.0 * dtheta / 2.0,
        }
    }
}

/// Multipliers and surcharges applied on top of the travelled distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub c_turn: f64,
    pub c_rev: f64,
    pub c_switch: f64,
    pub c_wait: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c_turn: 1.5,
            c_rev: 2.0,
            c_switch: 1.0,
            c_wait: 1.0,
        }
    }
}

/// Everything needed to expand and check one robot's motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub shape: RobotShape,
    pub kin: KinematicParams,
    pub costs: CostParams,
    /// Interior samples per step used for swept collision checks.
    pub n_sub: usize,
}

pub const DEFAULT_N_SUB: usize = 5;

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            shape: RobotShape::default(),
            kin: KinematicParams::default(),
            costs: CostParams::default(),
            n_sub: DEFAULT_N_SUB,
        }
    }
}

impl MotionModel {
    pub fn step_length(&self) -> f64 {
        self.kin.step_length()
    }
}

/// Primitive tags. The declaration order is the tie-break order used when
/// ranking candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Primitive {
    FL,
    FS,
    FR,
    BL,
    BS,
    BR,
    #[serde(rename = "WAIT")]
    Wait,
    GM,
}

impl Primitive {
    /// The seven primitives available to every planner.
    pub const UNIVERSAL: [Primitive; 7] = [
        Primitive::FL,
        Primitive::FS,
        Primitive::FR,
        Primitive::BL,
        Primitive::BS,
        Primitive::BR,
        Primitive::Wait,
    ];

    /// The six moving primitives.
    pub const MOVES: [Primitive; 6] = [
        Primitive::FL,
        Primitive::FS,
        Primitive::FR,
        Primitive::BL,
        Primitive::BS,
        Primitive::BR,
    ];

    /// Drive direction and turn sign (+1 left, -1 right, 0 straight) of a
    /// constant-control primitive.
    pub fn controls(self) -> Option<(Direction, f64)> {
        use Direction::*;
        match self {
            Primitive::FL => Some((Forward, 1.0)),
            Primitive::FS => Some((Forward, 0.0)),
            Primitive::FR => Some((Forward, -1.0)),
            Primitive::BL => Some((Backward, 1.0)),
            Primitive::BS => Some((Backward, 0.0)),
            Primitive::BR => Some((Backward, -1.0)),
            Primitive::Wait | Primitive::GM => None,
        }
    }

    pub fn is_turn(self) -> bool {
        matches!(self, Primitive::FL | Primitive::FR | Primitive::BL | Primitive::BR)
    }

    pub fn is_backward(self) -> bool {
        matches!(self, Primitive::BL | Primitive::BS | Primitive::BR)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Primitive::FL => "FL",
            Primitive::FS => "FS",
            Primitive::FR => "FR",
            Primitive::BL => "BL",
            Primitive::BS => "BS",
            Primitive::BR => "BR",
            Primitive::Wait => "WAIT",
            Primitive::GM => "GM",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "FL" => Primitive::FL,
            "FS" => Primitive::FS,
            "FR" => Primitive::FR,
            "BL" => Primitive::BL,
            "BS" => Primitive::BS,
            "BR" => Primitive::BR,
            "WAIT" => Primitive::Wait,
            "GM" => Primitive::GM,
            other => return Err(Error::Parse(format!("unknown primitive `{other}`"))),
        })
    }
}

/// One timestep of motion for one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub primitive: Primitive,
    pub from: State,
    pub to: State,
    /// Poses at evenly spaced times through the step, both ends included.
    pub samples: Vec<State>,
    pub arc_len: f64,
}

impl Step {
    pub fn wait(at: State, n_sub: usize) -> Step {
        Step {
            primitive: Primitive::Wait,
            from: at,
            to: at,
            samples: vec![at; n_sub + 2],
            arc_len: 0.0,
        }
    }

    /// Step of a constant-control primitive; GM is rejected.
    pub fn primitive(from: State, p: Primitive, k: &KinematicParams, n_sub: usize) -> Step {
        let Some((dir, turn)) = p.controls() else {
            if p == Primitive::Wait {
                return Step::wait(from, n_sub);
            }
            panic!("GM steps are built from a path, not from controls");
        };
        let len = k.step_length();
        let s = dir.sign() * len;
        let kappa = turn / k.r_m;
        let mut samples = Vec::with_capacity(n_sub + 2);
        samples.push(from);
        for j in 1..=n_sub {
            samples.push(integrate_arc(&from, s * j as f64 / (n_sub + 1) as f64, kappa));
        }
        let to = integrate_arc(&from, s, kappa);
        samples.push(to);
        Step {
            primitive: p,
            from,
            to,
            samples,
            arc_len: len,
        }
    }

    /// Greedy step along the shortest path from `from` to `to`. Returns
    /// nothing if that path is longer than one step.
    pub fn greedy(from: State, to: State, k: &KinematicParams, n_sub: usize) -> Option<Step> {
        let path = rs_shortest(&from, &to, k.r_m);
        let len = path.length();
        if len > k.step_length() + 1e-9 {
            return None;
        }
        Some(Step {
            primitive: Primitive::GM,
            from,
            to,
            samples: path.sample_uniform(n_sub),
            arc_len: len,
        })
    }

    /// Drive directions of the first and last moving piece.
    pub fn directions(&self, radius: f64) -> Option<(Direction, Direction)> {
        match self.primitive.controls() {
            Some((d, _)) => Some((d, d)),
            None if self.primitive == Primitive::GM && self.arc_len > 0.0 => {
                let p = rs_shortest(&self.from, &self.to, radius);
                let first = p.segments.first()?.direction;
                let last = p.segments.last()?.direction;
                Some((first, last))
            }
            None => None,
        }
    }

    /// True if every sample is inside the map and clear of obstacles.
    pub fn is_free(&self, ws: &Workspace, shape: &RobotShape) -> bool {
        self.samples.iter().all(|s| ws.state_is_free(s, shape))
    }
}

/// Closed-form successor of a constant-control primitive.
///
/// # Panics
/// If `p` is [`Primitive::GM`].
pub fn apply_primitive(s: &State, p: Primitive, k: &KinematicParams) -> State {
    match p.controls() {
        Some((dir, turn)) => integrate_arc(s, dir.sign() * k.step_length(), turn / k.r_m),
        None if p == Primitive::Wait => *s,
        None => panic!("apply_primitive is undefined for GM"),
    }
}

/// The primitive's step if every sampled footprint is free. GM yields
/// nothing here; see [`Step::greedy`].
pub fn valid_succ_state(s: &State, p: Primitive, ws: &Workspace, model: &MotionModel) -> Option<Step> {
    if p == Primitive::GM {
        return None;
    }
    let step = Step::primitive(*s, p, &model.kin, model.n_sub);
    step.is_free(ws, &model.shape).then_some(step)
}

/// Penalized cost of a constant-control primitive or WAIT. `prev` is the
/// drive direction of the robot's last moving step.
pub fn primitive_cost(prev: Option<Direction>, p: Primitive, arc_len: f64, m: &MotionModel) -> f64 {
    let c = &m.costs;
    let unit = m.step_length();
    let Some((dir, _)) = p.controls() else {
        return match p {
            Primitive::Wait => c.c_wait * unit,
            _ => arc_len,
        };
    };
    let mut cost = arc_len;
    if p.is_turn() {
        cost *= c.c_turn;
    }
    if dir == Direction::Backward {
        cost *= c.c_rev;
    }
    if prev.is_some_and(|d| d != dir) {
        cost += c.c_switch * unit;
    }
    cost
}

/// Penalized cost of any step, including GM whose pieces are charged
/// segment by segment.
pub fn step_cost(prev: Option<Direction>, step: &Step, m: &MotionModel) -> f64 {
    if step.primitive != Primitive::GM {
        return primitive_cost(prev, step.primitive, step.arc_len, m);
    }
    if step.arc_len == 0.0 {
        return 0.0;
    }
    path_cost(prev, &rs_shortest(&step.from, &step.to, m.kin.r_m), m)
}

fn path_cost(prev: Option<Direction>, path: &RSPath, m: &MotionModel) -> f64 {
    let c = &m.costs;
    let mut last = prev;
    let mut cost = 0.0;
    for seg in &path.segments {
        let mut piece = seg.length(path.turn_radius);
        if seg.kind != SegmentKind::Straight {
            piece *= c.c_turn;
        }
        if seg.direction == Direction::Backward {
            piece *= c.c_rev;
        }
        if last.is_some_and(|d| d != seg.direction) {
            piece += c.c_switch * m.step_length();
        }
        last = Some(seg.direction);
        cost += piece;
    }
    cost
}
