//! SE(2) poses, robot footprints and the collision primitives shared by every
//! planner.
//!
//! A pose `(x, y, theta)` refers to the midpoint of the rear axle. The robot
//! body is a `length x width` rectangle whose center sits `wheelbase / 2`
//! ahead of that point. All collision tests treat shapes as closed sets, so
//! touching counts as a collision.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut r = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to TAU itself.
    if r >= PI {
        r -= TAU;
    }
    r
}

/// Pose of one robot in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl State {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Largest of the positional distance and the wrapped heading difference.
    pub fn pose_error(&self, other: &State) -> f64 {
        let dth = wrap_angle(self.theta - other.theta).abs();
        self.distance(other).max(dth)
    }

    pub fn approx_eq(&self, other: &State, tol: f64) -> bool {
        self.pose_error(other) <= tol
    }

    /// Rigid motion: rotate about the origin by `angle` then translate.
    pub fn transformed(&self, dx: f64, dy: f64, angle: f64) -> State {
        let (s, c) = angle.sin_cos();
        State::new(
            c * self.x - s * self.y + dx,
            s * self.x + c * self.y + dy,
            self.theta + angle,
        )
    }
}

/// Rectangle geometry of a car-like robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotShape {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
}

impl RobotShape {
    pub fn new(length: f64, width: f64, wheelbase: f64) -> Result<Self> {
        let shape = Self {
            length,
            width,
            wheelbase,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wheelbase > 0.0 && self.wheelbase < self.length && self.width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "robot shape needs 0 < wheelbase < length and width > 0, got {:?}",
                self
            )));
        }
        Ok(())
    }

    /// Radius of the circle around the footprint center enclosing the body.
    pub fn circumradius(&self) -> f64 {
        (0.5 * self.length).hypot(0.5 * self.width)
    }
}

impl Default for RobotShape {
    fn default() -> Self {
        Self {
            length: 3.0,
            width: 2.0,
            wheelbase: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: (f64, f64),
    pub half_length: f64,
    pub half_width: f64,
    pub heading: f64,
}

impl OrientedBox {
    pub fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (cx, cy) = self.center;
        let (a, b) = (self.half_length, self.half_width);
        [
            (cx + a * ux + b * vx, cy + a * uy + b * vy),
            (cx - a * ux + b * vx, cy - a * uy + b * vy),
            (cx - a * ux - b * vx, cy - a * uy - b * vy),
            (cx + a * ux - b * vx, cy + a * uy - b * vy),
        ]
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    /// Axis-aligned bounds as `(min_x, min_y, max_x, max_y)`.
    pub fn aabb(&self) -> (f64, f64, f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let ex = self.half_length * c.abs() + self.half_width * s.abs();
        let ey = self.half_length * s.abs() + self.half_width * c.abs();
        let (cx, cy) = self.center;
        (cx - ex, cy - ey, cx + ex, cy + ey)
    }

    /// Half-extent of the box projected on a unit axis.
    fn projected_radius(&self, axis: (f64, f64)) -> f64 {
        let [u, v] = self.axes();
        self.half_length * (u.0 * axis.0 + u.1 * axis.1).abs()
            + self.half_width * (v.0 * axis.0 + v.1 * axis.1).abs()
    }

    /// Point expressed in the box frame.
    pub fn to_local(&self, p: (f64, f64)) -> (f64, f64) {
        let [(ux, uy), (vx, vy)] = self.axes();
        let dx = p.0 - self.center.0;
        let dy = p.1 - self.center.1;
        (dx * ux + dy * uy, dx * vx + dy * vy)
    }
}

/// Disc-shaped static obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleObstacle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl CircleObstacle {
    pub fn new(x: f64, y: f64, r: f64) -> Self {
        Self { x, y, r }
    }
}

/// Box occupied by the robot body at pose `s`.
pub fn footprint(s: &State, shape: &RobotShape) -> OrientedBox {
    let (sin, cos) = s.theta.sin_cos();
    let off = 0.5 * shape.wheelbase;
    OrientedBox {
        center: (s.x + off * cos, s.y + off * sin),
        half_length: 0.5 * shape.length,
        half_width: 0.5 * shape.width,
        heading: s.theta,
    }
}

/// Separating-axis test on the two boxes' four edge normals.
pub fn boxes_intersect(a: &OrientedBox, b: &OrientedBox) -> bool {
    let dx = b.center.0 - a.center.0;
    let dy = b.center.1 - a.center.1;
    let reach = a.bounding_radius() + b.bounding_radius();
    if dx * dx + dy * dy > reach * reach {
        return false;
    }
    for axis in a.axes().into_iter().chain(b.axes()) {
        let dist = (dx * axis.0 + dy * axis.1).abs();
        if dist > a.projected_radius(axis) + b.projected_radius(axis) {
            return false;
        }
    }
    true
}

pub fn box_circle_intersect(a: &OrientedBox, c: &CircleObstacle) -> bool {
    let (lx, ly) = a.to_local((c.x, c.y));
    let qx = lx.clamp(-a.half_length, a.half_length);
    let qy = ly.clamp(-a.half_width, a.half_width);
    let (ex, ey) = (lx - qx, ly - qy);
    ex * ex + ey * ey <= c.r * c.r
}

/// Rectangular map with disc obstacles and a bucket index for broad-phase
/// queries.
#[derive(Debug, Clone)]
pub struct Workspace {
    width: f64,
    height: f64,
    obstacles: Vec<CircleObstacle>,
    index: ObstacleIndex,
}

#[derive(Debug, Clone)]
struct ObstacleIndex {
    bucket: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl ObstacleIndex {
    const BUCKET: f64 = 4.0;

    fn build(width: f64, height: f64, obstacles: &[CircleObstacle]) -> Self {
        let bucket = Self::BUCKET;
        let nx = ((width / bucket).ceil() as usize).max(1);
        let ny = ((height / bucket).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (k, o) in obstacles.iter().enumerate() {
            let (x0, x1) = Self::span(o.x - o.r, o.x + o.r, bucket, nx);
            let (y0, y1) = Self::span(o.y - o.r, o.y + o.r, bucket, ny);
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    cells[iy * nx + ix].push(k as u32);
                }
            }
        }
        Self {
            bucket,
            nx,
            ny,
            cells,
        }
    }

    fn span(lo: f64, hi: f64, bucket: f64, n: usize) -> (usize, usize) {
        let clamp = |v: f64| ((v / bucket).floor().max(0.0) as usize).min(n - 1);
        (clamp(lo), clamp(hi))
    }
}

impl Workspace {
    pub fn new(width: f64, height: f64, obstacles: Vec<CircleObstacle>) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "workspace dimensions must be positive, got {width} x {height}"
            )));
        }
        for o in &obstacles {
            if !(o.r > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "obstacle radius must be positive: {o:?}"
                )));
            }
            if !(0.0..=width).contains(&o.x) || !(0.0..=height).contains(&o.y) {
                return Err(Error::InvalidInput(format!(
                    "obstacle center outside the map: {o:?}"
                )));
            }
        }
        let index = ObstacleIndex::build(width, height, &obstacles);
        Ok(Self {
            width,
            height,
            obstacles,
            index,
        })
    }

    pub fn empty(width: f64, height: f64) -> Result<Self> {
        Self::new(width, height, Vec::new())
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn obstacles(&self) -> &[CircleObstacle] {
        &self.obstacles
    }

    /// Calls `f` with every obstacle whose bucket overlaps the given bounds.
    /// An obstacle may be visited more than once.
    fn for_each_near(&self, bounds: (f64, f64, f64, f64), mut f: impl FnMut(&CircleObstacle) -> bool) -> bool {
        let idx = &self.index;
        let (x0, x1) = ObstacleIndex::span(bounds.0, bounds.2, idx.bucket, idx.nx);
        let (y0, y1) = ObstacleIndex::span(bounds.1, bounds.3, idx.bucket, idx.ny);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                for &k in &idx.cells[iy * idx.nx + ix] {
                    if f(&self.obstacles[k as usize]) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// True if the box touches any obstacle.
    pub fn box_hits_obstacle(&self, b: &OrientedBox) -> bool {
        if self.obstacles.is_empty() {
            return false;
        }
        self.for_each_near(b.aabb(), |o| box_circle_intersect(b, o))
    }

    /// True if the point lies in some obstacle disc.
    pub fn point_in_obstacle(&self, x: f64, y: f64) -> bool {
        if self.obstacles.is_empty() {
            return false;
        }
        self.for_each_near((x, y, x, y), |o| (x - o.x).hypot(y - o.y) <= o.r)
    }

    /// True if the segment from `a` to `b` passes strictly inside a disc.
    pub fn segment_hits_obstacle(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let hits = |o: &CircleObstacle| point_segment_distance((o.x, o.y), a, b) < o.r;
        let bounds = (a.0.min(b.0), a.1.min(b.1), a.0.max(b.0), a.1.max(b.1));
        let idx = &self.index;
        let buckets = ((bounds.2 - bounds.0) / idx.bucket + 2.0) * ((bounds.3 - bounds.1) / idx.bucket + 2.0);
        if buckets > self.obstacles.len() as f64 {
            self.obstacles.iter().any(hits)
        } else {
            self.for_each_near(bounds, hits)
        }
    }

    /// True if the box is inside the map and clear of every obstacle.
    pub fn box_is_free(&self, b: &OrientedBox) -> bool {
        in_workspace(b, self) && !self.box_hits_obstacle(b)
    }

    pub fn state_is_free(&self, s: &State, shape: &RobotShape) -> bool {
        self.box_is_free(&footprint(s, shape))
    }
}

pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a.0 + t * dx - p.0).hypot(a.1 + t * dy - p.1)
}

/// True iff all four corners of the box lie in `[0, W] x [0, H]`.
pub fn in_workspace(a: &OrientedBox, ws: &Workspace) -> bool {
    a.corners()
        .iter()
        .all(|&(x, y)| (0.0..=ws.width).contains(&x) && (0.0..=ws.height).contains(&y))
}

/// Resolution of the discretized state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationParams {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl DiscretizationParams {
    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0 && dtheta > 0.0) {
            return Err(Error::InvalidInput(
                "discretization steps must be strictly positive".into(),
            ));
        }
        Ok(Self { dx, dy, dtheta })
    }
}

impl Default for DiscretizationParams {
    fn default() -> Self {
        Self {
            dx: 2.0,
            dy: 2.0,
            dtheta: 40.1_f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteState {
    pub ix: i64,
    pub iy: i64,
    pub itheta: i64,
}

pub fn discretize(s: &State, d: &DiscretizationParams) -> DiscreteState {
    DiscreteState {
        ix: (s.x / d.dx).floor() as i64,
        iy: (s.y / d.dy).floor() as i64,
        itheta: (wrap_angle(s.theta) / d.dtheta).floor() as i64,
    }
}
