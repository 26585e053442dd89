//! Distance-to-goal estimates, per-robot visit counts and the action scores
//! that rank PBCR candidates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{discretize, DiscreteState, DiscretizationParams, State, Workspace};
use crate::reeds_shepp::rs_length;

/// Obstacle-aware distance from every grid cell center to the goal point.
///
/// Distances are any-angle: a cell inherits its predecessor's parent
/// whenever the straight segment to that parent is clear of obstacles, so
/// open-space values equal the Euclidean distance instead of the longer
/// 8-connected grid metric.
#[derive(Debug, Clone)]
pub struct HolonomicField {
    goal: State,
    cell: f64,
    nx: usize,
    ny: usize,
    costs: Vec<f64>,
    ws: Workspace,
}

#[derive(PartialEq)]
struct Entry {
    g: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.g.total_cmp(&self.g).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn build_holonomic_field(g: &State, ws: &Workspace, cell: f64) -> Result<HolonomicField> {
    if !(cell > 0.0) {
        return Err(Error::InvalidInput(format!("cell size must be positive, got {cell}")));
    }
    if !(0.0..=ws.width()).contains(&g.x) || !(0.0..=ws.height()).contains(&g.y) {
        return Err(Error::InvalidInput(format!("goal {g:?} lies outside the map")));
    }
    if ws.point_in_obstacle(g.x, g.y) {
        return Err(Error::InCollision {
            what: format!("goal position ({:.3}, {:.3})", g.x, g.y),
        });
    }
    let nx = ((ws.width() / cell).ceil() as usize).max(1);
    let ny = ((ws.height() / cell).ceil() as usize).max(1);
    let center = |i: usize| (((i % nx) as f64 + 0.5) * cell, ((i / nx) as f64 + 0.5) * cell);
    let blocked: Vec<bool> = (0..nx * ny)
        .map(|i| {
            let (x, y) = center(i);
            ws.point_in_obstacle(x, y)
        })
        .collect();

    let mut costs = vec![f64::INFINITY; nx * ny];
    let mut parent: Vec<((f64, f64), f64)> = vec![((0.0, 0.0), 0.0); nx * ny];
    let mut closed = vec![false; nx * ny];
    let mut heap = BinaryHeap::new();
    let gp = (g.x, g.y);

    let (gx, gy) = cell_of(g.x, g.y, cell, nx, ny);
    for (ix, iy) in neighborhood(gx, gy, nx, ny) {
        let i = iy * nx + ix;
        let c = center(i);
        if blocked[i] || ws.segment_hits_obstacle(gp, c) {
            continue;
        }
        let d = dist(gp, c);
        if d < costs[i] {
            costs[i] = d;
            parent[i] = (gp, 0.0);
            heap.push(Entry { g: d, idx: i });
        }
    }

    while let Some(Entry { g: gs, idx: s }) = heap.pop() {
        if closed[s] || gs > costs[s] {
            continue;
        }
        closed[s] = true;
        let cs = center(s);
        let (ppt, pg) = parent[s];
        for (ix, iy) in neighborhood(s % nx, s / nx, nx, ny) {
            let n = iy * nx + ix;
            if n == s || blocked[n] || closed[n] {
                continue;
            }
            let cn = center(n);
            let (cand, par) = if !ws.segment_hits_obstacle(ppt, cn) {
                (pg + dist(ppt, cn), (ppt, pg))
            } else if !ws.segment_hits_obstacle(cs, cn) {
                (gs + dist(cs, cn), (cs, gs))
            } else {
                continue;
            };
            if cand < costs[n] {
                costs[n] = cand;
                parent[n] = par;
                heap.push(Entry { g: cand, idx: n });
            }
        }
    }

    Ok(HolonomicField {
        goal: *g,
        cell,
        nx,
        ny,
        costs,
        ws: ws.clone(),
    })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn cell_of(x: f64, y: f64, cell: f64, nx: usize, ny: usize) -> (usize, usize) {
    let ix = ((x / cell).floor().max(0.0) as usize).min(nx - 1);
    let iy = ((y / cell).floor().max(0.0) as usize).min(ny - 1);
    (ix, iy)
}

fn neighborhood(ix: usize, iy: usize, nx: usize, ny: usize) -> impl Iterator<Item = (usize, usize)> {
    let xs = ix.saturating_sub(1)..=(ix + 1).min(nx - 1);
    xs.flat_map(move |x| (iy.saturating_sub(1)..=(iy + 1).min(ny - 1)).map(move |y| (x, y)))
}

impl HolonomicField {
    pub fn goal(&self) -> &State {
        &self.goal
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Stored distance of a cell center, `inf` if unreachable.
    pub fn cell_cost(&self, ix: usize, iy: usize) -> f64 {
        self.costs[iy * self.nx + ix]
    }

    /// Lower bound on the obstacle-avoiding distance from `(x, y)` to the
    /// goal, read from the visible centers of the surrounding cells.
    pub fn holonomic(&self, x: f64, y: f64) -> f64 {
        let (ix, iy) = cell_of(x, y, self.cell, self.nx, self.ny);
        let mut best = f64::NEG_INFINITY;
        for (cx, cy) in neighborhood(ix, iy, self.nx, self.ny) {
            let g = self.costs[cy * self.nx + cx];
            if !g.is_finite() {
                continue;
            }
            let c = ((cx as f64 + 0.5) * self.cell, (cy as f64 + 0.5) * self.cell);
            let bound = g - dist((x, y), c);
            if bound > best && !self.ws.segment_hits_obstacle((x, y), c) {
                best = bound;
            }
        }
        if best == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            best.max(0.0)
        }
    }
}

/// Maximum of the holonomic, Reeds-Shepp and Euclidean distances to the
/// field's goal.
pub fn dist_h(v: &State, field: &HolonomicField, r: f64) -> f64 {
    let holo = field.holonomic(v.x, v.y);
    if !holo.is_finite() {
        return f64::INFINITY;
    }
    let g = &field.goal;
    holo.max(rs_length(v, g, r)).max(v.distance(g))
}

/// Per-robot visit counts over discretized states.
#[derive(Debug, Clone, Default)]
pub struct CountTable {
    counts: HashMap<DiscreteState, u32>,
}

impl CountTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn visit(&mut self, v: &State, d: &DiscretizationParams) {
        *self.counts.entry(discretize(v, d)).or_insert(0) += 1;
    }

    pub fn count(&self, v: &State, d: &DiscretizationParams) -> u32 {
        self.counts.get(&discretize(v, d)).copied().unwrap_or(0)
    }

    pub fn clear(&mut self) {
        self.counts.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn count_visit(t: &mut CountTable, v: &State, d: &DiscretizationParams) {
    t.visit(v, d);
}

/// How the greedy bonus and the visit penalty are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `lambda` times the candidate's step cost.
    LambdaCost,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QWeights {
    pub lambda: f64,
    pub alpha: WeightRule,
    pub beta: WeightRule,
}

impl Default for QWeights {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            alpha: WeightRule::LambdaCost,
            beta: WeightRule::LambdaCost,
        }
    }
}

impl QWeights {
    fn eval(&self, rule: WeightRule, step_cost: f64) -> f64 {
        match rule {
            WeightRule::LambdaCost => self.lambda * step_cost,
            WeightRule::Constant(c) => c,
        }
    }
}

/// Score of moving into `v`: closer, cheaper, greedy and rarely visited
/// successors score higher.
pub fn q_value(step_cost: f64, is_greedy: bool, is_goal: bool, dist: f64, visits: u32, w: &QWeights) -> f64 {
    let alpha = w.eval(w.alpha, step_cost);
    let beta = if is_goal { 0.0 } else { w.eval(w.beta, step_cost) };
    let greedy = if is_greedy { alpha } else { 0.0 };
    -dist - w.lambda * step_cost + greedy - beta * visits as f64
}
