//! Single-robot kinematic search over continuous poses with discretized
//! duplicate detection.
//!
//! One engine covers the three uses: the plain search without time (used by
//! the greedy motion fallback), the time-indexed search against constraints
//! and other robots' paths, and its focal variant which prefers nodes that
//! conflict less with those paths while staying within a factor `w` of the
//! best lower bound.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::Instant;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boxes_intersect, footprint, wrap_angle, OrientedBox, RobotShape, State, Workspace};
use crate::heuristics::{build_holonomic_field, dist_h, HolonomicField};
use crate::primitives::{MotionModel, Primitive, Step};
use crate::reeds_shepp::rs_shortest;

type F = OrderedFloat<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Position bin size for duplicate detection.
    pub bin_xy: f64,
    /// Heading bin size (radians) for duplicate detection.
    pub bin_theta: f64,
    /// Maximum expansions per call.
    pub node_budget: usize,
    /// Analytic completion is tried whenever the heuristic is below this
    /// multiple of the turning radius.
    pub shot_distance: f64,
    /// Otherwise it is tried on every n-th expansion.
    pub shot_every: usize,
    /// Cell size of the holonomic distance grid.
    pub holo_cell: f64,
    /// Cost of one WAIT as a multiple of the step length. Zero makes plan
    /// costs equal to travelled distance.
    pub wait_cost: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            bin_xy: 1.0,
            bin_theta: 40.1_f64.to_radians() / 2.0,
            node_budget: 200_000,
            shot_distance: 3.0,
            shot_every: 10,
            holo_cell: 1.0,
            wait_cost: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    /// Suboptimality factor, at least one.
    pub w: f64,
    /// Conflicts and constraints are only considered for this many steps.
    pub window: Option<usize>,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self { w: 1.0, window: None }
    }
}

impl FocalParams {
    pub fn new(w: f64, window: Option<usize>) -> Result<Self> {
        if !(w >= 1.0) || window == Some(0) {
            return Err(Error::InvalidInput(format!(
                "focal search needs w >= 1 and a window of at least one step, got w = {w}, window = {window:?}"
            )));
        }
        Ok(Self { w, window })
    }
}

/// Wall-clock limit shared by nested searches.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    at: Instant,
    limit: f64,
}

impl Deadline {
    pub fn after(seconds: f64) -> Self {
        Self {
            at: Instant::now() + std::time::Duration::from_secs_f64(seconds.max(0.0)),
            limit: seconds,
        }
    }

    pub fn expired(&self) -> bool {
        Instant::now() >= self.at
    }

    pub fn check(&self) -> Result<()> {
        if self.expired() {
            Err(Error::Timeout(self.limit))
        } else {
            Ok(())
        }
    }
}

/// Footprints swept during one step together with a bounding circle.
#[derive(Debug, Clone, PartialEq)]
pub struct SweptStep {
    pub boxes: Vec<OrientedBox>,
    center: (f64, f64),
    radius: f64,
}

impl SweptStep {
    pub fn new(samples: &[State], shape: &RobotShape) -> Self {
        let boxes: Vec<OrientedBox> = samples.iter().map(|s| footprint(s, shape)).collect();
        let n = boxes.len() as f64;
        let cx = boxes.iter().map(|b| b.center.0).sum::<f64>() / n;
        let cy = boxes.iter().map(|b| b.center.1).sum::<f64>() / n;
        let radius = boxes
            .iter()
            .map(|b| (b.center.0 - cx).hypot(b.center.1 - cy) + b.bounding_radius())
            .fold(0.0, f64::max);
        Self {
            boxes,
            center: (cx, cy),
            radius,
        }
    }

    pub fn of_step(step: &Step, shape: &RobotShape) -> Self {
        Self::new(&step.samples, shape)
    }

    pub fn holding(s: &State, shape: &RobotShape, n_samples: usize) -> Self {
        Self::new(&vec![*s; n_samples], shape)
    }

    /// True if the two sweeps overlap at some common sample time.
    pub fn collides(&self, other: &SweptStep) -> bool {
        let reach = self.radius + other.radius;
        let dx = self.center.0 - other.center.0;
        let dy = self.center.1 - other.center.1;
        if dx * dx + dy * dy > reach * reach {
            return false;
        }
        self.boxes
            .iter()
            .zip(&other.boxes)
            .any(|(a, b)| boxes_intersect(a, b))
    }

    /// Index of the first colliding sample.
    pub fn first_collision(&self, other: &SweptStep) -> Option<usize> {
        if !self.collides(other) {
            return None;
        }
        self.boxes
            .iter()
            .zip(&other.boxes)
            .position(|(a, b)| boxes_intersect(a, b))
    }
}

/// Another robot's motion, indexed by global time and held at its final
/// pose afterwards.
#[derive(Debug, Clone)]
pub struct TimedFootprints {
    start_time: usize,
    steps: Vec<SweptStep>,
    hold: SweptStep,
}

impl TimedFootprints {
    pub fn new(start_time: usize, start: &State, steps: &[Step], shape: &RobotShape, n_samples: usize) -> Self {
        let last = steps.last().map(|s| s.to).unwrap_or(*start);
        Self {
            start_time,
            steps: steps.iter().map(|s| SweptStep::of_step(s, shape)).collect(),
            hold: SweptStep::holding(&last, shape, n_samples),
        }
    }

    pub fn at(&self, t: usize) -> &SweptStep {
        t.checked_sub(self.start_time)
            .and_then(|k| self.steps.get(k))
            .unwrap_or(&self.hold)
    }

    pub fn end_time(&self) -> usize {
        self.start_time + self.steps.len()
    }
}

/// Time-indexed obstacles for one robot's search: other robots' paths that
/// must be avoided, forbidden sweeps from the high level, and paths whose
/// conflicts are merely counted.
#[derive(Debug, Clone, Default)]
pub struct DynamicObstacleSet {
    hard: Vec<TimedFootprints>,
    constraints: BTreeMap<usize, Vec<SweptStep>>,
    soft: Vec<TimedFootprints>,
}

impl DynamicObstacleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_path(&mut self, path: TimedFootprints) {
        self.hard.push(path);
    }

    pub fn add_constraint(&mut self, time: usize, forbidden: SweptStep) {
        self.constraints.entry(time).or_default().push(forbidden);
    }

    pub fn add_soft_path(&mut self, path: TimedFootprints) {
        self.soft.push(path);
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.constraints.is_empty() && self.soft.is_empty()
    }

    /// First time after which nothing changes.
    pub fn last_time(&self) -> usize {
        let c = self.constraints.keys().next_back().map_or(0, |t| t + 1);
        let h = self.hard.iter().map(|p| p.end_time()).max().unwrap_or(0);
        let s = self.soft.iter().map(|p| p.end_time()).max().unwrap_or(0);
        c.max(h).max(s)
    }

    fn allowed(&self, t: usize, sweep: &SweptStep, window_end: usize) -> bool {
        if self.hard.iter().any(|p| p.at(t).collides(sweep)) {
            return false;
        }
        if t >= window_end {
            return true;
        }
        self.constraints
            .get(&t)
            .is_none_or(|cs| cs.iter().all(|c| !c.collides(sweep)))
    }

    fn soft_conflicts(&self, t: usize, sweep: &SweptStep, window_end: usize) -> u32 {
        if t >= window_end {
            return 0;
        }
        self.soft.iter().filter(|p| p.at(t).collides(sweep)).count() as u32
    }

    /// Whether a robot parked in `hold` from time `from` onward stays clear.
    fn can_hold(&self, from: usize, hold: &SweptStep, window_end: usize) -> bool {
        let end = self.hard.iter().map(|p| p.end_time()).max().unwrap_or(0);
        if (from..=end.max(from)).any(|t| self.hard.iter().any(|p| p.at(t).collides(hold))) {
            return false;
        }
        self.constraints
            .range(from..window_end.max(from))
            .all(|(_, cs)| cs.iter().all(|c| !c.collides(hold)))
    }

    /// Earliest time from which `hold` stays clear for good.
    fn hold_from(&self, from: usize, hold: &SweptStep, window_end: usize) -> usize {
        let mut t0 = from;
        for p in &self.hard {
            for t in (from..=p.end_time().max(from)).rev() {
                if p.at(t).collides(hold) {
                    t0 = t0.max(t + 1);
                    break;
                }
            }
        }
        for (&t, cs) in self.constraints.range(from..window_end.max(from)).rev() {
            if cs.iter().any(|c| c.collides(hold)) {
                t0 = t0.max(t + 1);
                break;
            }
        }
        t0
    }

    fn hold_conflicts(&self, from: usize, hold: &SweptStep, until: usize) -> u32 {
        (from..until)
            .map(|t| self.soft_conflicts(t, hold, until))
            .sum()
    }
}

/// Result of a successful search.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub start_time: usize,
    pub steps: Vec<Step>,
    /// Sum of travelled distance plus the waiting surcharge.
    pub cost: f64,
    /// Smallest f-value in OPEN when the solution was accepted; the optimal
    /// cost is at least this, and `cost <= w * lower_bound`.
    pub lower_bound: f64,
    /// Soft conflicts counted along the returned path.
    pub conflicts: u32,
}

impl Plan {
    pub fn end_state(&self, start: &State) -> State {
        self.steps.last().map_or(*start, |s| s.to)
    }

    pub fn length(&self) -> f64 {
        self.steps.iter().map(|s| s.arc_len).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub plan: Option<Plan>,
    pub expansions: usize,
}

#[derive(Debug, Clone)]
struct Node {
    state: State,
    t: usize,
    g: f64,
    /// Spatial part of the heuristic.
    h: f64,
    d: u32,
    parent: u32,
    prim: Primitive,
    /// Index into the shot table for goal nodes.
    shot: Option<u32>,
}

const NO_PARENT: u32 = u32::MAX;

/// OPEN ordered by f with a FOCAL subset of nodes within `w` of the best f,
/// ordered by conflicts.
struct FocalQueue {
    w: f64,
    open: BTreeSet<(F, F, u64, u32)>,
    focal: BTreeSet<(u32, F, F, u64, u32)>,
    bound: f64,
    info: HashMap<u32, (F, u32, F, u64)>,
}

impl FocalQueue {
    fn new(w: f64) -> Self {
        Self {
            w,
            open: BTreeSet::new(),
            focal: BTreeSet::new(),
            bound: f64::NEG_INFINITY,
            info: HashMap::new(),
        }
    }

    /// Ties on f go to the deeper node (larger g). f is snapped down to a
    /// 1e-6 grid so that summation noise does not decide them; the snapped
    /// value exceeds f by at most 1e-9, so it remains a lower bound.
    fn push(&mut self, idx: u32, f: f64, g: f64, d: u32, seq: u64) {
        let f = OrderedFloat((f * 1e6 + 1e-3).floor() / 1e6);
        let ng = OrderedFloat(-g);
        self.open.insert((f, ng, seq, idx));
        if f.0 <= self.bound {
            self.focal.insert((d, f, ng, seq, idx));
        }
        self.info.insert(idx, (f, d, ng, seq));
    }

    /// Pops the FOCAL head and returns it with the minimum f of OPEN taken
    /// before removal.
    fn pop(&mut self) -> Option<(u32, f64)> {
        let &(fmin, _, _, _) = self.open.first()?;
        let new_bound = self.w * fmin.0;
        if new_bound > self.bound {
            let top = OrderedFloat(f64::INFINITY);
            let lo = std::ops::Bound::Excluded((OrderedFloat(self.bound), top, u64::MAX, u32::MAX));
            let hi = std::ops::Bound::Included((OrderedFloat(new_bound), top, u64::MAX, u32::MAX));
            for &(f, ng, seq, idx) in self.open.range((lo, hi)) {
                let d = self.info[&idx].1;
                self.focal.insert((d, f, ng, seq, idx));
            }
        } else if new_bound < self.bound {
            self.focal.retain(|&(_, f, _, _, _)| f.0 <= new_bound);
        }
        self.bound = new_bound;
        let (_, f, ng, seq, idx) = self.focal.pop_first()?;
        self.open.remove(&(f, ng, seq, idx));
        self.info.remove(&idx);
        Some((idx, fmin.0))
    }
}

type Key = (i64, i64, i64, usize);

/// Shared inputs of one robot's searches.
pub struct Searcher<'a> {
    pub ws: &'a Workspace,
    pub model: &'a MotionModel,
    pub field: &'a HolonomicField,
    pub cfg: &'a SearchConfig,
}

impl<'a> Searcher<'a> {
    fn key(&self, s: &State, t: usize) -> Key {
        (
            (s.x / self.cfg.bin_xy).floor() as i64,
            (s.y / self.cfg.bin_xy).floor() as i64,
            (wrap_angle(s.theta) / self.cfg.bin_theta).floor() as i64,
            t,
        )
    }

    fn heuristic(&self, s: &State) -> f64 {
        dist_h(s, self.field, self.model.kin.r_m)
    }

    /// Search from `start` at `start_time` to the field's goal. Without
    /// `dynamic` the search ignores time and never waits.
    pub fn search(
        &self,
        start: &State,
        start_time: usize,
        dynamic: Option<&DynamicObstacleSet>,
        fp: FocalParams,
        deadline: Option<&Deadline>,
    ) -> Result<SearchOutcome> {
        let dynamic = dynamic.filter(|d| !d.is_empty());
        let goal = *self.field.goal();
        let shape = &self.model.shape;
        let n_samples = self.model.n_sub + 2;
        if !self.ws.state_is_free(start, shape) {
            return Err(Error::InCollision { what: format!("start {start:?}") });
        }
        if !self.ws.state_is_free(&goal, shape) {
            return Err(Error::InCollision { what: format!("goal {goal:?}") });
        }
        let window_end = fp.window.map_or(usize::MAX, |w| start_time + w);
        let horizon = match (dynamic, fp.window) {
            (None, _) => 0,
            (Some(_), Some(w)) => start_time + w,
            (Some(d), None) => d.last_time().max(start_time) + 1,
        };
        if let Some(d) = dynamic {
            let here = SweptStep::holding(start, shape, n_samples);
            if d.hard.iter().any(|p| p.at(start_time).collides(&here)) {
                return Err(Error::InCollision {
                    what: format!("start {start:?} at t = {start_time} against moving robots"),
                });
            }
        }

        let hold_ok = |s: &State, t: usize| {
            dynamic.is_none_or(|d| d.can_hold(t, &SweptStep::holding(s, shape, n_samples), window_end))
        };
        if start.approx_eq(&goal, 1e-6) && hold_ok(start, start_time) {
            return Ok(SearchOutcome {
                plan: Some(Plan {
                    start_time,
                    steps: Vec::new(),
                    cost: 0.0,
                    lower_bound: 0.0,
                    conflicts: 0,
                }),
                expansions: 0,
            });
        }

        let h0 = self.heuristic(start);
        if !h0.is_finite() {
            return Ok(SearchOutcome { plan: None, expansions: 0 });
        }

        let step_len = self.model.step_length();
        let wait_cost = self.cfg.wait_cost * step_len;
        // The goal cannot be held before `hold_from`, so every remaining
        // step until then costs at least the cheaper of a move and a wait.
        let hold_from = dynamic.map_or(0, |d| {
            d.hold_from(start_time, &SweptStep::holding(&goal, shape, n_samples), window_end)
        });
        let min_step = wait_cost.min(step_len);
        let h_at = |h: f64, t: usize| h.max(hold_from.saturating_sub(t + 1) as f64 * min_step);
        let prims: &[Primitive] = if dynamic.is_some() {
            &Primitive::UNIVERSAL
        } else {
            &Primitive::MOVES
        };
        let tkey = |t: usize| if dynamic.is_some() { t.min(horizon) } else { 0 };

        let mut nodes: Vec<Node> = Vec::new();
        let mut shots: Vec<Vec<Step>> = Vec::new();
        let mut best_g: HashMap<Key, f64> = HashMap::new();
        let mut closed: HashSet<Key> = HashSet::new();
        let mut queue = FocalQueue::new(fp.w);
        let mut seq = 0u64;

        nodes.push(Node {
            state: *start,
            t: start_time,
            g: 0.0,
            h: h0,
            d: 0,
            parent: NO_PARENT,
            prim: Primitive::Wait,
            shot: None,
        });
        best_g.insert(self.key(start, tkey(start_time)), 0.0);
        queue.push(0, h_at(h0, start_time), 0.0, 0, seq);
        seq += 1;

        let mut expansions = 0usize;
        while let Some((idx, fmin)) = queue.pop() {
            let node = nodes[idx as usize].clone();
            if node.shot.is_some() {
                return Ok(SearchOutcome {
                    plan: Some(self.reconstruct(&nodes, &shots, idx, start_time, fmin)),
                    expansions,
                });
            }
            let key = self.key(&node.state, tkey(node.t));
            if !closed.insert(key) {
                continue;
            }
            expansions += 1;
            if expansions > self.cfg.node_budget {
                break;
            }
            if expansions % 256 == 0 {
                if let Some(dl) = deadline {
                    dl.check()?;
                }
            }

            let h = node.h;
            let shoot = h < self.cfg.shot_distance * self.model.kin.r_m
                || (self.cfg.shot_every > 0 && expansions % self.cfg.shot_every == 0);
            if shoot {
                if let Some((pieces, d_shot, len)) = self.try_shot(&node, &goal, dynamic, window_end, horizon) {
                    let g = node.g + len;
                    let d = node.d + d_shot;
                    let gi = nodes.len() as u32;
                    shots.push(pieces);
                    nodes.push(Node {
                        state: goal,
                        t: node.t + shots.last().unwrap().len(),
                        g,
                        h: 0.0,
                        d,
                        parent: idx,
                        prim: Primitive::GM,
                        shot: Some(shots.len() as u32 - 1),
                    });
                    if g <= fp.w * fmin + 1e-9 {
                        return Ok(SearchOutcome {
                            plan: Some(self.reconstruct(&nodes, &shots, gi, start_time, fmin)),
                            expansions,
                        });
                    }
                    queue.push(gi, g, g, d, seq);
                    seq += 1;
                }
            }

            for &p in prims {
                let step = Step::primitive(node.state, p, &self.model.kin, self.model.n_sub);
                if p != Primitive::Wait && !step.is_free(self.ws, shape) {
                    continue;
                }
                let mut d = node.d;
                if let Some(dy) = dynamic {
                    let sweep = SweptStep::of_step(&step, shape);
                    if !dy.allowed(node.t, &sweep, window_end) {
                        continue;
                    }
                    d += dy.soft_conflicts(node.t, &sweep, window_end);
                }
                let t = node.t + 1;
                let ck = self.key(&step.to, tkey(t));
                if closed.contains(&ck) {
                    continue;
                }
                let g = node.g + if p == Primitive::Wait { wait_cost } else { step_len };
                if best_g.get(&ck).is_some_and(|&bg| bg <= g) {
                    continue;
                }
                let h = if p == Primitive::Wait { h } else { self.heuristic(&step.to) };
                if !h.is_finite() {
                    continue;
                }
                best_g.insert(ck, g);
                let ci = nodes.len() as u32;
                let f = g + h_at(h, t);
                nodes.push(Node {
                    state: step.to,
                    t,
                    g,
                    h,
                    d,
                    parent: idx,
                    prim: p,
                    shot: None,
                });
                queue.push(ci, f, g, d, seq);
                seq += 1;
            }
        }
        Ok(SearchOutcome { plan: None, expansions })
    }

    /// Analytic completion: the shortest path to the goal, cut into pieces of
    /// one step each, checked against everything the search respects.
    fn try_shot(
        &self,
        node: &Node,
        goal: &State,
        dynamic: Option<&DynamicObstacleSet>,
        window_end: usize,
        horizon: usize,
    ) -> Option<(Vec<Step>, u32, f64)> {
        let shape = &self.model.shape;
        let pieces = shot_pieces(&node.state, goal, self.model)?;
        let mut d = 0;
        for (k, piece) in pieces.iter().enumerate() {
            if !piece.is_free(self.ws, shape) {
                return None;
            }
            if let Some(dy) = dynamic {
                let sweep = SweptStep::of_step(piece, shape);
                let t = node.t + k;
                if !dy.allowed(t, &sweep, window_end) {
                    return None;
                }
                d += dy.soft_conflicts(t, &sweep, window_end);
            }
        }
        if let Some(dy) = dynamic {
            let arrive = node.t + pieces.len();
            let hold = SweptStep::holding(goal, shape, self.model.n_sub + 2);
            if !dy.can_hold(arrive, &hold, window_end) {
                return None;
            }
            d += dy.hold_conflicts(arrive, &hold, horizon.min(window_end));
        }
        let len = pieces.iter().map(|p| p.arc_len).sum();
        Some((pieces, d, len))
    }

    fn reconstruct(&self, nodes: &[Node], shots: &[Vec<Step>], goal_idx: u32, start_time: usize, fmin: f64) -> Plan {
        let goal_node = &nodes[goal_idx as usize];
        let mut chain = Vec::new();
        let mut i = goal_node.parent;
        while i != NO_PARENT {
            chain.push(i);
            i = nodes[i as usize].parent;
        }
        chain.reverse();
        let mut steps = Vec::new();
        for w in chain.windows(2) {
            let (a, b) = (&nodes[w[0] as usize], &nodes[w[1] as usize]);
            steps.push(Step::primitive(a.state, b.prim, &self.model.kin, self.model.n_sub));
        }
        if let Some(s) = goal_node.shot {
            steps.extend(shots[s as usize].iter().cloned());
        }
        Plan {
            start_time,
            steps,
            cost: goal_node.g,
            lower_bound: fmin,
            conflicts: goal_node.d,
        }
    }
}

/// The shortest path from `from` to `to` as consecutive greedy steps of at
/// most one step length each.
pub fn shot_pieces(from: &State, to: &State, model: &MotionModel) -> Option<Vec<Step>> {
    let path = rs_shortest(from, to, model.kin.r_m);
    let len = path.length();
    let step = model.step_length();
    let n = if len <= 1e-12 { 0 } else { (len / step - 1e-9).ceil().max(1.0) as usize };
    let mut pieces = Vec::with_capacity(n);
    let mut prev = *from;
    for k in 0..n {
        let s1 = ((k + 1) as f64 * step).min(len);
        let next = if k + 1 == n { *to } else { path.sub_path(0.0, s1).goal };
        pieces.push(Step::greedy(prev, next, &model.kin, model.n_sub)?);
        prev = next;
    }
    Some(pieces)
}

/// Time-free search from `start` to `goal`.
pub fn plan_vanilla(
    start: &State,
    goal: &State,
    ws: &Workspace,
    model: &MotionModel,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    check_free(start, goal, ws, model)?;
    let field = build_holonomic_field(goal, ws, cfg.holo_cell)?;
    Searcher { ws, model, field: &field, cfg }.search(start, 0, None, FocalParams::default(), None)
}

/// Time-indexed focal search starting at `start_time`.
#[allow(clippy::too_many_arguments)]
pub fn plan_constrained(
    start: &State,
    goal: &State,
    ws: &Workspace,
    model: &MotionModel,
    cfg: &SearchConfig,
    dynamic: &DynamicObstacleSet,
    fp: FocalParams,
    start_time: usize,
) -> Result<SearchOutcome> {
    check_free(start, goal, ws, model)?;
    let field = build_holonomic_field(goal, ws, cfg.holo_cell)?;
    Searcher { ws, model, field: &field, cfg }.search(start, start_time, Some(dynamic), fp, None)
}

fn check_free(start: &State, goal: &State, ws: &Workspace, model: &MotionModel) -> Result<()> {
    for (what, s) in [("start", start), ("goal", goal)] {
        if !ws.state_is_free(s, &model.shape) {
            return Err(Error::InCollision { what: format!("{what} {s:?}") });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CircleObstacle;
    use crate::primitives::apply_primitive;
    use crate::reeds_shepp::rs_length;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn model() -> MotionModel {
        MotionModel::default()
    }

    fn chained(start: &State, plan: &Plan) {
        let mut cur = *start;
        for s in &plan.steps {
            assert!(s.from.approx_eq(&cur, 1e-9));
            if s.primitive != Primitive::GM {
                assert!(s.to.approx_eq(&apply_primitive(&s.from, s.primitive, &model().kin), 1e-12));
            } else {
                assert!(s.arc_len <= model().step_length() + 1e-9);
            }
            cur = s.to;
        }
    }

    #[test]
    fn start_equals_goal() {
        let ws = Workspace::empty(50.0, 50.0).unwrap();
        let s = State::new(10.0, 10.0, 0.3);
        let out = plan_vanilla(&s, &s, &ws, &model(), &SearchConfig::default()).unwrap();
        let plan = out.plan.unwrap();
        assert!(plan.steps.is_empty());
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn straight_ahead_uses_the_shot() {
        let ws = Workspace::empty(50.0, 50.0).unwrap();
        let a = State::new(10.0, 10.0, 0.0);
        let b = State::new(20.0, 10.0, 0.0);
        let plan = plan_vanilla(&a, &b, &ws, &model(), &SearchConfig::default()).unwrap().plan.unwrap();
        assert_abs_diff_eq!(plan.length(), 10.0, epsilon = 1e-6);
        assert_eq!(plan.steps.last().unwrap().to, b);
        chained(&a, &plan);
    }

    #[test]
    fn detours_around_obstacles() {
        let obstacles = (0..7).map(|k| CircleObstacle::new(25.0, 12.0 + 2.0 * k as f64, 1.0)).collect();
        let ws = Workspace::new(50.0, 40.0, obstacles).unwrap();
        let a = State::new(12.0, 18.0, 0.0);
        let b = State::new(38.0, 18.0, 0.0);
        let plan = plan_vanilla(&a, &b, &ws, &model(), &SearchConfig::default()).unwrap().plan.unwrap();
        chained(&a, &plan);
        assert!(plan.length() > 26.0);
        assert!(plan.cost >= plan.lower_bound - 1e-9);
        for s in &plan.steps {
            assert!(s.is_free(&ws, &model().shape));
        }
    }

    #[test]
    fn enclosed_goal_is_unreachable() {
        let mut ring = Vec::new();
        for k in 0..40 {
            let a = k as f64 * PI / 20.0;
            ring.push(CircleObstacle::new(30.0 + 6.0 * a.cos(), 30.0 + 6.0 * a.sin(), 1.0));
        }
        let ws = Workspace::new(60.0, 60.0, ring).unwrap();
        let cfg = SearchConfig {
            node_budget: 20_000,
            ..SearchConfig::default()
        };
        let out = plan_vanilla(&State::new(8.0, 8.0, 0.0), &State::new(29.0, 30.0, 0.0), &ws, &model(), &cfg).unwrap();
        assert!(out.plan.is_none());
    }

    #[test]
    fn colliding_start_is_an_error() {
        let ws = Workspace::new(30.0, 30.0, vec![CircleObstacle::new(11.0, 10.0, 1.0)]).unwrap();
        let r = plan_vanilla(&State::new(10.0, 10.0, 0.0), &State::new(20.0, 20.0, 0.0), &ws, &model(), &SearchConfig::default());
        assert!(matches!(r, Err(Error::InCollision { .. })));
    }

    #[test]
    fn empty_dynamic_set_matches_vanilla() {
        let ws = Workspace::empty(60.0, 60.0).unwrap();
        let a = State::new(15.0, 15.0, 0.0);
        let b = State::new(40.0, 32.0, PI / 2.0);
        let cfg = SearchConfig::default();
        let v = plan_vanilla(&a, &b, &ws, &model(), &cfg).unwrap().plan.unwrap();
        let c = plan_constrained(&a, &b, &ws, &model(), &cfg, &DynamicObstacleSet::new(), FocalParams::default(), 0)
            .unwrap()
            .plan
            .unwrap();
        assert_abs_diff_eq!(v.length(), c.length(), epsilon = 1e-9);
        assert!(v.length() >= rs_length(&a, &b, 3.0) - 1e-9);
    }

    #[test]
    fn waits_for_a_crossing_robot() {
        let ws = Workspace::empty(60.0, 40.0).unwrap();
        let m = model();
        // The other robot drives down through x = 30 while we drive along y = 20.
        let other_start = State::new(30.0, 34.0, -PI / 2.0);
        let mut steps = Vec::new();
        let mut s = other_start;
        for _ in 0..12 {
            let st = Step::primitive(s, Primitive::FS, &m.kin, m.n_sub);
            s = st.to;
            steps.push(st);
        }
        let mut dy = DynamicObstacleSet::new();
        dy.add_path(TimedFootprints::new(0, &other_start, &steps, &m.shape, m.n_sub + 2));
        let a = State::new(20.0, 20.0, 0.0);
        let b = State::new(42.0, 20.0, 0.0);
        let cfg = SearchConfig::default();
        let plan = plan_constrained(&a, &b, &ws, &m, &cfg, &dy, FocalParams::default(), 0)
            .unwrap()
            .plan
            .unwrap();
        chained(&a, &plan);
        for (t, st) in plan.steps.iter().enumerate() {
            let mine = SweptStep::of_step(st, &m.shape);
            let theirs = dy.hard[0].at(t);
            assert!(!mine.collides(theirs), "collision at t = {t}");
        }
        let hold = SweptStep::holding(&b, &m.shape, m.n_sub + 2);
        for t in plan.steps.len()..30 {
            assert!(!hold.collides(dy.hard[0].at(t)));
        }
    }

    #[test]
    fn focal_bound_holds() {
        let ws = Workspace::new(
            60.0,
            60.0,
            vec![CircleObstacle::new(30.0, 30.0, 1.0), CircleObstacle::new(25.0, 36.0, 1.0)],
        )
        .unwrap();
        let a = State::new(12.0, 20.0, 0.0);
        let b = State::new(45.0, 40.0, PI);
        let cfg = SearchConfig::default();
        let m = model();
        let opt = plan_vanilla(&a, &b, &ws, &m, &cfg).unwrap().plan.unwrap();
        let fp = FocalParams::new(1.5, None).unwrap();
        let p = plan_constrained(&a, &b, &ws, &m, &cfg, &DynamicObstacleSet::new(), fp, 0)
            .unwrap()
            .plan
            .unwrap();
        assert!(p.cost <= 1.5 * p.lower_bound + 1e-9);
        assert!(p.cost <= 1.5 * opt.cost + 1e-9);
    }

    #[test]
    fn shot_pieces_cover_the_path() {
        let m = model();
        let a = State::new(0.0, 0.0, 0.0);
        let b = State::new(-7.0, 3.0, 2.0);
        let pieces = shot_pieces(&a, &b, &m).unwrap();
        let total: f64 = pieces.iter().map(|p| p.arc_len).sum();
        assert_abs_diff_eq!(total, rs_length(&a, &b, 3.0), epsilon = 1e-9);
        assert_eq!(pieces.last().unwrap().to, b);
        assert!(pieces.iter().all(|p| p.arc_len <= m.step_length() + 1e-9));
        assert!(shot_pieces(&a, &a, &m).unwrap().is_empty());
    }

    #[test]
    fn window_validation() {
        assert!(FocalParams::new(0.9, None).is_err());
        assert!(FocalParams::new(1.0, Some(0)).is_err());
    }
}
