//! Decentralized one-step planning with priority inheritance and
//! backtracking, adapted to car-like robots.
//!
//! Every timestep robots are ordered by priority. The highest-priority
//! undecided robot picks its best-scoring collision-free step; robots whose
//! current footprint is in the way inherit its priority and must move first.
//! A robot that fails as a child stays pinned in place for the rest of the
//! timestep and later decides as a root, so every robot is visited at most
//! twice per timestep.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{discretize, footprint, DiscretizationParams, State, Workspace};
use crate::heuristics::{build_holonomic_field, dist_h, q_value, CountTable, HolonomicField, QWeights};
use crate::hybrid_astar::{shot_pieces, FocalParams, SearchConfig, Searcher, SweptStep};
use crate::primitives::{step_cost, valid_succ_state, MotionModel, Primitive, Step};
use crate::reeds_shepp::Direction;

/// Pose tolerance for goal arrival.
pub const GOAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PbcrVariant {
    /// Without visit counts.
    V0,
    /// Visit counts cleared whenever the robot reaches its goal.
    V1,
    /// Visit counts never cleared in static runs.
    V2,
}

impl PbcrVariant {
    pub fn count_enabled(self) -> bool {
        self != PbcrVariant::V0
    }

    pub fn clear_on_goal(self) -> bool {
        self == PbcrVariant::V1
    }
}

impl fmt::Display for PbcrVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PbcrVariant::V0 => "pbcr-v0",
            PbcrVariant::V1 => "pbcr-v1",
            PbcrVariant::V2 => "pbcr-v2",
        })
    }
}

impl FromStr for PbcrVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pbcr-v0" | "v0" => Ok(PbcrVariant::V0),
            "pbcr-v1" | "v1" => Ok(PbcrVariant::V1),
            "pbcr-v2" | "v2" => Ok(PbcrVariant::V2),
            _ => Err(Error::Parse(format!("unknown PBCR variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbcrConfig {
    pub variant: PbcrVariant,
    pub weights: QWeights,
    pub disc: DiscretizationParams,
    /// Search settings of the fallback planner behind the greedy motion.
    pub search: SearchConfig,
    /// Keep the greedy bonus when counts are disabled.
    pub v0_greedy_bonus: bool,
    /// Count the state entered by a WAIT like any other.
    pub count_waits: bool,
    /// How many states ahead on the previous greedy path a robot that
    /// strayed tries to rejoin before searching again.
    pub rejoin_lookahead: usize,
    /// Timesteps without a fallback search after one failed.
    pub search_cooldown: usize,
}

impl Default for PbcrConfig {
    fn default() -> Self {
        Self {
            variant: PbcrVariant::V2,
            weights: QWeights::default(),
            disc: DiscretizationParams::default(),
            search: SearchConfig {
                node_budget: 20_000,
                ..SearchConfig::default()
            },
            v0_greedy_bonus: true,
            count_waits: true,
            rejoin_lookahead: 6,
            search_cooldown: 10,
        }
    }
}

/// Per-robot planning state.
#[derive(Debug, Clone)]
pub struct RobotRuntime {
    pub id: usize,
    pub current: State,
    pub goal: State,
    /// Steps since the goal was last reached or assigned.
    pub elapsed: usize,
    pub counts: CountTable,
    pub last_primitive: Option<Primitive>,
    /// Drive direction of the last moving step.
    pub last_direction: Option<Direction>,
    pub at_goal: bool,
    field: Arc<HolonomicField>,
    /// Remaining greedy path as (from, to) pairs of one step each.
    greedy_path: VecDeque<(State, State)>,
    /// Steps to wait before searching again after a failed search.
    search_cooldown: usize,
}

impl RobotRuntime {
    pub fn field(&self) -> &HolonomicField {
        &self.field
    }
}

/// A scored successor.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub step: Step,
    pub q: f64,
    pub cost: f64,
}

/// Outcome for one robot in one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub robot: usize,
    pub step: Step,
    /// False if the robot failed as a child earlier in the timestep.
    pub planned: bool,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct StepStats {
    pub invocations: usize,
    pub failures: usize,
}

pub struct Pbcr {
    ws: Workspace,
    model: MotionModel,
    cfg: PbcrConfig,
    robots: Vec<RobotRuntime>,
    neighbor_radius: f64,
    /// Timesteps executed so far.
    pub time: usize,
}

struct Frame {
    current: SweptStep,
    target: SweptStep,
}

struct Ctx {
    order: Vec<usize>,
    current: Vec<SweptStep>,
    centers: Vec<(f64, f64)>,
    decided: Vec<Option<(Step, SweptStep, bool)>>,
    in_stack: Vec<bool>,
    /// Robots that failed as a child: nobody may push them again this
    /// timestep, and they decide later as a root.
    pinned: Vec<bool>,
    stack: Vec<Frame>,
    stats: StepStats,
}

impl Pbcr {
    pub fn new(ws: Workspace, model: MotionModel, cfg: PbcrConfig, starts: &[State], goals: &[State]) -> Result<Self> {
        if starts.len() != goals.len() {
            return Err(Error::InvalidInput("one goal per start is required".into()));
        }
        let mut robots = Vec::with_capacity(starts.len());
        for (id, (s, g)) in starts.iter().zip(goals).enumerate() {
            if !ws.state_is_free(s, &model.shape) {
                return Err(Error::InCollision { what: format!("start of robot {id}") });
            }
            if !ws.state_is_free(g, &model.shape) {
                return Err(Error::InCollision { what: format!("goal of robot {id}") });
            }
            let field = Arc::new(build_holonomic_field(g, &ws, cfg.search.holo_cell)?);
            robots.push(RobotRuntime {
                id,
                current: *s,
                goal: *g,
                elapsed: 0,
                counts: CountTable::new(),
                last_primitive: None,
                last_direction: None,
                at_goal: s.approx_eq(g, GOAL_TOLERANCE),
                field,
                greedy_path: VecDeque::new(),
                search_cooldown: 0,
            });
        }
        let sweep = model.step_length() * model.kin.r_m.hypot(0.5 * model.shape.wheelbase) / model.kin.r_m;
        let neighbor_radius = 2.0 * (sweep + model.shape.circumradius());
        Ok(Self {
            ws,
            model,
            cfg,
            robots,
            neighbor_radius,
            time: 0,
        })
    }

    pub fn robots(&self) -> &[RobotRuntime] {
        &self.robots
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn model(&self) -> &MotionModel {
        &self.model
    }

    pub fn config(&self) -> &PbcrConfig {
        &self.cfg
    }

    pub fn all_at_goal(&self) -> bool {
        self.robots.iter().all(|r| r.at_goal)
    }

    /// Assigns a new goal, resetting the robot's priority age and counts.
    pub fn assign_goal(&mut self, i: usize, goal: State) -> Result<()> {
        let field = Arc::new(build_holonomic_field(&goal, &self.ws, self.cfg.search.holo_cell)?);
        let r = &mut self.robots[i];
        r.goal = goal;
        r.field = field;
        r.elapsed = 0;
        r.counts.clear();
        r.greedy_path.clear();
        r.search_cooldown = 0;
        r.at_goal = r.current.approx_eq(&goal, GOAL_TOLERANCE);
        Ok(())
    }

    fn dist(&self, i: usize, s: &State) -> f64 {
        dist_h(s, &self.robots[i].field, self.model.kin.r_m)
    }

    /// Robot indices from highest to lowest priority.
    pub fn update_priorities(&self) -> Vec<usize> {
        let keyed: Vec<(usize, f64)> = self
            .robots
            .iter()
            .map(|r| (r.elapsed, self.dist(r.id, &r.current)))
            .collect();
        priority_order(&keyed)
    }

    /// Next greedy step toward the goal, if one exists.
    pub fn greedy_step(&mut self, i: usize) -> Option<Step> {
        let cur = self.robots[i].current;
        let goal = self.robots[i].goal;
        let kin = self.model.kin;
        let n_sub = self.model.n_sub;
        if cur.approx_eq(&goal, GOAL_TOLERANCE) {
            return Step::greedy(cur, goal, &kin, n_sub);
        }
        let fresh = self.robots[i]
            .greedy_path
            .front()
            .is_some_and(|(from, _)| from.approx_eq(&cur, 1e-9));
        if !fresh {
            let path = self.greedy_path(i);
            self.robots[i].greedy_path = path;
        }
        let r = &mut self.robots[i];
        r.search_cooldown = r.search_cooldown.saturating_sub(1);
        let &(_, to) = self.robots[i].greedy_path.front()?;
        let step = Step::greedy(cur, to, &kin, n_sub)?;
        step.is_free(&self.ws, &self.model.shape).then_some(step)
    }

    fn pieces_if_free(&self, from: &State, to: &State) -> Option<Vec<(State, State)>> {
        let pieces = shot_pieces(from, to, &self.model)?;
        pieces
            .iter()
            .all(|p| p.is_free(&self.ws, &self.model.shape))
            .then(|| pieces.iter().map(|p| (p.from, p.to)).collect())
    }

    /// Shortest path if it is clear; otherwise a short reconnection to the
    /// previous path; otherwise a fresh obstacle-aware search.
    fn greedy_path(&mut self, i: usize) -> VecDeque<(State, State)> {
        let r = &self.robots[i];
        if let Some(p) = self.pieces_if_free(&r.current, &r.goal) {
            return p.into();
        }
        let old: Vec<(State, State)> = r.greedy_path.iter().copied().collect();
        for k in 0..old.len().min(self.cfg.rejoin_lookahead) {
            let target = old[k].1;
            if let Some(mut p) = self.pieces_if_free(&r.current, &target) {
                if !p.is_empty() {
                    p.extend_from_slice(&old[k + 1..]);
                    return p.into();
                }
            }
        }
        if r.search_cooldown > 0 {
            return VecDeque::new();
        }
        let searcher = Searcher {
            ws: &self.ws,
            model: &self.model,
            field: &r.field,
            cfg: &self.cfg.search,
        };
        let found = searcher
            .search(&r.current, 0, None, FocalParams::default(), None)
            .ok()
            .and_then(|out| out.plan);
        match found {
            Some(p) => p.steps.iter().map(|s| (s.from, s.to)).collect(),
            None => {
                self.robots[i].search_cooldown = self.cfg.search_cooldown + 1;
                VecDeque::new()
            }
        }
    }

    /// All valid successors of robot `i`, best first.
    pub fn candidates(&mut self, i: usize) -> Vec<Candidate> {
        let greedy = self.greedy_step(i);
        let r = &self.robots[i];
        let mut steps: Vec<Step> = Primitive::UNIVERSAL
            .iter()
            .filter_map(|&p| valid_succ_state(&r.current, p, &self.ws, &self.model))
            .collect();
        if let Some(gm) = greedy {
            let cell = discretize(&gm.to, &self.cfg.disc);
            steps.retain(|s| !(s.to.approx_eq(&gm.to, 1e-6) && discretize(&s.to, &self.cfg.disc) == cell));
            steps.push(gm);
        }
        let goal_cell = discretize(&r.goal, &self.cfg.disc);
        let use_counts = self.cfg.variant.count_enabled();
        let mut weights = self.cfg.weights;
        if !use_counts && !self.cfg.v0_greedy_bonus {
            weights.alpha = crate::heuristics::WeightRule::Constant(0.0);
        }
        let mut out: Vec<Candidate> = steps
            .into_iter()
            .map(|step| {
                let cost = step_cost(r.last_direction, &step, &self.model);
                let d = dist_h(&step.to, &r.field, self.model.kin.r_m);
                let visits = if use_counts { r.counts.count(&step.to, &self.cfg.disc) } else { 0 };
                let is_goal = discretize(&step.to, &self.cfg.disc) == goal_cell;
                let q = q_value(cost, step.primitive == Primitive::GM, is_goal, d, visits, &weights);
                Candidate { step, q, cost }
            })
            .collect();
        out.sort_by(|a, b| b.q.total_cmp(&a.q).then(a.step.primitive.cmp(&b.step.primitive)));
        out
    }

    /// Decides one step for every robot without moving them.
    pub fn pibt_loop(&mut self) -> (Vec<StepDecision>, StepStats) {
        let n = self.robots.len();
        let shape = self.model.shape;
        let samples = self.model.n_sub + 2;
        let mut ctx = Ctx {
            order: self.update_priorities(),
            current: self
                .robots
                .iter()
                .map(|r| SweptStep::holding(&r.current, &shape, samples))
                .collect(),
            centers: self.robots.iter().map(|r| footprint(&r.current, &shape).center).collect(),
            decided: vec![None; n],
            in_stack: vec![false; n],
            pinned: vec![false; n],
            stack: Vec::new(),
            stats: StepStats::default(),
        };
        for idx in 0..n {
            let i = ctx.order[idx];
            if ctx.decided[i].is_none() {
                self.pibt(i, &mut ctx);
            }
        }
        let decisions = ctx
            .decided
            .into_iter()
            .enumerate()
            .map(|(robot, d)| {
                let (step, _, planned) = d.expect("every robot decides");
                StepDecision { robot, step, planned }
            })
            .collect();
        (decisions, ctx.stats)
    }

    fn pibt(&mut self, i: usize, ctx: &mut Ctx) -> bool {
        ctx.stats.invocations += 1;
        let shape = self.model.shape;
        let n = self.robots.len();
        let radius = self.neighbor_radius;
        let is_root = ctx.stack.is_empty();
        let candidates = self.candidates(i);
        ctx.in_stack[i] = true;
        for cand in candidates {
            let sweep = SweptStep::of_step(&cand.step, &shape);
            let clashes = |ctx: &Ctx| {
                (0..n).any(|m| {
                    m != i
                        && near(ctx, radius, i, m)
                        && match &ctx.decided[m] {
                            Some((_, s, _)) => s.collides(&sweep),
                            None => ctx.pinned[m] && !ctx.in_stack[m] && ctx.current[m].collides(&sweep),
                        }
                })
            };
            if clashes(ctx) || ctx.stack.iter().any(|f| f.current.collides(&sweep) || f.target.collides(&sweep)) {
                continue;
            }
            let blockers: Vec<usize> = ctx
                .order
                .iter()
                .copied()
                .filter(|&k| {
                    k != i
                        && !ctx.in_stack[k]
                        && ctx.decided[k].is_none()
                        && near(ctx, radius, i, k)
                        && ctx.current[k].collides(&sweep)
                })
                .collect();
            ctx.stack.push(Frame {
                current: ctx.current[i].clone(),
                target: sweep.clone(),
            });
            let mut ok = true;
            for k in blockers {
                if ctx.decided[k].is_none() && (ctx.pinned[k] || !self.pibt(k, ctx)) {
                    ok = false;
                    break;
                }
            }
            ctx.stack.pop();
            if ok && !clashes(ctx) {
                ctx.in_stack[i] = false;
                let planned = !ctx.pinned[i];
                ctx.decided[i] = Some((cand.step, sweep, planned));
                return true;
            }
        }
        ctx.in_stack[i] = false;
        ctx.stats.failures += 1;
        if is_root {
            // Unreachable while current footprints are disjoint, kept as a
            // safe fallback.
            let wait = Step::wait(self.robots[i].current, self.model.n_sub);
            let sweep = SweptStep::of_step(&wait, &shape);
            ctx.decided[i] = Some((wait, sweep, false));
        } else {
            ctx.pinned[i] = true;
        }
        false
    }

    /// Plans and executes one timestep; returns the steps taken.
    pub fn step(&mut self) -> (Vec<StepDecision>, StepStats) {
        let (decisions, stats) = self.pibt_loop();
        for d in &decisions {
            self.apply(d);
        }
        self.time += 1;
        (decisions, stats)
    }

    fn apply(&mut self, d: &StepDecision) {
        let count_enabled = self.cfg.variant.count_enabled();
        let clear_on_goal = self.cfg.variant.clear_on_goal();
        let count_waits = self.cfg.count_waits;
        let disc = self.cfg.disc;
        let radius = self.model.kin.r_m;
        let r = &mut self.robots[d.robot];
        if r.greedy_path.front().is_some_and(|(_, to)| to.approx_eq(&d.step.to, 1e-9)) {
            r.greedy_path.pop_front();
        }
        r.current = d.step.to;
        r.last_primitive = Some(d.step.primitive);
        if let Some((_, last)) = d.step.directions(radius) {
            r.last_direction = Some(last);
        }
        let was_at_goal = r.at_goal;
        r.at_goal = r.current.approx_eq(&r.goal, GOAL_TOLERANCE);
        if r.at_goal {
            r.elapsed = 0;
        } else {
            r.elapsed += 1;
        }
        if r.at_goal && !was_at_goal && clear_on_goal {
            r.counts.clear();
        }
        if count_enabled && (count_waits || d.step.primitive != Primitive::Wait) {
            r.counts.visit(&r.current, &disc);
        }
    }
}

fn near(ctx: &Ctx, radius: f64, a: usize, b: usize) -> bool {
    let (p, q) = (ctx.centers[a], ctx.centers[b]);
    (p.0 - q.0).hypot(p.1 - q.1) <= radius
}

/// Descending by (elapsed, distance), ascending id on ties.
pub fn priority_order(keys: &[(usize, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        keys[b]
            .0
            .cmp(&keys[a].0)
            .then(keys[b].1.total_cmp(&keys[a].1))
            .then(a.cmp(&b))
    });
    order
}
