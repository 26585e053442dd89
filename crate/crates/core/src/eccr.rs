//! Centralized planning by conflict-based search with focal search on both
//! levels. With a suboptimality ratio of 1 this reduces to plain
//! conflict-based search over hybrid A* plans.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{State, Workspace};
use crate::heuristics::{build_holonomic_field, HolonomicField};
use crate::hybrid_astar::{
    Deadline, DynamicObstacleSet, FocalParams, Plan, SearchConfig, Searcher, SweptStep, TimedFootprints,
};
use crate::primitives::{MotionModel, Step};

/// Two robots overlapping during the step that starts at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conflict {
    pub i: usize,
    pub j: usize,
    pub t: usize,
    /// Index of the first overlapping sub-sample.
    pub sample: usize,
}

/// `robot` must keep clear of `forbidden` during the step starting at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub robot: usize,
    pub t: usize,
    pub forbidden: SweptStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EccrConfig {
    /// Suboptimality ratio shared by both levels.
    pub w: f64,
    /// Order the high level by conflict count inside the focal bound.
    /// Without it the high level is best-first on the lower bound.
    pub high_level_focal: bool,
    pub search: SearchConfig,
}

impl Default for EccrConfig {
    fn default() -> Self {
        Self {
            w: 1.5,
            high_level_focal: true,
            search: SearchConfig::default(),
        }
    }
}

impl EccrConfig {
    /// The conflict-based search baseline: optimal search on both levels.
    pub fn baseline() -> Self {
        Self {
            w: 1.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub plans: Vec<Plan>,
    /// Sum of per-robot plan costs.
    pub cost: f64,
    /// Smallest lower bound in OPEN when the solution was accepted;
    /// `cost <= w * lb_min` up to [`Eccr::certificate_slack`].
    pub lb_min: f64,
    pub hl_expansions: usize,
    pub ll_expansions: usize,
}

impl Solution {
    pub fn steps(&self) -> Vec<Vec<Step>> {
        self.plans.iter().map(|p| p.steps.clone()).collect()
    }
}

/// First conflict in (t, i, j) order and the number of conflicting
/// (t, i, j) triples. Paths are held at their final pose; with a horizon
/// only steps starting before it are scanned.
pub fn detect_conflicts(paths: &[TimedFootprints], horizon: Option<usize>) -> (Option<Conflict>, usize) {
    let end = paths.iter().map(|p| p.end_time()).max().unwrap_or(0);
    let last = horizon.map_or(end, |h| end.min(h.saturating_sub(1)));
    if horizon == Some(0) {
        return (None, 0);
    }
    let mut first = None;
    let mut count = 0;
    for t in 0..=last {
        for i in 0..paths.len() {
            let a = paths[i].at(t);
            for (j, pj) in paths.iter().enumerate().skip(i + 1) {
                if let Some(sample) = a.first_collision(pj.at(t)) {
                    count += 1;
                    if first.is_none() {
                        first = Some(Conflict { i, j, t, sample });
                    }
                }
            }
        }
    }
    (first, count)
}

struct HlNode {
    parent: Option<usize>,
    constraint: Option<Constraint>,
    plans: Vec<Rc<Plan>>,
    cost: f64,
    lb: f64,
    conflicts: usize,
    first: Option<Conflict>,
    /// The constrained robot has not been replanned yet.
    pending: bool,
}

/// Work done by one search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub hl_expansions: usize,
    pub ll_expansions: usize,
}

/// One planning problem: fixed starts, goals and map.
pub struct Eccr<'a> {
    ws: &'a Workspace,
    model: &'a MotionModel,
    cfg: EccrConfig,
    starts: Vec<State>,
    fields: Vec<Rc<HolonomicField>>,
    start_time: usize,
    window: Option<usize>,
}

impl<'a> Eccr<'a> {
    pub fn new(ws: &'a Workspace, model: &'a MotionModel, cfg: EccrConfig, starts: &[State], goals: &[State]) -> Result<Self> {
        let fields = goals
            .iter()
            .map(|g| build_holonomic_field(g, ws, cfg.search.holo_cell).map(Rc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::with_fields(ws, model, cfg, starts, fields)
    }

    /// Reuses goal fields that the caller keeps across calls.
    pub fn with_fields(
        ws: &'a Workspace,
        model: &'a MotionModel,
        cfg: EccrConfig,
        starts: &[State],
        fields: Vec<Rc<HolonomicField>>,
    ) -> Result<Self> {
        if starts.len() != fields.len() {
            return Err(Error::InvalidInput("one goal per start is required".into()));
        }
        if !(cfg.w >= 1.0) {
            return Err(Error::InvalidInput(format!("suboptimality ratio {} below 1", cfg.w)));
        }
        Ok(Self {
            ws,
            model,
            cfg,
            starts: starts.to_vec(),
            fields,
            start_time: 0,
            window: None,
        })
    }

    /// Only conflicts in the first `window` steps are resolved.
    pub fn windowed(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    fn footprints(&self, i: usize, plan: &Plan) -> TimedFootprints {
        TimedFootprints::new(self.start_time, &self.starts[i], &plan.steps, &self.model.shape, self.model.n_sub + 2)
    }

    fn low_level(
        &self,
        i: usize,
        constraints: &[(usize, SweptStep)],
        others: &[(usize, &Plan)],
        deadline: Option<&Deadline>,
    ) -> Result<(Option<Plan>, usize)> {
        let mut dy = DynamicObstacleSet::new();
        for (t, s) in constraints {
            dy.add_constraint(*t, s.clone());
        }
        if self.cfg.w > 1.0 {
            for &(j, p) in others {
                dy.add_soft_path(self.footprints(j, p));
            }
        }
        let searcher = Searcher {
            ws: self.ws,
            model: self.model,
            field: &self.fields[i],
            cfg: &self.cfg.search,
        };
        let fp = FocalParams {
            w: self.cfg.w,
            window: self.window,
        };
        let out = searcher.search(&self.starts[i], self.start_time, Some(&dy), fp, deadline)?;
        Ok((out.plan, out.expansions))
    }

    fn evaluate(&self, plans: &[Rc<Plan>]) -> (Option<Conflict>, usize, f64, f64) {
        let fps: Vec<TimedFootprints> = plans.iter().enumerate().map(|(i, p)| self.footprints(i, p)).collect();
        let horizon = self.window.map(|w| self.start_time + w);
        let (first, count) = detect_conflicts(&fps, horizon);
        let cost = plans.iter().map(|p| p.cost).sum();
        let lb = plans.iter().map(|p| p.lower_bound).sum();
        (first, count, cost, lb)
    }

    fn constraints_of(nodes: &[HlNode], mut k: usize, robot: usize) -> Vec<(usize, SweptStep)> {
        let mut out = Vec::new();
        loop {
            let node = &nodes[k];
            if let Some(c) = &node.constraint {
                if c.robot == robot {
                    out.push((c.t, c.forbidden.clone()));
                }
            }
            match node.parent {
                Some(p) => k = p,
                None => return out,
            }
        }
    }

    /// Runs the two-level search until a conflict-free node is found.
    pub fn solve(&self, deadline: Option<&Deadline>) -> Result<Solution> {
        self.solve_counted(deadline, &mut SearchStats::default())
    }

    /// Like [`Eccr::solve`], recording work in `stats` even when the search
    /// fails.
    ///
    /// Children are replanned lazily: a new child carries its parent's
    /// plans and bounds and its constrained robot is replanned when the
    /// child is first selected.
    pub fn solve_counted(&self, deadline: Option<&Deadline>, stats: &mut SearchStats) -> Result<Solution> {
        let n = self.starts.len();
        let mut root_plans: Vec<Rc<Plan>> = Vec::with_capacity(n);
        for i in 0..n {
            let others: Vec<(usize, &Plan)> = root_plans.iter().enumerate().map(|(j, p)| (j, p.as_ref())).collect();
            let (plan, exp) = self.low_level(i, &[], &others, deadline)?;
            stats.ll_expansions += exp;
            root_plans.push(Rc::new(plan.ok_or(Error::Infeasible { robot: i })?));
        }
        let (first, conflicts, cost, lb) = self.evaluate(&root_plans);
        let mut nodes = vec![HlNode {
            parent: None,
            constraint: None,
            plans: root_plans,
            cost,
            lb,
            conflicts,
            first,
            pending: false,
        }];
        let slack = self.certificate_slack();
        let mut open: Vec<usize> = vec![0];
        let mut strict = false;
        while !open.is_empty() {
            if let Some(dl) = deadline {
                dl.check()?;
            }
            let lb_min = open.iter().map(|&k| nodes[k].lb).fold(f64::INFINITY, f64::min);
            let pos = if strict {
                Self::lowest_bound(&nodes, &open)
            } else {
                self.select(&nodes, &open, lb_min)
            };
            strict = false;
            let k = open.swap_remove(pos);
            if nodes[k].pending {
                if self.replan(&mut nodes, k, deadline, stats)? {
                    open.push(k);
                }
                continue;
            }
            let Some(conflict) = nodes[k].first else {
                if nodes[k].cost > self.cfg.w * lb_min + slack && nodes[k].lb > lb_min {
                    // A deferred node still holds the bound down.
                    open.push(k);
                    strict = true;
                    continue;
                }
                let node = &nodes[k];
                return Ok(Solution {
                    plans: node.plans.iter().map(|p| p.as_ref().clone()).collect(),
                    cost: node.cost,
                    lb_min,
                    hl_expansions: stats.hl_expansions,
                    ll_expansions: stats.ll_expansions,
                });
            };
            stats.hl_expansions += 1;
            for (robot, other) in [(conflict.i, conflict.j), (conflict.j, conflict.i)] {
                let forbidden = self.footprints(other, &nodes[k].plans[other]).at(conflict.t).clone();
                if Self::constraints_of(&nodes, k, robot)
                    .iter()
                    .any(|(t, f)| *t == conflict.t && *f == forbidden)
                {
                    continue;
                }
                let parent = &nodes[k];
                let child = HlNode {
                    parent: Some(k),
                    constraint: Some(Constraint {
                        robot,
                        t: conflict.t,
                        forbidden,
                    }),
                    plans: parent.plans.clone(),
                    cost: parent.cost,
                    lb: parent.lb,
                    conflicts: parent.conflicts,
                    first: parent.first,
                    pending: true,
                };
                open.push(nodes.len());
                nodes.push(child);
            }
        }
        Err(Error::NoSolution)
    }

    /// Replans the constrained robot of a pending node. Returns false when
    /// the low level finds no path.
    fn replan(
        &self,
        nodes: &mut [HlNode],
        k: usize,
        deadline: Option<&Deadline>,
        stats: &mut SearchStats,
    ) -> Result<bool> {
        let robot = nodes[k].constraint.as_ref().expect("pending nodes carry a constraint").robot;
        let constraints = Self::constraints_of(nodes, k, robot);
        let others: Vec<(usize, &Plan)> = nodes[k]
            .plans
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != robot)
            .map(|(j, p)| (j, p.as_ref()))
            .collect();
        let (plan, exp) = self.low_level(robot, &constraints, &others, deadline)?;
        stats.ll_expansions += exp;
        let Some(plan) = plan else { return Ok(false) };
        let node = &mut nodes[k];
        node.plans[robot] = Rc::new(plan);
        let (first, conflicts, cost, lb) = self.evaluate(&node.plans);
        node.first = first;
        node.conflicts = conflicts;
        node.cost = cost;
        node.lb = node.lb.max(lb);
        node.pending = false;
        Ok(true)
    }

    /// Bounds are kept on a 1e-6 grid per robot, so a certified cost may
    /// exceed `w * lb_min` by this much.
    pub fn certificate_slack(&self) -> f64 {
        1e-6 * (self.starts.len() + 1) as f64
    }

    fn lowest_bound(nodes: &[HlNode], open: &[usize]) -> usize {
        (0..open.len())
            .min_by(|&a, &b| nodes[open[a]].lb.total_cmp(&nodes[open[b]].lb).then(open[a].cmp(&open[b])))
            .expect("open is not empty")
    }

    /// Position in `open` of the node to expand next. Pending children
    /// whose constraint falls after their robot has parked go last, since
    /// moving a parked robot is rarely cheap.
    fn select(&self, nodes: &[HlNode], open: &[usize], lb_min: f64) -> usize {
        let parked = |k: usize| {
            let node = &nodes[k];
            node.pending
                && node
                    .constraint
                    .as_ref()
                    .is_some_and(|c| c.t >= self.start_time + node.plans[c.robot].steps.len())
        };
        let by_lb = |a: &usize, b: &usize| {
            let (ka, kb) = (open[*a], open[*b]);
            let (x, y) = (&nodes[ka], &nodes[kb]);
            parked(ka)
                .cmp(&parked(kb))
                .then(x.lb.total_cmp(&y.lb))
                .then(x.cost.total_cmp(&y.cost))
                .then(ka.cmp(&kb))
        };
        if self.cfg.high_level_focal {
            let bound = self.cfg.w * lb_min + self.certificate_slack();
            let focal = (0..open.len())
                .filter(|&p| nodes[open[p]].cost <= bound)
                .min_by(|a, b| {
                    let (ka, kb) = (open[*a], open[*b]);
                    parked(ka)
                        .cmp(&parked(kb))
                        .then(nodes[ka].conflicts.cmp(&nodes[kb].conflicts))
                        .then(by_lb(a, b))
                });
            if let Some(p) = focal {
                return p;
            }
        }
        (0..open.len()).min_by(by_lb).expect("open is not empty")
    }
}

/// Plans the next window for robots at `starts` heading to `fields`' goals
/// and returns exactly `window` steps per robot, padded with waits.
/// Robots whose goal is unreachable hold their position. If the search
/// fails or times out every robot waits.
pub fn solve_windowed(
    ws: &Workspace,
    model: &MotionModel,
    cfg: EccrConfig,
    starts: &[State],
    fields: &[Rc<HolonomicField>],
    window: usize,
    deadline: Option<&Deadline>,
) -> (Vec<Vec<Step>>, Option<Solution>) {
    let all_wait = || {
        starts
            .iter()
            .map(|s| vec![Step::wait(*s, model.n_sub); window])
            .collect::<Vec<_>>()
    };
    let mut fields = fields.to_vec();
    for (i, s) in starts.iter().enumerate() {
        let searcher = Searcher {
            ws,
            model,
            field: &fields[i],
            cfg: &cfg.search,
        };
        let ok = matches!(searcher.search(s, 0, None, FocalParams::default(), deadline), Ok(out) if out.plan.is_some());
        if !ok {
            match build_holonomic_field(s, ws, cfg.search.holo_cell) {
                Ok(f) => fields[i] = Rc::new(f),
                Err(_) => return (all_wait(), None),
            }
        }
    }
    let Ok(eccr) = Eccr::with_fields(ws, model, cfg, starts, fields) else {
        return (all_wait(), None);
    };
    match eccr.windowed(window).solve(deadline) {
        Ok(sol) => {
            let steps = sol
                .plans
                .iter()
                .zip(starts)
                .map(|(p, s)| {
                    let mut v: Vec<Step> = p.steps.iter().take(window).cloned().collect();
                    let last = v.last().map_or(*s, |st| st.to);
                    v.resize_with(window, || Step::wait(last, model.n_sub));
                    v
                })
                .collect();
            (steps, Some(sol))
        }
        Err(_) => (all_wait(), None),
    }
}
