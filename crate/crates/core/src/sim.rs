//! Problem instances, random generation, and the static and lifelong
//! runners with their metrics.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eccr::{solve_windowed, Eccr, EccrConfig, SearchStats};
use crate::error::{Error, Result};
use crate::geometry::{boxes_intersect, footprint, CircleObstacle, DiscretizationParams, OrientedBox, State, Workspace};
use crate::heuristics::build_holonomic_field;
use crate::hybrid_astar::{plan_vanilla, Deadline, SearchConfig};
use crate::pbcr::{Pbcr, PbcrConfig, PbcrVariant, GOAL_TOLERANCE};
use crate::primitives::{MotionModel, Step};

/// Map, robots, and their starts and goals. A robot with several goals
/// visits them in order (lifelong); with one goal the problem is static.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub workspace: Workspace,
    pub model: MotionModel,
    pub disc: DiscretizationParams,
    pub starts: Vec<State>,
    pub goals: Vec<Vec<State>>,
    pub seed: u64,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.starts.len()
    }

    pub fn is_lifelong(&self) -> bool {
        self.goals.iter().any(|g| g.len() > 1)
    }

    /// First goal of every robot.
    pub fn first_goals(&self) -> Vec<State> {
        self.goals
            .iter()
            .zip(&self.starts)
            .map(|(g, s)| g.first().copied().unwrap_or(*s))
            .collect()
    }

    /// Starts and first goals must be inside the map, clear of obstacles
    /// and pairwise disjoint.
    pub fn check(&self) -> Result<()> {
        if self.goals.len() != self.starts.len() {
            return Err(Error::InvalidInput(format!(
                "{} starts but {} goal lists",
                self.starts.len(),
                self.goals.len()
            )));
        }
        self.model.shape.validate()?;
        self.model.kin.validate()?;
        let shape = &self.model.shape;
        for (i, g) in self.goals.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidInput(format!("robot {i} has no goal")));
            }
            for s in g {
                if !self.workspace.state_is_free(s, shape) {
                    return Err(Error::InCollision { what: format!("a goal of robot {i}") });
                }
            }
        }
        for (what, poses) in [("start", self.starts.clone()), ("goal", self.first_goals())] {
            let boxes: Vec<_> = poses.iter().map(|s| footprint(s, shape)).collect();
            for (i, b) in boxes.iter().enumerate() {
                if !self.workspace.box_is_free(b) {
                    return Err(Error::InCollision { what: format!("{what} of robot {i}") });
                }
                if let Some(j) = (0..i).find(|&j| boxes_intersect(&boxes[j], b)) {
                    return Err(Error::InCollision {
                        what: format!("{what} of robot {i} against robot {j}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One robot's motion, step by step from its start.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub robot: usize,
    pub start: State,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(robot: usize, start: State) -> Self {
        Self {
            robot,
            start,
            steps: Vec::new(),
        }
    }

    pub fn length(&self) -> f64 {
        self.steps.iter().map(|s| s.arc_len).sum()
    }

    pub fn end(&self) -> State {
        self.steps.last().map_or(self.start, |s| s.to)
    }

    /// Pose after `t` steps, held at the end.
    pub fn state_at(&self, t: usize) -> State {
        match t {
            0 => self.start,
            _ => self.steps.get(t - 1).map_or_else(|| self.end(), |s| s.to),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub success: bool,
    pub runtime_s: f64,
    /// Longest trajectory length over the maximum speed.
    pub makespan: f64,
    /// Timesteps until the run ended.
    pub makespan_steps: usize,
    /// Summed trajectory lengths over the maximum speed.
    pub flowtime: f64,
    pub arrival_fraction: f64,
    /// Tasks completed (lifelong runs).
    pub throughput: usize,
    pub hl_expansions: usize,
    pub ll_expansions: usize,
    /// Lifelong replans that fell back to waiting.
    pub stalls: usize,
    pub timed_out: bool,
}

impl Metrics {
    fn fill_lengths(&mut self, trajectories: &[Trajectory], u_m: f64) {
        let lens: Vec<f64> = trajectories.iter().map(|t| t.length()).collect();
        self.makespan = lens.iter().copied().fold(0.0, f64::max) / u_m;
        // An empty sum is -0.0.
        self.flowtime = lens.iter().sum::<f64>() / u_m + 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlannerSpec {
    Pbcr(PbcrConfig),
    Eccr(EccrConfig),
}

impl PlannerSpec {
    /// Parses `pbcr-v0|pbcr-v1|pbcr-v2|eccr|clcbs`, applying the ratio to
    /// ECCR; `clcbs` is ECCR with ratio 1.
    pub fn parse(algo: &str, pbcr: PbcrConfig, eccr: EccrConfig, subopt: Option<f64>) -> Result<Self> {
        match algo {
            "eccr" => Ok(PlannerSpec::Eccr(EccrConfig {
                w: subopt.unwrap_or(eccr.w),
                ..eccr
            })),
            "clcbs" => Ok(PlannerSpec::Eccr(EccrConfig { w: 1.0, ..eccr })),
            other => Ok(PlannerSpec::Pbcr(PbcrConfig {
                variant: other.parse::<PbcrVariant>()?,
                ..pbcr
            })),
        }
    }
}

impl fmt::Display for PlannerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerSpec::Pbcr(c) => write!(f, "{}", c.variant),
            PlannerSpec::Eccr(c) if c.w == 1.0 => f.write_str("clcbs"),
            PlannerSpec::Eccr(_) => f.write_str("eccr"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Wall-clock budget per run in seconds.
    pub time_limit: Option<f64>,
    pub max_steps: usize,
    /// Replanning window of lifelong ECCR.
    pub window: usize,
    /// Wall-clock budget of one lifelong ECCR replan.
    pub replan_time_limit: Option<f64>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            time_limit: Some(60.0),
            max_steps: 500,
            window: 5,
            replan_time_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectories: Vec<Trajectory>,
    pub metrics: Metrics,
}

fn deadline(limit: Option<f64>) -> Option<Deadline> {
    limit.map(Deadline::after)
}

/// Solves a static instance. PBCR steps until every robot is home, the
/// step cap is hit, or time runs out; ECCR plans once.
pub fn run_static(inst: &Instance, spec: &PlannerSpec, limits: &Limits) -> Result<RunOutcome> {
    inst.check()?;
    let clock = Instant::now();
    let dl = deadline(limits.time_limit);
    let goals = inst.first_goals();
    let mut m = Metrics::default();
    let trajectories = match spec {
        PlannerSpec::Pbcr(cfg) => {
            let mut p = Pbcr::new(inst.workspace.clone(), inst.model, *cfg, &inst.starts, &goals)?;
            let mut trs: Vec<Trajectory> = inst.starts.iter().enumerate().map(|(i, s)| Trajectory::new(i, *s)).collect();
            let mut t = 0;
            while !p.all_at_goal() && t < limits.max_steps {
                if dl.as_ref().is_some_and(|d| d.expired()) {
                    m.timed_out = true;
                    break;
                }
                let (decisions, _) = p.step();
                for d in decisions {
                    trs[d.robot].steps.push(d.step);
                }
                t += 1;
            }
            m.makespan_steps = t;
            m.success = p.all_at_goal();
            let home = p.robots().iter().filter(|r| r.at_goal).count();
            m.arrival_fraction = if inst.n() == 0 { 1.0 } else { home as f64 / inst.n() as f64 };
            trs
        }
        PlannerSpec::Eccr(cfg) => {
            let eccr = Eccr::new(&inst.workspace, &inst.model, *cfg, &inst.starts, &goals)?;
            let mut stats = SearchStats::default();
            let result = eccr.solve_counted(dl.as_ref(), &mut stats);
            m.hl_expansions = stats.hl_expansions;
            m.ll_expansions = stats.ll_expansions;
            match result {
                Ok(sol) => {
                    m.success = true;
                    m.arrival_fraction = 1.0;
                    m.makespan_steps = sol.plans.iter().map(|p| p.steps.len()).max().unwrap_or(0);
                    sol.plans
                        .into_iter()
                        .enumerate()
                        .map(|(i, p)| Trajectory {
                            robot: i,
                            start: inst.starts[i],
                            steps: p.steps,
                        })
                        .collect()
                }
                Err(Error::Timeout(_)) => {
                    m.timed_out = true;
                    Vec::new()
                }
                Err(Error::Infeasible { .. } | Error::NoSolution) => Vec::new(),
                Err(e) => return Err(e),
            }
        }
    };
    m.fill_lengths(&trajectories, inst.model.kin.u_m);
    m.runtime_s = clock.elapsed().as_secs_f64();
    Ok(RunOutcome { trajectories, metrics: m })
}

/// Cursor over each robot's goal queue.
struct Tasks<'a> {
    goals: &'a [Vec<State>],
    next: Vec<usize>,
    done: usize,
}

impl<'a> Tasks<'a> {
    fn new(goals: &'a [Vec<State>]) -> Self {
        Self {
            goals,
            next: vec![0; goals.len()],
            done: 0,
        }
    }

    fn current(&self, i: usize) -> Option<State> {
        self.goals[i].get(self.next[i]).copied()
    }

    /// Pops goals the robot is already standing on; returns the new goal if
    /// it changed.
    fn advance(&mut self, i: usize, at: &State) -> Option<State> {
        let mut changed = false;
        while self.current(i).is_some_and(|g| g.approx_eq(at, GOAL_TOLERANCE)) {
            self.next[i] += 1;
            self.done += 1;
            changed = true;
        }
        if changed {
            Some(self.current(i).unwrap_or(*at))
        } else {
            None
        }
    }
}

/// Runs a lifelong instance until the step cap or time limit and counts
/// completed tasks. A robot that finished its queue stays where it is.
pub fn run_lifelong(inst: &Instance, spec: &PlannerSpec, limits: &Limits) -> Result<RunOutcome> {
    inst.check()?;
    let clock = Instant::now();
    let dl = deadline(limits.time_limit);
    let n = inst.n();
    let mut tasks = Tasks::new(&inst.goals);
    let mut current = inst.starts.clone();
    let mut goals: Vec<State> = (0..n).map(|i| tasks.current(i).unwrap_or(current[i])).collect();
    for i in 0..n {
        if let Some(g) = tasks.advance(i, &current[i]) {
            goals[i] = g;
        }
    }
    let mut trs: Vec<Trajectory> = inst.starts.iter().enumerate().map(|(i, s)| Trajectory::new(i, *s)).collect();
    let mut m = Metrics::default();
    let mut t = 0;
    match spec {
        PlannerSpec::Pbcr(cfg) => {
            let mut p = Pbcr::new(inst.workspace.clone(), inst.model, *cfg, &current, &goals)?;
            while t < limits.max_steps {
                if dl.as_ref().is_some_and(|d| d.expired()) {
                    m.timed_out = true;
                    break;
                }
                let (decisions, _) = p.step();
                for d in decisions {
                    current[d.robot] = d.step.to;
                    trs[d.robot].steps.push(d.step);
                }
                t += 1;
                for (i, c) in current.iter().enumerate() {
                    if let Some(g) = tasks.advance(i, c) {
                        p.assign_goal(i, g)?;
                    }
                }
            }
        }
        PlannerSpec::Eccr(cfg) => {
            let holo = cfg.search.holo_cell;
            let mut fields = goals
                .iter()
                .map(|g| build_holonomic_field(g, &inst.workspace, holo).map(Rc::new))
                .collect::<Result<Vec<_>>>()?;
            let window = limits.window.max(1);
            'outer: while t < limits.max_steps {
                if dl.as_ref().is_some_and(|d| d.expired()) {
                    m.timed_out = true;
                    break;
                }
                let replan_dl = match (limits.replan_time_limit, limits.time_limit) {
                    (Some(r), _) => Some(Deadline::after(r)),
                    (None, Some(_)) => dl.clone(),
                    (None, None) => None,
                };
                let (commit, sol) = solve_windowed(&inst.workspace, &inst.model, *cfg, &current, &fields, window, replan_dl.as_ref());
                match sol {
                    Some(s) => {
                        m.hl_expansions += s.hl_expansions;
                        m.ll_expansions += s.ll_expansions;
                    }
                    None => m.stalls += 1,
                }
                for k in 0..window {
                    if t >= limits.max_steps {
                        break 'outer;
                    }
                    for (i, steps) in commit.iter().enumerate() {
                        current[i] = steps[k].to;
                        trs[i].steps.push(steps[k].clone());
                    }
                    t += 1;
                    let mut replan = false;
                    for i in 0..n {
                        if let Some(g) = tasks.advance(i, &current[i]) {
                            fields[i] = Rc::new(build_holonomic_field(&g, &inst.workspace, holo)?);
                            replan = true;
                        }
                    }
                    if replan {
                        break;
                    }
                }
            }
        }
    }
    m.makespan_steps = t;
    m.throughput = tasks.done;
    m.success = !m.timed_out;
    m.arrival_fraction = if n == 0 { 1.0 } else { tasks.next.iter().filter(|&&k| k > 0).count() as f64 / n as f64 };
    m.fill_lengths(&trs, inst.model.kin.u_m);
    m.runtime_s = clock.elapsed().as_secs_f64();
    Ok(RunOutcome { trajectories: trs, metrics: m })
}

/// Random map parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub width: f64,
    pub height: f64,
    pub obstacles: usize,
    pub obstacle_radius: f64,
}

impl MapSpec {
    pub fn new(width: f64, height: f64, obstacles: usize) -> Self {
        Self {
            width,
            height,
            obstacles,
            obstacle_radius: 1.0,
        }
    }
}

impl FromStr for MapSpec {
    type Err = Error;

    /// `WxH` or `WxH:K` with K obstacles.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("map spec `{s}` is not WxH[:obstacles]"));
        let (dims, k) = match s.split_once(':') {
            Some((d, k)) => (d, k.parse().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (w, h) = dims.split_once('x').ok_or_else(bad)?;
        Ok(MapSpec::new(w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?, k))
    }
}

const MAX_REJECTIONS: usize = 100_000;

fn random_pose(rng: &mut ChaCha8Rng, map: &MapSpec, disc: &DiscretizationParams) -> State {
    let headings = ((2.0 * std::f64::consts::PI / disc.dtheta) - 1e-9).floor() as usize + 1;
    let x = rng.gen_range(0.0..map.width);
    let y = rng.gen_range(0.0..map.height);
    let k = rng.gen_range(0..headings);
    State::new(x, y, k as f64 * disc.dtheta)
}

/// A free pose whose footprint misses every box in `taken`.
fn place_one(
    rng: &mut ChaCha8Rng,
    taken: &[OrientedBox],
    ws: &Workspace,
    map: &MapSpec,
    model: &MotionModel,
    disc: &DiscretizationParams,
) -> Result<State> {
    for _ in 0..MAX_REJECTIONS {
        let s = random_pose(rng, map, disc);
        let b = footprint(&s, &model.shape);
        if ws.box_is_free(&b) && !taken.iter().any(|o| boxes_intersect(o, &b)) {
            return Ok(s);
        }
    }
    Err(Error::InvalidInput("could not place a robot without overlap".into()))
}

/// Poses whose footprints are free and pairwise disjoint.
fn place(
    rng: &mut ChaCha8Rng,
    count: usize,
    ws: &Workspace,
    map: &MapSpec,
    model: &MotionModel,
    disc: &DiscretizationParams,
) -> Result<Vec<State>> {
    let mut out: Vec<State> = Vec::with_capacity(count);
    let mut boxes = Vec::with_capacity(count);
    for _ in 0..count {
        let s = place_one(rng, &boxes, ws, map, model, disc)?;
        boxes.push(footprint(&s, &model.shape));
        out.push(s);
    }
    Ok(out)
}

fn reachable(ws: &Workspace, model: &MotionModel, from: &State, to: &State, budget: usize) -> bool {
    let cfg = SearchConfig {
        node_budget: budget,
        ..SearchConfig::default()
    };
    plan_vanilla(from, to, ws, model, &cfg).is_ok_and(|o| o.plan.is_some())
}

fn random_workspace(rng: &mut ChaCha8Rng, map: &MapSpec) -> Result<Workspace> {
    let r = map.obstacle_radius;
    let mut obs: Vec<CircleObstacle> = Vec::with_capacity(map.obstacles);
    let mut rejections = 0;
    while obs.len() < map.obstacles {
        let x = rng.gen_range(r..map.width - r);
        let y = rng.gen_range(r..map.height - r);
        if obs.iter().any(|o| (o.x - x).hypot(o.y - y) < o.r + r) {
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::InvalidInput("could not place obstacles".into()));
            }
            continue;
        }
        obs.push(CircleObstacle::new(x, y, r));
    }
    Workspace::new(map.width, map.height, obs)
}

/// Random instance generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub map: MapSpec,
    pub model: MotionModel,
    pub disc: DiscretizationParams,
    /// If set, every goal must be reachable by a lone robot from its start
    /// (or from the previous goal) within this many search expansions;
    /// offending poses are redrawn.
    pub reachability_budget: Option<usize>,
}

const MAX_REDRAWS: usize = 1000;

impl Generator {
    pub fn new(map: MapSpec, model: MotionModel, disc: DiscretizationParams) -> Self {
        Self {
            map,
            model,
            disc,
            reachability_budget: Some(20_000),
        }
    }

    fn ok(&self, ws: &Workspace, from: &State, to: &State) -> bool {
        self.reachability_budget
            .is_none_or(|b| reachable(ws, &self.model, from, to, b))
    }

    /// One instance from `seed` with `goals_per_robot` goals each. Starts
    /// are pairwise disjoint, as are first goals; later goals only avoid
    /// obstacles.
    pub fn instance(&self, n: usize, goals_per_robot: usize, seed: u64) -> Result<Instance> {
        let (map, model, disc) = (&self.map, &self.model, &self.disc);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = random_workspace(&mut rng, map)?;
        let mut starts = place(&mut rng, n, &ws, map, model, disc)?;
        let mut firsts = place(&mut rng, n, &ws, map, model, disc)?;
        for i in 0..n {
            let mut redraws = 0;
            while !self.ok(&ws, &starts[i], &firsts[i])
                || (goals_per_robot > 1 && !self.ok(&ws, &firsts[i], &starts[i]))
            {
                redraws += 1;
                if redraws > MAX_REDRAWS {
                    return Err(Error::InvalidInput(format!("no reachable goal for robot {i}")));
                }
                let others = |v: &[State]| -> Vec<OrientedBox> {
                    v.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, s)| footprint(s, &model.shape))
                        .collect()
                };
                starts[i] = place_one(&mut rng, &others(&starts), &ws, map, model, disc)?;
                firsts[i] = place_one(&mut rng, &others(&firsts), &ws, map, model, disc)?;
            }
        }
        let mut goals: Vec<Vec<State>> = firsts.into_iter().map(|g| vec![g]).collect();
        for queue in goals.iter_mut() {
            while queue.len() < goals_per_robot.max(1) {
                let prev = *queue.last().expect("queue starts non-empty");
                let mut redraws = 0;
                loop {
                    let g = place_one(&mut rng, &[], &ws, map, model, disc)?;
                    // Shots can enter poses that primitives cannot leave.
                    if self.ok(&ws, &prev, &g) && self.ok(&ws, &g, &prev) {
                        queue.push(g);
                        break;
                    }
                    redraws += 1;
                    if redraws > MAX_REDRAWS {
                        return Err(Error::InvalidInput("no reachable follow-up goal".into()));
                    }
                }
            }
        }
        Ok(Instance {
            name: format!("seed{seed}"),
            workspace: ws,
            model: *model,
            disc: *disc,
            starts,
            goals,
            seed,
        })
    }

    /// `count` static instances seeded `seed, seed + 1, ...`.
    pub fn batch(&self, n: usize, count: usize, seed: u64) -> Result<Vec<Instance>> {
        (0..count as u64)
            .map(|k| {
                let mut inst = self.instance(n, 1, seed.wrapping_add(k))?;
                inst.name = format!("inst{k:03}");
                Ok(inst)
            })
            .collect()
    }
}

/// One instance with the default generator.
pub fn generate_instance(
    map: &MapSpec,
    n: usize,
    goals_per_robot: usize,
    seed: u64,
    model: &MotionModel,
    disc: &DiscretizationParams,
) -> Result<Instance> {
    Generator::new(*map, *model, *disc).instance(n, goals_per_robot, seed)
}

/// `count` static instances seeded `seed, seed + 1, ...` with the default
/// generator.
pub fn generate_instances(
    map: &MapSpec,
    n: usize,
    count: usize,
    seed: u64,
    model: &MotionModel,
    disc: &DiscretizationParams,
) -> Result<Vec<Instance>> {
    Generator::new(*map, *model, *disc).batch(n, count, seed)
}
