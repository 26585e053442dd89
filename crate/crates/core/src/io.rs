//! File formats: JSON scenarios, trajectory and benchmark CSV, and the TOML
//! configuration. Angles are degrees in every file and radians in memory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eccr::EccrConfig;
use crate::error::{Error, Result};
use crate::geometry::{CircleObstacle, DiscretizationParams, RobotShape, State, Workspace};
use crate::heuristics::QWeights;
use crate::hybrid_astar::SearchConfig;
use crate::pbcr::{PbcrConfig, PbcrVariant};
use crate::primitives::{CostParams, KinematicParams, MotionModel, Primitive, Step, DEFAULT_N_SUB};
use crate::sim::{Instance, Limits, Metrics, Trajectory};

/// Environment variable naming a configuration file.
pub const CONFIG_ENV: &str = "CARPLAN_CONFIG";

/// Degrees that convert back to exactly `rad`, when such a value lies within
/// a few ulps of the plain conversion.
pub fn to_degrees_exact(rad: f64) -> f64 {
    let d = rad.to_degrees();
    if !d.is_finite() || d.to_radians() == rad {
        return d;
    }
    let mut lo = d;
    let mut hi = d;
    for _ in 0..16 {
        lo = lo.next_down();
        hi = hi.next_up();
        if hi.to_radians() == rad {
            return hi;
        }
        if lo.to_radians() == rad {
            return lo;
        }
    }
    d
}

fn pose_in(p: [f64; 3]) -> State {
    State::new(p[0], p[1], p[2].to_radians())
}

fn pose_out(s: &State) -> [f64; 3] {
    [s.x, s.y, to_degrees_exact(s.theta)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSize {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicsFile {
    pub u_m: f64,
    /// Degrees.
    pub phi_m: f64,
    pub r_m: f64,
    /// Derived from `r_m * dtheta / u_m` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationFile {
    pub dx: f64,
    pub dy: f64,
    /// Degrees.
    pub dtheta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotEntry {
    pub start: [f64; 3],
    pub goals: Vec<[f64; 3]>,
}

/// On-disk scenario. One goal per robot is a static problem, several make
/// it lifelong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub map: MapSize,
    #[serde(default)]
    pub obstacles: Vec<CircleObstacle>,
    pub robot: RobotShape,
    pub kinematics: KinematicsFile,
    pub discretization: DiscretizationFile,
    pub robots: Vec<RobotEntry>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let k = &inst.model.kin;
        Self {
            name: Some(inst.name.clone()),
            map: MapSize {
                width: inst.workspace.width(),
                height: inst.workspace.height(),
            },
            obstacles: inst.workspace.obstacles().to_vec(),
            robot: inst.model.shape,
            kinematics: KinematicsFile {
                u_m: k.u_m,
                phi_m: to_degrees_exact(k.phi_m),
                r_m: k.r_m,
                dt: Some(k.dt),
            },
            discretization: DiscretizationFile {
                dx: inst.disc.dx,
                dy: inst.disc.dy,
                dtheta: to_degrees_exact(inst.disc.dtheta),
            },
            robots: inst
                .starts
                .iter()
                .zip(&inst.goals)
                .map(|(s, g)| RobotEntry {
                    start: pose_out(s),
                    goals: g.iter().map(pose_out).collect(),
                })
                .collect(),
            seed: inst.seed,
        }
    }

    /// Builds and checks the instance. Costs and sub-sampling come from
    /// `base`, everything else from the file.
    pub fn to_instance(&self, base: &MotionModel) -> Result<Instance> {
        let disc = DiscretizationParams::new(
            self.discretization.dx,
            self.discretization.dy,
            self.discretization.dtheta.to_radians(),
        )?;
        let k = &self.kinematics;
        let kin = match k.dt {
            Some(dt) => KinematicParams::new(k.u_m, k.phi_m.to_radians(), k.r_m, dt)?,
            None => KinematicParams::with_heading_step(k.u_m, k.phi_m.to_radians(), k.r_m, disc.dtheta)?,
        };
        let shape = RobotShape::new(self.robot.length, self.robot.width, self.robot.wheelbase)?;
        let workspace = Workspace::new(self.map.width, self.map.height, self.obstacles.clone())?;
        let inst = Instance {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            workspace,
            model: MotionModel { shape, kin, ..*base },
            disc,
            starts: self.robots.iter().map(|r| pose_in(r.start)).collect(),
            goals: self
                .robots
                .iter()
                .map(|r| r.goals.iter().copied().map(pose_in).collect())
                .collect(),
            seed: self.seed,
        };
        inst.check()?;
        Ok(inst)
    }
}

pub fn scenario_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_instance(inst)).expect("scenario serializes")
}

pub fn scenario_from_json(text: &str, base: &MotionModel) -> Result<Instance> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_instance(base)
}

pub fn read_scenario(path: &Path, base: &MotionModel) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    scenario_from_json(&text, base).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_scenario(path: &Path, inst: &Instance) -> Result<()> {
    std::fs::write(path, scenario_to_json(inst) + "\n")?;
    Ok(())
}

/// One row of a trajectory file. Row `t = 0` holds the start and the label
/// `START`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub robot: usize,
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta_deg: f64,
    pub primitive: String,
    pub arc_len: f64,
}

pub const START_LABEL: &str = "START";

pub fn trajectories_to_csv(trajs: &[Trajectory]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for tr in trajs {
        let start = TrajectoryRecord {
            robot: tr.robot,
            t: 0,
            x: tr.start.x,
            y: tr.start.y,
            theta_deg: to_degrees_exact(tr.start.theta),
            primitive: START_LABEL.into(),
            arc_len: 0.0,
        };
        w.serialize(start).expect("in-memory write");
        for (k, st) in tr.steps.iter().enumerate() {
            w.serialize(TrajectoryRecord {
                robot: tr.robot,
                t: k + 1,
                x: st.to.x,
                y: st.to.y,
                theta_deg: to_degrees_exact(st.to.theta),
                primitive: st.primitive.as_str().into(),
                arc_len: st.arc_len,
            })
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

/// Rebuilds trajectories from their records. Sub-samples are recomputed
/// from the labels with `model`; a labelled pose that the label cannot
/// produce is kept as written, so the validator still sees it.
pub fn trajectories_from_csv(text: &str, model: &MotionModel) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<Trajectory> = Vec::new();
    for (line, rec) in rdr.deserialize::<TrajectoryRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("trajectory row {}: {e}", line + 2)))?;
        let pose = State::new(rec.x, rec.y, rec.theta_deg.to_radians());
        if rec.primitive == START_LABEL {
            if rec.t != 0 {
                return Err(Error::Parse(format!("robot {} starts at t = {}", rec.robot, rec.t)));
            }
            out.push(Trajectory::new(rec.robot, pose));
            continue;
        }
        let tr = out
            .last_mut()
            .filter(|tr| tr.robot == rec.robot)
            .ok_or_else(|| Error::Parse(format!("robot {} has no START row", rec.robot)))?;
        if rec.t != tr.steps.len() + 1 {
            return Err(Error::Parse(format!("robot {} skips to t = {}", rec.robot, rec.t)));
        }
        let from = tr.end();
        let p: Primitive = rec.primitive.parse()?;
        let mut step = match p {
            Primitive::Wait => Step::wait(from, model.n_sub),
            Primitive::GM => Step::greedy(from, pose, &model.kin, model.n_sub)
                .unwrap_or_else(|| straight_line(from, pose, model.n_sub)),
            _ => Step::primitive(from, p, &model.kin, model.n_sub),
        };
        step.primitive = p;
        step.to = pose;
        step.arc_len = rec.arc_len;
        if let Some(last) = step.samples.last_mut() {
            *last = pose;
        }
        tr.steps.push(step);
    }
    Ok(out)
}

fn straight_line(from: State, to: State, n_sub: usize) -> Step {
    let n = n_sub + 1;
    let samples = (0..=n)
        .map(|k| {
            let a = k as f64 / n as f64;
            State::new(from.x + a * (to.x - from.x), from.y + a * (to.y - from.y), from.theta)
        })
        .collect();
    Step {
        primitive: Primitive::GM,
        from,
        to,
        samples,
        arc_len: from.distance(&to),
    }
}

pub fn read_trajectories(path: &Path, model: &MotionModel) -> Result<Vec<Trajectory>> {
    trajectories_from_csv(&std::fs::read_to_string(path)?, model)
}

pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    std::fs::write(path, trajectories_to_csv(trajs))?;
    Ok(())
}

/// Header of benchmark CSV files.
pub const BENCH_HEADER: [&str; 12] = [
    "instance",
    "algo",
    "n",
    "success",
    "runtime_s",
    "makespan",
    "makespan_steps",
    "flowtime",
    "arrival_fraction",
    "throughput",
    "hl_exp",
    "ll_exp",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub algo: String,
    pub n: usize,
    pub metrics: Metrics,
}

impl BenchRow {
    fn fields(&self, runtime: bool) -> [String; 12] {
        let m = &self.metrics;
        [
            self.instance.clone(),
            self.algo.clone(),
            self.n.to_string(),
            m.success.to_string(),
            if runtime { format!("{:.6}", m.runtime_s) } else { String::new() },
            m.makespan.to_string(),
            m.makespan_steps.to_string(),
            m.flowtime.to_string(),
            m.arrival_fraction.to_string(),
            m.throughput.to_string(),
            m.hl_expansions.to_string(),
            m.ll_expansions.to_string(),
        ]
    }
}

/// Benchmark table followed by one `summary` row per planner: success is
/// the success rate, makespan and flowtime are means over successful runs,
/// and the other numeric columns are means over all runs. With `runtime`
/// false the runtime column is left empty, which makes output
/// reproducible.
pub fn bench_csv(rows: &[BenchRow], runtime: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields(runtime)).expect("in-memory write");
    }
    let mut algos: Vec<&str> = Vec::new();
    for r in rows {
        if !algos.contains(&r.algo.as_str()) {
            algos.push(&r.algo);
        }
    }
    for algo in algos {
        let group: Vec<&Metrics> = rows.iter().filter(|r| r.algo == algo).map(|r| &r.metrics).collect();
        w.write_record(summary(algo, &group, runtime)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

fn summary(algo: &str, runs: &[&Metrics], runtime: bool) -> [String; 12] {
    let count = runs.len() as f64;
    let mean = |f: &dyn Fn(&Metrics) -> f64| (runs.iter().map(|m| f(m)).sum::<f64>() / count).to_string();
    let solved: Vec<&Metrics> = runs.iter().copied().filter(|m| m.success).collect();
    let solved_mean = |f: &dyn Fn(&Metrics) -> f64| {
        if solved.is_empty() {
            String::new()
        } else {
            (solved.iter().map(|m| f(m)).sum::<f64>() / solved.len() as f64).to_string()
        }
    };
    [
        "summary".to_string(),
        algo.to_string(),
        runs.len().to_string(),
        (solved.len() as f64 / count).to_string(),
        if runtime {
            format!("{:.6}", runs.iter().map(|m| m.runtime_s).sum::<f64>() / count)
        } else {
            String::new()
        },
        solved_mean(&|m| m.makespan),
        mean(&|m| m.makespan_steps as f64),
        solved_mean(&|m| m.flowtime),
        mean(&|m| m.arrival_fraction),
        mean(&|m| m.throughput as f64),
        mean(&|m| m.hl_expansions as f64),
        mean(&|m| m.ll_expansions as f64),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsConfig {
    pub u_m: f64,
    /// Degrees.
    pub phi_m: f64,
    pub r_m: f64,
    /// Derived from `r_m * dtheta / u_m` when absent.
    pub dt: Option<f64>,
    /// Interior samples per step for swept collision checks.
    pub n_sub: usize,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            u_m: 2.0,
            phi_m: 40.1,
            r_m: 3.0,
            dt: None,
            n_sub: DEFAULT_N_SUB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub dx: f64,
    pub dy: f64,
    /// Degrees.
    pub dtheta: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            dx: 2.0,
            dy: 2.0,
            dtheta: 40.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub bin_xy: f64,
    /// Degrees.
    pub bin_theta: f64,
    pub node_budget: usize,
    pub shot_distance: f64,
    pub shot_every: usize,
    pub holo_cell: f64,
    pub wait_cost: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self::from(SearchConfig::default())
    }
}

impl From<SearchConfig> for SearchSection {
    fn from(c: SearchConfig) -> Self {
        Self {
            bin_xy: c.bin_xy,
            bin_theta: to_degrees_exact(c.bin_theta),
            node_budget: c.node_budget,
            shot_distance: c.shot_distance,
            shot_every: c.shot_every,
            holo_cell: c.holo_cell,
            wait_cost: c.wait_cost,
        }
    }
}

impl SearchSection {
    pub fn to_search(&self) -> SearchConfig {
        SearchConfig {
            bin_xy: self.bin_xy,
            bin_theta: self.bin_theta.to_radians(),
            node_budget: self.node_budget,
            shot_distance: self.shot_distance,
            shot_every: self.shot_every,
            holo_cell: self.holo_cell,
            wait_cost: self.wait_cost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbcrSection {
    pub variant: PbcrVariant,
    pub weights: QWeights,
    pub v0_greedy_bonus: bool,
    pub count_waits: bool,
    pub rejoin_lookahead: usize,
    pub search_cooldown: usize,
    pub search: SearchSection,
}

impl Default for PbcrSection {
    fn default() -> Self {
        let c = PbcrConfig::default();
        Self {
            variant: c.variant,
            weights: c.weights,
            v0_greedy_bonus: c.v0_greedy_bonus,
            count_waits: c.count_waits,
            rejoin_lookahead: c.rejoin_lookahead,
            search_cooldown: c.search_cooldown,
            search: c.search.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccrSection {
    pub w: f64,
    pub high_level_focal: bool,
    pub search: SearchSection,
}

impl Default for EccrSection {
    fn default() -> Self {
        let c = EccrConfig::default();
        Self {
            w: c.w,
            high_level_focal: c.high_level_focal,
            search: c.search.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub time_limit: Option<f64>,
    pub max_steps: usize,
    pub window: usize,
    pub replan_time_limit: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        let l = Limits::default();
        Self {
            time_limit: l.time_limit,
            max_steps: l.max_steps,
            window: l.window,
            replan_time_limit: l.replan_time_limit,
        }
    }
}

/// Every tunable, defaulting to the published experimental setup. Missing
/// keys keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: RobotShape,
    pub kinematics: KinematicsConfig,
    pub discretization: DiscretizationConfig,
    pub costs: CostParams,
    pub pbcr: PbcrSection,
    pub eccr: EccrSection,
    pub run: RunSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reads `path`, else the file named by `CARPLAN_CONFIG`, else returns
    /// the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let chosen: Option<PathBuf> = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match chosen {
            Some(p) => {
                let text = std::fs::read_to_string(&p)?;
                Self::from_toml(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
            }
            None => Ok(Self::default()),
        }
    }

    pub fn disc(&self) -> Result<DiscretizationParams> {
        let d = &self.discretization;
        DiscretizationParams::new(d.dx, d.dy, d.dtheta.to_radians())
    }

    pub fn model(&self) -> Result<MotionModel> {
        let k = &self.kinematics;
        let dtheta = self.discretization.dtheta.to_radians();
        let kin = match k.dt {
            Some(dt) => KinematicParams::new(k.u_m, k.phi_m.to_radians(), k.r_m, dt)?,
            None => KinematicParams::with_heading_step(k.u_m, k.phi_m.to_radians(), k.r_m, dtheta)?,
        };
        let shape = RobotShape::new(self.robot.length, self.robot.width, self.robot.wheelbase)?;
        Ok(MotionModel {
            shape,
            kin,
            costs: self.costs,
            n_sub: k.n_sub,
        })
    }

    pub fn pbcr(&self) -> Result<PbcrConfig> {
        let p = &self.pbcr;
        Ok(PbcrConfig {
            variant: p.variant,
            weights: p.weights,
            disc: self.disc()?,
            search: p.search.to_search(),
            v0_greedy_bonus: p.v0_greedy_bonus,
            count_waits: p.count_waits,
            rejoin_lookahead: p.rejoin_lookahead,
            search_cooldown: p.search_cooldown,
        })
    }

    pub fn eccr(&self) -> EccrConfig {
        EccrConfig {
            w: self.eccr.w,
            high_level_focal: self.eccr.high_level_focal,
            search: self.eccr.search.to_search(),
        }
    }

    pub fn limits(&self) -> Limits {
        Limits {
            time_limit: self.run.time_limit,
            max_steps: self.run.max_steps,
            window: self.run.window,
            replan_time_limit: self.run.replan_time_limit,
        }
    }
}
