//! WebAssembly bindings for the browser demo in `www/`. Results cross the
//! boundary as JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use carplan::geometry::{footprint, DiscretizationParams, State};
use carplan::hybrid_astar::{plan_vanilla, SearchConfig};
use carplan::pbcr::{Pbcr, PbcrConfig, PbcrVariant};
use carplan::primitives::MotionModel;
use carplan::reeds_shepp::rs_shortest;
use carplan::sim::{Generator, Instance, MapSpec};

#[derive(Serialize)]
struct RsView {
    length: f64,
    word: String,
    cusps: usize,
    points: Vec<[f64; 3]>,
}

fn pose(x: f64, y: f64, deg: f64) -> State {
    State::new(x, y, deg.to_radians())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view serializes")
}

/// Shortest Reeds-Shepp path between two poses given in degrees.
pub fn reeds_shepp_json(from: [f64; 3], to: [f64; 3], radius: f64) -> Result<String, String> {
    if !(radius > 0.0) {
        return Err(format!("turning radius must be positive, got {radius}"));
    }
    let p = rs_shortest(&pose(from[0], from[1], from[2]), &pose(to[0], to[1], to[2]), radius);
    let spacing = (p.length() / 200.0).max(0.05);
    Ok(to_json(&RsView {
        length: p.length(),
        word: p.word(),
        cusps: p.cusps(),
        points: p.sample_spaced(spacing).iter().map(|s| [s.x, s.y, s.theta]).collect(),
    }))
}

#[wasm_bindgen]
pub fn reeds_shepp(x0: f64, y0: f64, th0_deg: f64, x1: f64, y1: f64, th1_deg: f64, radius: f64) -> Result<String, JsError> {
    reeds_shepp_json([x0, y0, th0_deg], [x1, y1, th1_deg], radius).map_err(|e| JsError::new(&e))
}

#[derive(Serialize)]
struct SceneView {
    width: f64,
    height: f64,
    obstacles: Vec<[f64; 3]>,
    goals: Vec<[[f64; 2]; 4]>,
}

#[derive(Serialize)]
struct RobotView {
    x: f64,
    y: f64,
    theta: f64,
    corners: [[f64; 2]; 4],
    at_goal: bool,
}

#[derive(Serialize)]
struct StepView {
    time: usize,
    done: bool,
    robots: Vec<RobotView>,
}

#[derive(Serialize)]
struct PlanView {
    found: bool,
    expansions: usize,
    length: f64,
    primitives: Vec<String>,
    points: Vec<[f64; 2]>,
}

fn corners(s: &State, m: &MotionModel) -> [[f64; 2]; 4] {
    footprint(s, &m.shape).corners().map(|(x, y)| [x, y])
}

/// A generated scene with a PBCR run that advances on request.
pub struct Session {
    inst: Instance,
    pbcr: Pbcr,
}

impl Session {
    pub fn new(width: f64, height: f64, obstacles: usize, robots: usize, seed: u64, variant: &str) -> Result<Self, String> {
        let model = MotionModel::default();
        let variant: PbcrVariant = variant.parse().map_err(|e| format!("{e}"))?;
        let map = MapSpec::new(width, height, obstacles);
        let inst = Generator::new(map, model, DiscretizationParams::default())
            .instance(robots, 1, seed)
            .map_err(|e| e.to_string())?;
        let cfg = PbcrConfig {
            variant,
            ..Default::default()
        };
        let pbcr = Pbcr::new(inst.workspace.clone(), model, cfg, &inst.starts, &inst.first_goals())
            .map_err(|e| e.to_string())?;
        Ok(Self { inst, pbcr })
    }

    pub fn scene_json(&self) -> String {
        let m = &self.inst.model;
        to_json(&SceneView {
            width: self.inst.workspace.width(),
            height: self.inst.workspace.height(),
            obstacles: self.inst.workspace.obstacles().iter().map(|o| [o.x, o.y, o.r]).collect(),
            goals: self.inst.first_goals().iter().map(|g| corners(g, m)).collect(),
        })
    }

    /// Advances up to `k` timesteps, stopping early once every robot is home.
    pub fn step_json(&mut self, k: usize) -> String {
        for _ in 0..k {
            if self.pbcr.all_at_goal() {
                break;
            }
            self.pbcr.step();
        }
        let m = *self.pbcr.model();
        to_json(&StepView {
            time: self.pbcr.time,
            done: self.pbcr.all_at_goal(),
            robots: self
                .pbcr
                .robots()
                .iter()
                .map(|r| RobotView {
                    x: r.current.x,
                    y: r.current.y,
                    theta: r.current.theta,
                    corners: corners(&r.current, &m),
                    at_goal: r.at_goal,
                })
                .collect(),
        })
    }

    /// Single-robot hybrid A* on the scene's map, ignoring the other robots.
    pub fn plan_json(&self, from: [f64; 3], to: [f64; 3]) -> Result<String, String> {
        let m = &self.inst.model;
        let cfg = SearchConfig::default();
        let (a, b) = (pose(from[0], from[1], from[2]), pose(to[0], to[1], to[2]));
        let out = plan_vanilla(&a, &b, &self.inst.workspace, m, &cfg).map_err(|e| e.to_string())?;
        let view = match out.plan {
            Some(p) => {
                let mut points = vec![[a.x, a.y]];
                for st in &p.steps {
                    points.extend(st.samples.iter().skip(1).map(|s| [s.x, s.y]));
                }
                PlanView {
                    found: true,
                    expansions: out.expansions,
                    length: p.length(),
                    primitives: p.steps.iter().map(|s| s.primitive.to_string()).collect(),
                    points,
                }
            }
            None => PlanView {
                found: false,
                expansions: out.expansions,
                length: 0.0,
                primitives: vec![],
                points: vec![],
            },
        };
        Ok(to_json(&view))
    }
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    /// `variant` is one of `pbcr-v0`, `pbcr-v1`, `pbcr-v2`.
    #[wasm_bindgen(constructor)]
    pub fn new(width: f64, height: f64, obstacles: u32, robots: u32, seed: u32, variant: &str) -> Result<Demo, JsError> {
        Session::new(width, height, obstacles as usize, robots as usize, seed as u64, variant)
            .map(|session| Demo { session })
            .map_err(|e| JsError::new(&e))
    }

    pub fn scene(&self) -> String {
        self.session.scene_json()
    }

    pub fn step(&mut self, k: u32) -> String {
        self.session.step_json(k as usize)
    }

    pub fn plan(&self, x0: f64, y0: f64, th0_deg: f64, x1: f64, y1: f64, th1_deg: f64) -> Result<String, JsError> {
        self.session
            .plan_json([x0, y0, th0_deg], [x1, y1, th1_deg])
            .map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn straight_rs_path() {
        let v = parse(&reeds_shepp_json([0.0, 0.0, 0.0], [10.0, 0.0, 0.0], 3.0).unwrap());
        assert!((v["length"].as_f64().unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(v["word"], "S+");
        assert!(reeds_shepp_json([0.0; 3], [1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn session_runs_to_completion() {
        let mut s = Session::new(30.0, 30.0, 3, 4, 1, "pbcr-v2").unwrap();
        let scene = parse(&s.scene_json());
        assert_eq!(scene["goals"].as_array().unwrap().len(), 4);
        let mut v = parse(&s.step_json(0));
        assert_eq!(v["time"], 0);
        for _ in 0..20 {
            v = parse(&s.step_json(25));
            if v["done"].as_bool().unwrap() {
                break;
            }
        }
        assert_eq!(v["done"], true);
        assert!(Session::new(30.0, 30.0, 3, 4, 1, "pbcr-v9").is_err());
    }

    #[test]
    fn planner_view() {
        let s = Session::new(40.0, 40.0, 0, 1, 2, "v1").unwrap();
        let v = parse(&s.plan_json([5.0, 5.0, 0.0], [30.0, 30.0, 90.0]).unwrap());
        assert_eq!(v["found"], true);
        assert!(v["length"].as_f64().unwrap() >= (25.0f64).hypot(25.0) - 1e-9);
        assert!(s.plan_json([-5.0, 5.0, 0.0], [30.0, 30.0, 0.0]).is_err());
    }
}
