//! Hand-built scenarios and a numerical integrator shared by the
//! integration tests.

use std::f64::consts::PI;

use carplan::geometry::{State, Workspace};
use carplan::primitives::{KinematicParams, MotionModel, Primitive};
use carplan::sim::Instance;

pub fn instance(name: &str, ws: Workspace, starts: Vec<State>, goals: Vec<State>) -> Instance {
    Instance {
        name: name.into(),
        workspace: ws,
        model: MotionModel::default(),
        disc: Default::default(),
        starts,
        goals: goals.into_iter().map(|g| vec![g]).collect(),
        seed: 0,
    }
}

/// Two robots driving head-on along a 60x10 corridor toward goals that lie
/// past each other.
pub fn corridor() -> Instance {
    instance(
        "corridor",
        Workspace::empty(60.0, 10.0).unwrap(),
        vec![State::new(10.0, 5.0, 0.0), State::new(40.0, 5.0, PI)],
        vec![State::new(30.0, 5.0, 0.0), State::new(20.0, 5.0, PI)],
    )
}

/// RK4 on the bicycle model `x' = u cos th, y' = u sin th, th' = u tan(phi) / l_b`
/// over one step, with `phi` chosen so that the turning radius is `r_m`.
pub fn rk4_primitive(s: &State, p: Primitive, k: &KinematicParams, wheelbase: f64, n: usize) -> State {
    let (u, phi) = match p {
        Primitive::FL => (k.u_m, (wheelbase / k.r_m).atan()),
        Primitive::FS => (k.u_m, 0.0),
        Primitive::FR => (k.u_m, -(wheelbase / k.r_m).atan()),
        Primitive::BL => (-k.u_m, (wheelbase / k.r_m).atan()),
        Primitive::BS => (-k.u_m, 0.0),
        Primitive::BR => (-k.u_m, -(wheelbase / k.r_m).atan()),
        Primitive::Wait => (0.0, 0.0),
        Primitive::GM => panic!("GM has no fixed controls"),
    };
    let f = |v: [f64; 3]| [u * v[2].cos(), u * v[2].sin(), u * phi.tan() / wheelbase];
    let h = k.dt / n as f64;
    let mut v = [s.x, s.y, s.theta];
    for _ in 0..n {
        let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
        let k1 = f(v);
        let k2 = f(add(v, k1, h / 2.0));
        let k3 = f(add(v, k2, h / 2.0));
        let k4 = f(add(v, k3, h));
        for i in 0..3 {
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    State::new(v[0], v[1], v[2])
}
