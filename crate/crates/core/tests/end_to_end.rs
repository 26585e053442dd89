use carplan::eccr::EccrConfig;
use carplan::geometry::DiscretizationParams;
use carplan::io::{read_scenario, read_trajectories, scenario_to_json, write_scenario, write_trajectories};
use carplan::pbcr::{PbcrConfig, PbcrVariant};
use carplan::primitives::MotionModel;
use carplan::sim::{generate_instance, run_lifelong, run_static, Limits, MapSpec, PlannerSpec};
use carplan::validate::{validate, ValidateOptions};
use proptest::prelude::*;

fn planners() -> [PlannerSpec; 3] {
    [
        PlannerSpec::Pbcr(PbcrConfig::default()),
        PlannerSpec::Pbcr(PbcrConfig {
            variant: PbcrVariant::V0,
            ..Default::default()
        }),
        PlannerSpec::Eccr(EccrConfig::default()),
    ]
}

#[test]
fn files_round_trip_through_disk() {
    let dir = std::env::temp_dir().join(format!("carplan-e2e-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model = MotionModel::default();
    let inst = generate_instance(&"40x40:6".parse().unwrap(), 5, 1, 31, &model, &DiscretizationParams::default()).unwrap();
    let sp = dir.join("scenario.json");
    write_scenario(&sp, &inst).unwrap();
    let back = read_scenario(&sp, &model).unwrap();
    assert_eq!(scenario_to_json(&back), scenario_to_json(&inst));
    assert_eq!(back.starts, inst.starts);
    assert_eq!(back.goals, inst.goals);
    for spec in planners() {
        let out = run_static(&back, &spec, &Limits::default()).unwrap();
        let tp = dir.join("traj.csv");
        write_trajectories(&tp, &out.trajectories).unwrap();
        let trajs = read_trajectories(&tp, &model).unwrap();
        assert_eq!(trajs.len(), out.trajectories.len());
        for (a, b) in trajs.iter().zip(&out.trajectories) {
            assert_eq!(a.steps.len(), b.steps.len());
            assert!(a.end().approx_eq(&b.end(), 1e-9));
            assert!((a.length() - b.length()).abs() < 1e-9);
        }
        let opts = ValidateOptions {
            check_goals: out.metrics.success,
            ..Default::default()
        };
        assert!(validate(&back, &trajs, &opts).is_clean(), "{spec}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn straight_single_robot_makespan() {
    use carplan::geometry::{State, Workspace};
    let inst = carplan::sim::Instance {
        name: "line".into(),
        workspace: Workspace::empty(40.0, 20.0).unwrap(),
        model: MotionModel::default(),
        disc: Default::default(),
        starts: vec![State::new(5.0, 10.0, 0.0)],
        goals: vec![vec![State::new(15.0, 10.0, 0.0)]],
        seed: 0,
    };
    for spec in planners() {
        let out = run_static(&inst, &spec, &Limits::default()).unwrap();
        assert!(out.metrics.success);
        assert!((out.metrics.makespan - 5.0).abs() < 1e-9, "{spec}: {}", out.metrics.makespan);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn metric_identities(seed in 0u64..1000, n in 1usize..5, which in 0usize..3, lifelong in any::<bool>()) {
        let model = MotionModel::default();
        let map: MapSpec = "30x30:3".parse().unwrap();
        let goals = if lifelong { 3 } else { 1 };
        let inst = generate_instance(&map, n, goals, seed, &model, &DiscretizationParams::default()).unwrap();
        let limits = Limits { time_limit: Some(10.0), max_steps: 120, ..Default::default() };
        let spec = planners()[which];
        let out = if lifelong { run_lifelong(&inst, &spec, &limits) } else { run_static(&inst, &spec, &limits) }.unwrap();
        let m = &out.metrics;
        let lens: Vec<f64> = out.trajectories.iter().map(|t| t.length()).collect();
        prop_assert_eq!(m.flowtime, lens.iter().sum::<f64>() / model.kin.u_m + 0.0);
        prop_assert!(m.flowtime >= m.makespan);
        let arrived = m.arrival_fraction * n as f64;
        prop_assert!((arrived - arrived.round()).abs() < 1e-9);
        if !lifelong && !out.trajectories.is_empty() {
            prop_assert_eq!(m.arrival_fraction == 1.0, m.success);
        }
    }
}
