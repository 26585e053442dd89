//! Mutated trajectories against the validator, with overlap measured by a
//! separate polygon clipper.

use carplan::geometry::{footprint, DiscretizationParams, State};
use carplan::hybrid_astar::{plan_vanilla, SearchConfig};
use carplan::primitives::{MotionModel, Primitive, Step};
use carplan::sim::{generate_instance, Instance, MapSpec, Trajectory};
use carplan::validate::{validate, ValidateOptions, Violation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type P = (f64, f64);

fn cross(o: P, a: P, b: P) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn ccw(mut p: Vec<P>) -> Vec<P> {
    if signed_area(&p) < 0.0 {
        p.reverse();
    }
    p
}

fn signed_area(p: &[P]) -> f64 {
    (0..p.len()).map(|i| {
        let (a, b) = (p[i], p[(i + 1) % p.len()]);
        a.0 * b.1 - b.0 * a.1
    }).sum::<f64>() / 2.0
}

/// Sutherland-Hodgman clip of a convex polygon by another.
fn overlap_area(subject: &[P], clip: &[P]) -> f64 {
    let mut out = ccw(subject.to_vec());
    let clip = ccw(clip.to_vec());
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (dp, dq) = (cross(a, b, p), cross(a, b, q));
            if dp >= 0.0 {
                out.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
        if out.is_empty() {
            return 0.0;
        }
    }
    signed_area(&out).abs()
}

fn poses(tr: &Trajectory) -> Vec<State> {
    let mut v = vec![tr.start];
    for s in &tr.steps {
        v.extend_from_slice(&s.samples[1..]);
    }
    v
}

fn max_overlap(inst: &Instance, trajs: &[Trajectory]) -> f64 {
    let seqs: Vec<Vec<State>> = trajs.iter().map(poses).collect();
    let horizon = seqs.iter().map(Vec::len).max().unwrap_or(0);
    let corners = |s: &State| footprint(s, &inst.model.shape).corners().to_vec();
    let mut worst = 0.0f64;
    for k in 0..horizon {
        for i in 0..seqs.len() {
            for j in i + 1..seqs.len() {
                let a = seqs[i][k.min(seqs[i].len() - 1)];
                let b = seqs[j][k.min(seqs[j].len() - 1)];
                if a.distance(&b) < 4.0 {
                    worst = worst.max(overlap_area(&corners(&a), &corners(&b)));
                }
            }
        }
    }
    worst
}

/// Independently planned paths for every robot, ignoring each other.
fn selfish(inst: &Instance) -> Vec<Trajectory> {
    let m = &inst.model;
    (0..inst.n())
        .map(|i| {
            let plan = plan_vanilla(&inst.starts[i], &inst.goals[i][0], &inst.workspace, m, &SearchConfig::default())
                .unwrap()
                .plan
                .unwrap();
            Trajectory {
                robot: i,
                start: inst.starts[i],
                steps: plan.steps,
            }
        })
        .collect()
}

#[test]
fn overlaps_from_delayed_departures_are_caught() {
    let model = MotionModel::default();
    let map: MapSpec = "22x22:2".parse().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut colliding, mut mutations) = (0, 0);
    for seed in 0..25 {
        let inst = generate_instance(&map, 3, 1, 700 + seed, &model, &DiscretizationParams::default()).unwrap();
        let base = selfish(&inst);
        for _ in 0..20 {
            let mut trajs = base.clone();
            for tr in &mut trajs {
                let k = rng.gen_range(0..8);
                let waits = std::iter::repeat_n(Step::wait(tr.start, model.n_sub), k);
                tr.steps.splice(0..0, waits);
            }
            let report = validate(&inst, &trajs, &ValidateOptions::default());
            let flagged = report.violations.iter().any(|v| matches!(v, Violation::RobotCollision { .. }));
            let area = max_overlap(&inst, &trajs);
            mutations += 1;
            if area >= 1e-3 {
                colliding += 1;
                assert!(flagged, "seed {seed}: overlap {area} not reported");
            }
            if flagged {
                assert!(area > 0.0, "seed {seed}: spurious {report}");
            }
            assert!(
                report.violations.iter().all(|v| matches!(v, Violation::RobotCollision { .. })),
                "seed {seed}: {report}"
            );
        }
    }
    assert_eq!(mutations, 500);
    assert!(colliding > 50, "only {colliding} colliding mutations");
}

#[test]
fn perturbed_steps_are_caught() {
    let model = MotionModel::default();
    let map: MapSpec = "40x40:6".parse().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    for seed in 0..50 {
        let inst = generate_instance(&map, 1, 1, 800 + seed, &model, &DiscretizationParams::default()).unwrap();
        let base = selfish(&inst);
        assert!(validate(&inst, &base, &ValidateOptions::default()).is_clean());
        for _ in 0..10 {
            let mut trajs = base.clone();
            let steps = &mut trajs[0].steps;
            let t = rng.gen_range(0..steps.len());
            let mag = rng.gen_range(1e-3..0.5);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = &mut steps[t];
            // A GM segment may coincide with a full constant-control step, so
            // relabelling is only tried on the others.
            let kind = rng.gen_range(0..if s.primitive == Primitive::GM { 2 } else { 3 });
            match kind {
                0 => s.to = State::new(s.to.x + mag * ang.cos(), s.to.y + mag * ang.sin(), s.to.theta),
                1 => s.to = State::new(s.to.x, s.to.y, s.to.theta + mag),
                _ => {
                    s.primitive = match s.primitive {
                        Primitive::FL => Primitive::FR,
                        Primitive::FR => Primitive::FL,
                        Primitive::BS => Primitive::FS,
                        _ => Primitive::BS,
                    }
                }
            }
            let report = validate(&inst, &trajs, &ValidateOptions::default());
            assert!(
                report.violations.iter().any(|v| matches!(v, Violation::Kinematics { .. } | Violation::Discontinuity { .. } | Violation::GoalMismatch { .. })),
                "seed {seed} step {t} kind {kind}: mutation passed"
            );
            done += 1;
        }
    }
    assert_eq!(done, 500);
}
