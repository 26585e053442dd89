//! Box overlap checked against polygon geometry written from scratch and
//! against dense point sampling.

use std::f64::consts::PI;

use carplan::geometry::{boxes_intersect, footprint, OrientedBox, RobotShape, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type P = (f64, f64);

fn cross(o: P, a: P, b: P) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn inside(poly: &[P; 4], p: P) -> bool {
    let signs: Vec<f64> = (0..4).map(|i| cross(poly[i], poly[(i + 1) % 4], p)).collect();
    signs.iter().all(|s| *s >= 0.0) || signs.iter().all(|s| *s <= 0.0)
}

fn segments_cross(a: P, b: P, c: P, d: P) -> bool {
    let (d1, d2) = (cross(a, b, c), cross(a, b, d));
    let (d3, d4) = (cross(c, d, a), cross(c, d, b));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

fn seg_dist(p: P, a: P, b: P) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn polygons_meet(a: &[P; 4], b: &[P; 4]) -> bool {
    a.iter().any(|p| inside(b, *p))
        || b.iter().any(|p| inside(a, *p))
        || (0..4).any(|i| (0..4).any(|j| segments_cross(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4])))
}

/// Boundary gap or penetration scale between two convex quads.
fn boundary_distance(a: &[P; 4], b: &[P; 4]) -> f64 {
    let mut d = f64::INFINITY;
    for (x, y) in [(a, b), (b, a)] {
        for p in x {
            for j in 0..4 {
                d = d.min(seg_dist(*p, y[j], y[(j + 1) % 4]));
            }
        }
    }
    d
}

fn sampled_overlap(a: &OrientedBox, b: &[P; 4], n: usize) -> bool {
    let (c, s) = (a.heading.cos(), a.heading.sin());
    for i in 0..=n {
        for j in 0..=n {
            let u = a.half_length * (2.0 * i as f64 / n as f64 - 1.0);
            let v = a.half_width * (2.0 * j as f64 / n as f64 - 1.0);
            let p = (a.center.0 + u * c - v * s, a.center.1 + u * s + v * c);
            if inside(b, p) {
                return true;
            }
        }
    }
    false
}

fn random_box(rng: &mut ChaCha8Rng) -> OrientedBox {
    let len = rng.gen_range(1.0..4.0);
    let shape = RobotShape::new(len, rng.gen_range(0.5..3.0), rng.gen_range(0.0..len)).unwrap();
    let s = State::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-PI..PI));
    footprint(&s, &shape)
}

#[test]
fn separating_axes_match_exact_polygon_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut hits, mut tangent) = (0, 0);
    for k in 0..1000 {
        let (a, b) = (random_box(&mut rng), random_box(&mut rng));
        let (ca, cb) = (a.corners(), b.corners());
        let sat = boxes_intersect(&a, &b);
        let exact = polygons_meet(&ca, &cb);
        hits += usize::from(sat);
        if sat != exact {
            tangent += 1;
            assert!(boundary_distance(&ca, &cb) < 1e-6, "pair {k}: sat {sat} exact {exact} {a:?} {b:?}");
        }
        // Any sampled point inside both boxes is a witness of overlap.
        if sampled_overlap(&a, &cb, 100) || sampled_overlap(&b, &ca, 100) {
            assert!(sat, "pair {k}: sampling found overlap that SAT missed");
        }
    }
    assert!(hits > 200 && hits < 900, "degenerate sample: {hits} overlapping pairs");
    assert!(tangent < 5);
}

#[test]
fn grazing_contact_counts_as_collision() {
    let shape = RobotShape::new(3.0, 2.0, 2.0).unwrap();
    let a = footprint(&State::new(0.0, 0.0, 0.0), &shape);
    let b = footprint(&State::new(0.0, 2.0, 0.0), &shape);
    let c = footprint(&State::new(0.0, 2.0 + 1e-9, 0.0), &shape);
    assert!(boxes_intersect(&a, &b));
    assert!(!boxes_intersect(&a, &c));
}
