//! Brute-force shortest-path oracle for bounded-curvature paths with
//! reversals. Every word of the sufficient family is written out and solved
//! numerically, sharing no code with the closed-form implementation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Seg {
    L,
    R,
    S,
}

#[derive(Clone, Copy, Debug)]
pub enum Param {
    Free(usize),
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct Word {
    pub segs: Vec<(Seg, f64, Param)>,
}

impl Word {
    pub fn name(&self) -> String {
        self.segs
            .iter()
            .map(|(k, s, _)| format!("{:?}{}", k, if *s > 0.0 { '+' } else { '-' }))
            .collect()
    }

    fn has_straight(&self) -> bool {
        self.segs.iter().any(|(k, _, _)| *k == Seg::S)
    }
}

fn base_words() -> Vec<Vec<(Seg, f64, Param)>> {
    use Param::*;
    use Seg::*;
    let h = Fixed(FRAC_PI_2);
    vec![
        vec![(L, 1., Free(0)), (S, 1., Free(1)), (L, 1., Free(2))],
        vec![(L, 1., Free(0)), (S, 1., Free(1)), (R, 1., Free(2))],
        vec![(L, 1., Free(0)), (R, -1., Free(1)), (L, 1., Free(2))],
        vec![(L, 1., Free(0)), (R, -1., Free(1)), (L, -1., Free(2))],
        vec![(L, 1., Free(0)), (R, 1., Free(1)), (L, -1., Free(2))],
        vec![(L, 1., Free(0)), (R, 1., Free(1)), (L, -1., Free(1)), (R, -1., Free(2))],
        vec![(L, 1., Free(0)), (R, -1., Free(1)), (L, -1., Free(1)), (R, 1., Free(2))],
        vec![(L, 1., Free(0)), (R, -1., h), (S, -1., Free(1)), (L, -1., Free(2))],
        vec![(L, 1., Free(0)), (R, -1., h), (S, -1., Free(1)), (R, -1., Free(2))],
        vec![(L, 1., Free(0)), (S, 1., Free(1)), (L, 1., h), (R, -1., Free(2))],
        vec![(L, 1., Free(0)), (S, 1., Free(1)), (R, 1., h), (L, -1., Free(2))],
        vec![(L, 1., Free(0)), (R, -1., h), (S, -1., Free(1)), (L, -1., h), (R, 1., Free(2))],
    ]
}

/// All 48 words: each base word under time-flip and left/right reflection.
pub fn all_words() -> Vec<Word> {
    let mut out = Vec::new();
    for base in base_words() {
        for flip in [false, true] {
            for reflect in [false, true] {
                let segs = base
                    .iter()
                    .map(|&(k, s, p)| {
                        let k = match (k, reflect) {
                            (Seg::L, true) => Seg::R,
                            (Seg::R, true) => Seg::L,
                            (k, _) => k,
                        };
                        (k, if flip { -s } else { s }, p)
                    })
                    .collect();
                out.push(Word { segs });
            }
        }
    }
    out
}

/// Integrates a word at unit radius from the origin by rotating about the
/// instantaneous centre of each arc.
pub fn endpoint(word: &Word, p: &[f64; 3]) -> (f64, f64, f64) {
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
    for &(k, sign, par) in &word.segs {
        let len = match par {
            Param::Free(i) => p[i],
            Param::Fixed(v) => v,
        };
        let s = sign * len;
        match k {
            Seg::S => {
                x += s * th.cos();
                y += s * th.sin();
            }
            Seg::L | Seg::R => {
                let side = if k == Seg::L { 1.0 } else { -1.0 };
                let cx = x - side * th.sin();
                let cy = y + side * th.cos();
                let rot = side * s;
                let (sr, cr) = rot.sin_cos();
                let (rx, ry) = (x - cx, y - cy);
                x = cx + cr * rx - sr * ry;
                y = cy + sr * rx + cr * ry;
                th += rot;
            }
        }
    }
    (x, y, th)
}

fn word_length(word: &Word, p: &[f64; 3]) -> f64 {
    word.segs
        .iter()
        .map(|&(_, _, par)| match par {
            Param::Free(i) => p[i],
            Param::Fixed(v) => v,
        })
        .sum()
}

/// Heading coefficient of the last free parameter.
fn last_coeff(word: &Word) -> f64 {
    let &(k, s, _) = word.segs.last().unwrap();
    s * if k == Seg::L { 1.0 } else { -1.0 }
}

/// Chooses the last parameter in [0, 2pi) so that the final heading matches.
fn close_heading(word: &Word, mut p: [f64; 3], phi: f64) -> [f64; 3] {
    p[2] = 0.0;
    let (_, _, th) = endpoint(word, &p);
    p[2] = ((phi - th) / last_coeff(word)).rem_euclid(TAU);
    p
}

fn residual(word: &Word, p: &[f64; 3], goal: (f64, f64, f64)) -> f64 {
    let (x, y, th) = endpoint(word, p);
    let dth = (th - goal.2 + PI).rem_euclid(TAU) - PI;
    ((x - goal.0).powi(2) + (y - goal.1).powi(2) + dth * dth).sqrt()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const SCAN: usize = 720;
const ACCEPT: f64 = 1e-7;

/// Words with a straight segment: the end position is affine in the
/// straight length, so only the first arc needs a one-dimensional search.
fn solve_straight(word: &Word, goal: (f64, f64, f64), out: &mut Vec<f64>) {
    let perp = |a: f64| -> (f64, f64) {
        let p0 = close_heading(word, [a, 0.0, 0.0], goal.2);
        let p1 = [a, 1.0, p0[2]];
        let e0 = endpoint(word, &p0);
        let e1 = endpoint(word, &p1);
        let (ex, ey) = (e1.0 - e0.0, e1.1 - e0.1);
        let (gx, gy) = (goal.0 - e0.0, goal.1 - e0.1);
        (ex * gy - ey * gx, ex * gx + ey * gy)
    };
    let mut prev = perp(0.0).0;
    for k in 1..=SCAN {
        let a1 = TAU * k as f64 / SCAN as f64;
        let a0 = TAU * (k - 1) as f64 / SCAN as f64;
        let cur = perp(a1).0;
        let mut roots = Vec::new();
        if prev == 0.0 {
            roots.push(a0);
        }
        if (prev > 0.0) != (cur > 0.0) && prev != 0.0 && cur != 0.0 {
            roots.push(bisect(|a| perp(a).0, a0, a1));
        }
        for a in roots {
            let b = perp(a).1;
            let p = close_heading(word, [a, b, 0.0], goal.2);
            if b >= -1e-9 && residual(word, &p, goal) < ACCEPT {
                out.push(word_length(word, &[a, b.max(0.0), p[2]]));
            }
        }
        prev = cur;
    }
}

fn arc_center(x: f64, y: f64, th: f64, k: Seg) -> (f64, f64) {
    let side = if k == Seg::L { 1.0 } else { -1.0 };
    (x - side * th.sin(), y + side * th.cos())
}

/// Three arcs: the first and last circles touch the middle one, so the
/// first arc length is a root of a one-dimensional distance equation.
fn solve_ccc(word: &Word, goal: (f64, f64, f64), out: &mut Vec<f64>) {
    let c3 = arc_center(goal.0, goal.1, goal.2, word.segs[2].0);
    let k2 = word.segs[1].0;
    let centre2 = |a: f64| {
        let w1 = Word { segs: word.segs[..1].to_vec() };
        let (x, y, th) = endpoint(&w1, &[a, 0.0, 0.0]);
        ((x, y), arc_center(x, y, th, k2))
    };
    let g = |a: f64| {
        let (_, c2) = centre2(a);
        (c2.0 - c3.0).hypot(c2.1 - c3.1) - 2.0
    };
    let mut prev = g(0.0);
    for k in 1..=SCAN {
        let a0 = TAU * (k - 1) as f64 / SCAN as f64;
        let a1 = TAU * k as f64 / SCAN as f64;
        let cur = g(a1);
        let mut roots = Vec::new();
        if prev == 0.0 {
            roots.push(a0);
        }
        if (prev > 0.0) != (cur > 0.0) && prev != 0.0 && cur != 0.0 {
            roots.push(bisect(g, a0, a1));
        }
        for a in roots {
            let ((px, py), c2) = centre2(a);
            let t = (0.5 * (c2.0 + c3.0), 0.5 * (c2.1 + c3.1));
            let alpha1 = (py - c2.1).atan2(px - c2.0);
            let alpha_t = (t.1 - c2.1).atan2(t.0 - c2.0);
            let side = if k2 == Seg::L { 1.0 } else { -1.0 };
            let b = ((alpha_t - alpha1) / (side * word.segs[1].1)).rem_euclid(TAU);
            let p = close_heading(word, [a, b, 0.0], goal.2);
            if residual(word, &p, goal) < ACCEPT {
                out.push(word_length(word, &p));
            }
        }
        prev = cur;
    }
}

/// Four arcs with a shared middle length: grid search followed by Newton
/// refinement on the position residual.
fn solve_cccc(word: &Word, goal: (f64, f64, f64), out: &mut Vec<f64>) {
    const N: usize = 48;
    let pos_res = |a: f64, b: f64| {
        let p = close_heading(word, [a, b, 0.0], goal.2);
        let (x, y, _) = endpoint(word, &p);
        (x - goal.0, y - goal.1)
    };
    let mut grid = vec![0.0; N * N];
    for i in 0..N {
        for j in 0..N {
            let (rx, ry) = pos_res(TAU * i as f64 / N as f64, TAU * j as f64 / N as f64);
            grid[i * N + j] = rx * rx + ry * ry;
        }
    }
    for i in 0..N {
        for j in 0..N {
            let v = grid[i * N + j];
            let mut is_min = v < 1.0;
            for di in [N - 1, 0, 1] {
                for dj in [N - 1, 0, 1] {
                    if (di, dj) != (0, 0) && grid[((i + di) % N) * N + (j + dj) % N] < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let (mut a, mut b) = (TAU * i as f64 / N as f64, TAU * j as f64 / N as f64);
            for _ in 0..60 {
                let (rx, ry) = pos_res(a, b);
                let h = 1e-7;
                let (ax, ay) = pos_res(a + h, b);
                let (bx, by) = pos_res(a, b + h);
                let j11 = (ax - rx) / h;
                let j21 = (ay - ry) / h;
                let j12 = (bx - rx) / h;
                let j22 = (by - ry) / h;
                let det = j11 * j22 - j12 * j21;
                if det.abs() < 1e-14 {
                    break;
                }
                let da = (j22 * rx - j12 * ry) / det;
                let db = (-j21 * rx + j11 * ry) / det;
                let step = (da * da + db * db).sqrt();
                let scale = if step > 0.5 { 0.5 / step } else { 1.0 };
                a = (a - scale * da).rem_euclid(TAU);
                b = (b - scale * db).rem_euclid(TAU);
                if step < 1e-13 {
                    break;
                }
            }
            let p = close_heading(word, [a, b, 0.0], goal.2);
            if residual(word, &p, goal) < ACCEPT {
                out.push(word_length(word, &p));
            }
        }
    }
}

/// Lengths of all solutions of one word for a goal given in the unit-radius
/// start frame.
pub fn solve_word(word: &Word, goal: (f64, f64, f64)) -> Vec<f64> {
    let mut out = Vec::new();
    if word.has_straight() {
        solve_straight(word, goal, &mut out);
    } else if word.segs.len() == 3 {
        solve_ccc(word, goal, &mut out);
    } else {
        solve_cccc(word, goal, &mut out);
    }
    out
}

/// Shortest length over all words between two poses in world coordinates.
pub fn oracle_length(from: (f64, f64, f64), to: (f64, f64, f64), radius: f64, words: &[Word]) -> f64 {
    let (s, c) = from.2.sin_cos();
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let goal = (
        (c * dx + s * dy) / radius,
        (-s * dx + c * dy) / radius,
        to.2 - from.2,
    );
    let best = words
        .iter()
        .flat_map(|w| solve_word(w, goal))
        .fold(f64::INFINITY, f64::min);
    best * radius
}
