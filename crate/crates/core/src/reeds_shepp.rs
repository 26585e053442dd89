//! Shortest bounded-curvature paths with forward and backward motion.
//!
//! Closed-form solutions for the classical word families (CSC, CCC, CCCC,
//! CCSC, CCSCC) are evaluated in a frame where the start pose sits at the
//! origin and the turning radius is one; time-flip, reflection and backward
//! transforms cover the remaining words.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, State};

/// Tolerance on word parameters; candidates violating their sign
/// constraints by more than this are dropped.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentKind {
    Left,
    Right,
    Straight,
}

impl SegmentKind {
    fn letter(self) -> char {
        match self {
            SegmentKind::Left => 'L',
            SegmentKind::Right => 'R',
            SegmentKind::Straight => 'S',
        }
    }

    fn reflected(self) -> Self {
        match self {
            SegmentKind::Left => SegmentKind::Right,
            SegmentKind::Right => SegmentKind::Left,
            SegmentKind::Straight => SegmentKind::Straight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One piece of a path. `param` is an angle in radians for arcs and a
/// distance in map units for straights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSSegment {
    pub kind: SegmentKind,
    pub direction: Direction,
    pub param: f64,
}

impl RSSegment {
    pub fn length(&self, radius: f64) -> f64 {
        match self.kind {
            SegmentKind::Straight => self.param,
            _ => self.param * radius,
        }
    }

    /// Curvature of the segment (signed: positive turns left).
    pub fn curvature(&self, radius: f64) -> f64 {
        match self.kind {
            SegmentKind::Left => 1.0 / radius,
            SegmentKind::Right => -1.0 / radius,
            SegmentKind::Straight => 0.0,
        }
    }

    /// Pose after travelling `dist` (0..=length) along the segment.
    pub fn advance(&self, from: &State, dist: f64, radius: f64) -> State {
        let s = self.direction.sign() * dist;
        let kappa = self.curvature(radius);
        integrate_arc(from, s, kappa)
    }
}

/// Closed-form pose after a signed distance `s` along a path of constant
/// curvature `kappa`.
pub(crate) fn integrate_arc(from: &State, s: f64, kappa: f64) -> State {
    let th = from.theta;
    if kappa == 0.0 {
        return State::new(from.x + s * th.cos(), from.y + s * th.sin(), th);
    }
    let th1 = th + kappa * s;
    State::new(
        from.x + (th1.sin() - th.sin()) / kappa,
        from.y - (th1.cos() - th.cos()) / kappa,
        th1,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RSPath {
    pub segments: Vec<RSSegment>,
    pub turn_radius: f64,
    pub start: State,
    pub goal: State,
}

impl RSPath {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length(self.turn_radius)).sum()
    }

    /// Word such as `L+S+R-`.
    pub fn word(&self) -> String {
        word_string(self.segments.iter().map(|s| (s.kind, s.direction)))
    }

    /// Number of direction reversals inside the path.
    pub fn cusps(&self) -> usize {
        self.segments
            .windows(2)
            .filter(|w| w[0].direction != w[1].direction)
            .count()
    }

    /// Pieces covering arc lengths `[s0, s1]`, with the start pose of the
    /// returned path set to the pose at `s0`.
    pub fn sub_path(&self, s0: f64, s1: f64) -> RSPath {
        let s0 = s0.max(0.0);
        let s1 = s1.min(self.length());
        let start = self.pose_at(s0);
        let goal = if s1 >= self.length() { self.goal } else { self.pose_at(s1) };
        let mut segments = Vec::new();
        let mut acc = 0.0;
        for seg in &self.segments {
            let len = seg.length(self.turn_radius);
            let a = (s0 - acc).clamp(0.0, len);
            let b = (s1 - acc).clamp(0.0, len);
            if b - a > 1e-12 {
                let scale = match seg.kind {
                    SegmentKind::Straight => 1.0,
                    _ => 1.0 / self.turn_radius,
                };
                segments.push(RSSegment {
                    param: (b - a) * scale,
                    ..*seg
                });
            }
            acc += len;
        }
        RSPath {
            segments,
            turn_radius: self.turn_radius,
            start,
            goal,
        }
    }

    /// Pose at arc length `s`, clamped to the path.
    fn pose_at(&self, s: f64) -> State {
        let mut pose = self.start;
        let mut left = s.max(0.0);
        for seg in &self.segments {
            let len = seg.length(self.turn_radius);
            if left <= len {
                return seg.advance(&pose, left, self.turn_radius);
            }
            pose = seg.advance(&pose, len, self.turn_radius);
            left -= len;
        }
        pose
    }

    /// Poses spaced at most `spacing` apart, including both endpoints.
    pub fn sample_spaced(&self, spacing: f64) -> Vec<State> {
        let len = self.length();
        let n = ((len / spacing).ceil() as usize).max(1);
        let mut out: Vec<State> = (0..n).map(|k| self.pose_at(len * k as f64 / n as f64)).collect();
        out.push(self.goal);
        out
    }

    /// `n_interior` evenly spaced poses strictly inside the path plus both
    /// endpoints.
    pub fn sample_uniform(&self, n_interior: usize) -> Vec<State> {
        let len = self.length();
        let n = n_interior + 1;
        let mut out: Vec<State> = (0..n).map(|k| self.pose_at(len * k as f64 / n as f64)).collect();
        out[0] = self.start;
        out.push(self.goal);
        out
    }
}

impl fmt::Display for RSPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:.4})", self.word(), self.length())
    }
}

fn word_string(it: impl Iterator<Item = (SegmentKind, Direction)>) -> String {
    let mut w = String::new();
    for (k, d) in it {
        w.push(k.letter());
        w.push(if d == Direction::Forward { '+' } else { '-' });
    }
    w
}

/// Shortest path between two poses for the given turning radius.
pub fn rs_shortest(from: &State, to: &State, radius: f64) -> RSPath {
    assert!(radius > 0.0, "turning radius must be positive");
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dth = wrap_angle(to.theta - from.theta);
    if dx.abs() <= 1e-9 && dy.abs() <= 1e-9 && dth.abs() <= 1e-9 {
        return RSPath {
            segments: Vec::new(),
            turn_radius: radius,
            start: *from,
            goal: *to,
        };
    }
    let (s, c) = from.theta.sin_cos();
    let x = (c * dx + s * dy) / radius;
    let y = (-s * dx + c * dy) / radius;

    let mut best = Best::default();
    csc(x, y, dth, &mut best);
    ccc(x, y, dth, &mut best);
    cccc(x, y, dth, &mut best);
    ccsc(x, y, dth, &mut best);
    ccscc(x, y, dth, &mut best);

    let (kinds, params) = best.take().expect("a Reeds-Shepp word always exists");
    let segments = kinds
        .iter()
        .zip(&params)
        .filter(|(_, p)| p.abs() > 1e-12)
        .map(|(&kind, &p)| RSSegment {
            kind,
            direction: if p >= 0.0 { Direction::Forward } else { Direction::Backward },
            param: match kind {
                SegmentKind::Straight => p.abs() * radius,
                _ => p.abs(),
            },
        })
        .collect();
    RSPath {
        segments,
        turn_radius: radius,
        start: *from,
        goal: *to,
    }
}

pub fn rs_length(from: &State, to: &State, radius: f64) -> f64 {
    rs_shortest(from, to, radius).length()
}

/// Pose after travelling `s` along `p`.
pub fn rs_sample(p: &RSPath, s: f64) -> Result<State> {
    let len = p.length();
    if !(s >= -1e-9 && s <= len + 1e-9) {
        return Err(Error::OutOfRange { value: s, max: len });
    }
    if s >= len {
        return Ok(p.goal);
    }
    Ok(p.pose_at(s))
}

/// Pose reached after the first `d` of the path (the goal itself if the
/// path is shorter) plus `n_interior + 2` evenly spaced samples of the
/// travelled prefix.
pub fn rs_truncate_first(p: &RSPath, d: f64, n_interior: usize) -> (State, Vec<State>) {
    let prefix = p.sub_path(0.0, d);
    let samples = prefix.sample_uniform(n_interior);
    (prefix.goal, samples)
}

/// Candidate words in the unit-radius frame. Ties within 1e-12 are broken by
/// the lexicographic order of the word string.
#[derive(Default)]
struct Best {
    length: f64,
    word: String,
    kinds: Vec<SegmentKind>,
    params: Vec<f64>,
    found: bool,
}

impl Best {
    fn offer(&mut self, kinds: &[SegmentKind], params: &[f64]) {
        let length: f64 = params.iter().map(|p| p.abs()).sum();
        let word = word_string(kinds.iter().zip(params).map(|(&k, &p)| {
            (k, if p >= 0.0 { Direction::Forward } else { Direction::Backward })
        }));
        let better = !self.found
            || length < self.length - 1e-12
            || ((length - self.length).abs() <= 1e-12 && word < self.word);
        if better {
            self.length = length;
            self.word = word;
            self.kinds = kinds.to_vec();
            self.params = params.to_vec();
            self.found = true;
        }
    }

    fn take(self) -> Option<(Vec<SegmentKind>, Vec<f64>)> {
        self.found.then_some((self.kinds, self.params))
    }
}

use SegmentKind::{Left as L, Right as R, Straight as S};

fn mod2pi(x: f64) -> f64 {
    let v = x % TAU;
    if v < -PI {
        v + TAU
    } else if v > PI {
        v - TAU
    } else {
        v
    }
}

fn polar(x: f64, y: f64) -> (f64, f64) {
    (x.hypot(y), y.atan2(x))
}

fn tau_omega(u: f64, v: f64, xi: f64, eta: f64, phi: f64) -> (f64, f64) {
    let delta = mod2pi(u - v);
    let a = u.sin() - delta.sin();
    let b = u.cos() - delta.cos() - 1.0;
    let t1 = (eta * a - xi * b).atan2(xi * a + eta * b);
    let t2 = 2.0 * (delta.cos() - v.cos() - u.cos()) + 3.0;
    let tau = if t2 < 0.0 { mod2pi(t1 + PI) } else { mod2pi(t1) };
    let omega = mod2pi(tau - u + v - phi);
    (tau, omega)
}

fn lp_sp_lp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u, t) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if t >= -EPS {
        let v = mod2pi(phi - t);
        if v >= -EPS {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_sp_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u1, t1) = polar(x + phi.sin(), y - 1.0 - phi.cos());
    let u1 = u1 * u1;
    if u1 >= 4.0 {
        let u = (u1 - 4.0).sqrt();
        let theta = 2.0f64.atan2(u);
        let t = mod2pi(t1 + theta);
        let v = mod2pi(t - phi);
        if t >= -EPS && v >= -EPS {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_l(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (u1, theta) = polar(xi, eta);
    if u1 <= 4.0 {
        let u = -2.0 * (0.25 * u1).asin();
        let t = mod2pi(theta + 0.5 * u + PI);
        let v = mod2pi(phi - t + u);
        if t >= -EPS && u <= EPS {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rup_lum_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = 0.25 * (2.0 + xi.hypot(eta));
    if rho <= 1.0 {
        let u = rho.acos();
        let (t, v) = tau_omega(u, -u, xi, eta, phi);
        if t >= -EPS && v <= EPS {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rum_lum_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = (20.0 - xi * xi - eta * eta) / 16.0;
    if (0.0..=1.0).contains(&rho) {
        let u = -rho.acos();
        if u >= -FRAC_PI_2 {
            let (t, v) = tau_omega(u, u, xi, eta, phi);
            if t >= -EPS && v >= -EPS {
                return Some((t, u, v));
            }
        }
    }
    None
}

fn lp_rm_sm_lm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (rho, theta) = polar(xi, eta);
    if rho >= 2.0 {
        let r = (rho * rho - 4.0).sqrt();
        let u = 2.0 - r;
        let t = mod2pi(theta + r.atan2(-2.0));
        let v = mod2pi(phi - FRAC_PI_2 - t);
        if t >= -EPS && u <= EPS && v <= EPS {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_sm_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, theta) = polar(-eta, xi);
    if rho >= 2.0 {
        let t = theta;
        let u = 2.0 - rho;
        let v = mod2pi(t + FRAC_PI_2 - phi);
        if t >= -EPS && u <= EPS && v <= EPS {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_s_lm_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, _) = polar(xi, eta);
    if rho >= 2.0 {
        let u = 4.0 - (rho * rho - 4.0).sqrt();
        if u <= EPS {
            let t = mod2pi(((4.0 - u) * xi - 2.0 * eta).atan2(-2.0 * xi + (u - 4.0) * eta));
            let v = mod2pi(t - phi);
            if t >= -EPS && v >= -EPS {
                return Some((t, u, v));
            }
        }
    }
    None
}

type Solver = fn(f64, f64, f64) -> Option<(f64, f64, f64)>;

/// Evaluates `solver` under the four symmetries (identity, time-flip,
/// reflection, both) and offers each solution as a word.
fn symmetric(
    best: &mut Best,
    solver: Solver,
    (x, y, phi): (f64, f64, f64),
    kinds: &[SegmentKind],
    params: impl Fn(f64, f64, f64) -> Vec<f64>,
) {
    let reflected: Vec<SegmentKind> = kinds.iter().map(|k| k.reflected()).collect();
    let cases = [
        (x, y, phi, false, false),
        (-x, y, -phi, true, false),
        (x, -y, -phi, false, true),
        (-x, -y, phi, true, true),
    ];
    for (cx, cy, cphi, flip, reflect) in cases {
        if let Some((t, u, v)) = solver(cx, cy, cphi) {
            let mut p = params(t, u, v);
            if flip {
                p.iter_mut().for_each(|q| *q = -*q);
            }
            best.offer(if reflect { &reflected } else { kinds }, &p);
        }
    }
}

fn backwards(x: f64, y: f64, phi: f64) -> (f64, f64, f64) {
    let (s, c) = phi.sin_cos();
    (x * c + y * s, x * s - y * c, phi)
}

fn csc(x: f64, y: f64, phi: f64, best: &mut Best) {
    symmetric(best, lp_sp_lp, (x, y, phi), &[L, S, L], |t, u, v| vec![t, u, v]);
    symmetric(best, lp_sp_rp, (x, y, phi), &[L, S, R], |t, u, v| vec![t, u, v]);
}

fn ccc(x: f64, y: f64, phi: f64, best: &mut Best) {
    symmetric(best, lp_rm_l, (x, y, phi), &[L, R, L], |t, u, v| vec![t, u, v]);
    symmetric(best, lp_rm_l, backwards(x, y, phi), &[L, R, L], |t, u, v| vec![v, u, t]);
}

fn cccc(x: f64, y: f64, phi: f64, best: &mut Best) {
    symmetric(best, lp_rup_lum_rm, (x, y, phi), &[L, R, L, R], |t, u, v| vec![t, u, -u, v]);
    symmetric(best, lp_rum_lum_rp, (x, y, phi), &[L, R, L, R], |t, u, v| vec![t, u, u, v]);
}

fn ccsc(x: f64, y: f64, phi: f64, best: &mut Best) {
    let h = FRAC_PI_2;
    symmetric(best, lp_rm_sm_lm, (x, y, phi), &[L, R, S, L], |t, u, v| vec![t, -h, u, v]);
    symmetric(best, lp_rm_sm_rm, (x, y, phi), &[L, R, S, R], |t, u, v| vec![t, -h, u, v]);
    let b = backwards(x, y, phi);
    symmetric(best, lp_rm_sm_lm, b, &[L, S, R, L], |t, u, v| vec![v, u, -h, t]);
    symmetric(best, lp_rm_sm_rm, b, &[R, S, R, L], |t, u, v| vec![v, u, -h, t]);
}

fn ccscc(x: f64, y: f64, phi: f64, best: &mut Best) {
    let h = FRAC_PI_2;
    symmetric(best, lp_rm_s_lm_rp, (x, y, phi), &[L, R, S, L, R], |t, u, v| {
        vec![t, -h, u, -h, v]
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn st(x: f64, y: f64, t: f64) -> State {
        State::new(x, y, t)
    }

    #[test]
    fn identity_is_empty() {
        let a = st(3.0, -2.0, 1.0);
        let p = rs_shortest(&a, &a, 1.0);
        assert!(p.segments.is_empty());
        assert_eq!(p.length(), 0.0);
        assert_eq!(rs_length(&a, &a, 3.0), 0.0);
    }

    #[test]
    fn straight_ahead() {
        let p = rs_shortest(&st(0.0, 0.0, 0.0), &st(4.0, 0.0, 0.0), 3.0);
        assert_eq!(p.segments.len(), 1);
        assert_eq!(p.segments[0].kind, SegmentKind::Straight);
        assert_eq!(p.segments[0].direction, Direction::Forward);
        assert_abs_diff_eq!(p.length(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rs_length(&st(0.0, 0.0, 0.0), &st(10.0, 0.0, 0.0), 3.0), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn straight_backward() {
        let p = rs_shortest(&st(0.0, 0.0, 0.0), &st(-5.0, 0.0, 0.0), 1.0);
        assert_eq!(p.word(), "S-");
        assert_abs_diff_eq!(p.length(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_endpoints() {
        let p = rs_shortest(&st(1.0, 2.0, 0.3), &st(-4.0, 6.0, -2.0), 2.0);
        assert_eq!(rs_sample(&p, 0.0).unwrap(), p.start);
        let end = p.pose_at(p.length());
        assert!(end.approx_eq(&p.goal, 1e-6), "{end:?} vs {:?}", p.goal);
        assert!(rs_sample(&p, p.length() + 1.0).is_err());
        assert!(rs_sample(&p, -0.5).is_err());
    }

    #[test]
    fn midpoint_of_straight() {
        let p = rs_shortest(&st(0.0, 0.0, 0.0), &st(4.0, 0.0, 0.0), 3.0);
        let m = rs_sample(&p, 2.0).unwrap();
        assert!(m.approx_eq(&st(2.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn truncation() {
        let p = rs_shortest(&st(0.0, 0.0, 0.0), &st(1.0, 0.0, 0.0), 3.0);
        let (pose, samples) = rs_truncate_first(&p, 2.0, 5);
        assert_eq!(pose, p.goal);
        assert_eq!(samples.len(), 7);
        assert_eq!(*samples.last().unwrap(), p.goal);

        let p = rs_shortest(&st(0.0, 0.0, 0.0), &st(10.0, 0.0, 0.0), 3.0);
        let (pose, samples) = rs_truncate_first(&p, 2.0995, 5);
        assert!(pose.approx_eq(&st(2.0995, 0.0, 0.0), 1e-12));
        assert_eq!(samples[0], p.start);

        let a = st(2.0, 2.0, 0.5);
        let p = rs_shortest(&a, &a, 3.0);
        let (pose, _) = rs_truncate_first(&p, 2.0995, 5);
        assert_eq!(pose, a);
    }

    #[test]
    fn sub_path_lengths_add_up() {
        let p = rs_shortest(&st(0.0, 0.0, 0.0), &st(-3.0, 4.0, 2.5), 1.5);
        let l = p.length();
        let a = p.sub_path(0.0, 0.4 * l);
        let b = p.sub_path(0.4 * l, l);
        assert_abs_diff_eq!(a.length() + b.length(), l, epsilon = 1e-9);
        assert!(a.goal.approx_eq(&b.start, 1e-9));
        assert_eq!(b.goal, p.goal);
    }

    #[test]
    fn every_family_reaches_the_goal() {
        // Poses chosen to exercise turn-around manoeuvres and parallel parking.
        let cases = [
            (st(0.0, 0.0, 0.0), st(0.0, 0.0, PI)),
            (st(0.0, 0.0, 0.0), st(0.0, 1.0, 0.0)),
            (st(0.0, 0.0, 0.0), st(0.5, -0.3, 2.0)),
            (st(0.0, 0.0, 0.0), st(-1.0, 2.0, -1.0)),
            (st(0.0, 0.0, 0.0), st(3.0, 3.0, FRAC_PI_2)),
            (st(0.0, 0.0, 1.0), st(-4.0, -1.0, -2.9)),
        ];
        for (a, b) in cases {
            let p = rs_shortest(&a, &b, 1.0);
            let end = p.pose_at(p.length());
            assert!(end.approx_eq(&b, 1e-6), "{} ends at {end:?}", p);
            assert!(p.segments.len() <= 5);
            assert!(p.length() + 1e-12 >= a.distance(&b));
        }
    }
}
