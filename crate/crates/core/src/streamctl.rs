//! Control-line geometry in velocity space.
//!
//! To travel in a straight line from `p` to `q`, the vehicle's relative
//! velocity `u` must cancel the net flux crossing the segment:
//! `psi(p, q) + u_x dy - u_y dx = 0`. That is a line in velocity space whose
//! distance from the origin is the least speed that makes the trip possible.

use thiserror::Error;

use crate::flowfield::{FlowError, FlowField};
use crate::geometry::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("start and target coincide")]
    DegeneratePair,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// `psi + u_x * delta.y - u_y * delta.x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLine {
    pub psi: f64,
    pub delta: Vec2,
}

impl ControlLine {
    pub fn new(psi: f64, delta: Vec2) -> Self {
        ControlLine { psi, delta }
    }

    /// Control line of the locally uniform approximation `flow` over `delta`.
    pub fn uniform(flow: Vec2, delta: Vec2) -> Self {
        ControlLine::new(flow.x * delta.y - flow.y * delta.x, delta)
    }

    /// Left-hand side of the line equation at `u`.
    pub fn residual(&self, u: Vec2) -> f64 {
        self.psi + u.x * self.delta.y - u.y * self.delta.x
    }

    /// `|psi| / |delta|`, and zero for a degenerate line.
    pub fn lower_speed_bound(&self) -> f64 {
        let d = self.delta.norm();
        if d == 0.0 {
            0.0
        } else {
            self.psi.abs() / d
        }
    }

    /// Point of the line closest to the origin.
    pub fn foot(&self) -> Vec2 {
        let n = Vec2::new(self.delta.y, -self.delta.x);
        n * (-self.psi / n.norm_sq())
    }

    /// Chord of the line inside the disk `|u| <= v_max`, ordered so that the
    /// second endpoint has the larger component along `delta`.
    pub fn chord(&self, v_max: f64) -> Option<(Vec2, Vec2)> {
        let lsb = self.lower_speed_bound();
        if self.delta.norm_sq() == 0.0 || lsb > v_max {
            return None;
        }
        let half = (v_max * v_max - lsb * lsb).max(0.0).sqrt();
        let dir = self.delta / self.delta.norm();
        let foot = self.foot();
        Some((foot - dir * half, foot + dir * half))
    }

    /// Chord endpoint whose total velocity `flow + u` makes the most
    /// progress along `delta`. Equal progress goes to the smaller polar angle.
    pub fn optimistic(&self, flow: Vec2, v_max: f64) -> Option<Vec2> {
        let (a, b) = self.chord(v_max)?;
        let pa = (flow + a).dot(self.delta);
        let pb = (flow + b).dot(self.delta);
        let tol = 1e-12 * (pa.abs().max(pb.abs())).max(f64::MIN_POSITIVE);
        Some(if (pa - pb).abs() <= tol {
            if a.polar_angle() <= b.polar_angle() {
                a
            } else {
                b
            }
        } else if pa > pb {
            a
        } else {
            b
        })
    }

    /// `n` controls evenly spaced along the chord, endpoints included.
    /// A single sample is the optimistic control.
    pub fn samples(&self, flow: Vec2, v_max: f64, n: usize) -> Vec<Vec2> {
        let Some((a, b)) = self.chord(v_max) else {
            return Vec::new();
        };
        match n {
            0 => Vec::new(),
            1 => self.optimistic(flow, v_max).into_iter().collect(),
            _ => (0..n)
                .map(|k| a.lerp(b, k as f64 / (n - 1) as f64))
                .collect(),
        }
    }
}

pub fn control_line(f: &FlowField, p: Vec2, q: Vec2) -> Result<ControlLine, ControlError> {
    let psi = f.stream_value(p, q)?;
    if p == q {
        return Err(ControlError::DegeneratePair);
    }
    Ok(ControlLine::new(psi, q - p))
}

/// Least relative speed able to carry the vehicle straight from `p` to `q`.
pub fn lower_speed_bound(f: &FlowField, p: Vec2, q: Vec2) -> Result<f64, FlowError> {
    let psi = f.stream_value(p, q)?;
    Ok(ControlLine::new(psi, q - p).lower_speed_bound())
}

/// Best control on the control line within the speed limit, or `None` when
/// the line misses the speed disk.
pub fn optimistic_steer(
    f: &FlowField,
    p: Vec2,
    q: Vec2,
    v_max: f64,
) -> Result<Option<Vec2>, ControlError> {
    let line = control_line(f, p, q)?;
    Ok(line.optimistic(f.velocity(p)?, v_max))
}

pub fn sample_line_velocities(
    f: &FlowField,
    p: Vec2,
    q: Vec2,
    v_max: f64,
    n: usize,
) -> Result<Vec<Vec2>, ControlError> {
    let line = control_line(f, p, q)?;
    Ok(line.samples(f.velocity(p)?, v_max, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ws() -> Rect {
        Rect::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0))
    }

    fn uniform(x: f64, y: f64) -> FlowField {
        FlowField::uniform(Vec2::new(x, y), ws())
    }

    #[test]
    fn uniform_crossflow_line() {
        let line = control_line(&uniform(2.0, 0.0), Vec2::ZERO, Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(line.psi, 2.0);
        assert_eq!(line.delta, Vec2::new(0.0, 1.0));
        // u_s = -2 whatever v_s is
        assert_eq!(line.residual(Vec2::new(-2.0, 0.7)), 0.0);
        assert_eq!(line.residual(Vec2::new(-1.0, 0.0)), 1.0);
    }

    #[test]
    fn still_water_line() {
        let line = control_line(&uniform(0.0, 0.0), Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(line.psi, 0.0);
        assert_eq!(line.residual(Vec2::new(0.4, 0.0)), 0.0);
        assert_eq!(line.residual(Vec2::new(0.0, 1.0)), -1.0);
    }

    #[test]
    fn quad_vortex_line_uses_potential_difference() {
        let f = FlowField::quad_vortex(4.0, 1.0, Vec2::ZERO);
        let (p, q) = (Vec2::new(0.25, 0.25), Vec2::new(0.75, 0.25));
        let line = control_line(&f, p, q).unwrap();
        let psi_hat = |v: Vec2| {
            4.0 / std::f64::consts::PI
                * (std::f64::consts::PI * v.x).sin()
                * (std::f64::consts::PI * v.y).sin()
        };
        assert!((line.psi - (psi_hat(q) - psi_hat(p))).abs() < 1e-15);
        assert_eq!(line.delta, Vec2::new(0.5, 0.0));
    }

    #[test]
    fn degenerate_pair() {
        let f = uniform(1.0, 0.0);
        assert_eq!(
            control_line(&f, Vec2::ZERO, Vec2::ZERO),
            Err(ControlError::DegeneratePair)
        );
        assert_eq!(
            optimistic_steer(&f, Vec2::ZERO, Vec2::ZERO, 1.0),
            Err(ControlError::DegeneratePair)
        );
        assert_eq!(lower_speed_bound(&f, Vec2::ZERO, Vec2::ZERO), Ok(0.0));
    }

    #[test]
    fn lsb_examples() {
        let lsb = lower_speed_bound(&uniform(2.0, 0.0), Vec2::ZERO, Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(lsb, 2.0);
        let lsb = lower_speed_bound(&uniform(1.0, 0.0), Vec2::ZERO, Vec2::new(1.0, 1.0)).unwrap();
        assert!((lsb - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn optimistic_examples() {
        let u = optimistic_steer(&uniform(0.0, 0.0), Vec2::ZERO, Vec2::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(u, Some(Vec2::new(1.0, 0.0)));
        let u = optimistic_steer(&uniform(2.0, 0.0), Vec2::ZERO, Vec2::new(0.0, 1.0), 1.0).unwrap();
        assert_eq!(u, None);
    }

    /// Brute force: walk the speed circle, keep sign changes of the line
    /// residual, pick the crossing with most progress.
    fn circle_scan(line: &ControlLine, flow: Vec2, v_max: f64) -> Option<Vec2> {
        let n = 2_000_000;
        let at = |k: usize| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Vec2::new(a.cos(), a.sin()) * v_max
        };
        let mut best: Option<(f64, Vec2)> = None;
        for k in 0..n {
            let (a, b) = (at(k), at(k + 1));
            let (ra, rb) = (line.residual(a), line.residual(b));
            if ra == 0.0 || ra.signum() != rb.signum() {
                let t = ra / (ra - rb);
                let u = a.lerp(b, t);
                let prog = (flow + u).dot(line.delta);
                if best.is_none_or(|(bp, _)| prog > bp) {
                    best = Some((prog, u));
                }
            }
        }
        best.map(|(_, u)| u)
    }

    #[test]
    fn optimistic_matches_circle_scan() {
        let f = uniform(2.0, 0.0);
        let (p, q) = (Vec2::ZERO, Vec2::new(0.0, 1.0));
        let line = control_line(&f, p, q).unwrap();
        let oracle = circle_scan(&line, Vec2::new(2.0, 0.0), 3.0).unwrap();
        let u = optimistic_steer(&f, p, q, 3.0).unwrap().unwrap();
        assert!((u - Vec2::new(-2.0, 5f64.sqrt())).norm() < 1e-12, "{u}");
        assert!((u - oracle).norm() < 1e-5, "{u} vs {oracle}");
    }

    #[test]
    fn optimistic_matches_circle_scan_random() {
        let f = FlowField::quad_vortex(4.0, 1.0, Vec2::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 5 {
            let p = Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let q = Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let line = control_line(&f, p, q).unwrap();
            let flow = f.velocity(p).unwrap();
            let got = line.optimistic(flow, 4.0);
            if line.lower_speed_bound() > 3.9 {
                continue;
            }
            let oracle = circle_scan(&line, flow, 4.0).unwrap();
            assert!((got.unwrap() - oracle).norm() < 1e-4);
            checked += 1;
        }
    }

    #[test]
    fn tangent_line_is_reachable() {
        let line = ControlLine::new(2.0, Vec2::new(0.0, 1.0));
        let u = line.optimistic(Vec2::new(2.0, 0.0), 2.0).unwrap();
        assert_eq!(u, Vec2::new(-2.0, 0.0));
        assert_eq!(line.samples(Vec2::ZERO, 2.0, 3).len(), 3);
        assert!(line.optimistic(Vec2::new(2.0, 0.0), 2.0 - 1e-12).is_none());
    }

    #[test]
    fn tie_breaks_on_polar_angle() {
        // Zero-length chord aside, ties need equal progress at both ends,
        // which only happens for a tangent chord. Construct one directly.
        let line = ControlLine::new(0.0, Vec2::new(1.0, 0.0));
        let u = line.optimistic(Vec2::ZERO, 0.0).unwrap();
        assert_eq!(u, Vec2::new(0.0, 0.0));
    }

    #[test]
    fn sampling_examples() {
        let s = sample_line_velocities(&uniform(0.0, 0.0), Vec2::ZERO, Vec2::new(1.0, 0.0), 1.0, 3)
            .unwrap();
        assert_eq!(
            s,
            vec![
                Vec2::new(-1.0, 0.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0)
            ]
        );
        for n in [1, 2, 7] {
            let s =
                sample_line_velocities(&uniform(2.0, 0.0), Vec2::ZERO, Vec2::new(0.0, 1.0), 1.0, n)
                    .unwrap();
            assert!(s.is_empty());
        }
    }

    #[test]
    fn seven_samples_on_the_line_and_in_the_disk() {
        let f = FlowField::quad_vortex(4.0, 1.0, Vec2::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut feasible = 0;
        for _ in 0..2000 {
            let p = Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let q = Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let line = control_line(&f, p, q).unwrap();
            let s = sample_line_velocities(&f, p, q, 1.0, 7).unwrap();
            assert_eq!(s.is_empty(), line.lower_speed_bound() > 1.0);
            if !s.is_empty() {
                feasible += 1;
                assert_eq!(s.len(), 7);
                for u in s {
                    assert!(line.residual(u).abs() <= 1e-9);
                    assert!(u.norm() <= 1.0 + 1e-12);
                }
            }
        }
        assert!(feasible > 50);
    }

    #[test]
    fn lsb_is_origin_to_line_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let line = ControlLine::new(
                rng.gen_range(-3.0..3.0),
                Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            );
            // Two points on the line, then |a x b| / |b - a|.
            let (dx, dy) = (line.delta.x, line.delta.y);
            let (a, b) = if dy.abs() >= dx.abs() {
                let at = |uy: f64| Vec2::new((-line.psi + uy * dx) / dy, uy);
                (at(0.0), at(1.0))
            } else {
                let at = |ux: f64| Vec2::new(ux, (line.psi + ux * dy) / dx);
                (at(0.0), at(1.0))
            };
            let dist = a.cross(b).abs() / (b - a).norm();
            assert!((dist - line.lower_speed_bound()).abs() <= 1e-9 * dist.max(1.0));
        }
    }

    #[test]
    fn uniform_flow_tracks_the_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let flow = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let f = FlowField::uniform(flow, ws());
            let p = Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let q = Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let d = q - p;
            for u in sample_line_velocities(&f, p, q, 1.5, 7).unwrap() {
                let w = flow + u;
                assert!(w.cross(d).abs() / d.norm() <= 1e-9);
            }
        }
    }
}
