//! Forward propagation of `x' = v(x) + u` under persistent controls.
//!
//! Two explicit first-order discretisations are provided: fixed time steps,
//! and fixed spatial steps where each update advances exactly `dx` along the
//! instantaneous total velocity and the elapsed time grows by
//! `dx / |v + u|`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::flowfield::FlowField;
use crate::geometry::{Rect, Vec2};
use crate::streamctl::ControlLine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagateError {
    #[error("trajectory did not complete ({0})")]
    InvalidEdge(Termination),
}

/// A persistent control: relative velocity `u` held for `tau` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlAction {
    pub u: Vec2,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub t: f64,
    pub p: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    OutOfBounds,
    Collision,
    Stagnation,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::OutOfBounds => "out-of-bounds",
            Termination::Collision => "collision",
            Termination::Stagnation => "stagnation",
        })
    }
}

/// Time-stamped polyline. Every recorded state is inside the free workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn start(x0: Vec2) -> Self {
        Trajectory {
            states: vec![State { t: 0.0, p: x0 }],
            termination: Termination::Completed,
        }
    }

    /// Elapsed time between first and last state.
    pub fn cost(&self) -> f64 {
        match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn first(&self) -> Vec2 {
        self.states[0].p
    }

    pub fn last(&self) -> Vec2 {
        self.states[self.states.len() - 1].p
    }

    pub fn last_state(&self) -> State {
        self.states[self.states.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Keeps states `0..=index` and marks the result completed.
    pub fn truncate(&mut self, index: usize) {
        self.states.truncate(index + 1);
        self.termination = Termination::Completed;
    }

    /// Shifts all timestamps by `dt`.
    pub fn shifted(mut self, dt: f64) -> Self {
        for s in &mut self.states {
            s.t += dt;
        }
        self
    }

    /// One `t x y` line per state.
    pub fn write_to(&self, mut out: impl Write) -> io::Result<()> {
        for s in &self.states {
            writeln!(out, "{} {} {}", s.t, s.p.x, s.p.y)?;
        }
        Ok(())
    }
}

/// Rectangular workspace with optional rectangular obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub bounds: Rect,
    pub obstacles: Vec<Rect>,
}

impl Workspace {
    pub fn new(bounds: Rect) -> Self {
        Workspace {
            bounds,
            obstacles: Vec::new(),
        }
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Rect>) -> Self {
        self.obstacles = obstacles;
        self
    }

    pub fn is_free(&self, p: Vec2) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Classifies the straight move `a -> b`, assuming `a` is free.
    pub fn check_segment(&self, a: Vec2, b: Vec2) -> Result<(), Termination> {
        if !b.is_finite() || !self.bounds.contains(b) {
            return Err(Termination::OutOfBounds);
        }
        if self.obstacles.iter().any(|o| o.intersects_segment(a, b)) {
            return Err(Termination::Collision);
        }
        Ok(())
    }
}

/// Speed below which the arc-length update is considered stalled.
pub fn stagnation_speed(v_max: f64) -> f64 {
    1e-9 * v_max
}

/// Arc-length step budget: the half circumference over the chord `p`-`q`,
/// `ceil(pi |q - p| / (2 dx))`, at least 1.
pub fn n_steps(p: Vec2, q: Vec2, dx_max: f64) -> usize {
    let n = (PI * p.distance(q) / (2.0 * dx_max)).ceil();
    (n as usize).max(1)
}

/// Explicit Euler with step `dt` until `a.tau`; the last step is shortened
/// to land exactly on `tau`.
pub fn propagate_time(
    f: &FlowField,
    ws: &Workspace,
    x0: Vec2,
    a: ControlAction,
    dt: f64,
) -> Trajectory {
    let mut traj = Trajectory::start(x0);
    if !ws.is_free(x0) {
        traj.termination = Termination::OutOfBounds;
        return traj;
    }
    let n = ((a.tau / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut x = x0;
    let mut t = 0.0;
    for k in 1..=n {
        let t_next = if k == n {
            a.tau
        } else {
            (k as f64 * dt).min(a.tau)
        };
        let h = t_next - t;
        let v = match f.velocity(x) {
            Ok(v) => v,
            Err(_) => {
                traj.termination = Termination::OutOfBounds;
                return traj;
            }
        };
        let next = x + (v + a.u) * h;
        if let Err(term) = ws.check_segment(x, next) {
            traj.termination = term;
            return traj;
        }
        x = next;
        t = t_next;
        traj.states.push(State { t, p: x });
    }
    traj
}

/// Fixed spatial step integrator for a held control `u`.
#[derive(Debug, Clone, Copy)]
pub struct ArcStepper<'a> {
    pub field: &'a FlowField,
    pub workspace: &'a Workspace,
    pub u: Vec2,
    pub dx: f64,
    pub min_speed: f64,
}

impl<'a> ArcStepper<'a> {
    pub fn new(
        field: &'a FlowField,
        workspace: &'a Workspace,
        u: Vec2,
        dx: f64,
        v_max: f64,
    ) -> Self {
        ArcStepper {
            field,
            workspace,
            u,
            dx,
            min_speed: stagnation_speed(v_max),
        }
    }

    #[inline]
    pub fn step(&self, s: State) -> Result<State, Termination> {
        let v = self
            .field
            .velocity(s.p)
            .map_err(|_| Termination::OutOfBounds)?;
        let w = v + self.u;
        let speed = w.norm();
        if speed.is_nan() || speed < self.min_speed {
            return Err(Termination::Stagnation);
        }
        let next = s.p + w * (self.dx / speed);
        self.workspace.check_segment(s.p, next)?;
        Ok(State {
            t: s.t + self.dx / speed,
            p: next,
        })
    }

    /// Up to `steps` updates from `x0`; `stop` sees each new state and ends
    /// the run (completed) by returning true.
    pub fn run(&self, x0: Vec2, steps: usize, mut stop: impl FnMut(&State) -> bool) -> Trajectory {
        let mut traj = Trajectory::start(x0);
        if !self.workspace.is_free(x0) {
            traj.termination = Termination::OutOfBounds;
            return traj;
        }
        let mut s = traj.states[0];
        for _ in 0..steps {
            match self.step(s) {
                Ok(next) => {
                    s = next;
                    traj.states.push(s);
                    if stop(&s) {
                        break;
                    }
                }
                Err(term) => {
                    traj.termination = term;
                    break;
                }
            }
        }
        traj
    }
}

/// Arc-length propagation for exactly `n_steps(x0, target, dx_max)` steps,
/// unless terminated early.
pub fn propagate_arc(
    f: &FlowField,
    ws: &Workspace,
    x0: Vec2,
    u: Vec2,
    target: Vec2,
    dx_max: f64,
    v_max: f64,
) -> Trajectory {
    ArcStepper::new(f, ws, u, dx_max, v_max).run(x0, n_steps(x0, target, dx_max), |_| false)
}

/// Straight move `from -> to` treating the flow as uniform at `from`.
///
/// The control is the fastest one on the uniform-flow control line; returns
/// `None` when no admissible control makes progress toward `to` or the move
/// leaves the free workspace.
pub fn analytic_step(
    f: &FlowField,
    ws: &Workspace,
    from: Vec2,
    to: Vec2,
    v_max: f64,
) -> Option<(ControlAction, Trajectory)> {
    let d = to - from;
    let len = d.norm();
    if len == 0.0 {
        return None;
    }
    let v = f.velocity(from).ok()?;
    let u = ControlLine::uniform(v, d).optimistic(v, v_max)?;
    let speed = (v + u).dot(d) / len;
    if speed.is_nan() || speed <= stagnation_speed(v_max) {
        return None;
    }
    ws.check_segment(from, to).ok()?;
    let tau = len / speed;
    let traj = Trajectory {
        states: vec![State { t: 0.0, p: from }, State { t: tau, p: to }],
        termination: Termination::Completed,
    };
    Some((ControlAction { u, tau }, traj))
}

/// Travel time of a completed trajectory.
pub fn edge_cost(traj: &Trajectory) -> Result<f64, PropagateError> {
    match traj.termination {
        Termination::Completed => Ok(traj.cost()),
        t => Err(PropagateError::InvalidEdge(t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn big() -> Workspace {
        Workspace::new(Rect::new(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0)))
    }

    fn uniform(x: f64, y: f64) -> FlowField {
        FlowField::uniform(Vec2::new(x, y), big().bounds)
    }

    #[test]
    fn step_counts() {
        assert_eq!(n_steps(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.01), 158);
        assert_eq!(n_steps(Vec2::ZERO, Vec2::ZERO, 0.01), 1);
        assert_eq!(n_steps(Vec2::ZERO, Vec2::new(0.0, 2.0), 1.0), 4);
    }

    #[test]
    fn constant_velocity_in_still_water() {
        let a = ControlAction {
            u: Vec2::new(1.0, 0.0),
            tau: 1.0,
        };
        let t = propagate_time(&uniform(0.0, 0.0), &big(), Vec2::ZERO, a, 0.1);
        assert_eq!(t.states.len(), 11);
        assert!((t.last() - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(t.cost(), 1.0);
        assert_eq!(t.termination, Termination::Completed);
    }

    #[test]
    fn partial_final_step_lands_on_tau() {
        let a = ControlAction {
            u: Vec2::new(0.0, 1.0),
            tau: 0.35,
        };
        let t = propagate_time(&uniform(0.0, 0.0), &big(), Vec2::ZERO, a, 0.1);
        assert_eq!(t.states.len(), 5);
        assert_eq!(t.last_state().t, 0.35);
        assert!((t.last().y - 0.35).abs() < 1e-12);
        assert!(t.states.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn hovering() {
        let x0 = Vec2::new(0.3, -0.2);
        let a = ControlAction {
            u: Vec2::new(-1.0, 0.0),
            tau: 5.0,
        };
        let t = propagate_time(&uniform(1.0, 0.0), &big(), x0, a, 0.25);
        assert_eq!(t.last(), x0);
        assert_eq!(edge_cost(&t).unwrap(), 5.0);
    }

    #[test]
    fn leaving_the_workspace_stops_before_recording() {
        let ws = Workspace::new(Rect::new(Vec2::ZERO, Vec2::new(1.0, 1.0)));
        let f = FlowField::zero(ws.bounds);
        let a = ControlAction {
            u: Vec2::new(1.0, 0.0),
            tau: 2.0,
        };
        let t = propagate_time(&f, &ws, Vec2::new(0.5, 0.5), a, 0.1);
        assert_eq!(t.termination, Termination::OutOfBounds);
        assert!(t.states.iter().all(|s| ws.is_free(s.p)));
        assert!(edge_cost(&t).is_err());

        let ws = ws.with_obstacles(vec![Rect::new(Vec2::new(0.7, 0.0), Vec2::new(0.8, 1.0))]);
        let t = propagate_time(&f, &ws, Vec2::new(0.5, 0.5), a, 0.1);
        assert_eq!(t.termination, Termination::Collision);
        assert!(t.states.iter().all(|s| ws.is_free(s.p)));
    }

    #[test]
    fn arc_mode_in_still_water() {
        let f = uniform(0.0, 0.0);
        let t = propagate_arc(
            &f,
            &big(),
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            0.01,
            1.0,
        );
        assert_eq!(t.states.len(), 159);
        assert!((t.states[100].p - Vec2::new(1.0, 0.0)).norm() < 1e-9);
        for w in t.states.windows(2) {
            assert!(((w[1].p - w[0].p).norm() - 0.01).abs() < 1e-9);
        }
        assert!((t.cost() - 1.58).abs() < 1e-12);
    }

    #[test]
    fn arc_cost_at_constant_speed() {
        let f = uniform(0.5, 0.0);
        let t = propagate_arc(
            &f,
            &big(),
            Vec2::ZERO,
            Vec2::new(0.0, 1.0),
            Vec2::new(0.3, 0.4),
            0.02,
            1.0,
        );
        let n = t.states.len() - 1;
        assert_eq!(n, n_steps(Vec2::ZERO, Vec2::new(0.3, 0.4), 0.02));
        let c = Vec2::new(0.5, 1.0).norm();
        assert!((t.cost() - n as f64 * 0.02 / c).abs() < 1e-12);
    }

    #[test]
    fn stagnation_is_reported() {
        let f = uniform(1.0, 0.0);
        let t = propagate_arc(
            &f,
            &big(),
            Vec2::ZERO,
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            0.01,
            1.0,
        );
        assert_eq!(t.termination, Termination::Stagnation);
        assert_eq!(t.states.len(), 1);
    }

    #[test]
    fn upstream_and_downstream_costs() {
        let f = uniform(0.5, 0.0);
        let down = ArcStepper::new(&f, &big(), Vec2::new(1.0, 0.0), 0.01, 1.0).run(
            Vec2::ZERO,
            100,
            |_| false,
        );
        let up = ArcStepper::new(&f, &big(), Vec2::new(-1.0, 0.0), 0.01, 1.0).run(
            Vec2::ZERO,
            100,
            |_| false,
        );
        assert!((down.cost() - 1.0 / 1.5).abs() < 1e-12);
        assert!((up.cost() - 1.0 / 0.5).abs() < 1e-12);
        assert!((up.cost() / down.cost() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn analytic_step_in_uniform_crossflow() {
        let f = uniform(0.5, 0.0);
        let (a, t) = analytic_step(&f, &big(), Vec2::ZERO, Vec2::new(0.0, 0.01), 1.0).unwrap();
        // u = (-0.5, sqrt(0.75)): pure upward motion at sqrt(0.75)
        assert!((a.u - Vec2::new(-0.5, 0.75f64.sqrt())).norm() < 1e-12);
        assert!((a.tau - 0.01 / 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(t.last(), Vec2::new(0.0, 0.01));
        assert!(analytic_step(
            &uniform(2.0, 0.0),
            &big(),
            Vec2::ZERO,
            Vec2::new(0.0, 0.01),
            1.0
        )
        .is_none());
        assert!(analytic_step(
            &uniform(2.0, 0.0),
            &big(),
            Vec2::ZERO,
            Vec2::new(-0.01, 0.0),
            1.0
        )
        .is_none());
    }

    /// psi drift of uncontrolled Euler near a vortex centre is first order in dt.
    #[test]
    fn euler_drift_across_streamlines_is_first_order() {
        let f = FlowField::quad_vortex(4.0, 1.0, Vec2::ZERO);
        let ws = Workspace::new(f.bounds());
        let x0 = Vec2::new(0.6, 0.55);
        let a = ControlAction {
            u: Vec2::ZERO,
            tau: 1.0,
        };
        let drift = |dt: f64| {
            let t = propagate_time(&f, &ws, x0, a, dt);
            assert_eq!(t.termination, Termination::Completed);
            let p0 = f.potential(x0).unwrap();
            t.states
                .iter()
                .map(|s| (f.potential(s.p).unwrap() - p0).abs())
                .fold(0.0, f64::max)
        };
        let (d1, d2, d3) = (drift(1e-3), drift(5e-4), drift(2.5e-4));
        let (r1, r2) = (d1 / d2, d2 / d3);
        assert!(
            (1.7..2.3).contains(&r1) && (1.7..2.3).contains(&r2),
            "{r1} {r2}"
        );
    }

    #[test]
    fn recorded_states_stay_free_and_costs_positive() {
        let f = FlowField::quad_vortex(4.0, 1.0, Vec2::ZERO);
        let ws = Workspace::new(f.bounds())
            .with_obstacles(vec![Rect::new(Vec2::new(0.9, 0.9), Vec2::new(1.1, 1.1))]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x0 = Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            if !ws.is_free(x0) {
                continue;
            }
            let u = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let target = Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let t = propagate_arc(&f, &ws, x0, u, target, 0.01, 1.0);
            assert!(t.states.iter().all(|s| ws.is_free(s.p)));
            if t.states.len() >= 2 {
                assert!(t.cost() > 0.0);
            }
            for w in t.states.windows(2) {
                assert!(((w[1].p - w[0].p).norm() - 0.01).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn trajectory_export() {
        let mut t = Trajectory::start(Vec2::new(0.5, 1.0));
        t.states.push(State {
            t: 0.25,
            p: Vec2::new(0.75, 1.0),
        });
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 0.5 1\n0.25 0.75 1\n");
    }
}
