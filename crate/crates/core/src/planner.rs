//! RRT* in a flow field.
//!
//! The tree grows from the start by steering toward low-dispersion samples.
//! `Nearest` and `Near` use the configured distance heuristic; edges come
//! either from arc-length propagation of control-line velocities
//! ([`EdgeMode::AdaptiveArc`]) or from single straight steps under a locally
//! uniform flow ([`EdgeMode::AnalyticStep`]). Edge cost is travel time.
//!
//! Arc-length edges that pass within `dx_max` of their target finish with
//! one short straight step computed for the local flow, so every edge ends
//! exactly on its child vertex.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::flowfield::FlowField;
use crate::geometry::Vec2;
use crate::metricspace::{
    k_nearest_count, DistanceHeuristic, HeuristicKind, MetricError, VertexSet,
};
use crate::propagate::{
    analytic_step, n_steps, ArcStepper, ControlAction, State, Termination, Trajectory, Workspace,
};
use crate::sampling::{DispersionTracker, HaltonSampler};
use crate::streamctl::{control_line, ControlError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("start {0} is outside the free workspace")]
    StartOutOfBounds(Vec2),
    #[error("goal {0} is outside the workspace")]
    GoalOutOfBounds(Vec2),
    #[error("start and goal coincide")]
    DegeneratePair,
    #[error("no vertex reaches the goal region")]
    Infeasible,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeMode {
    AdaptiveArc,
    AnalyticStep,
}

impl EdgeMode {
    pub fn name(self) -> &'static str {
        match self {
            EdgeMode::AdaptiveArc => "adaptive-arc",
            EdgeMode::AnalyticStep => "analytic-step",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [EdgeMode::AdaptiveArc, EdgeMode::AnalyticStep]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

impl std::fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub heuristic: HeuristicKind,
    pub alpha: f64,
    pub beta: f64,
    pub edge_mode: EdgeMode,
    pub v_max: f64,
    pub dx_max: f64,
    pub n_line_samples: usize,
    pub goal_radius: f64,
    pub max_iterations: usize,
    pub max_wall: Option<Duration>,
    /// Metrics are recorded every this many iterations (and at the end).
    pub metrics_every: usize,
    pub dispersion_resolution: usize,
}

impl PlannerConfig {
    pub fn new(heuristic: HeuristicKind, v_max: f64, dx_max: f64, goal_radius: f64) -> Self {
        PlannerConfig {
            heuristic,
            alpha: 1.0,
            beta: 1.0,
            edge_mode: EdgeMode::AdaptiveArc,
            v_max,
            dx_max,
            n_line_samples: 7,
            goal_radius,
            max_iterations: 5000,
            max_wall: Some(Duration::from_secs(60)),
            metrics_every: 100,
            dispersion_resolution: 256,
        }
    }

    /// One percent of the workspace diagonal.
    pub fn default_goal_radius(ws: &Workspace) -> f64 {
        0.01 * ws.bounds.diagonal()
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("v_max", self.v_max),
            ("dx_max", self.dx_max),
            ("goal_radius", self.goal_radius),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(PlanError::InvalidConfig(format!(
                    "{name} must be positive, got {x}"
                )));
            }
        }
        if self.n_line_samples == 0 {
            return Err(PlanError::InvalidConfig(
                "n_line_samples must be at least 1".into(),
            ));
        }
        if self.metrics_every == 0 {
            return Err(PlanError::InvalidConfig(
                "metrics_every must be at least 1".into(),
            ));
        }
        if self.dispersion_resolution < 2 {
            return Err(PlanError::InvalidConfig(
                "dispersion_resolution must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Arc-length integration for this many steps.
    Arc { steps: usize },
    /// One straight step with the flow frozen at its start.
    Analytic,
}

/// One persistent control and the states it produced, timed from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub action: ControlAction,
    pub kind: SegmentKind,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub segments: Vec<Segment>,
}

impl Edge {
    pub fn cost(&self) -> f64 {
        self.segments.iter().map(|s| s.action.tau).sum()
    }

    pub fn start(&self) -> Vec2 {
        self.segments[0].trajectory.first()
    }

    pub fn end(&self) -> Vec2 {
        self.segments[self.segments.len() - 1].trajectory.last()
    }

    /// All segments joined into one trajectory starting at `t0`.
    pub fn trajectory(&self, t0: f64) -> Trajectory {
        let mut out = Trajectory::start(self.start()).shifted(t0);
        let mut t = t0;
        for s in &self.segments {
            out.states
                .extend(s.trajectory.states.iter().skip(1).map(|st| State {
                    t: st.t + t,
                    p: st.p,
                }));
            t += s.action.tau;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub position: Vec2,
    pub cost: f64,
    pub parent: Option<usize>,
    pub edge: Option<Edge>,
    pub children: Vec<usize>,
}

/// Search tree rooted at the start; node ids are insertion indices.
#[derive(Debug, Clone)]
pub struct PlanTree {
    nodes: Vec<Node>,
    vertices: VertexSet,
    goal: Vec2,
    goal_radius: f64,
    goal_nodes: Vec<usize>,
}

impl PlanTree {
    fn new(
        h: &DistanceHeuristic,
        start: Vec2,
        goal: Vec2,
        goal_radius: f64,
    ) -> Result<Self, PlanError> {
        let mut tree = PlanTree {
            nodes: Vec::new(),
            vertices: VertexSet::new(),
            goal,
            goal_radius,
            goal_nodes: Vec::new(),
        };
        tree.push(h, start, 0.0, None, None)?;
        Ok(tree)
    }

    fn push(
        &mut self,
        h: &DistanceHeuristic,
        position: Vec2,
        cost: f64,
        parent: Option<usize>,
        edge: Option<Edge>,
    ) -> Result<usize, PlanError> {
        let id = self.nodes.len();
        self.vertices.push_unchecked(h, id, position)?;
        self.nodes.push(Node {
            position,
            cost,
            parent,
            edge,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        if position.distance(self.goal) <= self.goal_radius {
            self.goal_nodes.push(id);
        }
        Ok(id)
    }

    /// Moves `id` under `parent` and pushes the cost change down its subtree.
    fn reparent(&mut self, id: usize, parent: usize, edge: Edge) {
        let old = self.nodes[id].parent.expect("root is never rewired");
        self.nodes[old].children.retain(|&c| c != id);
        self.nodes[parent].children.push(id);
        let new_cost = self.nodes[parent].cost + edge.cost();
        let node = &mut self.nodes[id];
        node.parent = Some(parent);
        node.edge = Some(edge);
        node.cost = new_cost;
        let mut stack = node.children.clone();
        while let Some(c) = stack.pop() {
            let p = self.nodes[c].parent.expect("child has parent");
            let cost = self.nodes[p].cost + self.nodes[c].edge.as_ref().map_or(0.0, Edge::cost);
            self.nodes[c].cost = cost;
            stack.extend_from_slice(&self.nodes[c].children);
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn vertices(&self) -> &VertexSet {
        &self.vertices
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    pub fn goal_radius(&self) -> f64 {
        self.goal_radius
    }

    /// Cheapest vertex inside the goal region.
    pub fn best_goal(&self) -> Option<(usize, f64)> {
        self.goal_nodes
            .iter()
            .map(|&id| (id, self.nodes[id].cost))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    /// Largest gap between stored costs and costs recomputed from the root.
    pub fn cost_drift(&self) -> f64 {
        let mut worst = 0.0_f64;
        let mut stack = vec![(self.root(), 0.0)];
        let mut seen = 0;
        while let Some((id, c)) = stack.pop() {
            seen += 1;
            worst = worst.max((self.nodes[id].cost - c).abs());
            for &ch in &self.nodes[id].children {
                let e = self.nodes[ch].edge.as_ref().expect("non-root has an edge");
                stack.push((ch, c + e.cost()));
            }
        }
        if seen != self.nodes.len() {
            return f64::INFINITY;
        }
        worst
    }

    /// Edges from the root down to `id`.
    pub fn chain(&self, id: usize) -> Vec<&Edge> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(self.nodes[cur].edge.as_ref().expect("non-root has an edge"));
            cur = p;
        }
        out.reverse();
        out
    }
}

/// Root-to-goal controls with their trajectories in path time.
pub fn extract_path(tree: &PlanTree) -> Result<Vec<(ControlAction, Trajectory)>, PlanError> {
    let (goal, _) = tree.best_goal().ok_or(PlanError::Infeasible)?;
    let mut out = Vec::new();
    let mut t = 0.0;
    for edge in tree.chain(goal) {
        for s in &edge.segments {
            out.push((s.action, s.trajectory.clone().shifted(t)));
            t += s.action.tau;
        }
    }
    Ok(out)
}

/// Segments of the best root-to-goal chain.
pub fn extract_segments(tree: &PlanTree) -> Result<Vec<Segment>, PlanError> {
    let (goal, _) = tree.best_goal().ok_or(PlanError::Infeasible)?;
    Ok(tree
        .chain(goal)
        .into_iter()
        .flat_map(|e| e.segments.iter().cloned())
        .collect())
}

/// Re-integrates `segments` from `start` using only their controls.
pub fn replay(
    f: &FlowField,
    ws: &Workspace,
    start: Vec2,
    segments: &[Segment],
    dx_max: f64,
    v_max: f64,
) -> Trajectory {
    let mut out = Trajectory::start(start);
    for seg in segments {
        let s0 = out.last_state();
        let piece = match seg.kind {
            SegmentKind::Arc { steps } => {
                ArcStepper::new(f, ws, seg.action.u, dx_max, v_max).run(s0.p, steps, |_| false)
            }
            SegmentKind::Analytic => {
                let mut t = Trajectory::start(s0.p);
                match f.velocity(s0.p) {
                    Ok(v) => t.states.push(State {
                        t: seg.action.tau,
                        p: s0.p + (v + seg.action.u) * seg.action.tau,
                    }),
                    Err(_) => t.termination = Termination::OutOfBounds,
                }
                t
            }
        };
        let term = piece.termination;
        out.states
            .extend(piece.states.iter().skip(1).map(|s| State {
                t: s.t + s0.t,
                p: s.p,
            }));
        if term != Termination::Completed {
            out.termination = term;
            break;
        }
    }
    out
}

/// Outcome of [`Planner::steer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Steered {
    pub reached: Vec2,
    pub edge: Edge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub wall_s: f64,
    /// New-vertex insertions so far (rewires are not counted).
    pub connections: usize,
    pub dispersion: f64,
    pub best_cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub tree: PlanTree,
    pub metrics: Vec<IterationMetrics>,
    pub iterations: usize,
    pub connections: usize,
    pub rewires: usize,
    pub first_solution: Option<FirstSolution>,
    pub best_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstSolution {
    pub iteration: usize,
    pub wall_s: f64,
    pub cost: f64,
}

impl PlanResult {
    pub fn feasible(&self) -> bool {
        self.best_cost.is_some()
    }

    pub fn metrics_at(&self, iteration: usize) -> Option<&IterationMetrics> {
        self.metrics.iter().find(|m| m.iteration == iteration)
    }

    /// Best root-to-goal trajectory in path time.
    pub fn path_trajectory(&self) -> Option<Trajectory> {
        let (goal, _) = self.tree.best_goal()?;
        let mut out = Trajectory::start(self.tree.node(self.tree.root()).position);
        for edge in self.tree.chain(goal) {
            let t0 = out.last_state().t;
            out.states
                .extend(edge.trajectory(t0).states.into_iter().skip(1));
        }
        Some(out)
    }

    /// Text report: `#`-prefixed `echo` lines, metric rows, then the path
    /// as `t x y` lines (or an `infeasible` line).
    pub fn write_report(&self, echo: &str, mut out: impl Write) -> io::Result<()> {
        for line in echo.lines() {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "# connections counts new-vertex insertions only")?;
        writeln!(out, "iter wall_s connections dispersion best_cost")?;
        for m in &self.metrics {
            let best = m
                .best_cost
                .map_or_else(|| "-".to_string(), |c| c.to_string());
            writeln!(
                out,
                "{} {} {} {} {}",
                m.iteration, m.wall_s, m.connections, m.dispersion, best
            )?;
        }
        match self.path_trajectory() {
            Some(t) => {
                writeln!(out, "path")?;
                t.write_to(out)
            }
            None => writeln!(out, "infeasible"),
        }
    }
}

pub struct Planner<'a> {
    field: &'a FlowField,
    workspace: &'a Workspace,
    cfg: PlannerConfig,
    heuristic: DistanceHeuristic<'a>,
    /// Upper bound on |v + u|, for admissible edge-time lower bounds.
    top_speed: f64,
}

impl<'a> Planner<'a> {
    pub fn new(
        field: &'a FlowField,
        workspace: &'a Workspace,
        cfg: PlannerConfig,
    ) -> Result<Self, PlanError> {
        cfg.validate()?;
        if !field.bounds().contains_rect(&workspace.bounds) {
            return Err(PlanError::InvalidConfig(
                "workspace extends beyond the flow field".into(),
            ));
        }
        let heuristic =
            DistanceHeuristic::new(cfg.heuristic, field).with_scales(cfg.alpha, cfg.beta)?;
        Ok(Planner {
            field,
            workspace,
            top_speed: field.speed_bound() + cfg.v_max,
            cfg,
            heuristic,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn heuristic(&self) -> &DistanceHeuristic<'a> {
        &self.heuristic
    }

    /// Closing straight step from a state near `to`.
    fn close(&self, s: State, to: Vec2) -> Option<Segment> {
        let (action, trajectory) =
            analytic_step(self.field, self.workspace, s.p, to, self.cfg.v_max)?;
        Some(Segment {
            action,
            kind: SegmentKind::Analytic,
            trajectory,
        })
    }

    fn arc_segment(u: Vec2, traj: Trajectory) -> Option<Segment> {
        let steps = traj.len() - 1;
        (steps > 0).then(|| Segment {
            action: ControlAction {
                u,
                tau: traj.last_state().t,
            },
            kind: SegmentKind::Arc { steps },
            trajectory: traj,
        })
    }

    /// Moves from `from` toward `to` with the optimistic control.
    ///
    /// Returns `None` when the target is unreachable (the control line
    /// misses the speed disk) or no progress was made.
    pub fn steer(&self, from: Vec2, to: Vec2) -> Result<Option<Steered>, PlanError> {
        if from == to {
            return Err(ControlError::DegeneratePair.into());
        }
        match self.cfg.edge_mode {
            EdgeMode::AnalyticStep => {
                let d = to - from;
                let len = d.norm();
                let target = if len <= self.cfg.dx_max {
                    to
                } else {
                    from + d * (self.cfg.dx_max / len)
                };
                if !self.workspace.bounds.contains(target) {
                    return Ok(None);
                }
                Ok(self
                    .close(State { t: 0.0, p: from }, target)
                    .map(|seg| Steered {
                        reached: target,
                        edge: Edge {
                            segments: vec![seg],
                        },
                    }))
            }
            EdgeMode::AdaptiveArc => {
                let line = control_line(self.field, from, to)?;
                let flow = self.field.velocity(from).map_err(ControlError::from)?;
                let Some(u) = line.optimistic(flow, self.cfg.v_max) else {
                    return Ok(None);
                };
                let dx = self.cfg.dx_max;
                let stepper = ArcStepper::new(self.field, self.workspace, u, dx, self.cfg.v_max);
                let mut closing = None;
                let mut traj = Trajectory::start(from);
                if from.distance(to) <= dx {
                    closing = self.close(traj.states[0], to);
                }
                if closing.is_none() {
                    traj = stepper.run(from, n_steps(from, to, dx), |s| {
                        if s.p.distance(to) <= dx {
                            closing = self.close(*s, to);
                        }
                        closing.is_some()
                    });
                }
                if let Some(close) = closing {
                    let mut segments: Vec<Segment> =
                        Self::arc_segment(u, traj).into_iter().collect();
                    segments.push(close);
                    return Ok(Some(Steered {
                        reached: to,
                        edge: Edge { segments },
                    }));
                }
                // Closest recorded state under the planner's own heuristic.
                let mut best = (f64::INFINITY, 0);
                for (i, s) in traj.states.iter().enumerate().skip(1) {
                    let d = self.heuristic.dist(s.p, to)?;
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                if best.1 == 0 {
                    return Ok(None);
                }
                traj.truncate(best.1);
                let reached = traj.last();
                Ok(Self::arc_segment(u, traj).map(|seg| Steered {
                    reached,
                    edge: Edge {
                        segments: vec![seg],
                    },
                }))
            }
        }
    }

    /// Cheapest edge `from -> to` over the sampled control-line
    /// velocities, or `None` if no sample reaches `to` collision-free.
    pub fn collision_free(&self, from: Vec2, to: Vec2) -> Result<Option<Edge>, PlanError> {
        self.collision_free_within(from, to, f64::INFINITY)
    }

    /// As [`Self::collision_free`], ignoring edges costing `limit` or more.
    pub fn collision_free_within(
        &self,
        from: Vec2,
        to: Vec2,
        limit: f64,
    ) -> Result<Option<Edge>, PlanError> {
        if from == to {
            return Err(ControlError::DegeneratePair.into());
        }
        let dx = self.cfg.dx_max;
        let dist = from.distance(to);
        if dist / self.top_speed >= limit {
            return Ok(None);
        }
        match self.cfg.edge_mode {
            EdgeMode::AnalyticStep => {
                if dist > dx {
                    return Ok(None);
                }
                Ok(self
                    .close(State { t: 0.0, p: from }, to)
                    .filter(|s| s.action.tau < limit)
                    .map(|s| Edge { segments: vec![s] }))
            }
            EdgeMode::AdaptiveArc => {
                let line = control_line(self.field, from, to)?;
                let flow = self.field.velocity(from).map_err(ControlError::from)?;
                let samples = line.samples(flow, self.cfg.v_max, self.cfg.n_line_samples);
                let steps = n_steps(from, to, dx);
                let mut best: Option<Edge> = None;
                let mut limit = limit;
                for u in samples {
                    if let Some(edge) = self.reach(u, from, to, steps, limit) {
                        limit = edge.cost();
                        best = Some(edge);
                    }
                }
                Ok(best)
            }
        }
    }

    /// Arc-length propagation with `u` that must end exactly on `to`.
    fn reach(&self, u: Vec2, from: Vec2, to: Vec2, steps: usize, limit: f64) -> Option<Edge> {
        let dx = self.cfg.dx_max;
        let stepper = ArcStepper::new(self.field, self.workspace, u, dx, self.cfg.v_max);
        let mut traj = Trajectory::start(from);
        let mut s = traj.states[0];
        let mut k = 0;
        loop {
            let d = s.p.distance(to);
            if d <= dx {
                if let Some(close) = self.close(s, to) {
                    if s.t + close.action.tau >= limit {
                        return None;
                    }
                    let mut segments: Vec<Segment> =
                        Self::arc_segment(u, traj).into_iter().collect();
                    segments.push(close);
                    return Some(Edge { segments });
                }
            }
            // Every step moves exactly dx, and no state moves faster than top_speed.
            if k == steps || d > (steps - k) as f64 * dx + dx || s.t + d / self.top_speed >= limit {
                return None;
            }
            s = stepper.step(s).ok()?;
            traj.states.push(s);
            k += 1;
        }
    }

    /// Runs RRT* from `start` until the iteration or wall-clock budget ends.
    pub fn plan(
        &self,
        start: Vec2,
        goal: Vec2,
        sampler: &mut HaltonSampler,
    ) -> Result<PlanResult, PlanError> {
        if !self.workspace.is_free(start) {
            return Err(PlanError::StartOutOfBounds(start));
        }
        if !self.workspace.bounds.contains(goal) {
            return Err(PlanError::GoalOutOfBounds(goal));
        }
        if start == goal {
            return Err(PlanError::DegeneratePair);
        }
        let clock = Instant::now();
        let h = &self.heuristic;
        let mut tree = PlanTree::new(h, start, goal, self.cfg.goal_radius)?;
        let mut tracker =
            DispersionTracker::new(self.workspace.bounds, self.cfg.dispersion_resolution)
                .map_err(|e| PlanError::InvalidConfig(e.to_string()))?;
        tracker.insert(start);

        let mut metrics = Vec::new();
        let mut connections = 0;
        let mut rewires = 0;
        let mut first_solution = None;
        let mut best_cost = tree.best_goal().map(|(_, c)| c);
        if let Some(c) = best_cost {
            first_solution = Some(FirstSolution {
                iteration: 0,
                wall_s: 0.0,
                cost: c,
            });
        }
        let mut record =
            |it: usize, connections: usize, best: Option<f64>, tracker: &mut DispersionTracker| {
                metrics.push(IterationMetrics {
                    iteration: it,
                    wall_s: clock.elapsed().as_secs_f64(),
                    connections,
                    dispersion: tracker.value().expect("tracker holds the root"),
                    best_cost: best,
                });
            };
        record(0, 0, best_cost, &mut tracker);

        let mut iteration = 0;
        while iteration < self.cfg.max_iterations {
            if let Some(limit) = self.cfg.max_wall {
                if clock.elapsed() >= limit {
                    break;
                }
            }
            iteration += 1;
            if self.extend(&mut tree, sampler, &mut rewires)? {
                connections += 1;
                tracker.insert(tree.nodes[tree.len() - 1].position);
            }
            let best = tree.best_goal().map(|(_, c)| c);
            if let (Some(cost), None) = (best, first_solution) {
                first_solution = Some(FirstSolution {
                    iteration,
                    wall_s: clock.elapsed().as_secs_f64(),
                    cost,
                });
            }
            best_cost = best;
            if iteration % self.cfg.metrics_every == 0 {
                record(iteration, connections, best_cost, &mut tracker);
            }
        }
        if iteration % self.cfg.metrics_every != 0 {
            record(iteration, connections, best_cost, &mut tracker);
        }
        Ok(PlanResult {
            tree,
            metrics,
            iterations: iteration,
            connections,
            rewires,
            first_solution,
            best_cost,
        })
    }

    /// One RRT* iteration; true when a vertex was added.
    fn extend(
        &self,
        tree: &mut PlanTree,
        sampler: &mut HaltonSampler,
        rewires: &mut usize,
    ) -> Result<bool, PlanError> {
        let h = &self.heuristic;
        let sample = sampler.next_sample();
        if !self.workspace.is_free(sample) {
            return Ok(false);
        }
        let nearest = h.nearest(&tree.vertices, sample)?;
        let from = tree.nodes[nearest].position;
        if from == sample {
            return Ok(false);
        }
        let Some(steered) = self.steer(from, sample)? else {
            return Ok(false);
        };
        let x_new = steered.reached;

        let k = k_nearest_count(tree.len());
        let near = h.k_nearest(&tree.vertices, x_new, k)?;
        if near.iter().any(|&(id, _)| tree.nodes[id].position == x_new) {
            return Ok(false);
        }

        let mut parent = nearest;
        let mut best_cost = tree.nodes[nearest].cost + steered.edge.cost();
        let mut best_edge = steered.edge;
        for &(id, _) in &near {
            let c = tree.nodes[id].cost;
            if let Some(e) =
                self.collision_free_within(tree.nodes[id].position, x_new, best_cost - c)?
            {
                if c + e.cost() < best_cost {
                    best_cost = c + e.cost();
                    best_edge = e;
                    parent = id;
                }
            }
        }
        let new_id = tree.push(h, x_new, best_cost, Some(parent), Some(best_edge))?;

        for &(id, _) in &near {
            if id == parent {
                continue;
            }
            let target = tree.nodes[id].cost;
            let base = tree.nodes[new_id].cost;
            if let Some(e) =
                self.collision_free_within(x_new, tree.nodes[id].position, target - base)?
            {
                if base + e.cost() < target {
                    tree.reparent(id, new_id, e);
                    *rewires += 1;
                }
            }
        }
        Ok(true)
    }
}
