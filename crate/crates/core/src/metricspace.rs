//! Distance heuristics and brute-force neighbour queries.
//!
//! Besides plain Euclidean distance there are two streamline-aware
//! heuristics. Both add a third coordinate to the planar separation:
//!
//! * L2-stream: `sqrt(|p - q|^2 + (psi(p, q) / alpha)^2)`, a true metric
//!   since `psi(p, q)` is a difference of per-point values against any fixed
//!   reference point;
//! * L2-LSB: `sqrt(|p - q|^2 + (v_lsb(p, q) * beta)^2)`, symmetric but not
//!   a metric. The approximate variant picks its answer among the L2-stream
//!   k-nearest candidates.

use std::cmp::Ordering;

use thiserror::Error;

use crate::flowfield::{FlowError, FlowField};
use crate::geometry::Vec2;

/// `e (1 + 1/d)` for a 2D configuration space.
pub const K_RRG: f64 = std::f64::consts::E * 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("vertex set is empty")]
    Empty,
    #[error("operation needs the L2-stream heuristic, got {0:?}")]
    UnsupportedKind(HeuristicKind),
    #[error("vertex id {0} already present")]
    DuplicateId(usize),
    #[error("invalid heuristic parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeuristicKind {
    Euclidean,
    L2Stream,
    L2Lsb,
    L2LsbApprox,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [
        HeuristicKind::Euclidean,
        HeuristicKind::L2Stream,
        HeuristicKind::L2Lsb,
        HeuristicKind::L2LsbApprox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Euclidean => "euclidean",
            HeuristicKind::L2Stream => "l2-stream",
            HeuristicKind::L2Lsb => "l2-lsb",
            HeuristicKind::L2LsbApprox => "l2-lsb-approx",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_streamline(self) -> bool {
        self != HeuristicKind::Euclidean
    }
}

impl std::fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Neighbour count for a set of `n` vertices: `max(1, ceil(K_RRG ln n))`.
pub fn k_nearest_count(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    ((K_RRG * (n as f64).ln()).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct DistanceHeuristic<'f> {
    pub kind: HeuristicKind,
    /// Characteristic velocity (m/s) scaling stream values.
    pub alpha: f64,
    /// Characteristic time (s) scaling the lower speed bound.
    pub beta: f64,
    pub field: &'f FlowField,
    pub reference: Vec2,
}

impl<'f> DistanceHeuristic<'f> {
    /// Heuristic with `alpha = beta = 1` and the reference point at the
    /// centre of the field.
    pub fn new(kind: HeuristicKind, field: &'f FlowField) -> Self {
        DistanceHeuristic {
            kind,
            alpha: 1.0,
            beta: 1.0,
            field,
            reference: field.bounds().center(),
        }
    }

    pub fn with_scales(mut self, alpha: f64, beta: f64) -> Result<Self, MetricError> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(MetricError::InvalidParameter(format!(
                "alpha and beta must be positive, got {alpha} and {beta}"
            )));
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_reference(mut self, reference: Vec2) -> Self {
        self.reference = reference;
        self
    }

    /// Distance from stored Euclidean separation and stream value.
    #[inline]
    fn combine(&self, planar_sq: f64, psi: f64) -> f64 {
        self.combine_as(self.kind, planar_sq, psi)
    }

    #[inline]
    fn combine_as(&self, kind: HeuristicKind, planar_sq: f64, psi: f64) -> f64 {
        match kind {
            HeuristicKind::Euclidean => planar_sq.sqrt(),
            HeuristicKind::L2Stream => {
                let s = psi / self.alpha;
                (planar_sq + s * s).sqrt()
            }
            HeuristicKind::L2Lsb | HeuristicKind::L2LsbApprox => {
                if planar_sq == 0.0 {
                    return 0.0;
                }
                let lsb = psi.abs() / planar_sq.sqrt() * self.beta;
                (planar_sq + lsb * lsb).sqrt()
            }
        }
    }

    pub fn dist(&self, p: Vec2, q: Vec2) -> Result<f64, MetricError> {
        let psi = match self.kind {
            HeuristicKind::Euclidean => {
                // still a bounds check, for consistency with the other kinds
                self.field.velocity(p)?;
                self.field.velocity(q)?;
                0.0
            }
            _ => self.field.stream_value(p, q)?,
        };
        Ok(self.combine((p - q).norm_sq(), psi))
    }

    /// `(x, y, psi(p, reference) / alpha)`; Euclidean distance between
    /// embeddings equals the L2-stream distance.
    pub fn stream_embed(&self, p: Vec2) -> Result<[f64; 3], MetricError> {
        if self.kind != HeuristicKind::L2Stream {
            return Err(MetricError::UnsupportedKind(self.kind));
        }
        let psi = self.field.stream_value(p, self.reference)?;
        Ok([p.x, p.y, psi / self.alpha])
    }

    /// Caches what a query point needs against a vertex set.
    pub fn query(&self, q: Vec2) -> Result<Query, MetricError> {
        let psi_ref = if self.kind == HeuristicKind::Euclidean {
            self.field.velocity(q)?;
            0.0
        } else {
            self.field.stream_value(q, self.reference)?
        };
        Ok(Query {
            position: q,
            psi_ref,
        })
    }

    #[inline]
    fn dist_cached(&self, a: &Vertex, q: &Query) -> f64 {
        self.combine((a.position - q.position).norm_sq(), a.psi_ref - q.psi_ref)
    }

    #[inline]
    fn dist_cached_as(&self, kind: HeuristicKind, a: &Vertex, q: &Query) -> f64 {
        self.combine_as(
            kind,
            (a.position - q.position).norm_sq(),
            a.psi_ref - q.psi_ref,
        )
    }

    /// Nearest vertex to `q`.
    pub fn nearest(&self, vs: &VertexSet, q: Vec2) -> Result<usize, MetricError> {
        let k = k_nearest_count(vs.len());
        self.nearest_with_k(vs, q, k)
    }

    /// As [`Self::nearest`], with an explicit candidate count for the
    /// approximate L2-LSB variant.
    pub fn nearest_with_k(&self, vs: &VertexSet, q: Vec2, k: usize) -> Result<usize, MetricError> {
        if vs.is_empty() {
            return Err(MetricError::Empty);
        }
        let query = self.query(q)?;
        let by =
            |kind: HeuristicKind, vert: &Vertex| (self.dist_cached_as(kind, vert, &query), vert.id);
        let argmin = |kind: HeuristicKind, it: &mut dyn Iterator<Item = &Vertex>| {
            it.map(|v| by(kind, v))
                .min_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
                .map(|(_, id)| id)
                .expect("non-empty")
        };
        Ok(match self.kind {
            HeuristicKind::L2LsbApprox => {
                let mut cand: Vec<(f64, usize, usize)> = vs
                    .vertices
                    .iter()
                    .enumerate()
                    .map(|(slot, v)| {
                        (
                            self.dist_cached_as(HeuristicKind::L2Stream, v, &query),
                            v.id,
                            slot,
                        )
                    })
                    .collect();
                let k = k.clamp(1, cand.len());
                if k < cand.len() {
                    cand.select_nth_unstable_by(k - 1, |a, b| {
                        (a.0, a.1)
                            .partial_cmp(&(b.0, b.1))
                            .unwrap_or(Ordering::Equal)
                    });
                    cand.truncate(k);
                }
                argmin(
                    HeuristicKind::L2Lsb,
                    &mut cand.iter().map(|&(_, _, slot)| &vs.vertices[slot]),
                )
            }
            kind => argmin(kind, &mut vs.vertices.iter()),
        })
    }

    /// All vertices within `radius`, ascending by distance then id.
    pub fn near(&self, vs: &VertexSet, q: Vec2, radius: f64) -> Result<Vec<usize>, MetricError> {
        let query = self.query(q)?;
        let mut hits: Vec<(f64, usize)> = vs
            .vertices
            .iter()
            .map(|v| (self.dist_cached(v, &query), v.id))
            .filter(|(d, _)| *d <= radius)
            .collect();
        hits.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        Ok(hits.into_iter().map(|(_, id)| id).collect())
    }

    /// The `k` closest vertices, ascending by distance then id. The
    /// approximate L2-LSB kind ranks by exact L2-LSB here.
    pub fn k_nearest(
        &self,
        vs: &VertexSet,
        q: Vec2,
        k: usize,
    ) -> Result<Vec<(usize, f64)>, MetricError> {
        let query = self.query(q)?;
        let mut all: Vec<(f64, usize)> = vs
            .vertices
            .iter()
            .map(|v| (self.dist_cached(v, &query), v.id))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.partial_cmp(b).unwrap_or(Ordering::Equal);
        if k < all.len() && k > 0 {
            all.select_nth_unstable_by(k - 1, cmp);
            all.truncate(k);
        } else if k == 0 {
            all.clear();
        }
        all.sort_by(cmp);
        Ok(all.into_iter().map(|(d, id)| (id, d)).collect())
    }
}

/// Precomputed query state: position and stream value to the reference.
#[derive(Debug, Clone, Copy)]
pub struct Query {
    pub position: Vec2,
    pub psi_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub position: Vec2,
    /// `psi(position, reference)`.
    pub psi_ref: f64,
}

/// Insertion-ordered vertices with their stream values to a fixed reference.
#[derive(Debug, Clone, Default)]
pub struct VertexSet {
    vertices: Vec<Vertex>,
}

impl VertexSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        h: &DistanceHeuristic,
        id: usize,
        position: Vec2,
    ) -> Result<(), MetricError> {
        if self.vertices.iter().any(|v| v.id == id) {
            return Err(MetricError::DuplicateId(id));
        }
        let q = h.query(position)?;
        self.vertices.push(Vertex {
            id,
            position,
            psi_ref: q.psi_ref,
        });
        Ok(())
    }

    /// Insert without the duplicate check; ids must come from a counter.
    pub(crate) fn push_unchecked(
        &mut self,
        h: &DistanceHeuristic,
        id: usize,
        position: Vec2,
    ) -> Result<(), MetricError> {
        let q = h.query(position)?;
        self.vertices.push(Vertex {
            id,
            position,
            psi_ref: q.psi_ref,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.vertices.iter().map(|v| v.position)
    }
}
