//! Incompressible planar flow fields.
//!
//! Every field answers two queries: the flow velocity at a point, and the
//! stream value between two points, i.e. the line integral of
//! `u dy - v dx` along any path joining them. Analytic kinds carry a closed
//! form stream function `psi` with `u = d(psi)/dy` and `v = -d(psi)/dx`, so
//! the stream value is just `psi(q) - psi(p)`. Gridded fields integrate the
//! interpolated velocity along the straight segment.

mod grid;
mod io;

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{Rect, Vec2};

pub use grid::{GridField, Interpolation};
pub use io::{load_grid, save_grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("point {0} lies outside the flow field bounds")]
    OutOfBounds(Vec2),
    #[error("cannot superpose an empty list of fields")]
    EmptySuperposition,
    #[error("superposed fields have disjoint bounds")]
    DisjointBounds,
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error("grid parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// The concrete shape of a [`FlowField`].
#[derive(Debug, Clone, PartialEq)]
pub enum FlowKind {
    Uniform {
        velocity: Vec2,
    },
    /// Point vortex with a smoothed core. Positive circulation turns
    /// counter-clockwise; peak speed `circulation / (4 pi core_radius)` is
    /// reached at `core_radius` from the centre.
    SingleVortex {
        center: Vec2,
        circulation: f64,
        core_radius: f64,
    },
    /// Four counter-rotating cells of side `cell` with
    /// `psi = (A cell / pi) sin(pi x / cell) sin(pi y / cell)`, coordinates
    /// measured from `origin`. Peak speed is exactly `amplitude`.
    QuadVortex {
        amplitude: f64,
        cell: f64,
        origin: Vec2,
    },
    /// Parallel shear jet along the x axis, `u(y) = peak sech^2((y - axis_y) / width)`.
    ShearJet {
        axis_y: f64,
        width: f64,
        peak: f64,
    },
    Superposition(Vec<FlowField>),
    Grid(GridField),
}

/// A steady incompressible velocity field over a closed rectangle.
///
/// Immutable once built, so it can be shared freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    kind: FlowKind,
    bounds: Rect,
}

impl FlowField {
    pub fn uniform(velocity: Vec2, bounds: Rect) -> Self {
        assert!(velocity.is_finite());
        FlowField {
            kind: FlowKind::Uniform { velocity },
            bounds,
        }
    }

    /// Still water.
    pub fn zero(bounds: Rect) -> Self {
        Self::uniform(Vec2::ZERO, bounds)
    }

    pub fn single_vortex(center: Vec2, circulation: f64, core_radius: f64, bounds: Rect) -> Self {
        assert!(core_radius > 0.0 && circulation.is_finite() && center.is_finite());
        FlowField {
            kind: FlowKind::SingleVortex {
                center,
                circulation,
                core_radius,
            },
            bounds,
        }
    }

    /// The four-cell vortex field on `[origin, origin + 2 cell]^2`.
    pub fn quad_vortex(amplitude: f64, cell: f64, origin: Vec2) -> Self {
        assert!(cell > 0.0 && amplitude.is_finite());
        FlowField {
            kind: FlowKind::QuadVortex {
                amplitude,
                cell,
                origin,
            },
            bounds: Rect::from_size(origin, 2.0 * cell, 2.0 * cell),
        }
    }

    pub fn shear_jet(axis_y: f64, width: f64, peak: f64, bounds: Rect) -> Self {
        assert!(width > 0.0 && peak.is_finite() && axis_y.is_finite());
        FlowField {
            kind: FlowKind::ShearJet {
                axis_y,
                width,
                peak,
            },
            bounds,
        }
    }

    pub fn grid(grid: GridField) -> Self {
        let bounds = grid.bounds();
        FlowField {
            kind: FlowKind::Grid(grid),
            bounds,
        }
    }

    /// Pointwise sum of `fields`; bounds are the common intersection.
    pub fn superpose(fields: Vec<FlowField>) -> Result<Self, FlowError> {
        let mut it = fields.iter();
        let first = it.next().ok_or(FlowError::EmptySuperposition)?;
        let mut bounds = first.bounds;
        for f in it {
            bounds = bounds
                .intersection(&f.bounds)
                .ok_or(FlowError::DisjointBounds)?;
        }
        Ok(FlowField {
            kind: FlowKind::Superposition(fields),
            bounds,
        })
    }

    /// Restricts the field to a smaller rectangle.
    pub fn with_bounds(mut self, bounds: Rect) -> Result<Self, FlowError> {
        self.bounds = self
            .bounds
            .intersection(&bounds)
            .ok_or(FlowError::DisjointBounds)?;
        Ok(self)
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    fn check(&self, p: Vec2) -> Result<(), FlowError> {
        if p.is_finite() && self.bounds.contains(p) {
            Ok(())
        } else {
            Err(FlowError::OutOfBounds(p))
        }
    }

    /// Flow velocity at `p`.
    pub fn velocity(&self, p: Vec2) -> Result<Vec2, FlowError> {
        self.check(p)?;
        Ok(self.velocity_unchecked(p))
    }

    fn velocity_unchecked(&self, p: Vec2) -> Vec2 {
        match &self.kind {
            FlowKind::Uniform { velocity } => *velocity,
            FlowKind::SingleVortex {
                center,
                circulation,
                core_radius,
            } => {
                let d = p - *center;
                let s = circulation / (2.0 * PI * (d.norm_sq() + core_radius * core_radius));
                d.perp() * s
            }
            FlowKind::QuadVortex {
                amplitude,
                cell,
                origin,
            } => {
                let k = PI / cell;
                let (sx, cx) = (k * (p.x - origin.x)).sin_cos();
                let (sy, cy) = (k * (p.y - origin.y)).sin_cos();
                Vec2::new(amplitude * sx * cy, -amplitude * cx * sy)
            }
            FlowKind::ShearJet {
                axis_y,
                width,
                peak,
            } => {
                let c = ((p.y - axis_y) / width).cosh();
                Vec2::new(peak / (c * c), 0.0)
            }
            FlowKind::Superposition(fields) => fields
                .iter()
                .fold(Vec2::ZERO, |acc, f| acc + f.velocity_unchecked(p)),
            FlowKind::Grid(g) => g.velocity(p),
        }
    }

    /// Closed-form stream function, when every component is analytic.
    ///
    /// Defined up to an additive constant; only differences are meaningful.
    pub fn potential(&self, p: Vec2) -> Option<f64> {
        Some(match &self.kind {
            FlowKind::Uniform { velocity } => velocity.x * p.y - velocity.y * p.x,
            FlowKind::SingleVortex {
                center,
                circulation,
                core_radius,
            } => {
                let r2 = (p - *center).norm_sq();
                -circulation / (4.0 * PI) * (r2 + core_radius * core_radius).ln()
            }
            FlowKind::QuadVortex {
                amplitude,
                cell,
                origin,
            } => {
                let k = PI / cell;
                amplitude / k * (k * (p.x - origin.x)).sin() * (k * (p.y - origin.y)).sin()
            }
            FlowKind::ShearJet {
                axis_y,
                width,
                peak,
            } => peak * width * ((p.y - axis_y) / width).tanh(),
            FlowKind::Superposition(fields) => {
                let mut sum = 0.0;
                for f in fields {
                    sum += f.potential(p)?;
                }
                sum
            }
            FlowKind::Grid(_) => return None,
        })
    }

    /// Stream value `psi(p, q)`: net flux crossing any path from `p` to `q`.
    pub fn stream_value(&self, p: Vec2, q: Vec2) -> Result<f64, FlowError> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.stream_value_unchecked(p, q))
    }

    fn stream_value_unchecked(&self, p: Vec2, q: Vec2) -> f64 {
        match &self.kind {
            FlowKind::Superposition(fields) => {
                fields.iter().map(|f| f.stream_value_unchecked(p, q)).sum()
            }
            FlowKind::Grid(g) => g.stream_value(p, q),
            _ => {
                let a = self.potential(p).expect("analytic kind");
                let b = self.potential(q).expect("analytic kind");
                b - a
            }
        }
    }

    /// Upper bound on the flow speed anywhere inside the bounds.
    pub fn speed_bound(&self) -> f64 {
        match &self.kind {
            FlowKind::Uniform { velocity } => velocity.norm(),
            FlowKind::SingleVortex {
                circulation,
                core_radius,
                ..
            } => circulation.abs() / (4.0 * PI * core_radius),
            FlowKind::QuadVortex { amplitude, .. } => amplitude.abs(),
            FlowKind::ShearJet { peak, .. } => peak.abs(),
            FlowKind::Superposition(fields) => fields.iter().map(FlowField::speed_bound).sum(),
            FlowKind::Grid(g) => g.speed_bound(),
        }
    }
}
