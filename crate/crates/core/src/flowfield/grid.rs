use super::{FlowError, FlowField};
use crate::geometry::{Rect, Vec2};

/// Velocity reconstruction between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Bilinear,
    /// Tensor-product cubic Lagrange on the 4x4 surrounding nodes
    /// (one-sided stencils at the border). Continuous across cells.
    #[default]
    Cubic,
}

/// Regularly sampled velocity field.
///
/// Samples are stored row-major with y-major rows: node `(i, j)` lives at
/// index `j * nx + i` and position `origin + (i dx, j dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    origin: Vec2,
    spacing: (f64, f64),
    nx: usize,
    ny: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    interpolation: Interpolation,
}

// 5-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

impl GridField {
    pub fn new(
        origin: Vec2,
        spacing: (f64, f64),
        nx: usize,
        ny: usize,
        u: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self, FlowError> {
        if nx < 2 || ny < 2 {
            return Err(FlowError::Invalid(format!(
                "grid needs at least 2x2 nodes, got {nx}x{ny}"
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0 && spacing.0.is_finite() && spacing.1.is_finite()) {
            return Err(FlowError::Invalid(format!(
                "grid spacing must be positive, got {spacing:?}"
            )));
        }
        if !origin.is_finite() {
            return Err(FlowError::Invalid("grid origin must be finite".into()));
        }
        let n = nx * ny;
        if u.len() != n || v.len() != n {
            return Err(FlowError::Invalid(format!(
                "expected {n} samples, got {} u and {} v",
                u.len(),
                v.len()
            )));
        }
        if let Some(k) = u.iter().chain(&v).position(|s| !s.is_finite()) {
            return Err(FlowError::Invalid(format!(
                "non-finite sample at index {}",
                k % n
            )));
        }
        Ok(GridField {
            origin,
            spacing,
            nx,
            ny,
            u,
            v,
            interpolation: Interpolation::default(),
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(
        origin: Vec2,
        spacing: (f64, f64),
        nx: usize,
        ny: usize,
        f: impl Fn(Vec2) -> Vec2,
    ) -> Result<Self, FlowError> {
        let mut u = Vec::with_capacity(nx * ny);
        let mut v = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let w = f(origin + Vec2::new(i as f64 * spacing.0, j as f64 * spacing.1));
                u.push(w.x);
                v.push(w.y);
            }
        }
        Self::new(origin, spacing, nx, ny, u, v)
    }

    /// Samples another field on an `nx` x `ny` lattice spanning its bounds.
    pub fn sample(field: &FlowField, nx: usize, ny: usize) -> Result<Self, FlowError> {
        if nx < 2 || ny < 2 {
            return Err(FlowError::Invalid("grid needs at least 2x2 nodes".into()));
        }
        let b = field.bounds();
        let spacing = (b.width() / (nx - 1) as f64, b.height() / (ny - 1) as f64);
        Self::from_fn(b.min, spacing, nx, ny, |p| {
            // Clamp the far edge against accumulated rounding.
            let p = Vec2::new(p.x.min(b.max.x), p.y.min(b.max.y));
            field.velocity(p).expect("lattice inside bounds")
        })
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn u_samples(&self) -> &[f64] {
        &self.u
    }

    pub fn v_samples(&self) -> &[f64] {
        &self.v
    }

    pub fn bounds(&self) -> Rect {
        Rect::from_size(
            self.origin,
            (self.nx - 1) as f64 * self.spacing.0,
            (self.ny - 1) as f64 * self.spacing.1,
        )
    }

    pub(super) fn speed_bound(&self) -> f64 {
        let peak = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| u.hypot(*v))
            .fold(0.0, f64::max);
        match self.interpolation {
            Interpolation::Bilinear => peak,
            // Lebesgue constant of 4-point Lagrange on equispaced nodes, per axis.
            Interpolation::Cubic => peak * 1.25 * 1.25,
        }
    }

    /// Cell index and local coordinate along one axis.
    #[inline]
    fn locate(coord: f64, origin: f64, h: f64, n: usize) -> (usize, f64) {
        let s = (coord - origin) / h;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        (i, s - i as f64)
    }

    /// Lagrange weights over the stencil for cell `i` and local coordinate `s`.
    /// Returns the first node of the stencil and up to four weights.
    #[inline]
    fn weights(&self, i: usize, s: f64, n: usize) -> (usize, [f64; 4], usize) {
        match self.interpolation {
            Interpolation::Cubic if n >= 4 => {
                let start = i.saturating_sub(1).min(n - 4);
                let t = (i - start) as f64 + s;
                let (a, b, c, d) = (t, t - 1.0, t - 2.0, t - 3.0);
                (
                    start,
                    [
                        -b * c * d / 6.0,
                        a * c * d / 2.0,
                        -a * b * d / 2.0,
                        a * b * c / 6.0,
                    ],
                    4,
                )
            }
            _ => (i, [1.0 - s, s, 0.0, 0.0], 2),
        }
    }

    #[inline]
    fn eval_in_cell(&self, ci: usize, cj: usize, p: Vec2) -> Vec2 {
        let sx = (p.x - self.origin.x) / self.spacing.0 - ci as f64;
        let sy = (p.y - self.origin.y) / self.spacing.1 - cj as f64;
        let (i0, wx, mx) = self.weights(ci, sx, self.nx);
        let (j0, wy, my) = self.weights(cj, sy, self.ny);
        let mut out = Vec2::ZERO;
        for (b, wyb) in wy.iter().enumerate().take(my) {
            let row = (j0 + b) * self.nx + i0;
            let mut ru = 0.0;
            let mut rv = 0.0;
            for (a, wxa) in wx.iter().enumerate().take(mx) {
                ru += wxa * self.u[row + a];
                rv += wxa * self.v[row + a];
            }
            out.x += wyb * ru;
            out.y += wyb * rv;
        }
        out
    }

    pub(super) fn velocity(&self, p: Vec2) -> Vec2 {
        let (ci, _) = Self::locate(p.x, self.origin.x, self.spacing.0, self.nx);
        let (cj, _) = Self::locate(p.y, self.origin.y, self.spacing.1, self.ny);
        self.eval_in_cell(ci, cj, p)
    }

    /// Line integral of `u dy - v dx` along the straight segment `p -> q`,
    /// split at every cell boundary so each piece sees a single polynomial.
    pub(super) fn stream_value(&self, p: Vec2, q: Vec2) -> f64 {
        let d = q - p;
        if d.x == 0.0 && d.y == 0.0 {
            return 0.0;
        }
        let mut breaks = vec![0.0, 1.0];
        let mut push_crossings = |a: f64, b: f64, origin: f64, h: f64, n: usize| {
            if a == b {
                return;
            }
            let (lo, hi) = (a.min(b), a.max(b));
            let first = ((lo - origin) / h).floor() as i64 + 1;
            let last = ((hi - origin) / h).ceil() as i64 - 1;
            for k in first.max(1)..=last.min(n as i64 - 2) {
                let t = (origin + k as f64 * h - a) / (b - a);
                if t > 0.0 && t < 1.0 {
                    breaks.push(t);
                }
            }
        };
        push_crossings(p.x, q.x, self.origin.x, self.spacing.0, self.nx);
        push_crossings(p.y, q.y, self.origin.y, self.spacing.1, self.ny);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 <= t0 {
                continue;
            }
            let mid = p + d * (0.5 * (t0 + t1));
            let (ci, _) = Self::locate(mid.x, self.origin.x, self.spacing.0, self.nx);
            let (cj, _) = Self::locate(mid.y, self.origin.y, self.spacing.1, self.ny);
            let half = 0.5 * (t1 - t0);
            let centre = 0.5 * (t0 + t1);
            let mut piece = 0.0;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let vel = self.eval_in_cell(ci, cj, p + d * (centre + half * x));
                piece += w * (vel.x * d.y - vel.y * d.x);
            }
            total += piece * half;
        }
        total
    }
}
