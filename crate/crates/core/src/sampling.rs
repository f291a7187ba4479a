//! Low-dispersion sampling and coverage measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Rect, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("dispersion of an empty vertex set is undefined")]
    Empty,
    #[error("dispersion grid needs at least 2 points per axis, got {0}")]
    Resolution(usize),
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Base-(2, 3) Halton sequence with a rotation about the unit-square centre
/// and a toroidal (Cranley-Patterson) shift, mapped onto a workspace.
///
/// Rotation is applied to the sequence drawn over a covering square, so
/// the rotated point set keeps its spacing.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    index: u64,
    rotation: f64,
    offset: Vec2,
    seed: u64,
    workspace: Rect,
}

impl HaltonSampler {
    /// The plain sequence, starting at index 1.
    pub fn new(workspace: Rect) -> Self {
        Self::with_transform(workspace, 0.0, Vec2::ZERO)
    }

    pub fn with_transform(workspace: Rect, rotation: f64, offset: Vec2) -> Self {
        HaltonSampler {
            index: 1,
            rotation,
            offset,
            seed: 0,
            workspace,
        }
    }

    /// Rotation in `[0, 2 pi)` and offset in `[0, 1)^2` drawn from `seed`.
    pub fn seeded(seed: u64, workspace: Rect) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rotation = rng.gen_range(0.0..std::f64::consts::TAU);
        let offset = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        HaltonSampler {
            seed,
            ..Self::with_transform(workspace, rotation, offset)
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn offset(&self) -> Vec2 {
        self.offset
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn workspace(&self) -> Rect {
        self.workspace
    }

    /// Next point in the unit square, before the workspace map.
    ///
    /// The raw sequence is laid over the square of side `|cos| + |sin|` that
    /// covers the unit square after rotation; points landing outside are
    /// skipped, so one call may consume several sequence indices.
    pub fn next_unit(&mut self) -> Vec2 {
        let centre = Vec2::new(0.5, 0.5);
        let (s, c) = self.rotation.sin_cos();
        let side = s.abs() + c.abs();
        let p = loop {
            let raw = Vec2::new(
                radical_inverse(self.index, 2),
                radical_inverse(self.index, 3),
            );
            self.index += 1;
            let p = centre + ((raw - centre) * side).rotate(self.rotation);
            if (0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y) {
                break p;
            }
        };
        let wrap = |c: f64| {
            let r = c.rem_euclid(1.0);
            if r >= 1.0 {
                0.0
            } else {
                r
            }
        };
        Vec2::new(wrap(p.x + self.offset.x), wrap(p.y + self.offset.y))
    }

    pub fn next_sample(&mut self) -> Vec2 {
        let u = self.next_unit();
        self.workspace.from_unit(u)
    }
}

impl Iterator for HaltonSampler {
    type Item = Vec2;

    fn next(&mut self) -> Option<Vec2> {
        Some(self.next_sample())
    }
}

fn lattice(workspace: &Rect, resolution: usize) -> impl Iterator<Item = Vec2> + '_ {
    let step = |len: f64| len / (resolution - 1) as f64;
    let (hx, hy) = (step(workspace.width()), step(workspace.height()));
    (0..resolution).flat_map(move |j| {
        (0..resolution).map(move |i| workspace.min + Vec2::new(i as f64 * hx, j as f64 * hy))
    })
}

/// Largest empty circle radius estimated over a `resolution`^2 lattice
/// (boundary included).
///
/// This is a lower bound on the continuous dispersion and exceeds it by at
/// most half a lattice-cell diagonal.
pub fn dispersion(
    vertices: impl IntoIterator<Item = Vec2>,
    workspace: &Rect,
    resolution: usize,
) -> Result<f64, SamplingError> {
    let pts: Vec<Vec2> = vertices.into_iter().collect();
    if pts.is_empty() {
        return Err(SamplingError::Empty);
    }
    if resolution < 2 {
        return Err(SamplingError::Resolution(resolution));
    }
    let worst = lattice(workspace, resolution)
        .map(|g| {
            pts.iter()
                .map(|p| (*p - g).norm_sq())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

/// Half the diagonal of one lattice cell at `resolution`.
pub fn lattice_half_diagonal(workspace: &Rect, resolution: usize) -> f64 {
    let n = (resolution.max(2) - 1) as f64;
    0.5 * (workspace.width() / n).hypot(workspace.height() / n)
}

/// Incrementally maintained [`dispersion`] for a growing vertex set.
#[derive(Debug, Clone)]
pub struct DispersionTracker {
    workspace: Rect,
    resolution: usize,
    cells: Vec<f64>,
    /// Upper bound on the current max of `cells` (squared).
    bound_sq: f64,
    count: usize,
}

impl DispersionTracker {
    pub fn new(workspace: Rect, resolution: usize) -> Result<Self, SamplingError> {
        if resolution < 2 {
            return Err(SamplingError::Resolution(resolution));
        }
        Ok(DispersionTracker {
            workspace,
            resolution,
            cells: vec![f64::INFINITY; resolution * resolution],
            bound_sq: f64::INFINITY,
            count: 0,
        })
    }

    pub fn insert(&mut self, p: Vec2) {
        let n = self.resolution;
        let hx = self.workspace.width() / (n - 1) as f64;
        let hy = self.workspace.height() / (n - 1) as f64;
        let r = self.bound_sq.sqrt();
        let range = |c: f64, lo: f64, h: f64| -> (usize, usize) {
            if !r.is_finite() || h == 0.0 {
                return (0, n - 1);
            }
            let a = ((c - r - lo) / h).floor().max(0.0) as usize;
            let b = ((c + r - lo) / h).ceil().max(0.0) as usize;
            (a.min(n - 1), b.min(n - 1))
        };
        let (i0, i1) = range(p.x, self.workspace.min.x, hx);
        let (j0, j1) = range(p.y, self.workspace.min.y, hy);
        for j in j0..=j1 {
            let gy = self.workspace.min.y + j as f64 * hy;
            for i in i0..=i1 {
                let g = Vec2::new(self.workspace.min.x + i as f64 * hx, gy);
                let d = (p - g).norm_sq();
                let c = &mut self.cells[j * n + i];
                if d < *c {
                    *c = d;
                }
            }
        }
        self.count += 1;
        if !self.bound_sq.is_finite() {
            self.bound_sq = self.cells.iter().copied().fold(0.0, f64::max);
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn value(&mut self) -> Result<f64, SamplingError> {
        if self.count == 0 {
            return Err(SamplingError::Empty);
        }
        self.bound_sq = self.cells.iter().copied().fold(0.0, f64::max);
        Ok(self.bound_sq.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Rect {
        Rect::new(Vec2::ZERO, Vec2::new(1.0, 1.0))
    }

    #[test]
    fn first_raw_points() {
        let mut s = HaltonSampler::new(unit());
        let want = [(0.5, 1.0 / 3.0), (0.25, 2.0 / 3.0), (0.75, 1.0 / 9.0)];
        for (x, y) in want {
            let p = s.next_sample();
            assert!((p.x - x).abs() < 1e-15 && (p.y - y).abs() < 1e-15, "{p}");
        }
        assert_eq!(s.index(), 4);
    }

    #[test]
    fn offset_wraps() {
        let mut s = HaltonSampler::with_transform(unit(), 0.0, Vec2::new(0.5, 0.5));
        let p = s.next_sample();
        assert_eq!(p.x, 0.0);
        assert!((p.y - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn workspace_mapping() {
        let ws = Rect::new(Vec2::new(-1.0, 2.0), Vec2::new(3.0, 4.0));
        let p = HaltonSampler::new(ws).next_sample();
        assert!((p - Vec2::new(1.0, 2.0 + 2.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn seeded_is_deterministic() {
        let a: Vec<Vec2> = HaltonSampler::seeded(42, unit()).take(1000).collect();
        let b: Vec<Vec2> = HaltonSampler::seeded(42, unit()).take(1000).collect();
        assert_eq!(a, b);
        let c: Vec<Vec2> = HaltonSampler::seeded(43, unit()).take(10).collect();
        assert_ne!(a[..10], c[..]);
        assert!(a
            .iter()
            .all(|p| unit().contains(*p) && p.x < 1.0 && p.y < 1.0));
    }

    #[test]
    fn dispersion_examples() {
        let d = dispersion([Vec2::new(0.5, 0.5)], &unit(), 257).unwrap();
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let corners = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
        ];
        let d = dispersion(corners, &unit(), 257).unwrap();
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let d = dispersion(corners, &unit(), 256).unwrap();
        assert!(
            (d - std::f64::consts::FRAC_1_SQRT_2).abs()
                <= lattice_half_diagonal(&unit(), 256) + 1e-12
        );
    }

    #[test]
    fn dispersion_errors() {
        assert_eq!(dispersion([], &unit(), 10), Err(SamplingError::Empty));
        assert_eq!(
            dispersion([Vec2::ZERO], &unit(), 1),
            Err(SamplingError::Resolution(1))
        );
        assert!(DispersionTracker::new(unit(), 1).is_err());
        assert_eq!(
            DispersionTracker::new(unit(), 8).unwrap().value(),
            Err(SamplingError::Empty)
        );
    }

    #[test]
    fn tracker_matches_batch() {
        let ws = Rect::new(Vec2::ZERO, Vec2::new(2.0, 2.0));
        let mut t = DispersionTracker::new(ws, 64).unwrap();
        let mut pts = Vec::new();
        for (k, p) in HaltonSampler::seeded(5, ws).take(300).enumerate() {
            t.insert(p);
            pts.push(p);
            if k % 7 == 0 {
                assert_eq!(
                    t.value().unwrap(),
                    dispersion(pts.iter().copied(), &ws, 64).unwrap()
                );
            }
        }
        assert_eq!(t.value().unwrap(), dispersion(pts, &ws, 64).unwrap());
    }

    #[test]
    fn refinement_consistency() {
        let pts: Vec<Vec2> = HaltonSampler::seeded(9, unit()).take(40).collect();
        for r in [8, 16, 33, 64] {
            let coarse = dispersion(pts.iter().copied(), &unit(), r).unwrap();
            let fine = dispersion(pts.iter().copied(), &unit(), 2 * r).unwrap();
            assert!(coarse <= fine + lattice_half_diagonal(&unit(), 2 * r));
        }
    }

    #[test]
    fn rotation_keeps_low_dispersion() {
        let base: Vec<Vec2> = HaltonSampler::new(unit()).take(100).collect();
        let d0 = dispersion(base, &unit(), 128).unwrap();
        for seed in 0..20 {
            let pts: Vec<Vec2> = HaltonSampler::seeded(seed, unit()).take(100).collect();
            assert!(dispersion(pts, &unit(), 128).unwrap() <= 2.0 * d0);
        }
    }
}
