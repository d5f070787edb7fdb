use rayon::prelude::*;

use super::cutoff::Cutoff;
use super::window::Window;
use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::kernel::DiscreteKernel;
use crate::operator::{OperatorContext, PairMask};
use crate::scalar::{pairwise_sum, Real};

/// The remainder region `ℛ_R`: pairs at distance at most `R₀` that are
/// neither both in the closed ball `B_R` nor both outside the open ball
/// `B_2R`. Distances to the origin use sample coordinates (no wrapping), the
/// same coordinates the cutoff is built from; every pair with `τ(x) ≠ τ(y)`
/// lies in the region.
#[derive(Clone, Debug)]
pub struct PairRegion<T> {
    pub radius: T,
    pub big_r0: T,
    radii: Vec<T>,
    h: [T; 2],
}

impl<T: Real> PairRegion<T> {
    pub fn new(grid: &Grid<T>, radius: T, big_r0: T) -> Self {
        let radii = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                (p[0] * p[0] + p[1] * p[1]).sqrt()
            })
            .collect();
        PairRegion {
            radius,
            big_r0,
            radii,
            h: grid.spacing(),
        }
    }

    /// Membership in `𝒮_R` from the two radii.
    pub fn annular(&self, rx: T, ry: T) -> bool {
        let (r, r2) = (self.radius, self.radius * T::lit(2.0));
        let both_inner = rx <= r && ry <= r;
        let both_outer = rx >= r2 && ry >= r2;
        !both_inner && !both_outer
    }

    fn near(&self, offset: [isize; 2]) -> bool {
        let a = T::from_isize_exact(offset[0]) * self.h[0];
        let b = T::from_isize_exact(offset[1]) * self.h[1];
        (a * a + b * b).sqrt() <= self.big_r0 * T::lit(1.0 + 1e-12)
    }

    /// Ordered grid pairs `(x, x − δ)` of the region over the stencil of
    /// `kernel` (positive weights, `y` inside the grid).
    pub fn pair_count(&self, grid: &Grid<T>, kernel: &DiscreteKernel<T>) -> u64 {
        let offsets: Vec<[isize; 2]> = kernel
            .offsets()
            .iter()
            .zip(kernel.weights())
            .filter(|(o, &w)| w > T::zero() && self.near(**o))
            .map(|(o, _)| *o)
            .collect();
        (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let [i0, i1] = grid.unflat(x);
                offsets
                    .iter()
                    .filter_map(|o| grid.shifted_inside(i0, i1, [-o[0], -o[1]]))
                    .filter(|&y| self.annular(self.radii[x], self.radii[y]))
                    .count() as u64
            })
            .sum()
    }
}

impl<T: Real> PairMask for PairRegion<T> {
    fn contains(&self, x: usize, y: usize, offset: [isize; 2]) -> bool {
        self.near(offset) && self.annular(self.radii[x], self.radii[y])
    }
}

/// Every double sum of the energy chain for one cutoff. Pairs run over
/// `y = x − δ` in the kernel stencil with both points in the window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergySums<T> {
    /// `∬ (v(x)−v(y))² τ²(x) u₂(x)u₂(y) k`.
    pub j1: T,
    /// `J1` with `(v(x)−v(y))²` replaced by `1 + v(x)² + v(y)²`.
    pub j1_scale: T,
    /// `∬ (v(x)−v(y))(τ²(x)−τ²(y)) v(y) u₂(x)u₂(y) k`, so that
    /// `I1 − I2 = J1 + X` pair by pair and `|X| ≤ J2`.
    pub x_term: T,
    pub j2: T,
    pub cs_a: T,
    pub cs_b: T,
    /// `ℛ_R`-restricted `∬ (v(x)−v(y))² u₂(x)u₂(y) k`.
    pub tail_energy: T,
    /// `∬ (u₁(x)−u₁(y))(τ²u₁(x)−τ²u₁(y)) k`.
    pub i1: T,
    /// `∬ (u₂(x)−u₂(y))(τ²v²u₂(x)−τ²v²u₂(y)) k`.
    pub i2: T,
}

const NSUMS: usize = 9;

/// One pass over all window pairs accumulating [`EnergySums`].
pub fn energy_sums<T: Real>(
    ctx: &OperatorContext<T>,
    u1: &Field<T>,
    u2: &Field<T>,
    v: &Field<T>,
    window: &Window,
    cutoff: &Cutoff<T>,
    region: &PairRegion<T>,
) -> Result<EnergySums<T>> {
    let grid = ctx.grid();
    for f in [u1, u2, v, &cutoff.tau] {
        grid.check_same(f.grid(), "energy_sums")?;
    }
    let (u1, u2, v, tau) = (u1.values(), u2.values(), v.values(), cutoff.tau.values());
    let offsets = ctx.kernel().offsets();
    let masses = ctx.kernel().masses();
    let per_x: Vec<[T; NSUMS]> = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let mut acc = [T::zero(); NSUMS];
            if !window.contains(x) {
                return acc;
            }
            let [i0, i1] = grid.unflat(x);
            let (vx, tx, ax, bx) = (v[x], tau[x], u1[x], u2[x]);
            for (o, &m) in offsets.iter().zip(masses) {
                let Some(y) = grid.shifted_inside(i0, i1, [-o[0], -o[1]]) else {
                    continue;
                };
                if !window.contains(y) {
                    continue;
                }
                let (vy, ty, ay, by) = (v[y], tau[y], u1[y], u2[y]);
                let uu = bx * by * m;
                let dv = vx - vy;
                let dt = tx - ty;
                let (sx, sy) = (tx * tx, ty * ty);
                acc[0] = acc[0] + dv * dv * sx * uu;
                acc[1] = acc[1] + (T::one() + vx * vx + vy * vy) * sx * uu;
                acc[2] = acc[2] + dv * (sx - sy) * vy * uu;
                if region.contains(x, y, *o) {
                    let ts = tx + ty;
                    acc[3] = acc[3] + (dv * dt * ts * vy).abs() * uu;
                    acc[4] = acc[4] + dv * dv * ts * ts * uu;
                    acc[5] = acc[5] + dt * dt * vy * vy * uu;
                    acc[6] = acc[6] + dv * dv * uu;
                }
                acc[7] = acc[7] + (ax - ay) * (sx * ax - sy * ay) * m;
                acc[8] = acc[8] + (bx - by) * (sx * vx * vx * bx - sy * vy * vy * by) * m;
            }
            acc
        })
        .collect();
    let vol = grid.cell_volume();
    let total = |k: usize| {
        let col: Vec<T> = per_x.iter().map(|a| a[k]).collect();
        pairwise_sum(&col) * vol
    };
    Ok(EnergySums {
        j1: total(0),
        j1_scale: total(1),
        x_term: total(2),
        j2: total(3),
        cs_a: total(4),
        cs_b: total(5),
        tail_energy: total(6),
        i1: total(7),
        i2: total(8),
    })
}

/// `J1` alone.
pub fn compute_j1<T: Real>(
    ctx: &OperatorContext<T>,
    u1: &Field<T>,
    u2: &Field<T>,
    v: &Field<T>,
    window: &Window,
    cutoff: &Cutoff<T>,
) -> Result<T> {
    let region = PairRegion::new(ctx.grid(), cutoff.radius, ctx.kernel().support_radius());
    Ok(energy_sums(ctx, u1, u2, v, window, cutoff, &region)?.j1)
}

/// `(J2, cs_factor_a, cs_factor_b)`.
pub fn compute_j2<T: Real>(
    ctx: &OperatorContext<T>,
    u1: &Field<T>,
    u2: &Field<T>,
    v: &Field<T>,
    window: &Window,
    cutoff: &Cutoff<T>,
    region: &PairRegion<T>,
) -> Result<(T, T, T)> {
    let s = energy_sums(ctx, u1, u2, v, window, cutoff, region)?;
    Ok((s.j2, s.cs_a, s.cs_b))
}
