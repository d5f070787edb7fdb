use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::scalar::Real;

/// `max S'` of the quintic smoothstep.
pub const QUINTIC_GRAD_BOUND: f64 = 15.0 / 8.0;

/// `S(t) = 6t⁵ − 15t⁴ + 10t³`; `S(0) = 0` and `S(1) = 1` exactly.
#[inline]
pub fn quintic_smoothstep<T: Real>(t: T) -> T {
    let c = |v: f64| T::lit(v);
    t * t * t * (t * (t * c(6.0) - c(15.0)) + c(10.0))
}

/// Radial cutoff `τ_R`: 1 on the closed ball `B_R`, 0 off the open ball
/// `B_2R`, with `|∇τ| ≤ grad_bound / R`.
#[derive(Clone, Debug)]
pub struct Cutoff<T> {
    pub radius: T,
    pub tau: Field<T>,
    pub grad_bound: T,
}

pub fn build_cutoff<T: Real>(grid: &Grid<T>, radius: T) -> Result<Cutoff<T>> {
    if !(radius > T::zero()) {
        return Err(Error::Config(format!(
            "cutoff radius must be positive, got {radius}"
        )));
    }
    let hw = grid.half_width();
    if T::lit(2.0) * radius > hw {
        return Err(Error::Config(format!(
            "cutoff support 2R = {} exceeds the grid half-width {hw}",
            T::lit(2.0) * radius
        )));
    }
    let two_r = T::lit(2.0) * radius;
    let tau = Field::from_fn(grid.clone(), |p| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let t = ((two_r - r) / radius).max(T::zero()).min(T::one());
        quintic_smoothstep(t)
    })?;
    Ok(Cutoff {
        radius,
        tau,
        grad_bound: T::lit(QUINTIC_GRAD_BOUND),
    })
}

impl<T: Real> Cutoff<T> {
    /// `max |∇τ|·R` from centred differences at interior points.
    pub fn measured_gradient(&self) -> T {
        let g = self.tau.grid();
        let [n0, n1] = g.shape();
        let h = g.spacing();
        let two = T::lit(2.0);
        let mut worst = T::zero();
        for i0 in 1..n0 - 1 {
            let j_range = if g.dim() == 2 { 1..n1 - 1 } else { 0..1 };
            for i1 in j_range {
                let d0 = (self.tau.get(i0 + 1, i1) - self.tau.get(i0 - 1, i1)) / (two * h[0]);
                let d1 = if g.dim() == 2 {
                    (self.tau.get(i0, i1 + 1) - self.tau.get(i0, i1 - 1)) / (two * h[1])
                } else {
                    T::zero()
                };
                worst = worst.max((d0 * d0 + d1 * d1).sqrt());
            }
        }
        worst * self.radius
    }
}
