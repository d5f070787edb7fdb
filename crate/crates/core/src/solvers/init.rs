//! Initial data and manufactured fields built from a 1D profile.

use super::profile::Profile1d;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::scalar::Real;

/// Unit direction `(a, 1)/√(a² + 1)`.
pub fn direction<T: Real>(a: T) -> [T; 2] {
    let n = (a * a + T::one()).sqrt();
    [a / n, T::one() / n]
}

/// `u = P(ω·x)` with `u1 = ω₁P'(ω·x)`, `u2 = ω₂P'(ω·x)` evaluated exactly
/// (no numerical differentiation), so `u1/u2 = a` up to rounding.
pub fn tilted<T: Real>(
    profile: &Profile1d<T>,
    grid: &Grid<T>,
    a: T,
) -> Result<(Field<T>, Field<T>, Field<T>)> {
    if grid.dim() != 2 {
        return Err(Error::Shape("tilted profile needs a 2D grid".into()));
    }
    let w = direction(a);
    let s = |p: [T; 2]| w[0] * p[0] + w[1] * p[1];
    let u = Field::from_fn(grid.clone(), |p| profile.eval(s(p)).0)?;
    let u1 = Field::from_fn(grid.clone(), |p| w[0] * profile.eval(s(p)).1)?;
    let u2 = Field::from_fn(grid.clone(), |p| w[1] * profile.eval(s(p)).1)?;
    Ok((u, u1, u2))
}

/// `P(x₂·(1 + ε·exp(−x₁²/σ²)))`: a local stretch of the planar front.
/// Monotone in x₂ for `ε > −1` and odd in x₂, so only modes odd in x₂ are
/// excited.
pub fn stretched<T: Real>(
    profile: &Profile1d<T>,
    grid: &Grid<T>,
    eps: T,
    sigma: T,
) -> Result<Field<T>> {
    if grid.dim() != 2 {
        return Err(Error::Shape("stretched profile needs a 2D grid".into()));
    }
    if !(eps > -T::one()) || !(sigma > T::zero()) {
        return Err(Error::Config("stretch needs eps > -1 and sigma > 0".into()));
    }
    Field::from_fn(grid.clone(), |p| {
        let g = (-(p[0] * p[0]) / (sigma * sigma)).exp();
        profile.eval(p[1] * (T::one() + eps * g)).0
    })
}
