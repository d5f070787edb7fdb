//! Rectangular lattices in one or two dimensions, the scalar fields living on
//! them, exterior-extension rules and the on-disk field format.

mod derivative;
mod field;
mod io;

pub use derivative::{partial_derivative, DerivativeScheme};
pub use field::Field;
pub use io::{read_field, write_field, MAGIC};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exterior extension rule of one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Indices wrap around.
    Periodic,
    /// Exterior points repeat the nearest edge sample.
    Clamp,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Clamp => "clamp",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Boundary::Periodic),
            "clamp" => Ok(Boundary::Clamp),
            other => Err(Error::Config(format!("unknown boundary rule `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis<T> {
    pub n: usize,
    pub h: T,
    pub origin: T,
    pub boundary: Boundary,
}

impl<T: Real> Axis<T> {
    pub fn new(n: usize, h: T, origin: T, boundary: Boundary) -> Self {
        Axis {
            n,
            h,
            origin,
            boundary,
        }
    }

    /// Axis of `n` points spanning `[lo, hi]` inclusive.
    pub fn spanning(lo: T, hi: T, n: usize, boundary: Boundary) -> Self {
        let h = (hi - lo) / T::from_usize_exact(n.saturating_sub(1).max(1));
        Axis::new(n, h, lo, boundary)
    }

    /// Axis of `n` points with spacing `h`, symmetric about 0.
    pub fn centered(n: usize, h: T, boundary: Boundary) -> Self {
        let origin = -(T::from_usize_exact(n - 1) * h) / T::lit(2.0);
        Axis::new(n, h, origin, boundary)
    }

    #[inline]
    pub fn coord(&self, j: usize) -> T {
        self.origin + T::from_usize_exact(j) * self.h
    }

    /// Coordinate of an index that may lie outside `0..n`, without wrapping.
    #[inline]
    pub fn coord_unwrapped(&self, j: isize) -> T {
        self.origin + T::from_isize_exact(j) * self.h
    }

    /// Period of a periodic axis.
    pub fn length(&self) -> T {
        T::from_usize_exact(self.n) * self.h
    }

    /// Applies the exterior rule to an arbitrary index.
    #[inline]
    pub fn resolve(&self, j: isize) -> usize {
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => j.rem_euclid(n) as usize,
            Boundary::Clamp => j.clamp(0, n - 1) as usize,
        }
    }

    /// Like [`Axis::resolve`] but returns `None` for exterior points of a
    /// clamp axis.
    #[inline]
    pub fn resolve_inside(&self, j: isize) -> Option<usize> {
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
            Boundary::Clamp => (0..n).contains(&j).then_some(j as usize),
        }
    }

    /// Distance from 0 to the nearer end of the axis (negative if 0 is not
    /// covered).
    pub fn half_width(&self) -> T {
        let lo = self.coord(0);
        let hi = self.coord(self.n - 1);
        (-lo).min(hi)
    }

    fn validate(&self, i: usize) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Config(format!(
                "axis {i}: need at least 4 points, got {}",
                self.n
            )));
        }
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return Err(Error::Config(format!(
                "axis {i}: spacing must be positive and finite, got {}",
                self.h
            )));
        }
        if !self.origin.is_finite() {
            return Err(Error::Config(format!("axis {i}: origin not finite")));
        }
        Ok(())
    }
}

/// Lattice geometry. One-dimensional grids are stored with a trivial second
/// axis so that all loops can use `[i0, i1]` multi-indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    axes: Vec<Axis<T>>,
}

impl<T: Real> Grid<T> {
    pub fn new(axes: Vec<Axis<T>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config(format!(
                "grid dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        Ok(Grid { axes })
    }

    pub fn line(axis: Axis<T>) -> Result<Self> {
        Grid::new(vec![axis])
    }

    pub fn plane(x1: Axis<T>, x2: Axis<T>) -> Result<Self> {
        Grid::new(vec![x1, x2])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axis(&self, i: usize) -> &Axis<T> {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    /// Points per axis, padded with 1 for one-dimensional grids.
    #[inline]
    pub fn shape(&self) -> [usize; 2] {
        [self.axes[0].n, self.axes.get(1).map_or(1, |a| a.n)]
    }

    #[inline]
    pub fn len(&self) -> usize {
        let [a, b] = self.shape();
        a * b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [T; 2] {
        [self.axes[0].h, self.axes.get(1).map_or(T::one(), |a| a.h)]
    }

    pub fn min_spacing(&self) -> T {
        self.axes
            .iter()
            .map(|a| a.h)
            .fold(T::infinity(), |m, h| m.min(h))
    }

    /// Measure of one lattice cell.
    pub fn cell_volume(&self) -> T {
        self.axes.iter().fold(T::one(), |v, a| v * a.h)
    }

    pub fn is_periodic(&self) -> bool {
        self.axes.iter().all(|a| a.boundary == Boundary::Periodic)
    }

    #[inline]
    pub fn flat(&self, i0: usize, i1: usize) -> usize {
        i0 * self.shape()[1] + i1
    }

    #[inline]
    pub fn unflat(&self, idx: usize) -> [usize; 2] {
        let n1 = self.shape()[1];
        [idx / n1, idx % n1]
    }

    /// Physical coordinates of a lattice point (second entry 0 in 1D).
    #[inline]
    pub fn point(&self, idx: usize) -> [T; 2] {
        let [i0, i1] = self.unflat(idx);
        [
            self.axes[0].coord(i0),
            self.axes.get(1).map_or(T::zero(), |a| a.coord(i1)),
        ]
    }

    /// Flat index of the point reached from `[i0, i1]` by `offset`, with the
    /// exterior rule applied.
    #[inline]
    pub fn shifted(&self, i0: usize, i1: usize, offset: [isize; 2]) -> usize {
        let j0 = self.axes[0].resolve(i0 as isize + offset[0]);
        let j1 = match self.axes.get(1) {
            Some(a) => a.resolve(i1 as isize + offset[1]),
            None => 0,
        };
        self.flat(j0, j1)
    }

    /// Like [`Grid::shifted`] but `None` when the target is exterior on a
    /// clamp axis.
    #[inline]
    pub fn shifted_inside(&self, i0: usize, i1: usize, offset: [isize; 2]) -> Option<usize> {
        let j0 = self.axes[0].resolve_inside(i0 as isize + offset[0])?;
        let j1 = match self.axes.get(1) {
            Some(a) => a.resolve_inside(i1 as isize + offset[1])?,
            None => 0,
        };
        Some(self.flat(j0, j1))
    }

    /// Smallest half-width over all axes.
    pub fn half_width(&self) -> T {
        self.axes
            .iter()
            .map(|a| a.half_width())
            .fold(T::infinity(), |m, w| m.min(w))
    }

    /// Same lattice up to exact equality of every axis parameter.
    pub fn same_geometry(&self, other: &Grid<T>) -> bool {
        self == other
    }

    pub(crate) fn check_same(&self, other: &Grid<T>, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: fields live on different grids"
            )))
        }
    }

    /// Converts the geometry to another scalar type.
    pub fn cast<U: Real>(&self) -> Grid<U> {
        Grid {
            axes: self
                .axes
                .iter()
                .map(|a| Axis {
                    n: a.n,
                    h: U::from_f64_round(a.h.to_f64_lossless()),
                    origin: U::from_f64_round(a.origin.to_f64_lossless()),
                    boundary: a.boundary,
                })
                .collect(),
        }
    }
}
