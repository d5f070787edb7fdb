use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::Grid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar samples on a [`Grid`], row-major with the last axis fastest.
///
/// All values are finite; this is checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(Field { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_parts(grid: Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Field { grid, values }
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        assert!(c.is_finite(), "constant field must be finite");
        let values = vec![c; grid.len()];
        Field { grid, values }
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        Field::constant(grid, T::zero())
    }

    /// Samples `f` at every lattice point (second coordinate is 0 in 1D).
    pub fn from_fn(grid: Grid<T>, f: impl Fn([T; 2]) -> T + Sync) -> Result<Self> {
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.point(i)))
            .collect();
        Field::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i0: usize, i1: usize) -> T {
        self.values[self.grid.flat(i0, i1)]
    }

    /// Value at an arbitrary index with the exterior rule applied.
    #[inline]
    pub fn get_ext(&self, i0: isize, i1: isize) -> T {
        let j0 = self.grid.axis(0).resolve(i0);
        let j1 = if self.grid.dim() == 2 {
            self.grid.axis(1).resolve(i1)
        } else {
            0
        };
        self.values[self.grid.flat(j0, j1)]
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Result<Self> {
        let values: Vec<T> = self.values.par_iter().map(|&v| f(v)).collect();
        Field::new(self.grid.clone(), values)
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T + Sync) -> Result<Self> {
        self.grid.check_same(&other.grid, "zip_map")?;
        let values: Vec<T> = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.grid.clone(), values)
    }

    /// `alpha * self + beta * other`
    pub fn lincomb(&self, alpha: T, other: &Field<T>, beta: T) -> Result<Self> {
        self.zip_map(other, |a, b| alpha * a + beta * b)
    }

    /// Largest absolute difference, on the same grid.
    pub fn max_abs_diff(&self, other: &Field<T>) -> Result<T> {
        self.grid.check_same(&other.grid, "max_abs_diff")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Field<U> {
        Field {
            grid: self.grid.cast(),
            values: self
                .values
                .iter()
                .map(|v| U::from_f64_round(v.to_f64_lossless()))
                .collect(),
        }
    }

    /// Writes `x[,y],value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let dim = self.grid.dim();
        let header = if dim == 1 { "x,value" } else { "x,y,value" };
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "{header}")?;
            for (i, v) in self.values.iter().enumerate() {
                let p = self.grid.point(i);
                if dim == 1 {
                    writeln!(w, "{},{}", p[0], v)?;
                } else {
                    writeln!(w, "{},{},{}", p[0], p[1], v)?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}
