use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use super::{Boundary, Field};
use crate::error::{Error, Result};
use crate::fft::{self, Direction};
use crate::scalar::Real;

/// Discrete first-derivative schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeScheme {
    /// `(u(x+h) - u(x-h)) / 2h` with the exterior rule at the ends.
    Centered2,
    /// Exact Fourier multiplier `i k`; periodic axes only.
    Spectral,
    /// Fourier multiplier applied after removing the linear ramp that makes
    /// the periodic extension of a field with flat ends smooth. Spectrally
    /// accurate for fields that are constant near both ends of a clamp axis
    /// (fronts joining two constant states). Same as `Spectral` on periodic
    /// axes.
    SpectralDetrended,
}

impl DerivativeScheme {
    /// `Spectral` on periodic axes, `Centered2` otherwise.
    pub fn default_for(boundary: Boundary) -> Self {
        match boundary {
            Boundary::Periodic => DerivativeScheme::Spectral,
            Boundary::Clamp => DerivativeScheme::Centered2,
        }
    }
}

impl fmt::Display for DerivativeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DerivativeScheme::Centered2 => "centered2",
            DerivativeScheme::Spectral => "spectral",
            DerivativeScheme::SpectralDetrended => "spectral_detrended",
        })
    }
}

impl FromStr for DerivativeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "centered2" => Ok(DerivativeScheme::Centered2),
            "spectral" => Ok(DerivativeScheme::Spectral),
            "spectral_detrended" => Ok(DerivativeScheme::SpectralDetrended),
            other => Err(Error::Config(format!(
                "unknown derivative scheme `{other}`"
            ))),
        }
    }
}

/// Derivative of `field` along `axis`.
pub fn partial_derivative<T: Real>(
    field: &Field<T>,
    axis: usize,
    scheme: DerivativeScheme,
) -> Result<Field<T>> {
    let grid = field.grid();
    if axis >= grid.dim() {
        return Err(Error::Config(format!(
            "axis {axis} out of range for a {}D grid",
            grid.dim()
        )));
    }
    let ax = grid.axis(axis);
    match (scheme, ax.boundary) {
        (DerivativeScheme::Centered2, _) => Ok(centered2(field, axis)),
        (DerivativeScheme::Spectral, Boundary::Clamp) => Err(Error::Config(format!(
            "spectral derivative requested on clamp axis {axis}"
        ))),
        (DerivativeScheme::Spectral, Boundary::Periodic)
        | (DerivativeScheme::SpectralDetrended, Boundary::Periodic) => {
            Ok(spectral(field, axis, false))
        }
        (DerivativeScheme::SpectralDetrended, Boundary::Clamp) => Ok(spectral(field, axis, true)),
    }
}

fn centered2<T: Real>(field: &Field<T>, axis: usize) -> Field<T> {
    let grid = field.grid();
    let inv_2h = T::one() / (T::lit(2.0) * grid.axis(axis).h);
    let mut fwd = [0isize; 2];
    fwd[axis] = 1;
    let bwd = [-fwd[0], -fwd[1]];
    let vals = field.values();
    let out: Vec<T> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i0, i1] = grid.unflat(idx);
            let up = vals[grid.shifted(i0, i1, fwd)];
            let dn = vals[grid.shifted(i0, i1, bwd)];
            (up - dn) * inv_2h
        })
        .collect();
    Field::from_parts(grid.clone(), out)
}

fn spectral<T: Real>(field: &Field<T>, axis: usize, detrend: bool) -> Field<T> {
    let grid = field.grid();
    let shape = grid.shape();
    let ax = grid.axis(axis);
    let n = ax.n;
    let stride = if axis == 0 { shape[1] } else { 1 };
    let lines = grid.len() / n;
    let line_start = |l: usize| if axis == 0 { l } else { l * shape[1] };

    // Per-line ramp `first + slope*h*j`, slope chosen so that the residual has
    // equal values one period apart.
    let vals = field.values();
    let slopes: Vec<T> = (0..lines)
        .map(|l| {
            if !detrend {
                return T::zero();
            }
            let s = line_start(l);
            let first = vals[s];
            let last = vals[s + (n - 1) * stride];
            (last - first) / (T::from_usize_exact(n) * ax.h)
        })
        .collect();

    let mut data: Vec<Complex<T>> = vec![Complex::default(); grid.len()];
    for (l, &slope) in slopes.iter().enumerate() {
        let s = line_start(l);
        let first = vals[s];
        for j in 0..n {
            let idx = s + j * stride;
            // the shift by `first` keeps constants exactly in the kernel
            let ramp = first + slope * ax.h * T::from_usize_exact(j);
            data[idx] = Complex::new(vals[idx] - ramp, T::zero());
        }
    }

    fft::transform_axis(&mut data, shape, axis, Direction::Forward);
    let k = fft::wavenumbers(n, ax.h);
    let inv_n = T::one() / T::from_usize_exact(n);
    for (idx, c) in data.iter_mut().enumerate() {
        let j = if axis == 0 {
            idx / shape[1]
        } else {
            idx % shape[1]
        };
        // multiply by i k
        *c = Complex::new(-c.im * k[j], c.re * k[j]) * inv_n;
    }
    fft::transform_axis(&mut data, shape, axis, Direction::Inverse);

    let out: Vec<T> = data
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let l = if axis == 0 {
                idx % shape[1]
            } else {
                idx / shape[1]
            };
            c.re + slopes[l]
        })
        .collect();
    Field::from_parts(grid.clone(), out)
}
