//! Line-by-line FFTs on row-major 1D/2D arrays.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

/// Transforms every line along `axis` of a row-major `shape` array in place.
/// The inverse is unnormalized.
pub(crate) fn transform_axis<T: Real>(
    data: &mut [Complex<T>],
    shape: [usize; 2],
    axis: usize,
    dir: Direction,
) {
    let n = shape[axis];
    if n == 1 {
        return;
    }
    let mut planner = FftPlanner::<T>::new();
    let fft = match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    if axis == 1 {
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex::default(); fft.get_inplace_scratch_len()],
            |scratch, line| fft.process_with_scratch(line, scratch),
        );
    } else {
        let n1 = shape[1];
        let columns: Vec<Vec<Complex<T>>> = (0..n1)
            .into_par_iter()
            .map_init(
                || vec![Complex::default(); fft.get_inplace_scratch_len()],
                |scratch, j| {
                    let mut col: Vec<Complex<T>> = (0..n).map(|i| data[i * n1 + j]).collect();
                    fft.process_with_scratch(&mut col, scratch);
                    col
                },
            )
            .collect();
        for (j, col) in columns.into_iter().enumerate() {
            for (i, c) in col.into_iter().enumerate() {
                data[i * n1 + j] = c;
            }
        }
    }
}

/// Forward (or unnormalized inverse) transform over all non-trivial axes.
pub(crate) fn transform_all<T: Real>(data: &mut [Complex<T>], shape: [usize; 2], dir: Direction) {
    transform_axis(data, shape, 1, dir);
    transform_axis(data, shape, 0, dir);
}

/// Angular wavenumbers of an `n`-point periodic axis with spacing `h`, in FFT
/// order. The Nyquist mode of an even `n` is set to zero so that the
/// derivative of a real field stays real.
pub(crate) fn wavenumbers<T: Real>(n: usize, h: T) -> Vec<T> {
    let two_pi_over_l = T::lit(2.0) * T::PI() / (T::from_usize_exact(n) * h);
    (0..n)
        .map(|m| {
            if 2 * m == n {
                T::zero()
            } else if 2 * m < n {
                T::from_usize_exact(m) * two_pi_over_l
            } else {
                -(T::from_usize_exact(n - m) * two_pi_over_l)
            }
        })
        .collect()
}

pub(crate) fn to_complex<T: Real>(values: &[T]) -> Vec<Complex<T>> {
    values.iter().map(|&v| Complex::new(v, T::zero())).collect()
}
