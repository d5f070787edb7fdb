//! Restarted GMRES for matrix-free operators.

use crate::scalar::{pairwise_sum, Real};

#[derive(Clone, Copy, Debug)]
pub(crate) struct GmresOutcome {
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` at exit.
    pub rel_residual: f64,
    pub converged: bool,
    /// A whole restart cycle reduced the residual by less than 0.1%.
    pub stagnated: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let p: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&p)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Solves `A x = b` from `x = 0`.
pub(crate) fn gmres<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    restart: usize,
    max_iter: usize,
    rtol: T,
) -> (Vec<T>, GmresOutcome) {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return (
            x,
            GmresOutcome {
                iterations: 0,
                rel_residual: 0.0,
                converged: true,
                stagnated: false,
            },
        );
    }
    let target = rtol * bnorm;
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    let mut stagnated = false;

    while iterations < max_iter && rnorm > target {
        let cycle_start = rnorm;
        let m = restart.min(max_iter - iterations);
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v / rnorm).collect());
        // Hessenberg columns, already rotated
        let mut hcols: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut cs: Vec<T> = Vec::with_capacity(m);
        let mut sn: Vec<T> = Vec::with_capacity(m);
        let mut g = vec![T::zero(); m + 1];
        g[0] = rnorm;
        let mut k_done = 0;

        for k in 0..m {
            let mut w = apply(&basis[k]);
            let mut h = vec![T::zero(); k + 2];
            // modified Gram–Schmidt, twice for stability
            for _ in 0..2 {
                for (j, q) in basis.iter().enumerate() {
                    let c = dot(&w, q);
                    h[j] = h[j] + c;
                    axpy(&mut w, -c, q);
                }
            }
            h[k + 1] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
            let (c, s) = if denom == T::zero() {
                (T::one(), T::zero())
            } else {
                (h[k] / denom, h[k + 1] / denom)
            };
            let hk1 = h[k + 1];
            h[k] = c * h[k] + s * hk1;
            h[k + 1] = T::zero();
            cs.push(c);
            sn.push(s);
            g[k + 1] = -s * g[k];
            g[k] = c * g[k];
            hcols.push(h);
            iterations += 1;
            k_done = k + 1;
            let breakdown = hk1 <= T::epsilon() * bnorm;
            if g[k + 1].abs() <= target || breakdown {
                break;
            }
            basis.push(w.iter().map(|&v| v / hk1).collect());
        }

        // back substitution on the k_done × k_done triangle
        let mut y = vec![T::zero(); k_done];
        for i in (0..k_done).rev() {
            let mut acc = g[i];
            for (j, yj) in y.iter().enumerate().take(k_done).skip(i + 1) {
                acc = acc - hcols[j][i] * *yj;
            }
            y[i] = if hcols[i][i] == T::zero() {
                T::zero()
            } else {
                acc / hcols[i][i]
            };
        }
        for (j, &yj) in y.iter().enumerate() {
            axpy(&mut x, yj, &basis[j]);
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        rnorm = norm(&r);
        if rnorm > target && rnorm > cycle_start * T::lit(0.999) {
            stagnated = true;
            break;
        }
    }
    let rel = (rnorm / bnorm).to_f64_lossless();
    (
        x,
        GmresOutcome {
            iterations,
            rel_residual: rel,
            converged: rnorm <= target,
            stagnated,
        },
    )
}
