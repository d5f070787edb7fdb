use super::bundle::{residual, SolutionBundle};
use super::gmres::gmres;
use crate::error::Result;
use crate::grid::{DerivativeScheme, Field};
use crate::nonlinearity::Nonlinearity;
use crate::operator::{apply_l, OperatorContext};
use crate::scalar::Real;

const STALL_ACCEPT: f64 = 0.1;

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Inputs with a larger residual are returned untouched, flagged.
    pub threshold: f64,
    /// Stop once the residual is at or below this.
    pub tol: f64,
    pub max_steps: usize,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    pub gmres_rtol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            threshold: 1e-2,
            tol: 1e-13,
            max_steps: 8,
            gmres_restart: 80,
            gmres_max_iter: 4000,
            gmres_rtol: 1e-10,
        }
    }
}

/// Result of [`newton_iterate`].
#[derive(Clone, Debug)]
pub struct NewtonRun<T> {
    pub u: Field<T>,
    /// Residual before each step, then after the last accepted step.
    pub history: Vec<f64>,
    /// GMRES iterations summed over all Newton steps.
    pub krylov_iterations: usize,
    pub fallback: bool,
    pub reason: Option<String>,
}

/// Newton's method on `ℒu − f(u) = 0` with matrix-free GMRES on
/// `J = ℒ − diag(f'(u))`. If the linear solver stalls, or the very first
/// step increases the residual above the roundoff floor, returns the input
/// unchanged with `fallback` set.
pub fn newton_iterate<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    u0: &Field<T>,
    opts: &NewtonOptions,
) -> Result<NewtonRun<T>> {
    newton_iterate_in(ctx, f, u0, opts, |d| d)
}

/// Newton with every update passed through `project` (a linear projection
/// onto an invariant subspace of the problem, e.g. odd fields).
pub(crate) fn newton_iterate_in<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    u0: &Field<T>,
    opts: &NewtonOptions,
    project: impl Fn(Field<T>) -> Field<T>,
) -> Result<NewtonRun<T>> {
    let fail = |history: Vec<f64>, krylov_iterations: usize, why: String| NewtonRun {
        u: u0.clone(),
        history,
        krylov_iterations,
        fallback: true,
        reason: Some(why),
    };
    let mut u = u0.clone();
    let mut r = residual(ctx, f, &u)?;
    let mut rn = r.max_abs().to_f64_lossless();
    let mut history = vec![rn];
    if rn > opts.threshold {
        return Ok(fail(
            history,
            0,
            format!(
                "initial residual {rn:e} above threshold {:e}",
                opts.threshold
            ),
        ));
    }
    let floor = 1e3 * T::epsilon().to_f64_lossless() * u.max_abs().to_f64_lossless().max(1.0);
    let grid = u.grid().clone();
    let mut krylov_iterations = 0;
    for _ in 0..opts.max_steps {
        if rn <= opts.tol {
            break;
        }
        let fp: Vec<T> = u.values().iter().map(|&v| f.deriv(v)).collect();
        let apply = |v: &[T]| -> Vec<T> {
            let vf = Field::new(grid.clone(), v.to_vec()).expect("finite Krylov vector");
            let lv = apply_l(ctx, &vf).expect("grid checked");
            lv.values()
                .iter()
                .zip(v)
                .zip(&fp)
                .map(|((&l, &x), &d)| l - d * x)
                .collect()
        };
        let rhs: Vec<T> = r.values().iter().map(|&x| -x).collect();
        let (delta, out) = gmres(
            apply,
            &rhs,
            opts.gmres_restart,
            opts.gmres_max_iter,
            T::lit(opts.gmres_rtol),
        );
        // Inexact Newton: a Krylov solve that stalls after gaining a digit
        // still gives a descent step; only a stall before that is fatal.
        krylov_iterations += out.iterations;
        if out.stagnated && !out.converged && out.rel_residual > STALL_ACCEPT {
            return Ok(fail(
                history,
                krylov_iterations,
                format!(
                    "linear solver stagnated at relative residual {:e}",
                    out.rel_residual
                ),
            ));
        }
        let delta = project(Field::new(grid.clone(), delta)?);
        let next = u.zip_map(&delta, |a, b| a + b)?;
        let r_next = residual(ctx, f, &next)?;
        let rn_next = r_next.max_abs().to_f64_lossless();
        if rn_next >= rn {
            // growth after accepted steps means the attainable floor of this
            // (possibly ill-conditioned) system is reached
            if rn_next > floor && history.len() == 1 {
                history.push(rn_next);
                return Ok(fail(
                    history,
                    krylov_iterations,
                    format!("residual grew from {rn:e} to {rn_next:e}"),
                ));
            }
            break;
        }
        u = next;
        r = r_next;
        rn = rn_next;
        history.push(rn);
    }
    Ok(NewtonRun {
        u,
        history,
        krylov_iterations,
        fallback: false,
        reason: None,
    })
}

/// Polishes a bundle; derivatives are recomputed with `schemes`.
pub fn newton_polish<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    bundle: &SolutionBundle<T>,
    schemes: &[DerivativeScheme],
    opts: &NewtonOptions,
) -> Result<SolutionBundle<T>> {
    let run = newton_iterate(ctx, f, &bundle.u, opts)?;
    if run.fallback {
        let mut out = bundle.clone();
        out.newton_fallback = true;
        out.history.extend(&run.history);
        if let Some(why) = run.reason {
            out.warnings.push(format!("newton fallback: {why}"));
        }
        return Ok(out);
    }
    let mut out = SolutionBundle::evaluate(ctx, f, run.u, schemes)?;
    out.history = bundle.history.clone();
    out.history.extend(&run.history[1..]);
    out.warnings = bundle.warnings.clone();
    Ok(out)
}
