use super::bundle::{monotone_floor, monotone_margin, residual, SolutionBundle};
use crate::error::{Error, Result};
use crate::grid::{Boundary, DerivativeScheme, Field};
use crate::nonlinearity::Nonlinearity;
use crate::operator::OperatorContext;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct RelaxOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Defaults to [`default_dt`].
    pub dt: Option<f64>,
    /// Steps between monotonicity checks of the iterate.
    pub check_every: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            tol: 1e-8,
            max_iter: 200_000,
            dt: None,
            check_every: 100,
        }
    }
}

/// Explicit Euler on `u_t = −(ℒu − f(u))` is stable for
/// `dt < 2 / (2 + max|f'|)`: the spectrum of `ℒ` lies in `[0, 2]`.
pub fn dt_bound(f: &Nonlinearity) -> f64 {
    2.0 / (2.0 + f.max_abs_deriv())
}

pub fn default_dt(f: &Nonlinearity) -> f64 {
    0.5 / (2.0 + f.max_abs_deriv())
}

/// Relaxes `u0` toward a stationary solution; stops at `opts.tol` or after
/// `opts.max_iter` steps. The returned bundle's monotone flag is recomputed.
pub fn relax_2d<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    u0: &Field<T>,
    schemes: &[DerivativeScheme],
    opts: &RelaxOptions,
) -> Result<SolutionBundle<T>> {
    let grid = ctx.grid();
    grid.check_same(u0.grid(), "relax_2d")?;
    if grid.dim() != 2 || grid.axis(1).boundary != Boundary::Clamp {
        return Err(Error::Config(
            "relaxation needs a 2D grid with a clamp x2 axis".into(),
        ));
    }
    let dt = opts.dt.unwrap_or_else(|| default_dt(f));
    let bound = dt_bound(f);
    if !(dt > 0.0) || dt >= bound {
        return Err(Error::Config(format!(
            "time step {dt} outside the stable range (0, {bound})"
        )));
    }
    let slack = T::lit(1e-12);
    if u0.values().iter().any(|&v| v.abs() > T::one() + slack) {
        return Err(Error::Domain("initial data leaves [-1, 1]".into()));
    }

    let mut warnings = Vec::new();
    if !increasing_in_x2(u0, monotone_margin(ctx)) {
        warnings.push("initial data not monotone in x2".to_string());
    }
    let dt_t = T::lit(dt);
    let mut u = u0.clone();
    let mut history = Vec::new();
    let mut lost_at = None;
    for step in 0..=opts.max_iter {
        let r = residual(ctx, f, &u)?;
        let rn = r.max_abs().to_f64_lossless();
        history.push(rn);
        if rn <= opts.tol || step == opts.max_iter {
            break;
        }
        u = u.zip_map(&r, |v, rv| v - dt_t * rv)?;
        if lost_at.is_none()
            && opts.check_every > 0
            && (step + 1) % opts.check_every == 0
            && !increasing_in_x2(&u, monotone_margin(ctx))
        {
            lost_at = Some(step + 1);
        }
    }
    if let Some(s) = lost_at {
        warnings.push(format!("monotonicity in x2 lost by step {s}"));
    }
    let mut bundle = SolutionBundle::evaluate(ctx, f, u, schemes)?;
    bundle.history = history;
    bundle.warnings = warnings;
    Ok(bundle)
}

/// Forward differences along x2 above the roundoff floor at interior points.
fn increasing_in_x2<T: Real>(u: &Field<T>, margin: [usize; 2]) -> bool {
    let grid = u.grid();
    let [n0, n1] = grid.shape();
    let floor = monotone_floor(u) * grid.axis(1).h;
    let s0 = if grid.axis(0).boundary == Boundary::Clamp {
        margin[0]
    } else {
        0
    };
    let s1 = margin[1];
    if n0 <= 2 * s0 || n1 <= 2 * s1 + 1 {
        return true;
    }
    (s0..n0 - s0).all(|i0| (s1..n1 - s1 - 1).all(|i1| u.get(i0, i1 + 1) - u.get(i0, i1) >= -floor))
}
