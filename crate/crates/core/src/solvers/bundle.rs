use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{partial_derivative, read_field, write_field, Boundary, DerivativeScheme, Field};
use crate::nonlinearity::Nonlinearity;
use crate::operator::{apply_l, OperatorContext};
use crate::scalar::Real;

/// `ℒu − f(u)`.
pub fn residual<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    u: &Field<T>,
) -> Result<Field<T>> {
    let lu = apply_l(ctx, u)?;
    lu.zip_map(u, |l, v| l - f.eval(v))
}

/// A candidate solution with its derivatives and diagnostics.
///
/// `u2` is `None` on 1D grids; there the monotone direction is `u1`.
#[derive(Clone, Debug)]
pub struct SolutionBundle<T> {
    pub u: Field<T>,
    pub u1: Field<T>,
    pub u2: Option<Field<T>>,
    /// `‖ℒu − f(u)‖_∞`.
    pub residual_inf: T,
    pub monotone: bool,
    /// Smallest interior value of the monotone derivative.
    pub min_monotone_derivative: T,
    /// Residual per iteration of the solver that produced the bundle.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
    /// Set when the Newton polish gave up and returned its input.
    pub newton_fallback: bool,
}

impl<T: Real> SolutionBundle<T> {
    /// Differentiates `u` with the given per-axis schemes and fills in the
    /// diagnostics.
    pub fn evaluate(
        ctx: &OperatorContext<T>,
        f: &Nonlinearity,
        u: Field<T>,
        schemes: &[DerivativeScheme],
    ) -> Result<Self> {
        let dim = u.grid().dim();
        if schemes.len() != dim {
            return Err(Error::Config(format!(
                "need {dim} derivative schemes, got {}",
                schemes.len()
            )));
        }
        let u1 = partial_derivative(&u, 0, schemes[0])?;
        let u2 = if dim == 2 {
            Some(partial_derivative(&u, 1, schemes[1])?)
        } else {
            None
        };
        SolutionBundle::from_fields(ctx, f, u, u1, u2)
    }

    /// Bundle from a field and externally supplied derivatives.
    pub fn from_fields(
        ctx: &OperatorContext<T>,
        f: &Nonlinearity,
        u: Field<T>,
        u1: Field<T>,
        u2: Option<Field<T>>,
    ) -> Result<Self> {
        u.grid().check_same(u1.grid(), "bundle u1")?;
        if let Some(u2) = &u2 {
            u.grid().check_same(u2.grid(), "bundle u2")?;
        }
        let residual_inf = residual(ctx, f, &u)?.max_abs();
        let margin = monotone_margin(ctx);
        let d = u2.as_ref().unwrap_or(&u1);
        let (monotone, min_monotone_derivative) = monotone_check(&u, d, margin);
        Ok(SolutionBundle {
            u,
            u1,
            u2,
            residual_inf,
            monotone,
            min_monotone_derivative,
            history: Vec::new(),
            warnings: Vec::new(),
            newton_fallback: false,
        })
    }

    /// The derivative along the monotone direction.
    pub fn monotone_derivative(&self) -> &Field<T> {
        self.u2.as_ref().unwrap_or(&self.u1)
    }

    /// Writes `u.nlrg`, `u1.nlrg`, `u2.nlrg` (2D), `meta.txt` and
    /// `residual_history.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, extra_meta: &[(&str, String)]) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_field(&self.u, dir.join("u.nlrg"))?;
        write_field(&self.u1, dir.join("u1.nlrg"))?;
        if let Some(u2) = &self.u2 {
            write_field(u2, dir.join("u2.nlrg"))?;
        }
        let mut meta = String::new();
        let _ = writeln!(meta, "dim = {}", self.u.grid().dim());
        let _ = writeln!(
            meta,
            "residual_inf = {:e}",
            self.residual_inf.to_f64_lossless()
        );
        let _ = writeln!(meta, "monotone = {}", self.monotone);
        let _ = writeln!(
            meta,
            "min_monotone_derivative = {:e}",
            self.min_monotone_derivative.to_f64_lossless()
        );
        let _ = writeln!(meta, "newton_fallback = {}", self.newton_fallback);
        let _ = writeln!(meta, "iterations = {}", self.history.len());
        for (k, v) in extra_meta {
            let _ = writeln!(meta, "{k} = {v}");
        }
        for (i, w) in self.warnings.iter().enumerate() {
            let _ = writeln!(meta, "warning.{i} = {w}");
        }
        let path = dir.join("meta.txt");
        fs::write(&path, meta).map_err(|e| Error::io(&path, e))?;
        write_history(&self.history, dir.join("residual_history.csv"))
    }
}

/// Fields of a saved bundle directory, without recomputed diagnostics.
pub struct StoredBundle<T> {
    pub u: Field<T>,
    pub u1: Field<T>,
    pub u2: Option<Field<T>>,
    pub meta: Vec<(String, String)>,
}

pub fn load_bundle<T: Real>(dir: impl AsRef<Path>) -> Result<StoredBundle<T>> {
    let dir = dir.as_ref();
    let u = read_field(dir.join("u.nlrg"))?;
    let u1 = read_field(dir.join("u1.nlrg"))?;
    let u2_path = dir.join("u2.nlrg");
    let u2 = if u2_path.exists() {
        Some(read_field(u2_path)?)
    } else {
        None
    };
    let meta_path = dir.join("meta.txt");
    let meta = match fs::read_to_string(&meta_path) {
        Ok(text) => parse_key_values(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(&meta_path, e)),
    };
    Ok(StoredBundle { u, u1, u2, meta })
}

pub(crate) fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| {
            let l = l.split('#').next().unwrap_or("").trim();
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// `iter,residual_inf` rows.
pub fn write_history(history: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("iter,residual_inf\n");
    for (i, r) in history.iter().enumerate() {
        let _ = writeln!(s, "{i},{r:e}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Cells to skip at each clamp edge: the kernel reach plus one.
pub fn monotone_margin<T: Real>(ctx: &OperatorContext<T>) -> [usize; 2] {
    let r = ctx.kernel().reach();
    [r[0] + 1, r[1] + 1]
}

/// Roundoff floor of a difference quotient of `u`.
pub fn monotone_floor<T: Real>(u: &Field<T>) -> T {
    T::lit(64.0) * T::epsilon() * u.max_abs().max(T::one()) / u.grid().min_spacing()
}

/// `(monotone, interior min of d)`: monotone means `d ≥ −η` at every interior
/// point with `η` the roundoff floor of a difference quotient, and `d > 0`
/// somewhere. Saturated tails of a front have `d` equal to zero up to
/// roundoff, so a strict sign test could never pass on a finite grid.
pub fn monotone_check<T: Real>(u: &Field<T>, d: &Field<T>, margin: [usize; 2]) -> (bool, T) {
    let grid = d.grid();
    let eta = monotone_floor(u);
    let [n0, n1] = grid.shape();
    let skip = |a: usize| {
        if a < grid.dim() && grid.axis(a).boundary == Boundary::Clamp {
            margin[a]
        } else {
            0
        }
    };
    let (s0, s1) = (skip(0), skip(1));
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    if n0 > 2 * s0 && n1 > 2 * s1 {
        for i0 in s0..n0 - s0 {
            for i1 in s1..n1 - s1 {
                let v = d.get(i0, i1);
                min = min.min(v);
                max = max.max(v);
            }
        }
    }
    (min >= -eta && max > T::zero(), min)
}
