//! The nonlocal operator `ℒu = u − k⋆u`, its Dirichlet form and numerical
//! checks of the identities relating them.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::{self, Direction};
use crate::grid::{partial_derivative, Boundary, DerivativeScheme, Field, Grid};
use crate::kernel::DiscreteKernel;
use crate::scalar::{pairwise_sum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Stencil sum with the grid's exterior rule.
    Direct,
    /// Circular convolution; fully periodic grids only.
    Fft,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Fft => "fft",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "direct" => Ok(Method::Direct),
            "fft" => Ok(Method::Fft),
            other => Err(Error::Config(format!("unknown operator method `{other}`"))),
        }
    }
}

/// Pairs `(x, y)` of flat grid indices, with `offset = x − y` in lattice
/// units before any wrapping.
pub trait PairMask: Sync {
    fn contains(&self, x: usize, y: usize, offset: [isize; 2]) -> bool;
}

impl<F> PairMask for F
where
    F: Fn(usize, usize, [isize; 2]) -> bool + Sync,
{
    fn contains(&self, x: usize, y: usize, offset: [isize; 2]) -> bool {
        self(x, y, offset)
    }
}

/// Kernel bound to a grid.
#[derive(Clone, Debug)]
pub struct OperatorContext<T: Real> {
    kernel: DiscreteKernel<T>,
    grid: Grid<T>,
    method: Method,
    symbol: Option<Vec<Complex<T>>>,
}

impl<T: Real> OperatorContext<T> {
    pub fn new(kernel: DiscreteKernel<T>, grid: Grid<T>, method: Method) -> Result<Self> {
        if kernel.dim() != grid.dim() {
            return Err(Error::Config(format!(
                "{}D kernel on a {}D grid",
                kernel.dim(),
                grid.dim()
            )));
        }
        let kh = kernel.spacing();
        let gh = grid.spacing();
        for a in 0..grid.dim() {
            if kh[a] != gh[a] {
                return Err(Error::Config(format!(
                    "kernel spacing {} differs from grid spacing {} on axis {a}",
                    kh[a], gh[a]
                )));
            }
        }
        let symbol = match method {
            Method::Direct => None,
            Method::Fft => {
                if !grid.is_periodic() {
                    return Err(Error::Config(
                        "fft method needs a fully periodic grid".into(),
                    ));
                }
                Some(kernel_symbol(&kernel, &grid))
            }
        };
        Ok(OperatorContext {
            kernel,
            grid,
            method,
            symbol,
        })
    }

    pub fn kernel(&self) -> &DiscreteKernel<T> {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Same kernel and grid, other method.
    pub fn with_method(&self, method: Method) -> Result<Self> {
        OperatorContext::new(self.kernel.clone(), self.grid.clone(), method)
    }

    /// Whether every stencil point of `[i0, i1]` lies inside the index range.
    #[inline]
    fn stencil_inside(&self, i0: usize, i1: usize) -> bool {
        let [r0, r1] = self.kernel.reach();
        let [n0, n1] = self.grid.shape();
        i0 >= r0 && i0 + r0 < n0 && i1 >= r1 && i1 + r1 < n1
    }

    /// Flat-index deltas for `y = x − δ` away from the edges.
    fn flat_deltas(&self) -> Vec<isize> {
        let n1 = self.grid.shape()[1] as isize;
        self.kernel
            .offsets()
            .iter()
            .map(|o| -(o[0] * n1 + o[1]))
            .collect()
    }
}

fn kernel_symbol<T: Real>(kernel: &DiscreteKernel<T>, grid: &Grid<T>) -> Vec<Complex<T>> {
    let shape = grid.shape();
    let mut img = vec![T::zero(); grid.len()];
    for (o, &m) in kernel.offsets().iter().zip(kernel.masses()) {
        let j0 = o[0].rem_euclid(shape[0] as isize) as usize;
        let j1 = o[1].rem_euclid(shape[1] as isize) as usize;
        img[j0 * shape[1] + j1] = img[j0 * shape[1] + j1] + m;
    }
    let mut data = fft::to_complex(&img);
    fft::transform_all(&mut data, shape, Direction::Forward);
    data
}

/// `ℒu(x) = Σ_δ (u(x) − u(x−δ))·k(δ)·vol`.
pub fn apply_l<T: Real>(ctx: &OperatorContext<T>, u: &Field<T>) -> Result<Field<T>> {
    ctx.grid.check_same(u.grid(), "apply_l")?;
    match ctx.method {
        Method::Direct => Ok(apply_direct(ctx, u)),
        Method::Fft => Ok(apply_fft(ctx, u)),
    }
}

fn apply_direct<T: Real>(ctx: &OperatorContext<T>, u: &Field<T>) -> Field<T> {
    let grid = &ctx.grid;
    let vals = u.values();
    let offsets = ctx.kernel.offsets();
    let masses = ctx.kernel.masses();
    let deltas = ctx.flat_deltas();
    let out: Vec<T> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i0, i1] = grid.unflat(idx);
            let ux = vals[idx];
            let mut acc = T::zero();
            if ctx.stencil_inside(i0, i1) {
                for (d, &m) in deltas.iter().zip(masses) {
                    let y = (idx as isize + d) as usize;
                    acc = acc + (ux - vals[y]) * m;
                }
            } else {
                for (o, &m) in offsets.iter().zip(masses) {
                    let y = grid.shifted(i0, i1, [-o[0], -o[1]]);
                    acc = acc + (ux - vals[y]) * m;
                }
            }
            acc
        })
        .collect();
    Field::from_parts(grid.clone(), out)
}

fn apply_fft<T: Real>(ctx: &OperatorContext<T>, u: &Field<T>) -> Field<T> {
    let grid = &ctx.grid;
    let shape = grid.shape();
    let symbol = ctx.symbol.as_ref().expect("fft context carries a symbol");
    // ℒ kills constants, so shift by one sample first: constant input then
    // transforms as exact zeros.
    let base = u.values()[0];
    let shifted: Vec<T> = u.values().iter().map(|&v| v - base).collect();
    let mut data = fft::to_complex(&shifted);
    fft::transform_all(&mut data, shape, Direction::Forward);
    data.par_iter_mut()
        .zip(symbol.par_iter())
        .for_each(|(c, s)| *c = *c * *s);
    fft::transform_all(&mut data, shape, Direction::Inverse);
    let inv_n = T::one() / T::from_usize_exact(grid.len());
    let out: Vec<T> = shifted
        .iter()
        .zip(&data)
        .map(|(&w, c)| w - c.re * inv_n)
        .collect();
    Field::from_parts(grid.clone(), out)
}

/// `Σ_x Σ_y (f(x)−f(y))(g(x)−g(y))·k(x−y)·vol²` over kernel-support pairs
/// with `y` inside the grid (wrapped on periodic axes), optionally restricted
/// to `mask`.
pub fn dirichlet_form<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Field<T>,
    g: &Field<T>,
    mask: Option<&dyn PairMask>,
) -> Result<T> {
    ctx.grid.check_same(f.grid(), "dirichlet_form")?;
    ctx.grid.check_same(g.grid(), "dirichlet_form")?;
    let vol = ctx.grid.cell_volume();
    let per_point = pair_sum(ctx, mask, |x, y, m| {
        let (fv, gv) = (f.values(), g.values());
        (fv[x] - fv[y]) * (gv[x] - gv[y]) * m
    });
    Ok(pairwise_sum(&per_point) * vol)
}

/// Per-`x` sums of `term(x, y, mass)` over in-grid kernel neighbours
/// `y = x − δ`. Summation order is fixed, so results are reproducible
/// regardless of the thread count.
pub(crate) fn pair_sum<T: Real>(
    ctx: &OperatorContext<T>,
    mask: Option<&dyn PairMask>,
    term: impl Fn(usize, usize, T) -> T + Sync,
) -> Vec<T> {
    let grid = &ctx.grid;
    let offsets = ctx.kernel.offsets();
    let masses = ctx.kernel.masses();
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let [i0, i1] = grid.unflat(x);
            let mut acc = T::zero();
            for (o, &m) in offsets.iter().zip(masses) {
                let Some(y) = grid.shifted_inside(i0, i1, [-o[0], -o[1]]) else {
                    continue;
                };
                if let Some(mask) = mask {
                    if !mask.contains(x, y, *o) {
                        continue;
                    }
                }
                acc = acc + term(x, y, m);
            }
            acc
        })
        .collect()
}

/// `Σ_x a(x)·b(x)·vol` with deterministic summation.
pub fn inner_product<T: Real>(a: &Field<T>, b: &Field<T>) -> Result<T> {
    a.grid().check_same(b.grid(), "inner_product")?;
    let prod: Vec<T> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| x * y)
        .collect();
    Ok(pairwise_sum(&prod) * a.grid().cell_volume())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum R1Regime {
    Periodic,
    /// Clamp axes present; random fields vanish within the stencil reach
    /// of clamp edges so that no pair leaves the grid.
    BoundaryRemainder,
}

#[derive(Clone, Debug)]
pub struct R1Report {
    pub regime: R1Regime,
    pub trials: usize,
    /// Max over trials of `|2⟨ℒf, g⟩ − B(f, g)| / √(B(f,f)·B(g,g))`.
    pub max_rel_discrepancy: f64,
    /// Same with unrestricted random fields; equals the masked value on
    /// periodic grids and measures the clamp boundary remainder otherwise.
    pub raw_max_rel_discrepancy: f64,
    pub tolerance: f64,
}

impl R1Report {
    pub fn passed(&self) -> bool {
        self.max_rel_discrepancy <= self.tolerance
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let regime = match self.regime {
            R1Regime::Periodic => "periodic",
            R1Regime::BoundaryRemainder => "boundary remainder regime",
        };
        let _ = writeln!(s, "regime = {regime}");
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "max_rel_discrepancy = {:e}", self.max_rel_discrepancy);
        let _ = writeln!(
            s,
            "raw_max_rel_discrepancy = {:e}",
            self.raw_max_rel_discrepancy
        );
        let _ = writeln!(s, "pass = {}", self.passed());
        s
    }
}

pub const R1_TOL: f64 = 1e-10;

fn random_field<T: Real>(grid: &Grid<T>, rng: &mut ChaCha8Rng, margin: [usize; 2]) -> Field<T> {
    let [n0, n1] = grid.shape();
    let clamp: Vec<bool> = (0..2)
        .map(|a| a < grid.dim() && grid.axis(a).boundary == Boundary::Clamp)
        .collect();
    let inside = |i: usize, n: usize, a: usize| !clamp[a] || (i >= margin[a] && i + margin[a] < n);
    let values = (0..grid.len())
        .map(|idx| {
            let r: f64 = rng.gen_range(-1.0..1.0);
            let [i0, i1] = grid.unflat(idx);
            if inside(i0, n0, 0) && inside(i1, n1, 1) {
                T::lit(r)
            } else {
                T::zero()
            }
        })
        .collect();
    Field::from_parts(grid.clone(), values)
}

fn r1_discrepancy<T: Real>(ctx: &OperatorContext<T>, f: &Field<T>, g: &Field<T>) -> Result<f64> {
    let lhs = T::lit(2.0) * inner_product(&apply_l(ctx, f)?, g)?;
    let rhs = dirichlet_form(ctx, f, g, None)?;
    let ff = dirichlet_form(ctx, f, f, None)?;
    let gg = dirichlet_form(ctx, g, g, None)?;
    let scale = (ff * gg).sqrt().to_f64_lossless();
    let d = (lhs - rhs).abs().to_f64_lossless();
    Ok(if scale > 0.0 { d / scale } else { d })
}

/// Checks `2⟨ℒf, g⟩ = B(f, g)` on `trials` random pairs (the last pair has
/// `f = g`).
pub fn check_r1<T: Real>(ctx: &OperatorContext<T>, trials: usize, seed: u64) -> Result<R1Report> {
    let grid = &ctx.grid;
    let regime = if grid.is_periodic() {
        R1Regime::Periodic
    } else {
        R1Regime::BoundaryRemainder
    };
    let reach = ctx.kernel.reach();
    let margin = [reach[0] + 1, reach[1] + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut masked, mut raw) = (0.0f64, 0.0f64);
    for t in 0..trials {
        let f = random_field(grid, &mut rng, margin);
        let g = if t + 1 == trials {
            f.clone()
        } else {
            random_field(grid, &mut rng, margin)
        };
        masked = masked.max(r1_discrepancy(ctx, &f, &g)?);
        if regime == R1Regime::Periodic {
            raw = masked;
        } else {
            let f = random_field(grid, &mut rng, [0, 0]);
            let g = random_field(grid, &mut rng, [0, 0]);
            raw = raw.max(r1_discrepancy(ctx, &f, &g)?);
        }
    }
    Ok(R1Report {
        regime,
        trials,
        max_rel_discrepancy: masked,
        raw_max_rel_discrepancy: raw,
        tolerance: R1_TOL,
    })
}

/// `max_i ‖∂_i(ℒu) − ℒ(∂_i u)‖_∞ / ‖u‖_∞` with the default derivative scheme
/// of each axis.
pub fn check_commutation<T: Real>(ctx: &OperatorContext<T>, u: &Field<T>) -> Result<T> {
    let schemes: Vec<DerivativeScheme> = ctx
        .grid
        .axes()
        .iter()
        .map(|a| DerivativeScheme::default_for(a.boundary))
        .collect();
    check_commutation_with(ctx, u, &schemes)
}

pub fn check_commutation_with<T: Real>(
    ctx: &OperatorContext<T>,
    u: &Field<T>,
    schemes: &[DerivativeScheme],
) -> Result<T> {
    let lu = apply_l(ctx, u)?;
    let norm = u.max_abs();
    let mut worst = T::zero();
    for (axis, &scheme) in schemes.iter().enumerate().take(ctx.grid.dim()) {
        let a = partial_derivative(&lu, axis, scheme)?;
        let b = apply_l(ctx, &partial_derivative(u, axis, scheme)?)?;
        worst = worst.max(a.max_abs_diff(&b)?);
    }
    Ok(if norm > T::zero() {
        worst / norm
    } else {
        worst
    })
}
