//! Convolution kernels: radial families, their lattice discretization and a
//! validator for the sandwich bounds `m0·χ(B_r0) ≤ k ≤ M0·χ(B_R0)`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

/// Lattice points at distance `R0·(1 + SUPPORT_SLOP)` still count as inside
/// the support, so that offsets lying exactly on the sphere are not lost to
/// rounding of `|δ|·h`.
const SUPPORT_SLOP: f64 = 1e-12;

/// Radial kernel profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `χ(B_R0)`.
    BallIndicator,
    /// `exp(1 - 1/(1 - (ρ/R0)²))` on `B_R0`; needs `r0 < R0`.
    SmoothBump,
    /// `χ(B_r0) + ½·χ(B_R0 \ B_r0)`.
    AnnularMix,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::BallIndicator => "ball_indicator",
            Family::SmoothBump => "smooth_bump",
            Family::AnnularMix => "annular_mix",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ball_indicator" => Ok(Family::BallIndicator),
            "smooth_bump" => Ok(Family::SmoothBump),
            "annular_mix" => Ok(Family::AnnularMix),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Continuum kernel description. `m0`/`M0` are the bounds the discrete kernel
/// is validated against, not inputs to its construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: Family,
    pub r0: f64,
    pub big_r0: f64,
    pub m0: f64,
    pub big_m0: f64,
    pub dim: usize,
}

impl KernelSpec {
    /// Spec whose density bounds are the exact extremes of the normalized
    /// continuum profile.
    pub fn with_natural_bounds(family: Family, r0: f64, big_r0: f64, dim: usize) -> Result<Self> {
        let mut spec = KernelSpec {
            family,
            r0,
            big_r0,
            m0: 1.0,
            big_m0: 1.0,
            dim,
        };
        spec.check_geometry()?;
        let z = spec.continuum_mass();
        spec.m0 = spec.profile(r0) / z;
        spec.big_m0 = spec.profile(0.0) / z;
        Ok(spec)
    }

    fn check_geometry(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::KernelSpec(format!(
                "dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        if !(self.r0 > 0.0) || !self.r0.is_finite() || !self.big_r0.is_finite() {
            return Err(Error::KernelSpec(format!(
                "r0 must be positive, got {}",
                self.r0
            )));
        }
        if self.r0 > self.big_r0 {
            return Err(Error::KernelSpec(format!(
                "need r0 <= R0, got r0 = {} > R0 = {}",
                self.r0, self.big_r0
            )));
        }
        if self.family == Family::SmoothBump && self.r0 >= self.big_r0 {
            return Err(Error::KernelSpec(
                "smooth_bump vanishes on the sphere of radius R0; need r0 < R0".into(),
            ));
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        self.check_geometry()?;
        if !(self.m0 > 0.0) || !self.big_m0.is_finite() || self.m0 > self.big_m0 {
            return Err(Error::KernelSpec(format!(
                "need 0 < m0 <= M0, got m0 = {}, M0 = {}",
                self.m0, self.big_m0
            )));
        }
        Ok(())
    }

    /// Unnormalized radial profile.
    pub fn profile(&self, rho: f64) -> f64 {
        let outer = self.big_r0 * (1.0 + SUPPORT_SLOP);
        match self.family {
            Family::BallIndicator => (rho <= outer) as u8 as f64,
            Family::SmoothBump => {
                let t = rho / self.big_r0;
                if t < 1.0 {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            }
            Family::AnnularMix => {
                if rho <= self.r0 * (1.0 + SUPPORT_SLOP) {
                    1.0
                } else if rho <= outer {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ profile` over ℝ^dim.
    pub fn continuum_mass(&self) -> f64 {
        let ball = |r: f64| match self.dim {
            1 => 2.0 * r,
            _ => std::f64::consts::PI * r * r,
        };
        match self.family {
            Family::BallIndicator => ball(self.big_r0),
            Family::AnnularMix => ball(self.r0) + 0.5 * (ball(self.big_r0) - ball(self.r0)),
            Family::SmoothBump => {
                // composite Simpson; the integrand is flat to all orders at R0
                let n = 20_000;
                let dr = self.big_r0 / n as f64;
                let g = |r: f64| {
                    let p = self.profile(r);
                    if self.dim == 1 {
                        2.0 * p
                    } else {
                        2.0 * std::f64::consts::PI * r * p
                    }
                };
                let mut acc = g(0.0) + g(self.big_r0);
                for i in 1..n {
                    acc += g(i as f64 * dr) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc * dr / 3.0
            }
        }
    }
}

/// Lattice kernel: density weights on integer offsets. `Σ weight·vol = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteKernel<T> {
    dim: usize,
    h: [T; 2],
    offsets: Vec<[isize; 2]>,
    weights: Vec<T>,
    masses: Vec<T>,
    quadrature_slack: f64,
}

impl<T: Real> DiscreteKernel<T> {
    /// Hand-built stencil, taken as is (no symmetrization or normalization).
    pub fn from_stencil(dim: usize, h: &[T], entries: Vec<([isize; 2], T)>) -> Result<Self> {
        let h = spacing(dim, h)?;
        let vol = h[0] * h[1];
        let mut offsets = Vec::with_capacity(entries.len());
        let mut weights = Vec::with_capacity(entries.len());
        let mut seen = HashMap::new();
        for (off, w) in entries {
            if dim == 1 && off[1] != 0 {
                return Err(Error::Config(format!(
                    "1D stencil entry with offset_y = {}",
                    off[1]
                )));
            }
            if !w.is_finite() {
                return Err(Error::Config(format!(
                    "non-finite weight at offset {off:?}"
                )));
            }
            if seen.insert(off, ()).is_some() {
                return Err(Error::Config(format!("duplicate stencil offset {off:?}")));
            }
            offsets.push(off);
            weights.push(w);
        }
        if offsets.is_empty() {
            return Err(Error::Config("empty stencil".into()));
        }
        let masses = weights.iter().map(|&w| w * vol).collect();
        Ok(DiscreteKernel {
            dim,
            h,
            offsets,
            weights,
            masses,
            quadrature_slack: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Spacing per axis (second entry 1 in 1D).
    pub fn spacing(&self) -> [T; 2] {
        self.h
    }

    pub fn cell_volume(&self) -> T {
        self.h[0] * self.h[1]
    }

    pub fn offsets(&self) -> &[[isize; 2]] {
        &self.offsets
    }

    /// Density values `k(δh)`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `k(δh)·vol`; these are the convolution coefficients.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Relative deviation of the renormalization factor from 1.
    pub fn quadrature_slack(&self) -> f64 {
        self.quadrature_slack
    }

    pub fn total_weight(&self) -> T {
        pairwise_sum(&self.masses)
    }

    /// Largest `|offset|` along each axis.
    pub fn reach(&self) -> [usize; 2] {
        self.offsets.iter().fold([0, 0], |r, o| {
            [r[0].max(o[0].unsigned_abs()), r[1].max(o[1].unsigned_abs())]
        })
    }

    /// Largest physical offset length in the stencil.
    pub fn support_radius(&self) -> T {
        self.offsets
            .iter()
            .map(|&o| offset_len(o, self.h))
            .fold(T::zero(), |m, r| m.max(r))
    }

    /// Kernel of the x₂ variable obtained by summing out x₁:
    /// `k̄(j) = Σ_i k(i, j)·h₁`, renormalized. Planar fields depending on x₂
    /// only see exactly this kernel.
    pub fn marginal(&self) -> Result<DiscreteKernel<T>> {
        if self.dim != 2 {
            return Err(Error::Shape("marginal needs a 2D kernel".into()));
        }
        let mut by_j: Vec<(isize, Vec<T>)> = Vec::new();
        for (o, &w) in self.offsets.iter().zip(&self.weights) {
            match by_j.iter_mut().find(|(j, _)| *j == o[1]) {
                Some((_, v)) => v.push(w * self.h[0]),
                None => by_j.push((o[1], vec![w * self.h[0]])),
            }
        }
        by_j.sort_by_key(|(j, _)| *j);
        let raw: Vec<([isize; 2], T)> = by_j
            .into_iter()
            .map(|(j, v)| ([j, 0], pairwise_sum(&v)))
            .collect();
        let mut k = DiscreteKernel::from_stencil(1, &[self.h[1]], raw)?;
        k.symmetrize_and_normalize();
        k.quadrature_slack = self.quadrature_slack;
        Ok(k)
    }

    fn index_of(&self) -> HashMap<[isize; 2], usize> {
        self.offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| (o, i))
            .collect()
    }

    fn symmetrize_and_normalize(&mut self) {
        let idx = self.index_of();
        let half = T::lit(0.5);
        let sym: Vec<T> = self
            .offsets
            .iter()
            .zip(&self.weights)
            .map(|(o, &w)| {
                let m = idx
                    .get(&[-o[0], -o[1]])
                    .map_or(T::zero(), |&j| self.weights[j]);
                (w + m) * half
            })
            .collect();
        let vol = self.cell_volume();
        let raw: Vec<T> = sym.iter().map(|&w| w * vol).collect();
        let total = pairwise_sum(&raw);
        self.weights = sym.iter().map(|&w| w / total).collect();
        self.masses = self.weights.iter().map(|&w| w * vol).collect();
    }

    /// CSV with `offset_x,offset_y,weight` rows (weight is the density).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = String::from("offset_x,offset_y,weight\n");
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            let _ = writeln!(s, "{},{},{:e}", o[0], o[1], w.to_f64_lossless());
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    /// Reads a stencil written by [`DiscreteKernel::write_csv`] (or by hand).
    pub fn read_csv(path: impl AsRef<Path>, dim: usize, h: &[T]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("offset_x") {
                continue;
            }
            let bad = || {
                Error::Config(format!(
                    "{}:{}: bad stencil row `{line}`",
                    path.display(),
                    lineno + 1
                ))
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad());
            }
            let ox: isize = cols[0].parse().map_err(|_| bad())?;
            let oy: isize = cols[1].parse().map_err(|_| bad())?;
            let w: f64 = cols[2].parse().map_err(|_| bad())?;
            entries.push(([ox, oy], T::from_f64_round(w)));
        }
        DiscreteKernel::from_stencil(dim, h, entries)
    }
}

fn spacing<T: Real>(dim: usize, h: &[T]) -> Result<[T; 2]> {
    if h.len() != dim || !(1..=2).contains(&dim) {
        return Err(Error::Config(format!(
            "kernel of dimension {dim} needs {dim} spacings, got {}",
            h.len()
        )));
    }
    if h.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::Config("kernel spacing must be positive".into()));
    }
    Ok([h[0], if dim == 2 { h[1] } else { T::one() }])
}

#[inline]
fn offset_len<T: Real>(o: [isize; 2], h: [T; 2]) -> T {
    let a = T::from_isize_exact(o[0]) * h[0];
    let b = T::from_isize_exact(o[1]) * h[1];
    (a * a + b * b).sqrt()
}

/// Samples the normalized profile at every lattice offset within `R0`,
/// symmetrizes and renormalizes to unit mass.
pub fn build_kernel<T: Real>(spec: &KernelSpec, h: &[T]) -> Result<DiscreteKernel<T>> {
    spec.check()?;
    if h.len() != spec.dim {
        return Err(Error::Config(format!(
            "{}D kernel needs {} spacings, got {}",
            spec.dim,
            spec.dim,
            h.len()
        )));
    }
    let limit = spec.r0 / 2.0;
    for &hi in h {
        let hf = hi.to_f64_lossless();
        if !(hf > 0.0) {
            return Err(Error::Config("kernel spacing must be positive".into()));
        }
        if hf > limit {
            return Err(Error::Resolution { h: hf, limit });
        }
    }
    let hh = spacing(spec.dim, h)?;
    let hf = [hh[0].to_f64_lossless(), hh[1].to_f64_lossless()];
    let outer = spec.big_r0 * (1.0 + SUPPORT_SLOP);
    let reach = |hi: f64| (outer / hi).floor() as isize;
    let (r0x, r0y) = (reach(hf[0]), if spec.dim == 2 { reach(hf[1]) } else { 0 });

    let mut entries = Vec::new();
    for i in -r0x..=r0x {
        for j in -r0y..=r0y {
            let rho = ((i as f64 * hf[0]).powi(2) + (j as f64 * hf[1]).powi(2)).sqrt();
            if rho > outer {
                continue;
            }
            let p = spec.profile(rho);
            if p > 0.0 {
                entries.push(([i, j], T::lit(p)));
            }
        }
    }
    let mut k = DiscreteKernel::from_stencil(spec.dim, h, entries)?;
    let vol = k.cell_volume();
    let raw_mass: Vec<T> = k.weights.iter().map(|&w| w * vol).collect();
    let raw = pairwise_sum(&raw_mass).to_f64_lossless();
    k.quadrature_slack = (spec.continuum_mass() / raw - 1.0).abs();
    k.symmetrize_and_normalize();
    Ok(k)
}

/// Outcome of [`validate_kernel`]. Every hypothesis gets its own flag.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `max |w(δ) − w(−δ)|`; a missing mirror counts as weight 0.
    pub evenness_max: f64,
    pub evenness_offender: Option<[isize; 2]>,
    pub normalization_error: f64,
    pub min_weight: f64,
    pub negative_offender: Option<[isize; 2]>,
    pub min_density_inner: f64,
    pub m0: f64,
    pub max_density: f64,
    pub big_m0: f64,
    pub support_radius: f64,
    pub support_offender: Option<[isize; 2]>,
    pub big_r0: f64,
    /// `Σ δ·w(δ)` accumulated over mirror pairs.
    pub first_moment: [f64; 2],
    pub quadrature_slack: f64,
    pub even: bool,
    pub normalized: bool,
    pub nonnegative: bool,
    pub lower_bound: bool,
    pub upper_bound: bool,
    pub support: bool,
}

/// Tolerance on `|Σ w·vol − 1|`.
pub const NORMALIZATION_TOL: f64 = 1e-14;

/// Relative rounding allowance on the density bounds; both sides of the
/// comparison are a few roundings away from the same real number when a
/// bound is attained.
const BOUND_ROUNDING: f64 = 1e-13;

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.even
            && self.normalized
            && self.nonnegative
            && self.lower_bound
            && self.upper_bound
            && self.support
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let off =
            |o: Option<[isize; 2]>| o.map_or("none".to_string(), |o| format!("{},{}", o[0], o[1]));
        let _ = writeln!(s, "evenness_max = {:e}", self.evenness_max);
        let _ = writeln!(s, "evenness_offender = {}", off(self.evenness_offender));
        let _ = writeln!(s, "normalization_error = {:e}", self.normalization_error);
        let _ = writeln!(s, "min_weight = {:e}", self.min_weight);
        let _ = writeln!(s, "min_density_inner = {:e}", self.min_density_inner);
        let _ = writeln!(s, "m0 = {:e}", self.m0);
        let _ = writeln!(s, "max_density = {:e}", self.max_density);
        let _ = writeln!(s, "M0 = {:e}", self.big_m0);
        let _ = writeln!(s, "support_radius = {:e}", self.support_radius);
        let _ = writeln!(s, "support_offender = {}", off(self.support_offender));
        let _ = writeln!(s, "R0 = {:e}", self.big_r0);
        let _ = writeln!(
            s,
            "first_moment = {:e},{:e}",
            self.first_moment[0], self.first_moment[1]
        );
        let _ = writeln!(s, "quadrature_slack = {:e}", self.quadrature_slack);
        for (k, v) in [
            ("even", self.even),
            ("normalized", self.normalized),
            ("nonnegative", self.nonnegative),
            ("lower_bound", self.lower_bound),
            ("upper_bound", self.upper_bound),
            ("support", self.support),
            ("pass", self.passed()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

pub fn validate_kernel<T: Real>(k: &DiscreteKernel<T>, spec: &KernelSpec) -> ValidationReport {
    let idx = k.index_of();
    let h = k.spacing();
    let w64: Vec<f64> = k.weights.iter().map(|w| w.to_f64_lossless()).collect();

    let mut evenness_max = 0.0f64;
    let mut evenness_offender = None;
    let mut first_moment = [0.0f64; 2];
    let vol = k.cell_volume().to_f64_lossless();
    for (i, o) in k.offsets.iter().enumerate() {
        let mirror = idx.get(&[-o[0], -o[1]]).map_or(0.0, |&j| w64[j]);
        let d = (w64[i] - mirror).abs();
        if d > evenness_max || (d > 0.0 && evenness_offender.is_none()) {
            evenness_max = evenness_max.max(d);
            evenness_offender = Some(*o);
        }
        // each mirror pair once: positive half-lattice
        if (o[0], o[1]) > (0, 0) {
            for a in 0..2 {
                first_moment[a] += o[a] as f64 * (w64[i] - mirror) * vol;
            }
        } else if mirror == 0.0 && (o[0], o[1]) < (0, 0) {
            for a in 0..2 {
                first_moment[a] += o[a] as f64 * w64[i] * vol;
            }
        }
    }

    let normalization_error = (k.total_weight().to_f64_lossless() - 1.0).abs();

    let (mut min_weight, mut negative_offender) = (f64::INFINITY, None);
    for (o, &w) in k.offsets.iter().zip(&w64) {
        if w < min_weight {
            min_weight = w;
            if w < 0.0 {
                negative_offender = Some(*o);
            }
        }
    }

    let hmax = h[0]
        .max(if k.dim == 2 { h[1] } else { h[0] })
        .to_f64_lossless();
    let inner = spec.r0 - hmax;
    let h64 = [h[0].to_f64_lossless(), h[1].to_f64_lossless()];
    let len =
        |o: &[isize; 2]| ((o[0] as f64 * h64[0]).powi(2) + (o[1] as f64 * h64[1]).powi(2)).sqrt();

    // Lattice points of the inner ball that the stencil omits have weight 0.
    let mut min_density_inner = f64::INFINITY;
    let ri = (inner.max(0.0) / h64[0]).floor() as isize;
    let rj = if k.dim == 2 {
        (inner.max(0.0) / h64[1]).floor() as isize
    } else {
        0
    };
    for i in -ri..=ri {
        for j in -rj..=rj {
            let o = [i, j];
            if len(&o) <= inner {
                let w = idx.get(&o).map_or(0.0, |&n| w64[n]);
                min_density_inner = min_density_inner.min(w);
            }
        }
    }
    let max_density = w64.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut support_radius = 0.0f64;
    let mut support_offender = None;
    let outer = spec.big_r0 * (1.0 + SUPPORT_SLOP);
    for (o, &w) in k.offsets.iter().zip(&w64) {
        if w != 0.0 {
            let r = len(o);
            if r > support_radius {
                support_radius = r;
            }
            if r > outer && support_offender.is_none() {
                support_offender = Some(*o);
            }
        }
    }

    let q = k.quadrature_slack;
    ValidationReport {
        evenness_max,
        evenness_offender,
        normalization_error,
        min_weight,
        negative_offender,
        min_density_inner,
        m0: spec.m0,
        max_density,
        big_m0: spec.big_m0,
        support_radius,
        support_offender,
        big_r0: spec.big_r0,
        first_moment,
        quadrature_slack: q,
        even: evenness_max == 0.0,
        normalized: normalization_error <= NORMALIZATION_TOL,
        nonnegative: min_weight >= 0.0,
        lower_bound: min_density_inner >= spec.m0 * (1.0 - q) * (1.0 - BOUND_ROUNDING),
        upper_bound: max_density <= spec.big_m0 * (1.0 + q) * (1.0 + BOUND_ROUNDING),
        support: support_offender.is_none(),
    }
}
