use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernel::DiscreteKernel;
use crate::nonlinearity::Nonlinearity;
use crate::operator::{apply_l, OperatorContext};
use crate::scalar::{pairwise_sum, Real};
use crate::solvers::SolutionBundle;

/// Grid points where the monotone derivative is trusted to be positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    mask: Vec<bool>,
    count: usize,
}

impl Window {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let count = mask.iter().filter(|&&m| m).count();
        Window { mask, count }
    }

    /// `{d ≥ floor}`.
    pub fn above<T: Real>(d: &Field<T>, floor: T) -> Self {
        Window::from_mask(d.values().iter().map(|&v| v >= floor).collect())
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn fraction(&self) -> f64 {
        self.count as f64 / self.mask.len() as f64
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }
}

/// `v = u₁/u₂` on the window (0 elsewhere).
#[derive(Clone, Debug)]
pub struct Quotient<T> {
    pub v: Field<T>,
    pub window: Window,
    /// Absolute floor used for the window.
    pub floor: T,
}

/// Quotient on the window `{u₂ ≥ eps_floor·max u₂}`. Refuses non-monotone
/// bundles: the quotient is only meaningful under the monotonicity
/// hypothesis.
pub fn compute_quotient<T: Real>(bundle: &SolutionBundle<T>, eps_floor: T) -> Result<Quotient<T>> {
    if !bundle.monotone {
        return Err(Error::Domain(format!(
            "bundle is not monotone (min derivative {:e}); quotient undefined",
            bundle.min_monotone_derivative.to_f64_lossless()
        )));
    }
    let u2 = bundle
        .u2
        .as_ref()
        .ok_or_else(|| Error::Shape("quotient needs a 2D bundle".into()))?;
    quotient_of(&bundle.u1, u2, eps_floor)
}

/// Same as [`compute_quotient`] on raw derivative fields (no monotonicity
/// gate).
pub fn quotient_of<T: Real>(u1: &Field<T>, u2: &Field<T>, eps_floor: T) -> Result<Quotient<T>> {
    u1.grid().check_same(u2.grid(), "quotient")?;
    let floor = eps_floor * u2.max();
    if !(floor > T::zero()) {
        return Err(Error::Domain("u2 has no positive values".into()));
    }
    let window = Window::above(u2, floor);
    if window.is_empty() {
        return Err(Error::Domain("empty evaluation window".into()));
    }
    let v: Vec<T> = u1
        .values()
        .iter()
        .zip(u2.values())
        .zip(window.mask())
        .map(|((&a, &b), &m)| if m { a / b } else { T::zero() })
        .collect();
    Ok(Quotient {
        v: Field::new(u1.grid().clone(), v)?,
        window,
        floor,
    })
}

/// Connected components of the window under "joined by a kernel offset with
/// positive weight". Returns a component id per grid point (`usize::MAX`
/// outside the window) and the number of components.
pub fn window_components<T: Real>(
    window: &Window,
    kernel: &DiscreteKernel<T>,
    grid: &crate::grid::Grid<T>,
) -> (Vec<usize>, usize) {
    let n = grid.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let offsets: Vec<[isize; 2]> = kernel
        .offsets()
        .iter()
        .zip(kernel.weights())
        .filter(|(o, &w)| w > T::zero() && **o != [0, 0])
        .map(|(o, _)| *o)
        .collect();
    for x in window.indices() {
        let [i0, i1] = grid.unflat(x);
        for o in &offsets {
            if let Some(y) = grid.shifted_inside(i0, i1, *o) {
                if window.contains(y) {
                    let (a, b) = (find(&mut parent, x), find(&mut parent, y));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut roots: Vec<usize> = Vec::new();
    for x in window.indices() {
        let r = find(&mut parent, x);
        let id = match roots.iter().position(|&q| q == r) {
            Some(id) => id,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        label[x] = id;
    }
    (label, roots.len())
}

/// `max_x sup u₂ / inf u₂` over `B_radius(x) ∩ window`, `x` in the window.
pub fn harnack_ratio<T: Real>(u2: &Field<T>, radius: T, window: &Window) -> Result<T> {
    if window.is_empty() {
        return Err(Error::Domain("empty Harnack window".into()));
    }
    let grid = u2.grid();
    let h = grid.spacing();
    let reach = |hi: T| {
        (radius * T::lit(1.0 + 1e-12) / hi)
            .floor()
            .to_isize()
            .unwrap_or(0)
    };
    let r0 = reach(h[0]);
    let r1 = if grid.dim() == 2 { reach(h[1]) } else { 0 };
    let lim = radius * radius * T::lit(1.0 + 2e-12);
    let mut ball = Vec::new();
    for i in -r0..=r0 {
        for j in -r1..=r1 {
            let a = T::from_isize_exact(i) * h[0];
            let b = T::from_isize_exact(j) * h[1];
            if a * a + b * b <= lim {
                ball.push([i, j]);
            }
        }
    }
    let vals = u2.values();
    let mut worst = T::one();
    for x in window.indices() {
        let [i0, i1] = grid.unflat(x);
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for o in &ball {
            if let Some(y) = grid.shifted_inside(i0, i1, *o) {
                if window.contains(y) {
                    lo = lo.min(vals[y]);
                    hi = hi.max(vals[y]);
                }
            }
        }
        if !(lo > T::zero()) {
            return Err(Error::Domain(
                "non-positive u2 inside the Harnack window".into(),
            ));
        }
        worst = worst.max(hi / lo);
    }
    Ok(worst)
}

/// u₂-weighted statistics of `v` on one window component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentStat<T> {
    pub size: usize,
    pub a: T,
    pub v_stddev: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionEstimate<T> {
    pub a: T,
    pub omega: [T; 2],
    pub v_stddev: T,
    pub components: Vec<ComponentStat<T>>,
}

fn weighted_stats<T: Real>(v: &[T], w: &[T]) -> (T, T) {
    let wsum = pairwise_sum(w);
    let wv: Vec<T> = v.iter().zip(w).map(|(&a, &b)| a * b).collect();
    let mean = pairwise_sum(&wv) / wsum;
    let dev: Vec<T> = v
        .iter()
        .zip(w)
        .map(|(&a, &b)| (a - mean) * (a - mean) * b)
        .collect();
    (mean, (pairwise_sum(&dev) / wsum).sqrt())
}

/// `a` = u₂-weighted mean of `v` over the window, `ω = (a, 1)/√(a² + 1)`.
/// `labels` (from [`window_components`]) adds per-component statistics.
pub fn estimate_direction<T: Real>(
    v: &Field<T>,
    u2: &Field<T>,
    window: &Window,
    labels: Option<(&[usize], usize)>,
) -> Result<DirectionEstimate<T>> {
    if window.is_empty() {
        return Err(Error::Domain("empty window".into()));
    }
    let idx: Vec<usize> = window.indices().collect();
    let vs: Vec<T> = idx.iter().map(|&i| v.values()[i]).collect();
    let ws: Vec<T> = idx.iter().map(|&i| u2.values()[i]).collect();
    let (a, v_stddev) = weighted_stats(&vs, &ws);
    let mut components = Vec::new();
    if let Some((labels, count)) = labels {
        for c in 0..count {
            let sel: Vec<usize> = idx.iter().cloned().filter(|&i| labels[i] == c).collect();
            let vs: Vec<T> = sel.iter().map(|&i| v.values()[i]).collect();
            let ws: Vec<T> = sel.iter().map(|&i| u2.values()[i]).collect();
            let (ca, cs) = weighted_stats(&vs, &ws);
            components.push(ComponentStat {
                size: sel.len(),
                a: ca,
                v_stddev: cs,
            });
        }
    }
    Ok(DirectionEstimate {
        a,
        omega: crate::solvers::init::direction(a),
        v_stddev,
        components,
    })
}

/// Fits `u ≈ u⋆(ω·x)` by binning `s = ω·x` (bin width `h_min`, bin centres
/// on multiples of `h_min`), joining the bin centroids `(s̄, ū)` piecewise
/// linearly, and returns `max |u − u⋆(ω·x)|` over the window.
pub fn planarity_error<T: Real>(u: &Field<T>, omega: [T; 2], window: &Window) -> Result<T> {
    let norm = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
    if (norm - T::one()).abs() > T::lit(1e-12) {
        return Err(Error::Domain(format!("|omega| = {norm}, expected 1")));
    }
    if window.is_empty() {
        return Err(Error::Domain("empty window".into()));
    }
    let grid = u.grid();
    let h = grid.min_spacing();
    let s_of = |i: usize| {
        let p = grid.point(i);
        omega[0] * p[0] + omega[1] * p[1]
    };
    let mut bins: std::collections::BTreeMap<i64, (Vec<T>, Vec<T>)> = Default::default();
    for i in window.indices() {
        let s = s_of(i);
        let b = (s / h).round().to_i64().unwrap_or(0);
        let e = bins.entry(b).or_default();
        e.0.push(s);
        e.1.push(u.values()[i]);
    }
    let nodes: Vec<(T, T)> = bins
        .values()
        .map(|(s, v)| {
            let n = T::from_usize_exact(s.len());
            (pairwise_sum(s) / n, pairwise_sum(v) / n)
        })
        .collect();
    let fit = |s: T| -> T {
        let k = nodes.partition_point(|&(c, _)| c <= s);
        if k == 0 {
            return nodes[0].1;
        }
        if k == nodes.len() {
            return nodes[k - 1].1;
        }
        let (s0, u0) = nodes[k - 1];
        let (s1, u1) = nodes[k];
        if s1 == s0 {
            return u0;
        }
        u0 + (u1 - u0) * (s - s0) / (s1 - s0)
    };
    let mut worst = T::zero();
    for i in window.indices() {
        worst = worst.max((u.values()[i] - fit(s_of(i))).abs());
    }
    Ok(worst)
}

/// `‖ℒψ − f'(u)ψ‖_∞ / ‖ψ‖_∞` over the window; `ψ` must be positive there.
pub fn stability_residual<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    u: &Field<T>,
    psi: &Field<T>,
    window: &Window,
) -> Result<T> {
    u.grid().check_same(psi.grid(), "stability_residual")?;
    if window.is_empty() {
        return Err(Error::Domain("empty window".into()));
    }
    if let Some(i) = window.indices().find(|&i| !(psi.values()[i] > T::zero())) {
        return Err(Error::Domain(format!(
            "psi = {} is not positive at window point {i}",
            psi.values()[i]
        )));
    }
    let lpsi = apply_l(ctx, psi)?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for i in window.indices() {
        let p = psi.values()[i];
        num = num.max((lpsi.values()[i] - f.deriv(u.values()[i]) * p).abs());
        den = den.max(p.abs());
    }
    Ok(num / den)
}
