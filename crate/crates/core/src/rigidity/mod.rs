//! Diagnostics for one-dimensional symmetry of monotone solutions: the
//! quotient `v = u₁/u₂`, cutoffs, the energy chain `J1 ≤ J2 ≤ …`, Harnack
//! ratios, direction reconstruction and planarity.

mod cutoff;
mod energy;
mod window;

use std::fmt::Write as _;

pub use cutoff::{build_cutoff, quintic_smoothstep, Cutoff, QUINTIC_GRAD_BOUND};
pub use energy::{compute_j1, compute_j2, energy_sums, EnergySums, PairRegion};
pub use window::{
    compute_quotient, estimate_direction, harnack_ratio, planarity_error, quotient_of,
    stability_residual, window_components, ComponentStat, DirectionEstimate, Quotient, Window,
};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::operator::OperatorContext;
use crate::scalar::{pairwise_sum, Real};
use crate::solvers::SolutionBundle;

/// Default `κ` bound in the slack `κ·residual_inf·S` of `J1 ≤ J2 + slack`.
pub const KAPPA_MAX: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Cutoff radii, ascending.
    pub r_list: Vec<f64>,
    /// Window floor relative to `max u₂`.
    pub eps_floor: f64,
    /// Defaults to the kernel support radius.
    pub harnack_radius: Option<f64>,
    pub planarity_threshold: f64,
    pub kappa_max: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            r_list: vec![8.0, 16.0, 32.0],
            eps_floor: 1e-6,
            harnack_radius: None,
            planarity_threshold: 1e-3,
            kappa_max: KAPPA_MAX,
        }
    }
}

/// Energy chain at one cutoff radius.
#[derive(Clone, Debug)]
pub struct EnergyRow {
    pub radius: f64,
    pub j1: f64,
    pub j2: f64,
    pub cs_factor_a: f64,
    pub cs_factor_b: f64,
    pub tail_energy: f64,
    pub j1_scale: f64,
    pub i1: f64,
    pub i2: f64,
    /// `I1 − I2`; equals `J1 + X` with `|X| ≤ J2`.
    pub defect: f64,
    pub x_term: f64,
    /// `S = 2Σ τ²(u₂ + |u₁|)(1 + |v|)·vol` over the window.
    pub energy_scale: f64,
    /// `|I1 − I2| / (residual_inf·S)`.
    pub kappa: f64,
    /// `κ_max·residual_inf·S`.
    pub slack: f64,
    pub region_pair_count: u64,
    pub cauchy_schwarz_ok: bool,
    pub j1_ok: bool,
}

/// Runs the energy chain for every radius in `r_list`.
pub fn verify_energy_chain<T: Real>(
    ctx: &OperatorContext<T>,
    bundle: &SolutionBundle<T>,
    quotient: &Quotient<T>,
    r_list: &[f64],
    kappa_max: f64,
) -> Result<Vec<EnergyRow>> {
    let u2 = bundle
        .u2
        .as_ref()
        .ok_or_else(|| Error::Shape("energy chain needs a 2D bundle".into()))?;
    let grid = ctx.grid();
    let res = bundle.residual_inf.to_f64_lossless();
    let big_r0 = ctx.kernel().support_radius();
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let cut = build_cutoff(grid, T::lit(r))?;
        let region = PairRegion::new(grid, T::lit(r), big_r0);
        let s = energy_sums(
            ctx,
            &bundle.u1,
            u2,
            &quotient.v,
            &quotient.window,
            &cut,
            &region,
        )?;
        let scale_terms: Vec<T> = quotient
            .window
            .indices()
            .map(|i| {
                let t = cut.tau.values()[i];
                let v = quotient.v.values()[i];
                t * t * (u2.values()[i] + bundle.u1.values()[i].abs()) * (T::one() + v.abs())
            })
            .collect();
        let scale =
            (T::lit(2.0) * pairwise_sum(&scale_terms) * grid.cell_volume()).to_f64_lossless();
        let f = |x: T| x.to_f64_lossless();
        let defect = f(s.i1) - f(s.i2);
        let slack = kappa_max * res * scale;
        let kappa = if res * scale > 0.0 {
            defect.abs() / (res * scale)
        } else if defect == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let (j1, j2) = (f(s.j1), f(s.j2));
        let (a, b) = (f(s.cs_a), f(s.cs_b));
        // the rounding allowance is relative to the terms actually summed
        let round = 64.0 * T::epsilon().to_f64_lossless();
        rows.push(EnergyRow {
            radius: r,
            j1,
            j2,
            cs_factor_a: a,
            cs_factor_b: b,
            tail_energy: f(s.tail_energy),
            j1_scale: f(s.j1_scale),
            i1: f(s.i1),
            i2: f(s.i2),
            defect,
            x_term: f(s.x_term),
            energy_scale: scale,
            kappa,
            slack,
            region_pair_count: region.pair_count(grid, ctx.kernel()),
            cauchy_schwarz_ok: j2 * j2 <= a * b * (1.0 + round),
            j1_ok: j1 <= j2 + slack + round * f(s.j1_scale),
        });
    }
    Ok(rows)
}

/// Least-squares `C` in `count·vol² ≈ C·R²` and consecutive count ratios.
pub fn fit_pair_count(rows: &[EnergyRow], cell_volume: f64) -> (f64, Vec<f64>) {
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows {
        let m = r.region_pair_count as f64 * cell_volume * cell_volume;
        num += m * r.radius * r.radius;
        den += r.radius.powi(4);
    }
    let ratios = rows
        .windows(2)
        .map(|w| w[1].region_pair_count as f64 / w[0].region_pair_count as f64)
        .collect();
    (if den > 0.0 { num / den } else { 0.0 }, ratios)
}

/// Everything `verify` measures on one bundle.
#[derive(Clone, Debug)]
pub struct RigidityReport {
    pub residual_inf: f64,
    pub window_floor: f64,
    pub window_points: usize,
    pub window_fraction: f64,
    pub a: f64,
    pub omega: [f64; 2],
    pub v_stddev: f64,
    pub components: Vec<ComponentStat<f64>>,
    pub planarity_error_inf: f64,
    pub planarity_threshold: f64,
    pub harnack_radius: f64,
    pub harnack_c: f64,
    pub stability_residual: f64,
    pub kappa_max: f64,
    pub rows: Vec<EnergyRow>,
    pub pair_count_c: f64,
    pub pair_count_ratios: Vec<f64>,
    /// `tail_energy` strictly decreasing along `r_list`.
    pub tail_decreasing: bool,
}

impl RigidityReport {
    pub fn planar(&self) -> bool {
        self.planarity_error_inf <= self.planarity_threshold
    }

    pub fn inequalities_hold(&self) -> bool {
        self.rows.iter().all(|r| r.cauchy_schwarz_ok && r.j1_ok)
    }

    pub fn passed(&self) -> bool {
        self.planar() && self.inequalities_hold()
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("passed", self.passed().to_string());
        kv("residual_inf", format!("{:e}", self.residual_inf));
        kv("window_floor", format!("{:e}", self.window_floor));
        kv("window_points", self.window_points.to_string());
        kv("window_fraction", format!("{:e}", self.window_fraction));
        kv("components", self.components.len().to_string());
        for (i, c) in self.components.iter().enumerate() {
            kv(
                &format!("component.{i}"),
                format!("size={} a={:e} v_stddev={:e}", c.size, c.a, c.v_stddev),
            );
        }
        kv("a", format!("{:e}", self.a));
        kv("omega", format!("{:e},{:e}", self.omega[0], self.omega[1]));
        kv("v_stddev", format!("{:e}", self.v_stddev));
        kv(
            "planarity_error_inf",
            format!("{:e}", self.planarity_error_inf),
        );
        kv(
            "planarity_threshold",
            format!("{:e}", self.planarity_threshold),
        );
        kv("harnack_radius", format!("{:e}", self.harnack_radius));
        kv("harnack_C", format!("{:e}", self.harnack_c));
        kv(
            "stability_residual",
            format!("{:e}", self.stability_residual),
        );
        kv("kappa_max", format!("{:e}", self.kappa_max));
        kv("pair_count_C", format!("{:e}", self.pair_count_c));
        kv(
            "pair_count_ratios",
            self.pair_count_ratios
                .iter()
                .map(|r| format!("{r:e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("tail_decreasing", self.tail_decreasing.to_string());
        kv("inequalities_hold", self.inequalities_hold().to_string());
        s
    }

    pub const CSV_HEADER: &'static str = "R,J1,J2,cs_factor_a,cs_factor_b,tail_energy,j1_scale,I1,I2,defect,x_term,energy_scale,kappa,slack,region_pair_count,cauchy_schwarz_ok,j1_ok,a,v_stddev,omega1,omega2,planarity_error_inf,harnack_C";

    /// One CSV row per radius, header included.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.radius,
                r.j1,
                r.j2,
                r.cs_factor_a,
                r.cs_factor_b,
                r.tail_energy,
                r.j1_scale,
                r.i1,
                r.i2,
                r.defect,
                r.x_term,
                r.energy_scale,
                r.kappa,
                r.slack,
                r.region_pair_count,
                r.cauchy_schwarz_ok,
                r.j1_ok,
                self.a,
                self.v_stddev,
                self.omega[0],
                self.omega[1],
                self.planarity_error_inf,
                self.harnack_c,
            );
        }
        s
    }
}

/// The full verification of a 2D bundle. Fails with a domain error when the
/// bundle is not monotone.
pub fn verify_bundle<T: Real>(
    ctx: &OperatorContext<T>,
    f: &Nonlinearity,
    bundle: &SolutionBundle<T>,
    opts: &VerifyOptions,
) -> Result<RigidityReport> {
    if opts.r_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("R_list must be strictly ascending".into()));
    }
    let q = compute_quotient(bundle, T::lit(opts.eps_floor))?;
    let u2 = bundle.u2.as_ref().expect("checked by compute_quotient");
    let grid = ctx.grid();
    let (labels, ncomp) = window_components(&q.window, ctx.kernel(), grid);
    let dir = estimate_direction(&q.v, u2, &q.window, Some((&labels, ncomp)))?;
    let planarity = planarity_error(&bundle.u, dir.omega, &q.window)?;
    let hr = opts
        .harnack_radius
        .unwrap_or_else(|| ctx.kernel().support_radius().to_f64_lossless());
    let harnack = harnack_ratio(u2, T::lit(hr), &q.window)?;
    let stab = stability_residual(ctx, f, &bundle.u, u2, &q.window)?;
    let rows = verify_energy_chain(ctx, bundle, &q, &opts.r_list, opts.kappa_max)?;
    let (c, ratios) = fit_pair_count(&rows, grid.cell_volume().to_f64_lossless());
    let tail_decreasing = rows.windows(2).all(|w| w[1].tail_energy < w[0].tail_energy);
    let f = |x: T| x.to_f64_lossless();
    Ok(RigidityReport {
        residual_inf: f(bundle.residual_inf),
        window_floor: f(q.floor),
        window_points: q.window.len(),
        window_fraction: q.window.fraction(),
        a: f(dir.a),
        omega: [f(dir.omega[0]), f(dir.omega[1])],
        v_stddev: f(dir.v_stddev),
        components: dir
            .components
            .iter()
            .map(|c| ComponentStat {
                size: c.size,
                a: f(c.a),
                v_stddev: f(c.v_stddev),
            })
            .collect(),
        planarity_error_inf: f(planarity),
        planarity_threshold: opts.planarity_threshold,
        harnack_radius: hr,
        harnack_c: f(harnack),
        stability_residual: f(stab),
        kappa_max: opts.kappa_max,
        rows,
        pair_count_c: c,
        pair_count_ratios: ratios,
        tail_decreasing,
    })
}
