//! Batch front-end: configuration, the four pipeline commands and the exit
//! code contract.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{env_name, GridSpec, InitSpec, RawConfig, RunConfig, ENV_PREFIX};

use crate::error::{Error, Result};
use crate::grid::{read_field, Axis, Boundary, DerivativeScheme, Field, Grid};
use crate::kernel::{build_kernel, validate_kernel, DiscreteKernel};
use crate::operator::{check_r1, Method, OperatorContext};
use crate::rigidity::{stability_residual, verify_bundle, Window};
use crate::solvers::{
    init, load_bundle, newton_polish, relax_2d, solve_profile_1d, tails_within, NewtonOptions,
    Profile1d, ProfileOptions, RelaxOptions, SolutionBundle,
};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Pass = 0,
    NumericalFailure = 1,
    ConfigError = 2,
    HypothesisViolated = 3,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Exit code for an error that aborted a command.
    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Config(_)
            | Error::KernelSpec(_)
            | Error::Resolution { .. }
            | Error::Shape(_)
            | Error::Format { .. }
            | Error::Io { .. } => ExitCode::ConfigError,
            Error::NoConvergence { .. } => ExitCode::NumericalFailure,
            Error::Domain(_) => ExitCode::HypothesisViolated,
        }
    }
}

/// What a command did: its exit code and the report text it wrote.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit: ExitCode,
    pub report: String,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn kernel_for(cfg: &RunConfig, h: &[f64]) -> Result<DiscreteKernel<f64>> {
    match &cfg.stencil_file {
        Some(p) => DiscreteKernel::read_csv(p, cfg.kernel.dim, h),
        None => build_kernel(&cfg.kernel, h),
    }
}

fn context(cfg: &RunConfig, grid: Grid<f64>) -> Result<OperatorContext<f64>> {
    let h = grid.spacing();
    let k = kernel_for(cfg, &h[..grid.dim()])?;
    OperatorContext::new(k, grid, Method::Direct)
}

/// Builds and validates the kernel on the configured spacing; writes
/// `kernel_report.txt` and `kernel.csv`.
pub fn cmd_kernel_check(cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    let k = kernel_for(cfg, &cfg.grid.h)?;
    let v = validate_kernel(&k, &cfg.kernel);
    let mut report = format!("family={}\n", cfg.kernel.family);
    let _ = writeln!(report, "offsets={}", k.len());
    report.push_str(&v.to_key_values());
    if v.passed() && cfg.grid.dim() == k.dim() {
        // the Dirichlet identity on a small periodic grid, as a smoke test of
        // the stencil in operator form
        let reach = k.reach();
        let axes = (0..k.dim())
            .map(|a| Axis::centered(4 * reach[a] + 8, cfg.grid.h[a], Boundary::Periodic))
            .collect();
        let ctx = OperatorContext::new(k.clone(), Grid::new(axes)?, Method::Direct)?;
        let r1 = check_r1(&ctx, 4, seed)?;
        report.push_str(&r1.to_key_values());
    }
    let _ = writeln!(report, "passed={}", v.passed());
    let out = &cfg.out_dir;
    write_text(&out.join("kernel_report.txt"), &report)?;
    k.write_csv(out.join("kernel.csv"))?;
    Ok(Outcome {
        exit: if v.passed() {
            ExitCode::Pass
        } else {
            ExitCode::NumericalFailure
        },
        report,
    })
}

fn profile_options(cfg: &RunConfig) -> ProfileOptions {
    ProfileOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        lambda: cfg.lambda,
        scheme: cfg.schemes[0],
        ..ProfileOptions::default()
    }
}

/// Solves for the 1D front; writes the bundle into `out/profile` and
/// `profile_report.txt`.
pub fn cmd_solve_profile(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.grid.dim() != 1 {
        return Err(Error::Config("solve-profile needs a 1D grid".into()));
    }
    let ctx = context(cfg, cfg.grid.build()?)?;
    let mut opts = profile_options(cfg);
    if !cfg.newton {
        opts.newton.max_steps = 0;
    }
    let (bundle, exit) = match solve_profile_1d(&ctx, &cfg.nonlinearity, &opts) {
        Ok(b) => (b, ExitCode::Pass),
        Err(Error::NoConvergence {
            iterations,
            last,
            history,
        }) => {
            let report =
                format!("converged=false\niterations={iterations}\nresidual_inf={last:e}\n");
            write_text(&cfg.out_dir.join("profile_report.txt"), &report)?;
            crate::solvers::write_history(&history, cfg.out_dir.join("residual_history.csv"))?;
            return Ok(Outcome {
                exit: ExitCode::NumericalFailure,
                report,
            });
        }
        Err(e) => return Err(e),
    };
    let grid = ctx.grid();
    let u = bundle.u.values();
    let mid = grid.axis(0).coord(grid.len() / 2);
    let mut report = String::from("converged=true\n");
    let _ = writeln!(report, "nonlinearity={}", cfg.nonlinearity);
    let _ = writeln!(report, "iterations={}", bundle.history.len());
    let _ = writeln!(report, "residual_inf={:e}", bundle.residual_inf);
    let _ = writeln!(report, "monotone={}", bundle.monotone);
    let _ = writeln!(
        report,
        "min_derivative={:e}",
        bundle.min_monotone_derivative
    );
    let _ = writeln!(report, "x_mid={mid:e}");
    let _ = writeln!(report, "u_mid={:e}", u[grid.len() / 2]);
    let _ = writeln!(report, "u_left={:e}", u[0]);
    let _ = writeln!(report, "u_right={:e}", u[u.len() - 1]);
    let _ = writeln!(
        report,
        "tails_within_1e-4={}",
        tails_within(&bundle.u, 1e-4)
    );
    for (i, w) in bundle.warnings.iter().enumerate() {
        let _ = writeln!(report, "warning.{i}={w}");
    }
    bundle.save(
        cfg.out_dir.join("profile"),
        &[("nonlinearity", cfg.nonlinearity.to_string())],
    )?;
    write_text(&cfg.out_dir.join("profile_report.txt"), &report)?;
    Ok(Outcome { exit, report })
}

/// The front of the x₂ cross-section: the 1D problem with the marginal
/// kernel on the x₂ axis of `grid`.
pub fn cross_section_profile(
    cfg: &RunConfig,
    ctx: &OperatorContext<f64>,
) -> Result<SolutionBundle<f64>> {
    let a2 = *ctx.grid().axis(1);
    let line = Grid::line(Axis::new(a2.n, a2.h, a2.origin, Boundary::Clamp))?;
    let c1 = OperatorContext::new(ctx.kernel().marginal()?, line, Method::Direct)?;
    let mut opts = profile_options(cfg);
    opts.scheme = DerivativeScheme::Centered2;
    opts.tol = opts.tol.min(1e-10);
    opts.max_iter = 20_000;
    solve_profile_1d(&c1, &cfg.nonlinearity, &opts)
}

fn initial_field(cfg: &RunConfig, ctx: &OperatorContext<f64>) -> Result<Field<f64>> {
    let grid = ctx.grid();
    let profile =
        || -> Result<Profile1d<f64>> { Profile1d::new(&cross_section_profile(cfg, ctx)?.u) };
    match &cfg.init {
        InitSpec::Tilt(a) => Ok(init::tilted(&profile()?, grid, *a)?.0),
        InitSpec::Perturbed { eps, sigma } => init::stretched(&profile()?, grid, *eps, *sigma),
        InitSpec::File(p) => {
            let path = if p.is_dir() {
                p.join("u.nlrg")
            } else {
                p.clone()
            };
            let u: Field<f64> = read_field(&path)?;
            if !u.grid().same_geometry(grid) {
                return Err(Error::Config(format!(
                    "{}: field grid does not match the configured grid",
                    path.display()
                )));
            }
            Ok(u)
        }
    }
}

/// Relaxes 2D initial data (then Newton-polishes if enabled); writes the
/// bundle into `out/bundle`.
pub fn cmd_relax2d(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.grid.dim() != 2 {
        return Err(Error::Config("relax2d needs a 2D grid".into()));
    }
    let ctx = context(cfg, cfg.grid.build()?)?;
    let u0 = initial_field(cfg, &ctx)?;
    let opts = RelaxOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        dt: cfg.dt,
        ..RelaxOptions::default()
    };
    let f = &cfg.nonlinearity;
    let mut bundle = relax_2d(&ctx, f, &u0, &cfg.schemes, &opts)?;
    if cfg.newton && bundle.residual_inf > cfg.tol {
        bundle = newton_polish(&ctx, f, &bundle, &cfg.schemes, &NewtonOptions::default())?;
    }
    let converged = bundle.residual_inf <= cfg.tol;
    let lost = bundle.warnings.iter().any(|w| w.contains("lost"));
    let exit = if !bundle.monotone || lost {
        ExitCode::HypothesisViolated
    } else if !converged {
        ExitCode::NumericalFailure
    } else {
        ExitCode::Pass
    };
    let mut report = String::new();
    let _ = writeln!(report, "steps={}", bundle.history.len());
    let _ = writeln!(report, "residual_inf={:e}", bundle.residual_inf);
    let _ = writeln!(report, "converged={converged}");
    let _ = writeln!(report, "monotone={}", bundle.monotone);
    let _ = writeln!(
        report,
        "min_derivative={:e}",
        bundle.min_monotone_derivative
    );
    let _ = writeln!(report, "newton_fallback={}", bundle.newton_fallback);
    for (i, w) in bundle.warnings.iter().enumerate() {
        let _ = writeln!(report, "warning.{i}={w}");
    }
    let schemes = cfg
        .schemes
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    bundle.save(
        cfg.out_dir.join("bundle"),
        &[("nonlinearity", f.to_string()), ("derivative", schemes)],
    )?;
    write_text(&cfg.out_dir.join("relax_report.txt"), &report)?;
    Ok(Outcome { exit, report })
}

/// Loads a bundle and runs the full rigidity verification; writes
/// `rigidity_report.txt` and `rigidity.csv`.
pub fn cmd_verify(cfg: &RunConfig, bundle_dir: &Path, seed: u64) -> Result<Outcome> {
    let stored = load_bundle::<f64>(bundle_dir)?;
    let grid = stored.u.grid().clone();
    if grid.dim() != 2 {
        return Err(Error::Config("verify needs a 2D bundle".into()));
    }
    let ctx = context(cfg, grid.clone())?;
    let f = &cfg.nonlinearity;
    let bundle = SolutionBundle::from_fields(&ctx, f, stored.u, stored.u1, stored.u2)?;
    let report = match verify_bundle(&ctx, f, &bundle, &cfg.verify) {
        Ok(r) => r,
        Err(e @ Error::Domain(_)) => {
            let text = format!("passed=false\nhypothesis=violated\nreason={e}\n");
            write_text(&cfg.out_dir.join("rigidity_report.txt"), &text)?;
            return Ok(Outcome {
                exit: ExitCode::HypothesisViolated,
                report: text,
            });
        }
        Err(e) => return Err(e),
    };
    // negative control: the stability residual of a random positive ψ
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = Field::new(
        grid.clone(),
        (0..grid.len()).map(|_| rng.gen_range(0.5..1.5)).collect(),
    )?;
    let u2 = bundle.u2.as_ref().expect("2D bundle");
    let window = Window::above(u2, u2.max() * cfg.verify.eps_floor);
    let control = stability_residual(&ctx, f, &bundle.u, &psi, &window)?;

    let mut text = report.to_key_values();
    let _ = writeln!(text, "seed={seed}");
    let _ = writeln!(text, "stability_residual_random_psi={control:e}");
    let csv = report.to_csv();
    write_text(&cfg.out_dir.join("rigidity_report.txt"), &text)?;
    write_text(&cfg.out_dir.join("rigidity.csv"), &csv)?;
    Ok(Outcome {
        exit: if report.passed() {
            ExitCode::Pass
        } else {
            ExitCode::NumericalFailure
        },
        report: text,
    })
}

/// Default bundle location for `verify`: the configured path, else the
/// bundle written by `relax2d` into the output directory.
pub fn bundle_path(cfg: &RunConfig) -> PathBuf {
    cfg.bundle
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("bundle"))
}
