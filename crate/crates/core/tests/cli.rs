//! The `nlrg` binary: exit codes, overrides and artifact round trips.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlrg::solvers::{load_bundle, SolutionBundle};
use nlrg::{
    build_kernel, read_field, Axis, Boundary, DerivativeScheme, DiscreteKernel, Family, Field,
    Grid, KernelSpec, Method, Nonlinearity, OperatorContext,
};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn nlrg(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nlrg"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(o: &Output) -> BTreeMap<String, String> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

const KERNEL_1D: &str =
    "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 401\ngrid.h = 0.1\n";

#[test]
fn kernel_check_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();

    let ok = nlrg(
        &[
            "kernel-check",
            "--config",
            &write(d, "ok.conf", KERNEL_1D),
            "--out",
            out,
        ],
        &[],
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    // the exported stencil reads back as the same kernel
    let spec = KernelSpec::with_natural_bounds(Family::BallIndicator, 1.0, 1.0, 1).unwrap();
    let built = build_kernel::<f64>(&spec, &[0.1]).unwrap();
    let read =
        DiscreteKernel::<f64>::read_csv(Path::new(out).join("kernel.csv"), 1, &[0.1]).unwrap();
    assert_eq!(read.offsets(), built.offsets());
    assert_eq!(read.weights(), built.weights());

    let stencil = write(
        d,
        "lopsided.csv",
        "offset_x,offset_y,weight\n-1,0,3\n0,0,3\n1,0,4\n",
    );
    let conf = format!(
        "kernel.family = ball_indicator\nkernel.inner_radius = 1\nkernel.stencil_file = {stencil}\n\
         grid.n = 41\ngrid.h = 0.1\n"
    );
    let lopsided = nlrg(
        &[
            "kernel-check",
            "--config",
            &write(d, "lop.conf", &conf),
            "--out",
            out,
        ],
        &[],
    );
    assert_eq!(
        code(&lopsided),
        1,
        "{}",
        String::from_utf8_lossy(&lopsided.stderr)
    );
    assert_eq!(report(&lopsided)["passed"], "false");

    let bad = "kernel.family = annular_mix\nkernel.inner_radius = 2\nkernel.outer_radius = 1\ngrid.n = 11\ngrid.h = 0.1\n";
    let bad = nlrg(
        &[
            "kernel-check",
            "--config",
            &write(d, "bad.conf", bad),
            "--out",
            out,
        ],
        &[],
    );
    assert_eq!(code(&bad), 2);

    let unknown = nlrg(
        &[
            "kernel-check",
            "--config",
            &write(d, "u.conf", &format!("{KERNEL_1D}colour = red\n")),
            "--out",
            out,
        ],
        &[],
    );
    assert_eq!(code(&unknown), 2);
    let missing = nlrg(
        &[
            "kernel-check",
            "--config",
            d.join("nope.conf").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&missing), 2);
}

#[test]
fn solve_profile_and_env_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let conf = configs().join("profile.conf");
    let conf = conf.to_str().unwrap();
    let o = nlrg(
        &[
            "solve-profile",
            "--config",
            conf,
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r["u_mid"].parse::<f64>().unwrap().abs() <= 1e-8);
    assert!(r["residual_inf"].parse::<f64>().unwrap() <= 1e-8);
    assert_eq!(r["monotone"], "true");
    let u: Field<f64> = read_field(out.join("profile").join("u.nlrg")).unwrap();
    assert_eq!(u.grid().shape(), [801, 1]);
    let stored = load_bundle::<f64>(out.join("profile")).unwrap();
    assert_eq!(stored.u, u);
    let hist = fs::read_to_string(out.join("profile").join("residual_history.csv")).unwrap();
    assert!(hist.starts_with("iter,residual_inf\n0,"));

    // one iteration cannot converge; an override reaches the same key
    let o = nlrg(
        &[
            "solve-profile",
            "--config",
            conf,
            "--out",
            out.to_str().unwrap(),
        ],
        &[("NLRG_SOLVER_MAX_ITER", "1")],
    );
    assert_eq!(code(&o), 1);
    assert_eq!(report(&o)["converged"], "false");

    let o = nlrg(
        &[
            "solve-profile",
            "--config",
            conf,
            "--out",
            out.to_str().unwrap(),
        ],
        &[("NLRG_GRID_N", "oops")],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn relax_then_verify_tilted_front() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let conf = configs().join("tilt.conf");
    let conf = conf.to_str().unwrap();
    let o = nlrg(&["relax2d", "--config", conf, "--out", out], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = nlrg(&["verify", "--config", conf, "--out", out], &[]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    let r = report(&v);
    assert!((r["a"].parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
    // every written artifact reads back
    let csv = fs::read_to_string(Path::new(out).join("rigidity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(load_bundle::<f64>(Path::new(out).join("bundle"))
        .unwrap()
        .u2
        .is_some());

    let o = nlrg(
        &["relax2d", "--config", conf, "--out", out],
        &[("NLRG_SOLVER_DT", "0.8")],
    );
    assert_eq!(code(&o), 2, "dt above 2/(2 + max|f'|) = 2/3");
}

fn box_ctx(n: usize, h: f64) -> OperatorContext<f64> {
    let grid = Grid::plane(
        Axis::centered(n, h, Boundary::Clamp),
        Axis::centered(n, h, Boundary::Clamp),
    )
    .unwrap();
    let spec = KernelSpec::with_natural_bounds(Family::BallIndicator, 1.0, 1.0, 2).unwrap();
    OperatorContext::new(build_kernel(&spec, &[h, h]).unwrap(), grid, Method::Direct).unwrap()
}

#[test]
fn verify_flags_a_two_dimensional_non_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let ctx = box_ctx(81, 0.25);
    let f = Nonlinearity::scaled_cubic(0.5).unwrap();
    // monotone in x₂, but its level sets are curved
    let u = Field::from_fn(ctx.grid().clone(), |p| (p[1] + 0.15 * p[0] * p[0]).tanh()).unwrap();
    let b = SolutionBundle::evaluate(&ctx, &f, u, &[DerivativeScheme::Centered2; 2]).unwrap();
    assert!(b.monotone);
    b.save(d.join("curved"), &[]).unwrap();
    let conf = write(
        d,
        "v.conf",
        "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 81, 81\ngrid.h = 0.25\n\
         nonlinearity = cubic:0.5\nrigidity.R_list = 2, 4\n",
    );
    let o = nlrg(
        &[
            "verify",
            d.join("curved").to_str().unwrap(),
            "--config",
            &conf,
            "--out",
            d.join("o").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r["planarity_error_inf"].parse::<f64>().unwrap() > 0.1);
    assert_eq!(r["passed"], "false");
}

#[test]
fn verify_refuses_non_monotone_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let ctx = box_ctx(41, 0.25);
    let f = Nonlinearity::cubic();
    let u = Field::from_fn(ctx.grid().clone(), |p| (-p[1]).tanh()).unwrap();
    let b = SolutionBundle::evaluate(&ctx, &f, u, &[DerivativeScheme::Centered2; 2]).unwrap();
    b.save(d.join("b"), &[]).unwrap();
    let conf = write(
        d,
        "v.conf",
        &format!(
            "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 41, 41\ngrid.h = 0.25\n\
             rigidity.R_list = 1, 2\nverify.bundle = {}\n",
            d.join("b").display()
        ),
    );
    let o = nlrg(
        &[
            "verify",
            "--config",
            &conf,
            "--out",
            d.join("o").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 3);
    assert_eq!(report(&o)["hypothesis"], "violated");
}

#[test]
fn thread_flag_and_seed_leave_reports_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let ctx = box_ctx(81, 0.25);
    let f = Nonlinearity::scaled_cubic(0.5).unwrap();
    let u = Field::from_fn(ctx.grid().clone(), |p| (0.9 * p[1] + 0.2 * p[0]).tanh()).unwrap();
    let b = SolutionBundle::evaluate(&ctx, &f, u, &[DerivativeScheme::Centered2; 2]).unwrap();
    b.save(d.join("b"), &[]).unwrap();
    let conf = write(
        d,
        "v.conf",
        "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 81, 81\ngrid.h = 0.25\n\
         nonlinearity = cubic:0.5\nrigidity.R_list = 2, 4\n",
    );
    let run = |threads: &str, seed: &str, out: &str| {
        let o = nlrg(
            &[
                "verify",
                d.join("b").to_str().unwrap(),
                "--config",
                &conf,
                "--out",
                d.join(out).to_str().unwrap(),
                "--threads",
                threads,
                "--seed",
                seed,
            ],
            &[],
        );
        (
            o.stdout,
            fs::read(d.join(out).join("rigidity.csv")).unwrap(),
        )
    };
    let a = run("1", "7", "a");
    let b = run("4", "7", "b");
    assert_eq!(a, b);
    let c = run("1", "8", "c");
    // the seed only moves the random-psi control line
    assert_eq!(a.1, c.1);
    assert_ne!(a.0, c.0);
}
