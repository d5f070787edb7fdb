//! Flat `key = value` run configuration with environment overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Axis, Boundary, DerivativeScheme, Grid};
use crate::kernel::{Family, KernelSpec};
use crate::nonlinearity::Nonlinearity;
use crate::rigidity::{VerifyOptions, KAPPA_MAX};

/// Prefix of environment overrides: `kernel.outer_radius` is overridden by
/// `NLRG_KERNEL_OUTER_RADIUS`.
pub const ENV_PREFIX: &str = "NLRG_";

pub const KEYS: &[&str] = &[
    "kernel.family",
    "kernel.inner_radius",
    "kernel.outer_radius",
    "kernel.lower_density",
    "kernel.upper_density",
    "kernel.stencil_file",
    "grid.n",
    "grid.h",
    "grid.origin",
    "grid.boundary",
    "nonlinearity",
    "solver.tol",
    "solver.max_iter",
    "solver.dt",
    "solver.lambda",
    "solver.newton",
    "derivative.x1",
    "derivative.x2",
    "relax.init",
    "relax.tilt",
    "relax.eps",
    "relax.sigma",
    "relax.file",
    "rigidity.R_list",
    "rigidity.eps_floor",
    "rigidity.harnack_radius",
    "rigidity.planarity_threshold",
    "rigidity.kappa_max",
    "verify.bundle",
    "output.dir",
];

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
}

/// Raw key/value pairs after file parsing and overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", no + 1)));
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}`",
                    no + 1
                )));
            }
        }
        Ok(RawConfig { values })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RawConfig::parse(&text)
    }

    /// Applies overrides from `(name, value)` pairs such as `std::env::vars()`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) {
        let vars: BTreeMap<String, String> = vars.into_iter().collect();
        for key in KEYS {
            if let Some(v) = vars.get(&env_name(key)) {
                self.values.insert(key.to_string(), v.trim().to_string());
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn parse_or<V: std::str::FromStr>(&self, key: &str, default: V) -> Result<V> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`"))),
        }
    }

    fn required<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let s = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
        s.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`")))
    }

    fn list<V: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        let Some(s) = self.get(key) else {
            return Ok(None);
        };
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse `{p}`")))
            })
            .collect::<Result<Vec<V>>>()
            .map(Some)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub h: Vec<f64>,
    /// First sample per axis; `None` centres the axis on 0.
    pub origin: Option<Vec<f64>>,
    pub boundary: Vec<Boundary>,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn build(&self) -> Result<Grid<f64>> {
        let axes = (0..self.dim())
            .map(|i| match &self.origin {
                Some(o) => Axis::new(self.n[i], self.h[i], o[i], self.boundary[i]),
                None => Axis::centered(self.n[i], self.h[i], self.boundary[i]),
            })
            .collect();
        Grid::new(axes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    /// Planar front along `(a, 1)/√(a² + 1)`.
    Tilt(f64),
    /// `P(x₂(1 + ε·exp(−x₁²/σ²)))`.
    Perturbed { eps: f64, sigma: f64 },
    /// Field or bundle directory on disk.
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub stencil_file: Option<PathBuf>,
    pub grid: GridSpec,
    pub nonlinearity: Nonlinearity,
    pub tol: f64,
    pub max_iter: usize,
    pub dt: Option<f64>,
    pub lambda: f64,
    pub newton: bool,
    pub schemes: Vec<DerivativeScheme>,
    pub init: InitSpec,
    pub verify: VerifyOptions,
    pub bundle: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let family: Family = raw.required("kernel.family")?;
        let r0: f64 = raw.required("kernel.inner_radius")?;
        let big_r0: f64 = raw.parse_or("kernel.outer_radius", r0)?;

        let n: Vec<usize> = raw
            .list("grid.n")?
            .ok_or_else(|| Error::Config("missing key `grid.n`".into()))?;
        let dim = n.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!(
                "grid.n: need 1 or 2 axes, got {dim}"
            )));
        }
        let broadcast = |key: &str, v: Option<Vec<f64>>| -> Result<Option<Vec<f64>>> {
            match v {
                Some(v) if v.len() == 1 => Ok(Some(vec![v[0]; dim])),
                Some(v) if v.len() == dim => Ok(Some(v)),
                Some(v) => Err(Error::Config(format!(
                    "{key}: {} values for {dim} axes",
                    v.len()
                ))),
                None => Ok(None),
            }
        };
        let h = broadcast("grid.h", raw.list("grid.h")?)?
            .ok_or_else(|| Error::Config("missing key `grid.h`".into()))?;
        let origin = broadcast("grid.origin", raw.list("grid.origin")?)?;
        let boundary: Vec<Boundary> = match raw.list::<Boundary>("grid.boundary")? {
            None => vec![Boundary::Clamp; dim],
            Some(b) if b.len() == 1 => vec![b[0]; dim],
            Some(b) if b.len() == dim => b,
            Some(b) => {
                return Err(Error::Config(format!(
                    "grid.boundary: {} values for {dim} axes",
                    b.len()
                )))
            }
        };
        let mut kernel = KernelSpec::with_natural_bounds(family, r0, big_r0, dim)?;
        if let Some(m0) = raw.get("kernel.lower_density") {
            kernel.m0 = m0
                .parse()
                .map_err(|_| Error::Config(format!("kernel.lower_density: cannot parse `{m0}`")))?;
        }
        if let Some(m) = raw.get("kernel.upper_density") {
            kernel.big_m0 = m
                .parse()
                .map_err(|_| Error::Config(format!("kernel.upper_density: cannot parse `{m}`")))?;
        }
        kernel.check()?;

        let nonlinearity: Nonlinearity = raw.parse_or("nonlinearity", Nonlinearity::cubic())?;
        let schemes = (0..dim)
            .map(|a| {
                let key = if a == 0 {
                    "derivative.x1"
                } else {
                    "derivative.x2"
                };
                raw.parse_or(key, DerivativeScheme::default_for(boundary[a]))
            })
            .collect::<Result<Vec<_>>>()?;

        let init = match raw.get("relax.init").unwrap_or("perturbed") {
            "tilt" => InitSpec::Tilt(raw.parse_or("relax.tilt", 0.0)?),
            "perturbed" => InitSpec::Perturbed {
                eps: raw.parse_or("relax.eps", 0.3)?,
                sigma: raw.parse_or("relax.sigma", 4.0)?,
            },
            "file" => InitSpec::File(raw.required::<String>("relax.file")?.into()),
            other => return Err(Error::Config(format!("relax.init: unknown `{other}`"))),
        };

        let defaults = VerifyOptions::default();
        let verify = VerifyOptions {
            r_list: raw.list("rigidity.R_list")?.unwrap_or(defaults.r_list),
            eps_floor: raw.parse_or("rigidity.eps_floor", defaults.eps_floor)?,
            harnack_radius: match raw.get("rigidity.harnack_radius") {
                None => None,
                Some(_) => Some(raw.required("rigidity.harnack_radius")?),
            },
            planarity_threshold: raw
                .parse_or("rigidity.planarity_threshold", defaults.planarity_threshold)?,
            kappa_max: raw.parse_or("rigidity.kappa_max", KAPPA_MAX)?,
        };

        let cfg = RunConfig {
            kernel,
            stencil_file: raw.get("kernel.stencil_file").map(PathBuf::from),
            grid: GridSpec {
                n,
                h,
                origin,
                boundary,
            },
            nonlinearity,
            tol: raw.parse_or("solver.tol", 1e-8)?,
            max_iter: raw.parse_or("solver.max_iter", 200_000)?,
            dt: match raw.get("solver.dt") {
                None => None,
                Some(_) => Some(raw.required("solver.dt")?),
            },
            lambda: raw.parse_or("solver.lambda", 0.3)?,
            newton: raw.parse_or("solver.newton", true)?,
            schemes,
            init,
            verify,
            bundle: raw.get("verify.bundle").map(PathBuf::from),
            out_dir: raw.get("output.dir").unwrap_or("out").into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        for &h in &self.grid.h {
            positive("grid.h", h)?;
        }
        if self.grid.n.iter().any(|&n| n < 2) {
            return Err(Error::Config(
                "grid.n: need at least 2 points per axis".into(),
            ));
        }
        positive("solver.tol", self.tol)?;
        positive("solver.lambda", self.lambda)?;
        if let Some(dt) = self.dt {
            positive("solver.dt", dt)?;
        }
        if let InitSpec::Perturbed { sigma, .. } = self.init {
            positive("relax.sigma", sigma)?;
        }
        positive("rigidity.eps_floor", self.verify.eps_floor)?;
        positive(
            "rigidity.planarity_threshold",
            self.verify.planarity_threshold,
        )?;
        positive("rigidity.kappa_max", self.verify.kappa_max)?;
        if let Some(r) = self.verify.harnack_radius {
            positive("rigidity.harnack_radius", r)?;
        }
        if self.verify.r_list.is_empty() {
            return Err(Error::Config("rigidity.R_list is empty".into()));
        }
        for &r in &self.verify.r_list {
            positive("rigidity.R_list", r)?;
        }
        if self.verify.r_list.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "rigidity.R_list must be sorted ascending".into(),
            ));
        }
        Ok(())
    }

    /// File, then environment, then the explicit `--out` flag.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        out: Option<&Path>,
    ) -> Result<Self> {
        let mut raw = match path {
            Some(p) => RawConfig::read(p)?,
            None => RawConfig::default(),
        };
        raw.apply_env(env);
        if let Some(o) = out {
            raw.set("output.dir", o.to_string_lossy().into_owned());
        }
        RunConfig::from_raw(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "
        # 1D front
        kernel.family = ball_indicator
        kernel.inner_radius = 1.0
        grid.n = 801
        grid.h = 0.05
        nonlinearity = cubic
    ";

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_raw(&RawConfig::parse(BASE).unwrap()).unwrap();
        assert_eq!(cfg.grid.n, vec![801]);
        assert_eq!(cfg.grid.boundary, vec![Boundary::Clamp]);
        assert_eq!(cfg.kernel.big_r0, 1.0);
        assert_eq!(cfg.schemes, vec![DerivativeScheme::Centered2]);
        assert_eq!(cfg.verify.r_list, vec![8.0, 16.0, 32.0]);
        assert_eq!(cfg.tol, 1e-8);
        let g = cfg.grid.build().unwrap();
        assert_eq!(g.axis(0).coord(400), 0.0);
    }

    #[test]
    fn env_overrides_file_values() {
        let mut raw = RawConfig::parse(BASE).unwrap();
        raw.apply_env(vec![
            ("NLRG_GRID_H".to_string(), "0.025".to_string()),
            ("NLRG_NONLINEARITY".to_string(), "cubic:0.5".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ]);
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.grid.h, vec![0.025]);
        assert_eq!(cfg.nonlinearity.alpha(), 0.5);
        assert_eq!(env_name("rigidity.R_list"), "NLRG_RIGIDITY_R_LIST");
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let cases = [
            "kernel.family = ball_indicator\nkernel.inner_radius = 2\nkernel.outer_radius = 1\ngrid.n = 11\ngrid.h = 0.1",
            "kernel.family = nope\nkernel.inner_radius = 1\ngrid.n = 11\ngrid.h = 0.1",
            "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 11\ngrid.h = 0.1\nrigidity.R_list = 16,8",
            "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 11,11\ngrid.h = 0.1,0.1,0.1",
            "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 11\ngrid.h = -0.1",
            "kernel.family = ball_indicator\nkernel.inner_radius = 1\ngrid.n = 11\ngrid.h = 0.1\nsolver.tol = 0",
            "kernel.family = ball_indicator\nbogus.key = 1",
            "kernel.family = ball_indicator\nkernel.family = ball_indicator",
            "just text",
        ];
        for c in cases {
            let r = RawConfig::parse(c).and_then(|raw| RunConfig::from_raw(&raw));
            assert!(
                matches!(r, Err(Error::Config(_)) | Err(Error::KernelSpec(_))),
                "{c:?} -> {r:?}"
            );
        }
    }

    #[test]
    fn two_axis_lists_broadcast() {
        let text = "kernel.family = smooth_bump\nkernel.inner_radius = 0.5\nkernel.outer_radius = 1\n\
                    grid.n = 64,65\ngrid.h = 0.25\ngrid.boundary = periodic,clamp\nrelax.init = tilt\nrelax.tilt = 0.5";
        let cfg = RunConfig::from_raw(&RawConfig::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.grid.h, vec![0.25, 0.25]);
        assert_eq!(cfg.grid.boundary, vec![Boundary::Periodic, Boundary::Clamp]);
        assert_eq!(
            cfg.schemes,
            vec![DerivativeScheme::Spectral, DerivativeScheme::Centered2]
        );
        assert_eq!(cfg.init, InitSpec::Tilt(0.5));
    }
}
