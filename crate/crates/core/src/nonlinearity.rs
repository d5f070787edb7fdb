use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reaction term `f` together with its derivative.
///
/// Only the balanced cubic family `f(u) = alpha * (u - u^3)` is provided; it
/// is bistable with zeros at `-1, 0, 1` for every `alpha > 0`. `alpha = 1` is
/// the standard Allen–Cahn term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nonlinearity {
    alpha: f64,
}

impl Nonlinearity {
    pub fn cubic() -> Self {
        Nonlinearity { alpha: 1.0 }
    }

    pub fn scaled_cubic(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Config(format!(
                "cubic scale must be positive and finite, got {alpha}"
            )));
        }
        Ok(Nonlinearity { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `cubic` or `cubic:<alpha>`.
    pub fn name(&self) -> String {
        if self.alpha == 1.0 {
            "cubic".to_string()
        } else {
            format!("cubic:{}", self.alpha)
        }
    }

    #[inline]
    pub fn eval<T: Real>(&self, u: T) -> T {
        T::lit(self.alpha) * (u - u * u * u)
    }

    #[inline]
    pub fn deriv<T: Real>(&self, u: T) -> T {
        T::lit(self.alpha) * (T::one() - T::lit(3.0) * u * u)
    }

    /// `max |f'|` over `[-1, 1]`, attained at `u = ±1`.
    pub fn max_abs_deriv(&self) -> f64 {
        2.0 * self.alpha
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "cubic" => Ok(Nonlinearity::cubic()),
            Some(("cubic", a)) => {
                let alpha: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad cubic scale `{a}`")))?;
                Nonlinearity::scaled_cubic(alpha)
            }
            _ => Err(Error::Config(format!("unknown nonlinearity `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_and_names() {
        let f = Nonlinearity::cubic();
        for z in [-1.0, 0.0, 1.0] {
            assert_eq!(f.eval(z), 0.0);
        }
        assert_eq!(f.deriv(0.0f64), 1.0);
        assert_eq!(f.deriv(1.0f64), -2.0);
        assert_eq!("cubic".parse::<Nonlinearity>().unwrap(), f);
        let g: Nonlinearity = "cubic:0.5".parse().unwrap();
        assert_eq!(g.name(), "cubic:0.5");
        assert_eq!(g.max_abs_deriv(), 1.0);
        assert!("cubic:-1".parse::<Nonlinearity>().is_err());
        assert!("quintic".parse::<Nonlinearity>().is_err());
    }

    proptest! {
        #[test]
        fn derivative_matches_centered_difference(u in -1.5f64..1.5, alpha in 0.1f64..3.0) {
            let f = Nonlinearity::scaled_cubic(alpha).unwrap();
            let h = 1e-5;
            let fd = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
            let d = f.deriv(u);
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0));
        }
    }
}
