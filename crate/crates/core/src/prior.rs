//! Prior densities for the heterogeneity `τ`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use libm::erf;
use statrs::function::erf::erf_inv;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeterogeneityPrior {
    /// Improper flat prior on `τ ≥ 0`.
    Uniform,
    /// Half-normal with the given scale.
    HalfNormal { scale: f64 },
    /// DuMouchel's log-logistic prior `s₀ / (s₀ + τ)²`.
    DuMouchel { s0: f64 },
}

impl HeterogeneityPrior {
    pub fn half_normal(scale: f64) -> Result<Self> {
        check_scale("half-normal scale", scale)?;
        Ok(Self::HalfNormal { scale })
    }

    pub fn dumouchel(s0: f64) -> Result<Self> {
        check_scale("DuMouchel scale", s0)?;
        Ok(Self::DuMouchel { s0 })
    }

    /// DuMouchel prior with the scale taken from the data, see
    /// [`dumouchel_default_scale`].
    pub fn dumouchel_for(data: &Dataset) -> Self {
        Self::DuMouchel {
            s0: dumouchel_default_scale(data),
        }
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, Self::Uniform)
    }

    /// Typical scale of the prior, or `None` when it has none.
    pub fn scale_hint(&self) -> Option<f64> {
        match *self {
            Self::Uniform => None,
            Self::HalfNormal { scale } => Some(scale),
            Self::DuMouchel { s0 } => Some(s0),
        }
    }

    /// Log-density at `tau` (the improper uniform prior has log-density 0).
    pub fn log_density(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!(
                "prior density evaluated at negative heterogeneity {tau}"
            )));
        }
        Ok(self.log_density_unchecked(tau))
    }

    pub(crate) fn log_density_unchecked(&self, tau: f64) -> f64 {
        match *self {
            Self::Uniform => 0.0,
            Self::HalfNormal { scale } => {
                (2.0 / (scale * (2.0 * PI).sqrt())).ln() - tau * tau / (2.0 * scale * scale)
            }
            Self::DuMouchel { s0 } => s0.ln() - 2.0 * (s0 + tau).ln(),
        }
    }

    pub fn density(&self, tau: f64) -> Result<f64> {
        self.log_density(tau).map(f64::exp)
    }

    /// Prior CDF; `None` for the improper prior.
    pub fn cdf(&self, tau: f64) -> Option<f64> {
        let tau = tau.max(0.0);
        match *self {
            Self::Uniform => None,
            Self::HalfNormal { scale } => Some(erf(tau / (scale * SQRT_2))),
            Self::DuMouchel { s0 } => Some(tau / (s0 + tau)),
        }
    }

    /// Prior quantile; `None` for the improper prior.
    pub fn quantile(&self, q: f64) -> Result<Option<f64>> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
        }
        Ok(match *self {
            Self::Uniform => None,
            Self::HalfNormal { scale } => Some(scale * SQRT_2 * erf_inv(q)),
            Self::DuMouchel { s0 } => Some(s0 * q / (1.0 - q)),
        })
    }
}

impl fmt::Display for HeterogeneityPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::HalfNormal { scale } => write!(f, "halfnormal:{scale}"),
            Self::DuMouchel { s0 } => write!(f, "dumouchel:{s0}"),
        }
    }
}

fn check_scale(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} must be positive and finite, got {v}"
        )))
    }
}

/// Harmonic-mean scale `s₀ = √(k / Σ s_i⁻²)` used for the DuMouchel prior.
pub fn dumouchel_default_scale(data: &Dataset) -> f64 {
    let precision: f64 = data.se().iter().map(|s| 1.0 / (s * s)).sum();
    (data.k() as f64 / precision).sqrt()
}

/// A prior as written on the command line: `uniform`, `halfnormal:<scale>`,
/// `dumouchel` (data-derived scale) or `dumouchel:<s0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Fixed(HeterogeneityPrior),
    DuMouchelDefault,
}

impl PriorSpec {
    pub fn resolve(&self, data: &Dataset) -> HeterogeneityPrior {
        match *self {
            Self::Fixed(p) => p,
            Self::DuMouchelDefault => HeterogeneityPrior::dumouchel_for(data),
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let number = |a: &str| -> Result<f64> {
            a.parse::<f64>()
                .map_err(|_| Error::Domain(format!("invalid prior parameter `{a}`")))
        };
        match (name.to_ascii_lowercase().as_str(), arg) {
            ("uniform", None) => Ok(Self::Fixed(HeterogeneityPrior::Uniform)),
            ("halfnormal", Some(a)) => {
                Ok(Self::Fixed(HeterogeneityPrior::half_normal(number(a)?)?))
            }
            ("dumouchel", None) => Ok(Self::DuMouchelDefault),
            ("dumouchel", Some(a)) => Ok(Self::Fixed(HeterogeneityPrior::dumouchel(number(a)?)?)),
            _ => Err(Error::Domain(format!(
                "unrecognized prior `{s}` (expected uniform, halfnormal:<scale>, dumouchel or dumouchel:<s0>)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_flat() {
        assert_eq!(HeterogeneityPrior::Uniform.log_density(17.3).unwrap(), 0.0);
        assert_eq!(HeterogeneityPrior::Uniform.log_density(0.0).unwrap(), 0.0);
        assert!(!HeterogeneityPrior::Uniform.is_proper());
        assert!(HeterogeneityPrior::Uniform.log_density(-0.1).is_err());
    }

    #[test]
    fn half_normal_quantiles() {
        let p = HeterogeneityPrior::half_normal(0.5).unwrap();
        let median = p.quantile(0.5).unwrap().unwrap();
        let q95 = p.quantile(0.95).unwrap().unwrap();
        assert!((median - 0.337).abs() < 5e-4, "{median}");
        assert!((q95 - 0.980).abs() < 5e-4, "{q95}");
        assert!((p.cdf(median).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dumouchel_closed_form() {
        let s0 = 0.7;
        let p = HeterogeneityPrior::dumouchel(s0).unwrap();
        assert!((p.log_density(0.0).unwrap() - (1.0 / s0).ln()).abs() < 1e-14);
        assert!((p.log_density(s0).unwrap() - (1.0 / (4.0 * s0)).ln()).abs() < 1e-14);
        // ∫₀^T s₀/(s₀+τ)² dτ = T/(s₀+T), checked by midpoint rule on a
        // substitution u = τ/(s₀+τ) ∈ [0, 1).
        let n = 200_000;
        let mut mass = 0.0;
        for j in 0..n {
            let u = (j as f64 + 0.5) / n as f64;
            let tau = s0 * u / (1.0 - u);
            let jac = s0 / ((1.0 - u) * (1.0 - u));
            mass += p.density(tau).unwrap() * jac / n as f64;
        }
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
    }

    #[test]
    fn default_scale() {
        let labels: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let d = Dataset::new(labels, vec![0.0; 4], vec![2.0; 4]).unwrap();
        assert!((dumouchel_default_scale(&d) - 2.0).abs() < 1e-15);
        let d = Dataset::new(vec!["a".into(), "b".into()], vec![0.0; 2], vec![1.0, 2.0]).unwrap();
        assert!((dumouchel_default_scale(&d) - 1.6_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parses_prior_grammar() {
        assert_eq!(
            "uniform".parse::<PriorSpec>().unwrap(),
            PriorSpec::Fixed(HeterogeneityPrior::Uniform)
        );
        assert_eq!(
            "halfnormal:0.5".parse::<PriorSpec>().unwrap(),
            PriorSpec::Fixed(HeterogeneityPrior::HalfNormal { scale: 0.5 })
        );
        assert_eq!(
            "dumouchel".parse::<PriorSpec>().unwrap(),
            PriorSpec::DuMouchelDefault
        );
        assert_eq!(
            "dumouchel:0.1".parse::<PriorSpec>().unwrap(),
            PriorSpec::Fixed(HeterogeneityPrior::DuMouchel { s0: 0.1 })
        );
        for bad in [
            "halfnormal",
            "halfnormal:-1",
            "cauchy:1",
            "uniform:2",
            "dumouchel:x",
        ] {
            assert!(bad.parse::<PriorSpec>().is_err(), "{bad}");
        }
    }
}
