//! Finite mixtures of normal distributions, the form every marginal
//! posterior takes once conditional normals are averaged over a `τ` grid.

use crate::error::{Error, Result};
use crate::optimize::{bisect_increasing, golden_section_min};
use crate::posterior::IntervalMethod;
use crate::special::normal_cdf;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl NormalMixture {
    /// Builds a mixture; weights are normalized to sum to one.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || means.len() != sds.len() {
            return Err(Error::Dimension {
                expected: weights.len(),
                found: means.len().min(sds.len()),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || sds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Domain(
                "mixture weights and sds must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numeric("mixture weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            weights,
            means,
            sds,
        })
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(w, (m, s))| w * (s * s + m * m))
            .sum();
        (second - mean * mean).max(0.0)
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.sds) {
            if *w == 0.0 {
                continue;
            }
            acc += w * if *s > 0.0 {
                normal_cdf((x - m) / s)
            } else if x >= *m {
                1.0
            } else {
                0.0
            };
        }
        acc.min(1.0)
    }

    /// Quantile by bisection on the CDF, bracketed by mean ± 10 sd (widened
    /// if the bracket misses the level).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        let (lo, hi) = self.bracket(q)?;
        Ok(bisect_increasing(
            |x| self.cdf(x) - q,
            lo,
            hi,
            1e-8 * (hi - lo),
        ))
    }

    fn bracket(&self, q: f64) -> Result<(f64, f64)> {
        Bracket::new(self).around(self, q)
    }

    /// Interval holding probability `level`; `Shortest` minimizes width over
    /// the lower tail mass.
    pub fn interval(&self, level: f64, method: IntervalMethod) -> Result<(f64, f64)> {
        check_level(level)?;
        let alpha = 1.0 - level;
        match method {
            IntervalMethod::Central => Ok((
                self.quantile(0.5 * alpha)?,
                self.quantile(1.0 - 0.5 * alpha)?,
            )),
            IntervalMethod::Shortest => {
                let mut search = QuantileSearch::new(self);
                let edge = 1e-9 * alpha;
                let mut width = |a: f64| -> f64 {
                    match (search.quantile(a), search.quantile(a + level)) {
                        (Ok(lo), Ok(hi)) => hi - lo,
                        _ => f64::INFINITY,
                    }
                };
                let a = golden_section_min(&mut width, edge, alpha - edge, 1e-7 * alpha);
                Ok((search.quantile(a)?, search.quantile(a + level)?))
            }
        }
    }
}

/// The default bracket `mean ± 10 sd` with its CDF values.
struct Bracket {
    spread: f64,
    lo: f64,
    hi: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

impl Bracket {
    fn new(mix: &NormalMixture) -> Self {
        let mean = mix.mean();
        let spread = mix.sd().max(1e-300);
        let (lo, hi) = (mean - 10.0 * spread, mean + 10.0 * spread);
        Self {
            spread,
            lo,
            hi,
            cdf_lo: mix.cdf(lo),
            cdf_hi: mix.cdf(hi),
        }
    }

    /// Bracket for level `q`, widened if the default misses it.
    fn around(&self, mix: &NormalMixture, q: f64) -> Result<(f64, f64)> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
        }
        let (mut lo, mut hi) = (self.lo, self.hi);
        let mut widen = 0;
        let mut below = self.cdf_lo;
        while below > q && widen < 200 {
            lo -= 10.0 * self.spread * (1 << widen.min(30)) as f64;
            widen += 1;
            below = mix.cdf(lo);
        }
        widen = 0;
        let mut above = self.cdf_hi;
        while above < q && widen < 200 {
            hi += 10.0 * self.spread * (1 << widen.min(30)) as f64;
            widen += 1;
            above = mix.cdf(hi);
        }
        Ok((lo, hi))
    }
}

/// Repeated quantiles of one mixture. Each bisection keeps the tolerance of
/// [`NormalMixture::quantile`] but starts from the tightest bracket implied
/// by earlier results.
struct QuantileSearch<'a> {
    mix: &'a NormalMixture,
    bracket: Bracket,
    known: Vec<(f64, f64, f64)>,
}

impl<'a> QuantileSearch<'a> {
    fn new(mix: &'a NormalMixture) -> Self {
        Self {
            mix,
            bracket: Bracket::new(mix),
            known: Vec::new(),
        }
    }

    fn quantile(&mut self, q: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.bracket.around(self.mix, q)?;
        let tol = 1e-8 * (hi - lo);
        let i = self.known.partition_point(|&(level, _, _)| level < q);
        if let Some(&(level, x, t)) = self.known.get(i) {
            if level == q {
                return Ok(x);
            }
            hi = hi.min(x + t);
        }
        if i > 0 {
            let (_, x, t) = self.known[i - 1];
            lo = lo.max(x - t);
        }
        let x = if lo < hi {
            bisect_increasing(|x| self.mix.cdf(x) - q, lo, hi, tol)
        } else {
            0.5 * (lo + hi)
        };
        self.known.insert(i, (q, x, tol));
        Ok(x)
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "interval level {level} outside (0, 1)"
        )))
    }
}
