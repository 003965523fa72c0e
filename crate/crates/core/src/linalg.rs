//! Dense Cholesky for the small symmetric systems that show up in
//! weighted least squares (p rarely exceeds a handful of coefficients).

/// Relative pivot threshold below which a matrix is treated as singular.
pub(crate) const PIVOT_TOLERANCE: f64 = 1e-10;

/// Lower-triangular factor `L` with `A = L Lᵀ`, stored row-major.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major `n × n` matrix `a`. On failure returns the
    /// index of the first column whose pivot fell below
    /// `PIVOT_TOLERANCE × max diag(a)`.
    pub(crate) fn factor(a: &[f64], n: usize) -> Result<Self, usize> {
        debug_assert_eq!(a.len(), n * n);
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0_f64, f64::max);
        let threshold = PIVOT_TOLERANCE * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = a[j * n + j];
            for k in 0..j {
                pivot -= l[j * n + k] * l[j * n + k];
            }
            if !(pivot > threshold) {
                return Err(j);
            }
            let d = pivot.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / d;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut v = z[i];
            for k in 0..i {
                v -= self.l[i * n + k] * z[k];
            }
            z[i] = v / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = z[i];
            for k in (i + 1)..n {
                v -= self.l[k * n + i] * z[k];
            }
            z[i] = v / self.l[i * n + i];
        }
        z
    }

    /// Returns `A⁻¹`, row-major and exactly symmetric.
    pub(crate) fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = avg;
                inv[j * n + i] = avg;
            }
        }
        inv
    }

    pub(crate) fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| self.l[i * self.n + i].ln())
            .sum::<f64>()
            * 2.0
    }
}

/// Quadratic form `xᵀ M x` for a row-major symmetric `M`.
pub(crate) fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[i * n + j] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
