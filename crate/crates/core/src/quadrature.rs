//! Adaptive Simpson quadrature that keeps its accepted panels, so the
//! panels can double as a quadrature grid for later marginalization.

use rayon::prelude::*;

const MAX_DEPTH: u32 = 48;

/// A Simpson panel `[a, b]` with integrand values at both ends and the midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Panel {
    pub a: f64,
    pub b: f64,
    pub fa: f64,
    pub fm: f64,
    pub fb: f64,
}

impl Panel {
    fn new(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> Self {
        Self { a, b, fa, fm, fb }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn integral(&self) -> f64 {
        (self.b - self.a) / 6.0 * (self.fa + 4.0 * self.fm + self.fb)
    }

    /// Multiplies the stored integrand values by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.a,
            self.b,
            self.fa * factor,
            self.fm * factor,
            self.fb * factor,
        )
    }
}

fn refine<F: Fn(f64) -> f64>(f: &F, whole: Panel, eps: f64, depth: u32, out: &mut Vec<Panel>) {
    let m = whole.mid();
    let lm = 0.5 * (whole.a + m);
    let rm = 0.5 * (m + whole.b);
    let left = Panel::new(whole.a, m, whole.fa, f(lm), whole.fm);
    let right = Panel::new(m, whole.b, whole.fm, f(rm), whole.fb);
    let delta = left.integral() + right.integral() - whole.integral();
    if depth >= MAX_DEPTH
        || delta.abs() <= 15.0 * eps
        || right.b - left.a <= 4.0 * f64::EPSILON * right.b.abs()
    {
        out.push(left);
        out.push(right);
    } else {
        refine(f, left, 0.5 * eps, depth + 1, out);
        refine(f, right, 0.5 * eps, depth + 1, out);
    }
}

/// Integrates `f` over the partition given by `breakpoints` (sorted,
/// at least two points). Each piece gets `abs_tol / pieces` of the error
/// budget and is bisected until the Simpson error estimate falls under it.
/// Returns the accepted panels in order.
pub(crate) fn adaptive_simpson<F>(f: &F, breakpoints: &[f64], abs_tol: f64) -> Vec<Panel>
where
    F: Fn(f64) -> f64 + Sync,
{
    let pieces = breakpoints.len() - 1;
    let eps = abs_tol / pieces as f64;
    let chunks: Vec<Vec<Panel>> = breakpoints
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let whole = Panel::new(a, b, f(a), f(0.5 * (a + b)), f(b));
            let mut out = Vec::new();
            refine(f, whole, eps, 0, &mut out);
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

pub(crate) fn total(panels: &[Panel]) -> f64 {
    panels.iter().map(Panel::integral).sum()
}

/// Composite-Simpson nodes and weights of a contiguous panel list; shared
/// panel endpoints are merged into a single node.
pub(crate) fn nodes_and_weights(panels: &[Panel]) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(2 * panels.len() + 1);
    let mut weights = Vec::with_capacity(2 * panels.len() + 1);
    for (i, p) in panels.iter().enumerate() {
        let h = (p.b - p.a) / 6.0;
        if i == 0 {
            nodes.push(p.a);
            weights.push(h * p.fa);
        } else {
            *weights.last_mut().unwrap() += h * p.fa;
        }
        nodes.push(p.mid());
        weights.push(4.0 * h * p.fm);
        nodes.push(p.b);
        weights.push(h * p.fb);
    }
    (nodes, weights)
}
