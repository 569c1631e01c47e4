//! Divided differences of the built-in scalar functions.

use serde::{Deserialize, Serialize};

use crate::error::{IgoError, Result};

/// Built-in analytic scalar functions that can be lifted to chain matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarFunction {
    Exp,
    /// `μ(x) = 1 / (e^{-x} - 1)`, so that `μ(M) = (e^{-M} - I)^{-1}`.
    Mu,
    /// `ψ(x) = x / (1 - e^{x})`, concave on `(-∞, 0)`.
    Psi,
    Identity,
}

impl ScalarFunction {
    pub fn name(self) -> &'static str {
        match self {
            ScalarFunction::Exp => "exp",
            ScalarFunction::Mu => "mu",
            ScalarFunction::Psi => "psi",
            ScalarFunction::Identity => "identity",
        }
    }

    pub fn eval(self, x: f64) -> Result<f64> {
        match self {
            ScalarFunction::Exp => Ok(x.exp()),
            ScalarFunction::Identity => Ok(x),
            ScalarFunction::Mu | ScalarFunction::Psi if x == 0.0 => Err(IgoError::Domain {
                function: self.name(),
                x,
            }),
            ScalarFunction::Mu => Ok(1.0 / (-x).exp_m1()),
            ScalarFunction::Psi => Ok(-x / x.exp_m1()),
        }
    }

    /// First-order divided difference `f[x, y]`, `x ≠ y`, in a form that
    /// avoids subtracting nearly equal function values where possible.
    fn first_order(self, x: f64, y: f64) -> Result<f64> {
        let h = x - y;
        Ok(match self {
            ScalarFunction::Identity => 1.0,
            ScalarFunction::Exp => y.exp() * exp_m1_over(h),
            // μ(x) - μ(y) = e^{-x}·expm1(x-y) / (expm1(-x)·expm1(-y))
            ScalarFunction::Mu => (-x).exp() * exp_m1_over(h) / ((-x).exp_m1() * (-y).exp_m1()),
            ScalarFunction::Psi => (self.eval(x)? - self.eval(y)?) / h,
        })
    }
}

/// `expm1(h) / h`, continuous at zero.
fn exp_m1_over(h: f64) -> f64 {
    if h == 0.0 {
        1.0
    } else {
        h.exp_m1() / h
    }
}

/// Spread below which divided differences of `exp` are summed as a series.
const EXP_SERIES_SPREAD: f64 = 1.0;
const EXP_SERIES_TERMS: usize = 40;

/// `f[x₀, …, x_k]` for pairwise distinct points.
///
/// Order zero is `f(x₀)`. Higher orders follow the recursive difference
/// quotient over the points sorted in increasing order (the value is symmetric
/// in its arguments). For `exp` with clustered points the recursion is replaced
/// by a cancellation-free series.
pub fn divided_difference(f: ScalarFunction, points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(IgoError::EmptyPoints);
    }
    if let Some(&x) = points.iter().find(|x| !x.is_finite()) {
        return Err(IgoError::InvalidArgument(format!("non-finite point {x}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(f64::total_cmp);
    if let Some(w) = pts.windows(2).find(|w| w[0] == w[1]) {
        return Err(IgoError::DuplicatePoints(w[0]));
    }
    for &x in &pts {
        f.eval(x)?;
    }
    let order = pts.len() - 1;
    match f {
        ScalarFunction::Identity => {
            return Ok(match order {
                0 => pts[0],
                1 => 1.0,
                _ => 0.0,
            })
        }
        ScalarFunction::Exp if order >= 1 && pts[order] - pts[0] <= EXP_SERIES_SPREAD => {
            return Ok(exp_series(&pts));
        }
        _ => {}
    }
    recursive_table(f, &pts)
}

fn recursive_table(f: ScalarFunction, pts: &[f64]) -> Result<f64> {
    let n = pts.len();
    if n == 1 {
        return f.eval(pts[0]);
    }
    // level[i] holds f[x_i, …, x_{i+k}] for the current order k.
    let mut level: Vec<f64> = (0..n - 1)
        .map(|i| f.first_order(pts[i + 1], pts[i]))
        .collect::<Result<_>>()?;
    for k in 2..n {
        level = (0..n - k)
            .map(|i| (level[i + 1] - level[i]) / (pts[i + k] - pts[i]))
            .collect();
    }
    Ok(level[0])
}

/// `exp[x₀, …, x_k] = e^c · Σ_m h_m(x - c) / (k + m)!`, with `h_m` the complete
/// homogeneous symmetric polynomials of the shifted points and `c` the
/// midpoint. Valid for coincident points too.
fn exp_series(pts: &[f64]) -> f64 {
    let k = pts.len() - 1;
    let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = 0.5 * (lo + hi);
    let mut h = [0.0; EXP_SERIES_TERMS];
    h[0] = 1.0;
    for &x in pts {
        let z = x - c;
        for m in 1..EXP_SERIES_TERMS {
            h[m] += z * h[m - 1];
        }
    }
    let mut inv_fact = 1.0;
    for j in 1..=k {
        inv_fact /= j as f64;
    }
    let mut sum = 0.0;
    for (m, hm) in h.iter().enumerate() {
        if m > 0 {
            inv_fact /= (k + m) as f64;
        }
        sum += hm * inv_fact;
    }
    c.exp() * sum
}

/// Divided difference of `exp` for the propagator, tolerant of coincident
/// or nearly coincident points (`τ → 0`).
pub(crate) fn chain_exp_entry(points: &[f64]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(f64::total_cmp);
    let spread = pts[pts.len() - 1] - pts[0];
    if pts.len() == 1 {
        pts[0].exp()
    } else if spread <= EXP_SERIES_SPREAD {
        exp_series(&pts)
    } else {
        // Sorted extremes are more than the series spread apart, so the
        // recursion never divides by a vanishing width.
        recursive_table(ScalarFunction::Exp, &pts).unwrap_or(f64::NAN)
    }
}
