use crate::error::{domain, Error, Result};
use crate::kernel::spectral::RealSet;
use serde::Serialize;

/// Slack allowed on negative second differences before a curve is rejected.
pub const CONVEXITY_SLACK: f64 = 1e-6;
const BISECTION_STEPS: usize = 200;

/// A sampled log moment generating function and, once transformed, its rate
/// function.
#[derive(Clone, Debug, Serialize)]
pub struct RateCurve {
    pub alpha_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    /// Per-point extrapolation error estimate.
    pub f_err: Vec<f64>,
    /// Second-order finite-difference derivative.
    pub f_prime: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// `+inf` marks points outside the attained slope range.
    pub i_values: Vec<f64>,
}

impl RateCurve {
    pub fn from_samples(alpha_grid: Vec<f64>, f_values: Vec<f64>, f_err: Vec<f64>) -> Result<Self> {
        if alpha_grid.is_empty() || f_values.len() != alpha_grid.len() || f_err.len() != alpha_grid.len() {
            return Err(domain("curve columns must be nonempty and of equal length"));
        }
        if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("alpha grid must be strictly increasing"));
        }
        if f_values.iter().any(|v| !v.is_finite()) {
            return Err(domain("curve values must be finite"));
        }
        let f_prime = derivatives(&alpha_grid, &f_values);
        Ok(RateCurve { alpha_grid, f_values, f_err, f_prime, x_grid: Vec::new(), i_values: Vec::new() })
    }

    /// Largest negative second difference, zero for convex samples.
    pub fn convexity_violation(&self) -> f64 {
        second_differences(&self.alpha_grid, &self.f_values).into_iter().map(|v| -v).fold(0.0, f64::max)
    }

    /// Rows `(alpha, f, f_err)`.
    pub fn f_rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.alpha_grid.iter().zip(&self.f_values).zip(&self.f_err).map(|((&a, &f), &e)| (a, f, e))
    }

    /// Rows `(x, I)`.
    pub fn i_rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x_grid.iter().copied().zip(self.i_values.iter().copied())
    }

    /// Range `[f'(α_min), f'(α_max)]` of attained slopes.
    pub fn slope_range(&self) -> (f64, f64) {
        (self.f_prime[0], *self.f_prime.last().unwrap())
    }

    /// Finite-difference `f'(0)`, interpolated when `0` is not a node.
    pub fn mean(&self) -> f64 {
        self.derivative_at(0.0)
    }

    /// `I(x) = sup_α (α x - f(α))` using the cubic Hermite interpolant of the
    /// samples; `+inf` outside the attained slope range.
    pub fn rate_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.slope_range();
        let d = &self.f_prime;
        let a = &self.alpha_grid;
        if !(x >= lo && x <= hi) {
            return f64::INFINITY;
        }
        if a.len() == 1 || lo == hi {
            return a[0] * x - self.f_values[0];
        }
        let i = match d.iter().position(|&v| v >= x) {
            Some(0) => return a[0] * x - self.f_values[0],
            Some(k) => k - 1,
            None => return f64::INFINITY,
        };
        if d[i + 1] == x {
            return a[i + 1] * x - self.f_values[i + 1];
        }
        let (mut l, mut r) = (a[i], a[i + 1]);
        for _ in 0..BISECTION_STEPS {
            let m = 0.5 * (l + r);
            if m <= l || m >= r {
                break;
            }
            if self.hermite(i, m).1 < x {
                l = m;
            } else {
                r = m;
            }
        }
        let s = 0.5 * (l + r);
        s * x - self.hermite(i, s).0
    }

    /// `inf_{x ∈ S} I(x)`. For convex `I` the infimum over an interval sits
    /// at the point nearest to the mean.
    pub fn inf_rate(&self, set: &RealSet) -> f64 {
        if set.lo > set.hi {
            return f64::INFINITY;
        }
        let x = self.mean().clamp(set.lo, set.hi);
        self.rate_at(x)
    }

    /// `sup_x (α x - I(x))` over the attained slope range, by golden-section
    /// search on the concave objective.
    pub fn biconjugate(&self, alpha: f64) -> f64 {
        let (mut l, mut r) = self.slope_range();
        let g = |x: f64| alpha * x - self.rate_at(x);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = r - phi * (r - l);
        let mut x2 = l + phi * (r - l);
        let (mut g1, mut g2) = (g(x1), g(x2));
        for _ in 0..BISECTION_STEPS {
            if r - l <= 1e-15 * (1.0 + l.abs().max(r.abs())) {
                break;
            }
            if g1 < g2 {
                l = x1;
                x1 = x2;
                g1 = g2;
                x2 = l + phi * (r - l);
                g2 = g(x2);
            } else {
                r = x2;
                x2 = x1;
                g2 = g1;
                x1 = r - phi * (r - l);
                g1 = g(x1);
            }
        }
        g(0.5 * (l + r)).max(g(self.slope_range().0)).max(g(self.slope_range().1))
    }

    fn derivative_at(&self, alpha: f64) -> f64 {
        let a = &self.alpha_grid;
        if a.len() == 1 {
            return self.f_prime[0];
        }
        let i = match a.iter().position(|&v| v >= alpha) {
            Some(0) => return self.f_prime[0],
            Some(k) => k - 1,
            None => return *self.f_prime.last().unwrap(),
        };
        self.hermite(i, alpha).1
    }

    /// Value and derivative of the cubic Hermite interpolant on
    /// `[α_i, α_{i+1}]`.
    fn hermite(&self, i: usize, t: f64) -> (f64, f64) {
        let (a0, a1) = (self.alpha_grid[i], self.alpha_grid[i + 1]);
        let (f0, f1) = (self.f_values[i], self.f_values[i + 1]);
        let (d0, d1) = (self.f_prime[i], self.f_prime[i + 1]);
        let h = a1 - a0;
        let s = (t - a0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * f1
            + (s3 - s2) * h * d1;
        let dv = (6.0 * s2 - 6.0 * s) / h * f0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) / h * f1
            + (3.0 * s2 - 2.0 * s) * d1;
        (v, dv)
    }
}

fn secants(a: &[f64], f: &[f64]) -> Vec<f64> {
    a.windows(2).zip(f.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect()
}

/// Secant slope increments scaled by the local mean spacing; the usual
/// `f_{i+1} - 2 f_i + f_{i-1}` on uniform grids.
fn second_differences(a: &[f64], f: &[f64]) -> Vec<f64> {
    let s = secants(a, f);
    (1..s.len()).map(|i| (s[i] - s[i - 1]) * 0.5 * (a[i + 1] - a[i - 1])).collect()
}

/// Three-point derivative estimates, second order on nonuniform grids.
/// For convex samples the interior values interlace with the secants, so the
/// sequence is nondecreasing.
fn derivatives(a: &[f64], f: &[f64]) -> Vec<f64> {
    let n = a.len();
    match n {
        1 => return vec![0.0],
        2 => {
            let s = (f[1] - f[0]) / (a[1] - a[0]);
            return vec![s, s];
        }
        _ => {}
    }
    let s = secants(a, f);
    let h: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (h[i] * s[i - 1] + h[i - 1] * s[i]) / (h[i - 1] + h[i]);
    }
    d[0] = s[0] - h[0] * (s[1] - s[0]) / (h[0] + h[1]);
    d[n - 1] = s[n - 2] + h[n - 2] * (s[n - 2] - s[n - 3]) / (h[n - 3] + h[n - 2]);
    d
}

/// Replaces the samples by the closest convex sequence in the weighted
/// least-squares sense on secant slopes (pool adjacent violators), keeping
/// the value at the node nearest to `α = 0`.
fn flatten(a: &[f64], f: &mut [f64]) {
    let s = secants(a, f);
    let w: Vec<f64> = a.windows(2).map(|x| x[1] - x[0]).collect();
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &wt) in s.iter().zip(&w) {
        blocks.push((v, wt, 1));
        while blocks.len() >= 2 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (v2, w2, c2) = blocks.pop().unwrap();
            let (v1, w1, c1) = blocks.pop().unwrap();
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
        }
    }
    let slopes: Vec<f64> = blocks.iter().flat_map(|&(v, _, c)| std::iter::repeat_n(v, c)).collect();
    let anchor = a
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    for i in anchor + 1..a.len() {
        f[i] = f[i - 1] + slopes[i - 1] * (a[i] - a[i - 1]);
    }
    for i in (0..anchor).rev() {
        f[i] = f[i + 1] - slopes[i] * (a[i + 1] - a[i]);
    }
}

/// Fills `x_grid` with the attained slopes and `i_values` with the
/// Legendre transform there. Convexity defects up to `CONVEXITY_SLACK` are
/// flattened first; larger ones are an error.
pub fn legendre_transform(curve: &RateCurve) -> Result<RateCurve> {
    if let Some((index, violation)) = second_differences(&curve.alpha_grid, &curve.f_values)
        .into_iter()
        .map(|v| -v)
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))
    {
        if violation > CONVEXITY_SLACK {
            return Err(Error::NonConvex { index: index + 1, violation });
        }
    }
    let mut out = curve.clone();
    if curve.convexity_violation() > 0.0 {
        flatten(&out.alpha_grid, &mut out.f_values);
        out.f_prime = derivatives(&out.alpha_grid, &out.f_values);
    }
    out.x_grid = out.f_prime.clone();
    out.i_values = out.x_grid.iter().map(|&x| out.rate_at(x)).collect();
    Ok(out)
}

/// Transform evaluated on a caller-supplied grid of `x` values.
pub fn legendre_on_grid(curve: &RateCurve, xs: &[f64]) -> Result<RateCurve> {
    let mut out = legendre_transform(curve)?;
    out.x_grid = xs.to_vec();
    out.i_values = xs.iter().map(|&x| out.rate_at(x)).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    fn binary_entropy_rate(x: f64) -> f64 {
        let t = |y: f64| if y == 0.0 { 0.0 } else { y * y.ln() };
        t((1.0 + x) / 2.0) + t((1.0 - x) / 2.0) + 2f64.ln()
    }

    fn log_cosh_curve(points: usize) -> RateCurve {
        let a = linspace(-4.0, 4.0, points);
        let f: Vec<f64> = a.iter().map(|x: &f64| x.cosh().ln()).collect();
        let n = a.len();
        RateCurve::from_samples(a, f, vec![0.0; n]).unwrap()
    }

    #[test]
    fn log_cosh_conjugate() {
        let c = legendre_transform(&log_cosh_curve(1601)).unwrap();
        let mut worst: f64 = 0.0;
        for x in linspace(-0.95, 0.95, 381) {
            worst = worst.max((c.rate_at(x) - binary_entropy_rate(x)).abs());
        }
        assert!(worst <= 1e-6, "{worst}");
        assert!(c.rate_at(c.mean()).abs() <= 1e-10);
    }

    #[test]
    fn biconjugacy() {
        let c = legendre_transform(&log_cosh_curve(1601)).unwrap();
        for a in linspace(-3.5, 3.5, 29) {
            assert!((c.biconjugate(a) - a.cosh().ln()).abs() < 1e-5, "{a}");
        }
    }

    #[test]
    fn linear_curve_is_degenerate() {
        let a = linspace(-2.0, 2.0, 11);
        let f: Vec<f64> = a.iter().map(|x| 0.3 * x).collect();
        let c = legendre_transform(&RateCurve::from_samples(a, f, vec![0.0; 11]).unwrap()).unwrap();
        assert!(c.rate_at(0.3).abs() < 1e-14);
        assert_eq!(c.rate_at(0.31), f64::INFINITY);
        assert_eq!(c.rate_at(0.29), f64::INFINITY);
    }

    #[test]
    fn rate_is_nonnegative_with_zero_at_mean() {
        let a = linspace(-2.0, 3.0, 51);
        let f: Vec<f64> = a.iter().map(|x| 0.2 * x + 0.5 * x * x + 0.1 * x.powi(4)).collect();
        let c = legendre_transform(&RateCurve::from_samples(a, f, vec![0.0; 51]).unwrap()).unwrap();
        assert!(c.i_values.iter().all(|&v| v >= -1e-12));
        assert!((c.mean() - 0.2).abs() < 1e-3);
        assert!(c.rate_at(c.mean()).abs() < 1e-10);
    }

    #[test]
    fn small_defects_are_flattened() {
        let a = linspace(-1.0, 1.0, 21);
        let mut f: Vec<f64> = a.iter().map(|x| 0.5 * x).collect();
        f[14] += 5e-9;
        let c = legendre_transform(&RateCurve::from_samples(a.clone(), f.clone(), vec![0.0; 21]).unwrap()).unwrap();
        assert!(c.convexity_violation() <= 1e-15);
        assert_eq!(c.f_values[10], 0.0);
        f[14] += 1e-5;
        let r = legendre_transform(&RateCurve::from_samples(a, f, vec![0.0; 21]).unwrap());
        assert!(matches!(r, Err(Error::NonConvex { .. })));
    }

    #[test]
    fn inf_over_interval() {
        let c = legendre_transform(&log_cosh_curve(801)).unwrap();
        assert!(c.inf_rate(&RealSet::closed(-0.2, 0.4)).abs() < 1e-12);
        let v = c.inf_rate(&RealSet::closed(0.5, 1.0));
        assert!((v - binary_entropy_rate(0.5)).abs() < 1e-5);
    }
}
