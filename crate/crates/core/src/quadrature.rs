//! Uniform-grid quadrature, interpolation and differencing.
//!
//! Every sampled function lives on `n + 1` equispaced nodes with spacing `h`.

use crate::scalar::Real;

/// Composite trapezoid rule.
pub fn trapezoid<T: Real>(values: &[T], h: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        len => {
            let interior: T = values[1..len - 1].iter().copied().sum();
            h * (interior + (values[0] + values[len - 1]) * T::lit(0.5))
        }
    }
}

/// Trapezoid of the pointwise product `a * b`.
pub fn trapezoid_product<T: Real>(a: &[T], b: &[T], h: T) -> T {
    debug_assert_eq!(a.len(), b.len());
    let len = a.len();
    if len < 2 {
        return T::zero();
    }
    let interior: T = a[1..len - 1]
        .iter()
        .zip(&b[1..len - 1])
        .map(|(&x, &y)| x * y)
        .sum();
    h * (interior + (a[0] * b[0] + a[len - 1] * b[len - 1]) * T::lit(0.5))
}

/// Trapezoid weights for `n + 1` nodes.
pub fn trapezoid_weights<T: Real>(nodes: usize, h: T) -> Vec<T> {
    let mut w = vec![h; nodes];
    if nodes > 0 {
        w[0] = h * T::lit(0.5);
        w[nodes - 1] = h * T::lit(0.5);
    }
    if nodes == 1 {
        w[0] = T::zero();
    }
    w
}

/// `out[j] = ∫_{x_j}^{x_n} f`, accumulated by the trapezoid rule from the right end.
pub fn cumulative_from_right<T: Real>(values: &[T], h: T) -> Vec<T> {
    let len = values.len();
    let mut out = vec![T::zero(); len];
    for j in (0..len.saturating_sub(1)).rev() {
        out[j] = out[j + 1] + h * T::lit(0.5) * (values[j] + values[j + 1]);
    }
    out
}

/// Finite-difference derivative: centered in the interior, second-order one-sided
/// stencils at both ends.
pub fn derivative<T: Real>(values: &[T], h: T) -> Vec<T> {
    let len = values.len();
    let two_h = T::lit(2.0) * h;
    match len {
        0 => Vec::new(),
        1 => vec![T::zero()],
        2 => {
            let d = (values[1] - values[0]) / h;
            vec![d, d]
        }
        _ => {
            let mut d = vec![T::zero(); len];
            d[0] = (-T::lit(3.0) * values[0] + T::lit(4.0) * values[1] - values[2]) / two_h;
            for j in 1..len - 1 {
                d[j] = (values[j + 1] - values[j - 1]) / two_h;
            }
            let n = len - 1;
            d[n] = (T::lit(3.0) * values[n] - T::lit(4.0) * values[n - 1] + values[n - 2]) / two_h;
            d
        }
    }
}

/// Linear interpolation of samples on `[lo, lo + n h]`, clamped at both ends.
pub fn interpolate<T: Real>(values: &[T], lo: T, h: T, x: T) -> T {
    let n = values.len() - 1;
    if n == 0 {
        return values[0];
    }
    let pos = (x - lo) / h;
    if pos <= T::zero() {
        return values[0];
    }
    let nf = T::from_usize_lossy(n);
    if pos >= nf {
        return values[n];
    }
    let j = pos.floor();
    let idx = j.to_usize().unwrap_or(0).min(n - 1);
    let frac = pos - T::from_usize_lossy(idx);
    values[idx] + frac * (values[idx + 1] - values[idx])
}

/// `∫_lo^hi w(x) f(x) dx` where `f` is the piecewise-linear interpolant of `values`
/// on `[grid_lo, grid_lo + n h]`. The trapezoid rule runs over the grid nodes inside
/// `(lo, hi)` plus both endpoints, so the partial cells are handled without snapping.
pub fn integrate_piecewise_linear<T: Real, W: Fn(T) -> T>(
    values: &[T],
    grid_lo: T,
    h: T,
    lo: T,
    hi: T,
    weight: W,
) -> T {
    if hi <= lo {
        return T::zero();
    }
    let mut xs = vec![lo];
    for j in 0..values.len() {
        let x = grid_lo + h * T::from_usize_lossy(j);
        if x > lo && x < hi {
            xs.push(x);
        }
    }
    xs.push(hi);
    let eval = |x: T| weight(x) * interpolate(values, grid_lo, h, x);
    xs.windows(2)
        .map(|p| (p[1] - p[0]) * T::lit(0.5) * (eval(p[0]) + eval(p[1])))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, t: f64) -> (Vec<f64>, f64) {
        let h = t / n as f64;
        ((0..=n).map(|j| -t + j as f64 * h).collect(), h)
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let (xs, h) = grid(10, 1.0);
        let v: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        // ∫_{-1}^0 (2x + 3) dx = -1 + 3
        assert_relative_eq!(trapezoid(&v, h), 2.0, epsilon = 1e-14);
        let w = trapezoid_weights(11, h);
        let s: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let (xs, h) = grid(40, 2.0);
        let v: Vec<f64> = xs.iter().map(|_| 1.0).collect();
        let c = cumulative_from_right(&v, h);
        for (x, ci) in xs.iter().zip(&c) {
            assert_relative_eq!(*ci, -x, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        let (xs, h) = grid(16, 1.0);
        let v: Vec<f64> = xs.iter().map(|x| x * x - x).collect();
        let d = derivative(&v, h);
        for (x, di) in xs.iter().zip(&d) {
            assert_relative_eq!(*di, 2.0 * x - 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn interpolation_clamps_and_hits_nodes() {
        let v = [0.0, 1.0, 4.0];
        assert_eq!(interpolate(&v, -1.0, 0.5, -2.0), 0.0);
        assert_eq!(interpolate(&v, -1.0, 0.5, 5.0), 4.0);
        assert_relative_eq!(interpolate(&v, -1.0, 0.5, -0.5), 1.0);
        assert_relative_eq!(interpolate(&v, -1.0, 0.5, -0.25), 2.5);
    }

    #[test]
    fn partial_cell_integral() {
        let (_, h) = grid(4, 1.0);
        let v = [1.0; 5];
        let i = integrate_piecewise_linear(&v, -1.0, h, -0.3, 0.0, |_| 1.0);
        assert_relative_eq!(i, 0.3, epsilon = 1e-14);
        // trapezoid error h²/12 · ∫|f''| ≈ 5e-6 at h = 1/100
        let (_, h) = grid(100, 1.0);
        let v = [1.0; 101];
        let e = integrate_piecewise_linear(&v, -1.0, h, -1.0, 0.0, |x: f64| x.exp());
        assert_relative_eq!(e, 1.0 - (-1.0f64).exp(), epsilon = 1e-5);
    }
}
