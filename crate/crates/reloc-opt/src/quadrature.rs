//! Fixed-grid quadrature helpers shared by the integrators.
//!
//! Everything operates on samples over a uniform grid. Composite Simpson
//! needs an even interval count; the integrators round their step counts up
//! to even, so the debug assertions here only guard internal misuse.

/// Composite Simpson over uniformly spaced samples. `values.len()` must be
/// odd (even number of intervals) and at least 3.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 3 && n % 2 == 1, "simpson needs an even interval count");
    let mut acc = values[0] + values[n - 1];
    let mut i = 1;
    while i < n - 1 {
        acc += 4.0 * values[i];
        if i + 1 < n - 1 {
            acc += 2.0 * values[i + 1];
        }
        i += 2;
    }
    acc * h / 3.0
}

/// Cumulative integral of uniformly spaced samples, returned at every node.
///
/// Even nodes accumulate pairwise Simpson; odd nodes take the integral of the
/// parabola through the surrounding three samples over its first interval
/// (`h(5f₀+8f₁-f₂)/12`), so the whole table is fourth-order accurate.
pub fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    debug_assert!(n >= 3 && n % 2 == 1, "cumulative needs an even interval count");
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i + 2 < n {
        let half = h / 12.0 * (5.0 * values[i] + 8.0 * values[i + 1] - values[i + 2]);
        out[i + 1] = out[i] + half;
        out[i + 2] = out[i] + h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    out
}

/// Simpson weights for a uniform grid with an even interval count; the dot
/// product of the weights with sample values equals [`simpson`].
pub fn simpson_weights(len: usize, h: f64) -> Vec<f64> {
    debug_assert!(len >= 3 && len % 2 == 1);
    let mut w = vec![0.0; len];
    w[0] = h / 3.0;
    w[len - 1] = h / 3.0;
    for (i, wi) in w.iter_mut().enumerate().take(len - 1).skip(1) {
        *wi = if i % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    w
}

/// Fourth-order first derivative of uniformly spaced samples, at every node.
/// Uses the centered five-point stencil inside and one-sided five-point
/// stencils at the two nodes nearest each boundary. Needs at least 5 samples.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    debug_assert!(n >= 5, "derivative needs at least five samples");
    let f = values;
    let d = 12.0 * h;
    let mut out = vec![0.0; n];
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / d;
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / d;
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / d;
    }
    out[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / d;
    out[n - 1] =
        (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / d;
    out
}

/// Uniform grid `0 = t₀ < … < t_n = span` with `n` intervals. The final node
/// is pinned to `span` exactly; intermediate nodes are `i·h`.
pub fn uniform_grid(span: f64, n: usize) -> Vec<f64> {
    let h = span / n as f64;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    grid[n] = span;
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        // ∫₀¹ (x³ - 2x² + 3) dx = 1/4 - 2/3 + 3 = 31/12
        let n = 8;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|i| {
                let x = i as f64 * h;
                x * x * x - 2.0 * x * x + 3.0
            })
            .collect();
        let exact = 31.0 / 12.0;
        assert!((simpson(&vals, h) - exact).abs() < 1e-15);
    }

    #[test]
    fn cumulative_matches_simpson_at_even_nodes_and_antiderivative_everywhere() {
        let n = 64;
        let h = 0.5 / n as f64;
        let f = |t: f64| (1.3 * t).exp() * (2.0 * t).cos();
        let anti = |t: f64| {
            // ∫ e^{1.3t} cos(2t) dt = e^{1.3t}(1.3 cos 2t + 2 sin 2t)/(1.3² + 4)
            (1.3f64 * t).exp() * (1.3 * (2.0 * t).cos() + 2.0 * (2.0 * t).sin()) / (1.3f64 * 1.3 + 4.0)
        };
        let sup_err = |n: usize| {
            let h = 0.5 / n as f64;
            let vals: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
            cumulative(&vals, h)
                .iter()
                .enumerate()
                .map(|(i, ci)| (ci - (anti(i as f64 * h) - anti(0.0))).abs())
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (sup_err(n), sup_err(2 * n));
        assert!(e1 < 5e-9, "n = {n}: sup error {e1}");
        // Fourth order: doubling the grid should shrink the error ~16x.
        assert!(e2 < e1 / 12.0, "{e2} vs {e1}");

        let vals: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
        let cum = cumulative(&vals, h);
        assert!((cum[n] - simpson(&vals, h)).abs() < 1e-15);
    }

    #[test]
    fn weights_reproduce_simpson() {
        let n = 16;
        let h = 0.1;
        let vals: Vec<f64> = (0..=n).map(|i| ((i as f64) * 0.37).sin() + 2.0).collect();
        let w = simpson_weights(vals.len(), h);
        let dot: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
        assert!((dot - simpson(&vals, h)).abs() < 1e-14);
    }

    #[test]
    fn derivative_is_fourth_order() {
        let f = |t: f64| (1.3 * t).exp() * (2.0 * t).cos();
        let df = |t: f64| (1.3 * t).exp() * (1.3 * (2.0 * t).cos() - 2.0 * (2.0 * t).sin());
        let sup_err = |n: usize| {
            let h = 1.0 / n as f64;
            let vals: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
            derivative(&vals, h)
                .iter()
                .enumerate()
                .map(|(i, d)| (d - df(i as f64 * h)).abs())
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (sup_err(64), sup_err(128));
        assert!(e1 < 1e-5);
        let order = (e1 / e2).log2();
        assert!((3.5..=4.8).contains(&order), "observed order {order}");
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = uniform_grid(60.0, 122880);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 60.0);
        let h = 60.0 / 122880.0;
        for i in (0..g.len()).step_by(12288) {
            assert!((g[i] - i as f64 * h).abs() <= 1e-12);
        }
    }
}
