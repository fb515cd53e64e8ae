//! Time-quadrature helpers shared by the solver and the diagnostics.

/// Composite Simpson on a uniformly sampled series (3/8 rule on the tail
/// when the interval count is odd), falling back to the trapezoid rule for
/// fewer than three intervals. Fourth-order accurate for smooth integrands.
pub fn simpson_uniform(h: f64, f: &[f64]) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    if intervals == 1 {
        return h * (f[0] + f[1]) / 2.0;
    }
    if intervals == 2 {
        return h / 3.0 * (f[0] + 4.0 * f[1] + f[2]);
    }
    let mut total = 0.0;
    let even_part = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    if even_part > 0 {
        let mut s = f[0] + f[even_part];
        for (i, v) in f.iter().enumerate().take(even_part).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        total += h / 3.0 * s;
    }
    if intervals % 2 != 0 {
        let m = even_part;
        total += 3.0 * h / 8.0 * (f[m] + 3.0 * f[m + 1] + 3.0 * f[m + 2] + f[m + 3]);
    }
    total
}

/// Trapezoid rule on possibly non-uniform sample times.
pub fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    assert_eq!(times.len(), f.len());
    let mut total = 0.0;
    for i in 1..times.len() {
        total += (times[i] - times[i - 1]) * (f[i] + f[i - 1]) / 2.0;
    }
    total
}

/// Fourth-order quadrature when the sampling is uniform, trapezoid otherwise.
pub fn integrate_series(times: &[f64], f: &[f64]) -> f64 {
    assert_eq!(times.len(), f.len());
    if times.len() < 2 {
        return 0.0;
    }
    let h = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() < 1e-9 * h.max(1e-12));
    if uniform {
        simpson_uniform(h, f)
    } else {
        trapezoid(times, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / n as f64;
        let ts: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        let fs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        (ts, fs)
    }

    #[test]
    fn simpson_is_fourth_order() {
        let f = |t: f64| (1.3 * t).sin() + t * t;
        let exact = (1.0 - (1.3f64).cos()) / 1.3 + 1.0 / 3.0;
        let mut errs = Vec::new();
        for n in [16usize, 32] {
            let (ts, fs) = sample(0.0, 1.0, n, f);
            errs.push((integrate_series(&ts, &fs) - exact).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8, "simpson order {order}, errors {errs:?}");
    }

    #[test]
    fn odd_interval_counts_keep_the_order() {
        let f = |t: f64| (2.0 * t).exp();
        let exact = ((2.0f64).exp() - 1.0) / 2.0;
        let mut errs = Vec::new();
        for n in [15usize, 30] {
            let (ts, fs) = sample(0.0, 1.0, n, f);
            errs.push((integrate_series(&ts, &fs) - exact).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8, "order {order}, errors {errs:?}");
    }

    #[test]
    fn non_uniform_falls_back_to_trapezoid() {
        let ts = vec![0.0, 0.1, 0.35, 0.7, 1.0];
        let fs = vec![1.0; 5];
        assert!((integrate_series(&ts, &fs) - 1.0).abs() < 1e-14);
    }
}
