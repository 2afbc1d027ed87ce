//! Composite Simpson rule on uniform samples.

/// Simpson's rule over samples spaced by `h`. The sample count must be odd
/// (an even number of intervals); a trailing interval, if any, falls back
/// to the trapezoid rule.
pub fn simpson(h: f64, y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * h * (y[0] + y[1]);
    }
    let m = if n % 2 == 1 { n } else { n - 1 };
    let mut acc = y[0] + y[m - 1];
    for (i, v) in y[1..m - 1].iter().enumerate() {
        acc += if i % 2 == 0 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = acc * h / 3.0;
    if m < n {
        total += 0.5 * h * (y[n - 2] + y[n - 1]);
    }
    total
}

/// Simpson's rule for f on [a, b] with `intervals` (rounded up to even) panels.
pub fn simpson_fn<F: Fn(f64) -> f64>(a: f64, b: f64, intervals: usize, f: F) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let y: Vec<f64> = (0..=n).map(|i| f(a + h * i as f64)).collect();
    simpson(h, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_for_cubics() {
        let v = simpson_fn(0.0, 2.0, 4, |x| x * x * x - x + 1.0);
        assert_abs_diff_eq!(v, 4.0 - 2.0 + 2.0, epsilon = 1e-14);
    }

    #[test]
    fn trapezoid_tail() {
        assert_abs_diff_eq!(simpson(1.0, &[1.0, 1.0]), 1.0);
        assert_abs_diff_eq!(simpson(1.0, &[0.0, 1.0, 2.0, 3.0]), 4.5, epsilon = 1e-14);
        assert_eq!(simpson(1.0, &[5.0]), 0.0);
    }
}
