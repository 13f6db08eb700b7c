//! Tiny least-squares fits used by the hypothesis reports.

/// Least-squares `y ≈ alpha + c / x`. Returns `(alpha, c)`.
pub(crate) fn const_plus_inverse(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    linear_in(xs.iter().map(|x| 1.0 / x), ys)
}

/// Least-squares `y ≈ alpha + beta * t`. Returns `(alpha, beta)`.
pub(crate) fn line(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    linear_in(ts.iter().copied(), ys)
}

/// Least-squares `y ≈ c / x` with no constant. Returns `c`.
pub(crate) fn inverse_only(xs: &[f64], ys: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        num += y / x;
        den += 1.0 / (x * x);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn linear_in(ts: impl Iterator<Item = f64>, ys: &[f64]) -> (f64, f64) {
    let ts: Vec<f64> = ts.collect();
    let n = ts.len() as f64;
    if ts.is_empty() {
        return (0.0, 0.0);
    }
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        sxy += (t - mt) * (y - my);
        sxx += (t - mt) * (t - mt);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mt, slope)
}

/// Indices of the upper half of `0..n` (at least one element when `n > 0`).
pub(crate) fn top_half(n: usize) -> std::ops::Range<usize> {
    (n / 2).min(n.saturating_sub(1))..n
}
