//! Sine and cosine integrals.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Complex;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const SERIES_MAX: f64 = 2.0;
const MAX_ITER: usize = 10_000;

/// `(Si(x), Ci(x))` with `Si(x) = ∫_0^x sin t / t dt` and
/// `Ci(x) = γ + ln x + ∫_0^x (cos t - 1)/t dt` for `x > 0`.
/// `Ci` is `-inf` at 0 and is evaluated at `|x|` for negative input.
pub fn si_ci(x: f64) -> (f64, f64) {
    let t = x.abs();
    if t == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let (si, ci) = if t > SERIES_MAX {
        // Lentz continued fraction for E_1(i t)
        let mut b = Complex::new(1.0, t);
        let mut c = Complex::new(1.0 / FPMIN, 0.0);
        let mut d = Complex::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 2..MAX_ITER {
            let a = -(((i - 1) * (i - 1)) as f64);
            b += Complex::new(2.0, 0.0);
            d = Complex::new(1.0, 0.0) / (d * a + b);
            c = b + Complex::new(a, 0.0) / c;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= Complex::new(t.cos(), -t.sin());
        (FRAC_PI_2 + h.im, -h.re)
    } else {
        let (mut sum_s, mut sum_c) = (0.0, 0.0);
        let mut fact = 1.0;
        let mut sign = 1.0;
        for k in 1..MAX_ITER {
            fact *= t / k as f64;
            let term = fact / k as f64;
            if k % 2 == 1 {
                sum_s += sign * term;
            } else {
                sign = -sign;
                sum_c += sign * term;
            }
            if term < EPS * sum_s.abs().max(sum_c.abs()).max(1e-300) {
                break;
            }
        }
        (sum_s, sum_c + t.ln() + EULER_GAMMA)
    };
    (if x < 0.0 { -si } else { si }, ci)
}
