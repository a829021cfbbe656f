//! Log-domain modified Bessel function of the first kind, order zero.

use std::f64::consts::PI;

/// Branch point between the power series and the asymptotic expansion.
pub const LOG_I0_SWITCH: f64 = 20.0;

/// `ln I0(z)` for `z >= 0` without overflow.
///
/// Power series `sum (z^2/4)^k / (k!)^2` below [`LOG_I0_SWITCH`], Hankel's
/// asymptotic series `e^z / sqrt(2 pi z) * sum ((2k-1)!!)^2 / (k! (8z)^k)`
/// above it, truncated at the smallest term.
pub fn log_i0(z: f64) -> f64 {
    let z = z.abs();
    if z < LOG_I0_SWITCH {
        log_i0_series(z)
    } else {
        log_i0_asymptotic(z)
    }
}

pub(crate) fn log_i0_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum.ln()
}

pub(crate) fn log_i0_asymptotic(z: f64) -> f64 {
    let inv8z = 1.0 / (8.0 * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd * inv8z / k as f64;
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 {
            break;
        }
    }
    z - 0.5 * (2.0 * PI * z).ln() + sum.ln()
}
