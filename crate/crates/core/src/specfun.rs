//! Integer-order Bessel functions of the first and second kind and the
//! Hankel function of the first kind, for real positive arguments.
//!
//! `J_n` is computed by the ascending series for small arguments and by
//! Miller's backward recurrence (normalised with `J_0 + 2 sum J_2k = 1`)
//! otherwise. `Y_0` and `Y_1` come from the Neumann expansions in terms of
//! the same `J` sequence; higher orders of `Y` use forward recurrence, which
//! is stable for the second kind.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Default series truncation for the exterior Hankel expansion.
pub const DEFAULT_MAX_ORDER: u32 = 64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_SWITCH: f64 = 2.0;
const RESCALE_LIMIT: f64 = 1e250;

/// Signed integer order of a cylinder function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CylOrder(i32);

impl CylOrder {
    pub fn new(n: i32) -> Result<Self> {
        Self::with_limit(n, DEFAULT_MAX_ORDER)
    }

    pub fn with_limit(n: i32, max_order: u32) -> Result<Self> {
        if n.unsigned_abs() > max_order {
            return Err(Error::Domain(format!(
                "order {n} exceeds the configured limit {max_order}"
            )));
        }
        Ok(Self(n))
    }

    pub fn value(self) -> i32 {
        self.0
    }

    fn parity_sign(self) -> f64 {
        if self.0 % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {x}")));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("negative argument {x}")));
    }
    Ok(())
}

/// `J_n(x)` for integer `n` and `x >= 0`.
pub fn bessel_j(n: CylOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    let m = n.0.unsigned_abs() as usize;
    let val = if x == 0.0 {
        if m == 0 {
            1.0
        } else {
            0.0
        }
    } else if x <= SERIES_SWITCH {
        j_series(m, x)
    } else {
        j_sequence(m, x)[m]
    };
    Ok(if n.0 < 0 { n.parity_sign() * val } else { val })
}

/// `Y_n(x)` for integer `n` and `x > 0`.
pub fn bessel_y(n: CylOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == 0.0 {
        return Err(Error::Domain(
            "Y_n has a logarithmic singularity at x = 0".into(),
        ));
    }
    let m = n.0.unsigned_abs() as usize;
    let ys = y_sequence(m, x);
    Ok(if n.0 < 0 { n.parity_sign() * ys[m] } else { ys[m] })
}

/// `H_n^{(1)}(x) = J_n(x) + i Y_n(x)`.
pub fn hankel1(n: CylOrder, x: f64) -> Result<Complex64> {
    check_arg(x)?;
    if x == 0.0 {
        return Err(Error::Domain("H_n^(1) is singular at x = 0".into()));
    }
    let m = n.0.unsigned_abs() as usize;
    let h = hankel1_sequence(m, x)[m];
    Ok(if n.0 < 0 { h * n.parity_sign() } else { h })
}

/// `dH_n^{(1)}/dx` via `(H_{n-1} - H_{n+1}) / 2`.
pub fn hankel1_derivative(n: CylOrder, x: f64) -> Result<Complex64> {
    check_arg(x)?;
    if x == 0.0 {
        return Err(Error::Domain("H_n^(1) is singular at x = 0".into()));
    }
    let m = n.0.unsigned_abs() as usize;
    let hs = hankel1_sequence(m + 1, x);
    let d = hankel1_derivative_from(&hs, m);
    Ok(if n.0 < 0 { d * n.parity_sign() } else { d })
}

/// `H_0^{(1)}(x), ..., H_{max}^{(1)}(x)` in one pass. Negative orders follow
/// from reflection.
pub fn hankel1_sequence(max: usize, x: f64) -> Vec<Complex64> {
    let js = j_all(max, x);
    let ys = y_sequence(max, x);
    js.iter()
        .zip(ys.iter())
        .map(|(&j, &y)| Complex64::new(j, y))
        .collect()
}

/// Derivative of order `m >= 0` from a sequence holding orders `0..=m+1`.
pub fn hankel1_derivative_from(hs: &[Complex64], m: usize) -> Complex64 {
    if m == 0 {
        -hs[1]
    } else {
        (hs[m - 1] - hs[m + 1]) * 0.5
    }
}

/// Value and radial derivative of `H_n^{(1)}` at `x` for a signed order,
/// taken from a precomputed sequence.
pub fn hankel1_signed(hs: &[Complex64], n: i32) -> (Complex64, Complex64) {
    let m = n.unsigned_abs() as usize;
    let sign = if n < 0 && m % 2 == 1 { -1.0 } else { 1.0 };
    (hs[m] * sign, hankel1_derivative_from(hs, m) * sign)
}

/// `J_0(x), ..., J_max(x)`.
pub fn j_all(max: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; max + 1];
        v[0] = 1.0;
        return v;
    }
    if x <= SERIES_SWITCH {
        (0..=max).map(|m| j_series(m, x)).collect()
    } else {
        let mut v = j_sequence(max, x);
        v.truncate(max + 1);
        v
    }
}

fn j_series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= half / k as f64;
        if lead == 0.0 {
            return 0.0;
        }
    }
    let q = -half * half;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..200 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Miller backward recurrence. Returns at least `n + 1` orders; the vector
/// is long enough to also serve the Neumann sums for `Y_0`, `Y_1`.
fn j_sequence(n: usize, x: f64) -> Vec<f64> {
    let big = (n as f64).max(x);
    let mut start = (big + 30.0 + 4.0 * big.sqrt()).ceil() as usize;
    start += start % 2;
    let mut vals = vec![0.0; start + 2];
    let mut next = 0.0;
    let mut cur = 1e-300_f64;
    vals[start] = cur;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if cur.abs() > RESCALE_LIMIT {
            for v in vals[k - 1..].iter_mut() {
                *v /= RESCALE_LIMIT;
            }
            cur /= RESCALE_LIMIT;
            next /= RESCALE_LIMIT;
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for v in vals.iter_mut() {
        *v /= norm;
    }
    vals
}

/// `Y_0, ..., Y_max` by Neumann expansions and forward recurrence.
fn y_sequence(max: usize, x: f64) -> Vec<f64> {
    let js = if x <= SERIES_SWITCH {
        // enough orders for the Neumann sums to converge
        let top = 40usize;
        (0..=top).map(|m| j_series(m, x)).collect::<Vec<_>>()
    } else {
        j_sequence(0, x)
    };
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < js.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * js[2 * k] / k as f64;
        s1 += sign * (js[2 * k - 1] - js[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * (log_term * js[0] - 2.0 * s0);
    let y1 = -2.0 / (PI * x) * js[0] + 2.0 / PI * log_term * js[1] + 2.0 / PI * s1;
    let mut ys = Vec::with_capacity(max + 1);
    ys.push(y0);
    if max >= 1 {
        ys.push(y1);
    }
    for m in 1..max {
        let next = 2.0 * m as f64 / x * ys[m] - ys[m - 1];
        ys.push(next);
    }
    ys
}
