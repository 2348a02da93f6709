//! Extended nonnegative reals with the measure-theoretic conventions
//! `0 · ∞ = 0` and `1 / 0 = ∞`.
//!
//! Every condition evaluator routes products, quotients and powers of
//! possibly vanishing weights through these helpers so that a weight
//! vanishing on an interval is treated the same way everywhere.

pub const INF: f64 = f64::INFINITY;

/// Product with `0 · ∞ = 0`.
#[inline]
pub fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Reciprocal with `1 / 0 = ∞` and `1 / ∞ = 0`.
#[inline]
pub fn recip(a: f64) -> f64 {
    if a == 0.0 {
        INF
    } else {
        1.0 / a
    }
}

/// `a / b` read as `a · (1 / b)`, so `0 / 0 = 0` and `x / 0 = ∞` for `x > 0`.
#[inline]
pub fn div(a: f64, b: f64) -> f64 {
    mul(a, recip(b))
}

/// `a^e` for `a ∈ [0, ∞]`; `0^e = ∞` for `e < 0` and `∞^e = 0` for `e < 0`.
#[inline]
pub fn pow(a: f64, e: f64) -> f64 {
    if e == 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return if e > 0.0 { 0.0 } else { INF };
    }
    if a.is_infinite() {
        return if e > 0.0 { INF } else { 0.0 };
    }
    a.powf(e)
}

/// Conjugate exponent `p' = p / (p - 1)` for `p > 1`.
#[inline]
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}
