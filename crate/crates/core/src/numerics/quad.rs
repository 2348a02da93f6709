//! Adaptive Gauss–Kronrod quadrature on finite intervals and on `[a, 1)`.
//!
//! Radial integrals are computed in the log-gap variable `u = -ln(1 - s)`,
//! which maps `[a, 1)` onto `[u_a, ∞)` and turns power-type boundary
//! behaviour into exponential decay. Integrands are therefore handed over as
//! densities with respect to `du`; [`ds_density`] adapts an ordinary
//! `ds`-density.
//!
//! An integrand evaluating to `+∞` at any node of an interval of positive
//! length makes the integral `+∞` (convention `0 · ∞ = 0` is applied by the
//! integrands themselves).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::numerics::grid::Radius;

pub const DEFAULT_REL_TOL: f64 = 1e-10;

const MAX_SEGMENTS: usize = 2000;
const UNIT_BLOCKS: usize = 24;
const MAX_BLOCKS: usize = 200;
const QUIET_BLOCKS: usize = 3;
/// Beyond this log-gap a `ds`-density times the gap underflows.
const DS_LOG_GAP_CAP: f64 = 690.0;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    /// Kronrod estimate of `∫|f|`, the scale for roundoff-level errors.
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

enum Rule {
    Finite(Segment),
    Infinite,
    Undefined(f64),
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Rule {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = 0.0;
    let mut gauss = 0.0;
    let mut kabs = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[x, -x] };
        for &t in pts {
            let v = f(c + h * t);
            if v.is_nan() {
                return Rule::Undefined(c + h * t);
            }
            if v == f64::INFINITY {
                return Rule::Infinite;
            }
            kron += wk * v;
            kabs += wk * v.abs();
            if i % 2 == 1 {
                gauss += WG[i / 2] * v;
            }
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    Rule::Finite(Segment {
        a,
        b,
        value,
        err,
        abs: kabs * h.abs(),
    })
}

enum Adaptive {
    Converged(f64),
    Infinite,
    Stalled { value: f64, err: f64, worst_left: f64 },
}

/// Globally adaptive GK15 over a set of abutting pieces (breakpoints).
fn adaptive_pieces<F: Fn(f64) -> f64>(f: &F, cuts: &[f64], rel_tol: f64) -> Result<Adaptive> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut total_abs = 0.0;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        match gk15(f, w[0], w[1]) {
            Rule::Finite(seg) => {
                total += seg.value;
                total_err += seg.err;
                total_abs += seg.abs;
                heap.push(seg);
            }
            Rule::Infinite => return Ok(Adaptive::Infinite),
            Rule::Undefined(x) => {
                return Err(Error::NonConvergence(format!("integrand is NaN at {x}")))
            }
        }
    }
    loop {
        let floor = 50.0 * f64::EPSILON * total_abs;
        if total_err <= (rel_tol * total.abs()).max(floor) || total_err < f64::MIN_POSITIVE {
            return Ok(Adaptive::Converged(total));
        }
        if heap.len() >= MAX_SEGMENTS.max(4 * cuts.len()) {
            let worst = heap.peek().map(|s| s.a).unwrap_or(0.0);
            return Ok(Adaptive::Stalled {
                value: total,
                err: total_err,
                worst_left: worst,
            });
        }
        let seg = heap.pop().expect("heap is nonempty while error is positive");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval cannot be split further in floating point
            let worst = seg.a;
            heap.push(seg);
            return Ok(Adaptive::Stalled {
                value: total,
                err: total_err,
                worst_left: worst,
            });
        }
        total -= seg.value;
        total_err -= seg.err;
        total_abs -= seg.abs;
        for (a, b) in [(seg.a, mid), (mid, seg.b)] {
            match gk15(f, a, b) {
                Rule::Finite(s) => {
                    total += s.value;
                    total_err += s.err;
                    total_abs += s.abs;
                    heap.push(s);
                }
                Rule::Infinite => return Ok(Adaptive::Infinite),
                Rule::Undefined(x) => {
                    return Err(Error::NonConvergence(format!("integrand is NaN at {x}")))
                }
            }
        }
        total_err = total_err.max(0.0);
    }
}

/// Tail of a sequence of block contributions that fails to decay means divergence.
fn blocks_diverge(contrib: &[f64]) -> bool {
    let n = contrib.len();
    if n < 4 {
        return true;
    }
    contrib[n - 1] >= 0.5 * contrib[n - 4]
}

/// `∫_a^b f(x) dx` on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("finite interval expected, got [{a}, {b}]")));
    }
    if b <= a {
        return Ok(0.0);
    }
    match adaptive_pieces(&f, &[a, b], rel_tol)? {
        Adaptive::Converged(v) => Ok(v),
        Adaptive::Infinite => Ok(f64::INFINITY),
        Adaptive::Stalled { value, err, .. } => Err(Error::NonConvergence(format!(
            "[{a}, {b}]: estimate {value} with error {err}"
        ))),
    }
}

/// Integrate a `du`-density over `(0, x0]` in dyadic blocks shrinking to 0.
fn blocks_toward_zero<F: Fn(f64) -> f64>(f: &F, x0: f64, rel_tol: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut quiet = 0;
    let mut contrib: Vec<f64> = Vec::new();
    let mut hi = x0;
    while hi > 1e-300 {
        let lo = 0.5 * hi;
        let piece = match adaptive_pieces(f, &[lo, hi], rel_tol)? {
            Adaptive::Converged(v) => v,
            Adaptive::Infinite => return Ok(f64::INFINITY),
            Adaptive::Stalled { value, .. } => value,
        };
        acc += piece;
        contrib.push(piece.abs());
        if piece.abs() <= rel_tol * acc.abs() {
            quiet += 1;
            if quiet >= QUIET_BLOCKS {
                return Ok(acc);
            }
        } else {
            quiet = 0;
        }
        hi = lo;
    }
    if blocks_diverge(&contrib) {
        Ok(f64::INFINITY)
    } else {
        Err(Error::NonConvergence("integrand singular at the origin".into()))
    }
}

fn finite_log_gap<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, breaks: &[f64], rel_tol: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut cuts = Vec::with_capacity(breaks.len() + 2);
    cuts.push(lo);
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    match adaptive_pieces(f, &cuts, rel_tol)? {
        Adaptive::Converged(v) => Ok(v),
        Adaptive::Infinite => Ok(f64::INFINITY),
        Adaptive::Stalled { value, err, worst_left } => {
            if lo == 0.0 && worst_left == 0.0 {
                // endpoint singularity at the origin; split off a small head
                let x0 = cuts[1].min(1.0 / 16.0);
                let head = blocks_toward_zero(f, x0, rel_tol)?;
                if head.is_infinite() {
                    return Ok(head);
                }
                cuts[0] = x0;
                let rest = match adaptive_pieces(f, &cuts, rel_tol)? {
                    Adaptive::Converged(v) => v,
                    Adaptive::Infinite => return Ok(f64::INFINITY),
                    Adaptive::Stalled { value, err, .. } => {
                        return Err(Error::NonConvergence(format!(
                            "log-gap [{x0}, {hi}]: estimate {value} with error {err}"
                        )))
                    }
                };
                Ok(head + rest)
            } else {
                Err(Error::NonConvergence(format!(
                    "log-gap [{lo}, {hi}]: estimate {value} with error {err}"
                )))
            }
        }
    }
}

/// Integral of a `du`-density `g` over `[lo, hi)`, with `hi = None` meaning
/// up to the boundary `s = 1`.
///
/// `breaks` are log-gaps where `g` may jump; no truncation decision is made
/// before the last one. Towards the boundary the range is swept in blocks
/// (unit dyadic blocks first, then blocks of doubling length) until three
/// consecutive blocks fall below `rel_tol` of the accumulated value.
pub fn integrate_log_gap<G: Fn(Radius) -> f64>(
    g: G,
    lo: Radius,
    hi: Option<Radius>,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    integrate_log_gap_capped(g, lo, hi, breaks, rel_tol, f64::INFINITY)
}

fn integrate_log_gap_capped<G: Fn(Radius) -> f64>(
    g: G,
    lo: Radius,
    hi: Option<Radius>,
    breaks: &[f64],
    rel_tol: f64,
    cap: f64,
) -> Result<f64> {
    let f = |u: f64| g(Radius::from_log_gap(u));
    let u_lo = lo.log_gap();
    if let Some(hi) = hi {
        return finite_log_gap(&f, u_lo, hi.log_gap(), breaks, rel_tol);
    }
    let last_break = breaks.iter().copied().fold(u_lo, f64::max);
    let mut acc = finite_log_gap(&f, u_lo, last_break, breaks, rel_tol)?;
    if acc.is_infinite() {
        return Ok(acc);
    }
    let mut u = last_break;
    let mut len = LN_2;
    let mut quiet = 0;
    let mut contrib: Vec<f64> = Vec::new();
    for k in 0..MAX_BLOCKS {
        let mut end = u + len;
        let capped = end >= cap;
        if capped {
            end = cap;
        }
        // each block only needs to be accurate relative to the running total
        let piece_tol = match contrib.last() {
            Some(&prev) if prev > 0.0 && acc != 0.0 => rel_tol * (acc.abs() / prev).clamp(1.0, 1e6),
            _ => rel_tol,
        };
        let piece = finite_log_gap(&f, u, end, &[], piece_tol)?;
        if piece.is_infinite() {
            return Ok(piece);
        }
        acc += piece;
        contrib.push(piece.abs());
        // blocks are only quiet once something has accumulated, so mass
        // concentrated far out (e.g. s^x for large x) is not skipped
        if acc != 0.0 && piece.abs() <= rel_tol * acc.abs() {
            quiet += 1;
            if quiet >= QUIET_BLOCKS {
                return Ok(acc);
            }
        } else {
            quiet = 0;
        }
        if let Some(rest) = geometric_remainder(&contrib[UNIT_BLOCKS.min(contrib.len())..], rel_tol * acc.abs()) {
            return Ok(acc + rest.copysign(piece));
        }
        if capped {
            break;
        }
        u = end;
        if k + 1 >= UNIT_BLOCKS {
            len *= 2.0;
        }
    }
    if acc == 0.0 {
        return Ok(0.0);
    }
    if blocks_diverge(&contrib) {
        Ok(f64::INFINITY)
    } else {
        Err(Error::NonConvergence(format!(
            "tail contributions decay too slowly (accumulated {acc})"
        )))
    }
}

/// Remainder of a sweep whose doubling blocks shrink by a settled ratio, as
/// for algebraic decay in `u`; `None` until the estimate is within `abs_tol`.
fn geometric_remainder(blocks: &[f64], abs_tol: f64) -> Option<f64> {
    let n = blocks.len();
    if n < 4 || blocks[n - 3..].iter().any(|&c| c == 0.0) {
        return None;
    }
    let rho = blocks[n - 1] / blocks[n - 2];
    let rho_prev = blocks[n - 2] / blocks[n - 3];
    if !(rho < 0.9 && rho_prev < 0.9) {
        return None;
    }
    let rest = blocks[n - 1] * rho / (1.0 - rho);
    let err = blocks[n - 1] * (rho - rho_prev).abs() / (1.0 - rho).powi(2);
    (err <= abs_tol).then_some(rest)
}

/// Converts a `ds`-density into a `du`-density (multiplies by the gap).
pub fn ds_density<F: Fn(Radius) -> f64>(f: F) -> impl Fn(Radius) -> f64 {
    move |r: Radius| crate::numerics::ext::mul(f(r), r.gap())
}

/// `∫_lo^hi f(s) ds` for a `ds`-density, `hi = None` meaning up to 1.
///
/// Because the density is multiplied by the gap, it can only be probed up to
/// a log-gap of about 690; beyond that the integral is declared divergent
/// when block contributions have not started to decay.
pub fn integrate_radial<F: Fn(Radius) -> f64>(
    f: F,
    lo: Radius,
    hi: Option<Radius>,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    integrate_log_gap_capped(ds_density(f), lo, hi, breaks, rel_tol, DS_LOG_GAP_CAP)
}

/// `∫_a^1 f(s) ds` for an integrand given on radii (`ds`-density).
pub fn integrate_improper<F: Fn(Radius) -> f64>(f: F, a: f64, rel_tol: f64) -> Result<f64> {
    if rel_tol <= 0.0 {
        return Err(Error::Range(format!("rel_tol {rel_tol} must be positive")));
    }
    integrate_radial(f, Radius::new(a)?, None, &[], rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebraic_tails_in_the_log_gap() {
        for (alpha, exact) in [(2.0, 1.0), (1.5, 2.0), (3.0, 0.5)] {
            let v = integrate_log_gap(|r: Radius| (1.0 + r.log_gap()).powf(-alpha), Radius::ZERO, None, &[], 1e-10).unwrap();
            assert!((v - exact).abs() < 1e-8 * exact, "alpha={alpha}: {v}");
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-13).unwrap();
        assert!(v.abs() < 1e-13, "{v}");
        let v = integrate(|x| x.powi(6), -1.0, 1.0, 1e-13).unwrap();
        assert!(close(v, 2.0 / 7.0, 1e-13));
    }

    #[test]
    fn constant_on_unit_interval() {
        let v = integrate_improper(|_| 1.0, 0.0, 1e-10).unwrap();
        assert!(close(v, 1.0, 1e-10), "{v}");
    }

    #[test]
    fn log_squared_tail_in_log_gap_form() {
        // f(s) = 1/((1-s) log^2(e/(1-s))) has du-density 1/(1+u)^2
        let v = integrate_log_gap(|r| (1.0 + r.log_gap()).powi(-2), Radius::ZERO, None, &[], 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn mass_far_from_the_start_is_found() {
        let x = 1e6;
        let v = integrate_improper(|r| r.s().powf(x), 0.0, 1e-10).unwrap();
        assert!(close(v, 1.0 / (x + 1.0), 1e-8), "{v}");
        let z = integrate_improper(|_| 0.0, 0.0, 1e-10).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn harmonic_tail_is_infinite() {
        let v = integrate_improper(|r| 1.0 / r.gap(), 0.0, 1e-10).unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn origin_singularities() {
        // ∫_0^1/2 s^{-1/2} ds = sqrt(2)
        let half = Radius::new(0.5).unwrap();
        let v = integrate_radial(|r| r.s().powf(-0.5), Radius::ZERO, Some(half), &[], 1e-10).unwrap();
        assert!(close(v, 2f64.sqrt(), 1e-8), "{v}");
        let v = integrate_radial(|r| 1.0 / r.s(), Radius::ZERO, Some(half), &[], 1e-10).unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn infinite_values_on_a_set_of_positive_measure() {
        let v = integrate_improper(|r| if r.s() > 0.3 && r.s() < 0.4 { f64::INFINITY } else { 1.0 }, 0.0, 1e-10)
            .unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn breakpoints_make_step_integrals_exact() {
        let brk = [Radius::new(0.3).unwrap().log_gap()];
        let v = integrate_radial(|r| if r.s() < 0.3 { 2.0 } else { 0.0 }, Radius::ZERO, None, &brk, 1e-12).unwrap();
        assert!(close(v, 0.6, 1e-12), "{v}");
    }
}
