//! Radial weights `ω` on `[0, 1)`, their tails `ŵ(r) = ∫_r^1 ω` and moments,
//! class membership tests and the constructed example weights.

mod classify;
mod config;
mod examples;
mod oscillating;
mod tabulated;

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::Radius;
use crate::numerics::quad;

pub use classify::{
    classify_dcheck, classify_dcheck_sweep, classify_dhat, classify_regular, ClassTested,
    DoublingReport, Membership, PROTOCOL,
};
pub use config::{parse_config, parse_weight};
pub use examples::{make_counterexample_nu, make_log_example_triple, WeightTriple};
pub use oscillating::Oscillating;
pub use tabulated::Tabulated;

/// Relative tolerance for tails and moments obtained by quadrature.
pub const TAIL_REL_TOL: f64 = 1e-10;

/// Deepest log-gap searched for tail levels.
const MAX_LOG_GAP: f64 = 740.0;

#[derive(Debug, Clone)]
pub enum Family {
    /// `(1 - s)^a · log(e / (1 - s))^b`.
    PowerLog { a: f64, b: f64 },
    /// `s^c`.
    Monomial { c: f64 },
    /// Base weight divided by `s` and switched off on every other level band.
    Oscillating(Arc<Oscillating>),
    Tabulated(Arc<Tabulated>),
}

/// A radial weight: a family times a nonnegative constant.
#[derive(Debug, Clone)]
pub struct RadialWeight {
    family: Family,
    scale: f64,
}

impl RadialWeight {
    pub fn power_log(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a < -1.0 || (a == -1.0 && b >= -1.0) {
            return Err(Error::Domain(format!(
                "power_log(a={a}, b={b}) is not integrable (need a > -1, or a = -1 and b < -1)"
            )));
        }
        Ok(RadialWeight {
            family: Family::PowerLog { a, b },
            scale: 1.0,
        })
    }

    pub fn monomial(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= -1.0 {
            return Err(Error::Domain(format!("monomial(c={c}) is not integrable")));
        }
        Ok(RadialWeight {
            family: Family::Monomial { c },
            scale: 1.0,
        })
    }

    /// `ω ≡ 1`.
    pub fn one() -> Self {
        RadialWeight {
            family: Family::PowerLog { a: 0.0, b: 0.0 },
            scale: 1.0,
        }
    }

    /// `ω ≡ 0`; only meaningful as `η`, its tail is not positive.
    pub fn zero() -> Self {
        RadialWeight {
            family: Family::PowerLog { a: 0.0, b: 0.0 },
            scale: 0.0,
        }
    }

    pub fn tabulated(t: Tabulated) -> Self {
        RadialWeight {
            family: Family::Tabulated(Arc::new(t)),
            scale: 1.0,
        }
    }

    pub(crate) fn from_oscillating(o: Oscillating) -> Self {
        RadialWeight {
            family: Family::Oscillating(Arc::new(o)),
            scale: 1.0,
        }
    }

    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::Domain(format!("scale {factor} must be finite and nonnegative")));
        }
        self.scale *= factor;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, Family::PowerLog { a, b } if a == 0.0 && b == 0.0)
    }

    pub fn as_oscillating(&self) -> Option<&Oscillating> {
        match &self.family {
            Family::Oscillating(o) => Some(o),
            _ => None,
        }
    }

    /// `ω(r)` for `r ∈ [0, 1)`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        Ok(self.density(Radius::new(r)?))
    }

    /// `ω(s)`; may be `+∞` at the origin for the oscillating construction.
    pub fn density(&self, r: Radius) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let raw = match &self.family {
            Family::PowerLog { a, b } => power_log_density(*a, *b, r),
            Family::Monomial { c } => ext::pow(r.s(), *c),
            Family::Oscillating(o) => o.density(r),
            Family::Tabulated(t) => t.density(r),
        };
        ext::mul(self.scale, raw)
    }

    /// `ω(s) · (1 - s)`: the density of the measure `ω ds` in the log-gap variable.
    pub fn du_density(&self, r: Radius) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let raw = match &self.family {
            Family::PowerLog { a, b } => (-(a + 1.0) * r.log_gap() + b * r.log_gap().ln_1p()).exp(),
            Family::Oscillating(o) => o.du_density(r),
            _ => return ext::mul(self.density(r), r.gap()),
        };
        ext::mul(self.scale, raw)
    }

    /// `s ω(s) (1 - s)`, finite at the origin even when `ω` is not.
    pub fn s_du_density(&self, r: Radius) -> f64 {
        match &self.family {
            Family::Oscillating(o) if self.scale != 0.0 => ext::mul(self.scale, o.s_du_density(r)),
            _ => ext::mul(r.s(), self.du_density(r)),
        }
    }

    /// `ln` of [`Self::du_density`], finite where the density itself underflows.
    pub fn ln_du_density(&self, r: Radius) -> f64 {
        if self.scale == 0.0 {
            return f64::NEG_INFINITY;
        }
        let raw = match &self.family {
            Family::PowerLog { a, b } => -(a + 1.0) * r.log_gap() + b * r.log_gap().ln_1p(),
            Family::Monomial { c } if r.s() > 0.0 => c * r.s().ln() - r.log_gap(),
            Family::Oscillating(o) => o.ln_du_density(r),
            _ => return self.du_density(r).ln(),
        };
        raw + self.scale.ln()
    }

    /// `ln` of [`Self::s_du_density`].
    pub fn ln_s_du_density(&self, r: Radius) -> f64 {
        match &self.family {
            Family::Oscillating(o) if self.scale != 0.0 => o.ln_s_du_density(r) + self.scale.ln(),
            _ => r.s().ln() + self.ln_du_density(r),
        }
    }

    /// Log-gaps where `ω` jumps; quadrature never straddles them.
    pub fn breaks(&self) -> &[f64] {
        match &self.family {
            Family::Oscillating(o) => o.breaks(),
            Family::Tabulated(t) => t.breaks(),
            _ => &[],
        }
    }

    /// Closed-form `ŵ(r)` where the family has one.
    pub fn analytic_tail(&self, r: Radius) -> Option<f64> {
        let raw = match &self.family {
            Family::PowerLog { a, b } => {
                let u = r.log_gap();
                if *b == 0.0 {
                    (-(a + 1.0) * u).exp() / (a + 1.0)
                } else if *a == -1.0 {
                    (1.0 + u).powf(b + 1.0) / -(b + 1.0)
                } else {
                    return None;
                }
            }
            Family::Monomial { c } => one_minus_power(r, c + 1.0) / (c + 1.0),
            Family::Tabulated(t) => t.tail(r),
            Family::Oscillating(_) => return None,
        };
        Some(self.scale * raw)
    }

    /// `ŵ(r)` by adaptive quadrature in the log-gap variable.
    pub fn tail_quadrature(&self, r: Radius) -> Result<f64> {
        if let Family::PowerLog { a, b } = self.family {
            // e^{-(a+1)u} ∫_0^∞ e^{-(a+1)w} (1+u+w)^b dw keeps the scale out of the integrand
            let u = r.log_gap();
            let inner = quad::integrate_log_gap(
                |w| (-(a + 1.0) * w.log_gap() + b * (1.0 + u + w.log_gap()).ln()).exp(),
                Radius::ZERO,
                None,
                &[],
                TAIL_REL_TOL * 0.1,
            )?;
            return Ok(self.scale * (-(a + 1.0) * u).exp() * inner);
        }
        quad::integrate_log_gap(|s| self.du_density(s), r, None, self.breaks(), TAIL_REL_TOL)
    }

    /// `ŵ(r) = ∫_r^1 ω(s) ds`; errors when it is not positive.
    pub fn tail_at(&self, r: Radius) -> Result<f64> {
        let value = match self.analytic_tail(r) {
            Some(v) => v,
            None => self.tail_quadrature(r)?,
        };
        if !(value > 0.0) {
            return Err(Error::NonPositiveTail { r: r.s(), value });
        }
        Ok(value)
    }

    pub fn tail(&self, r: f64) -> Result<f64> {
        self.tail_at(Radius::new(r)?)
    }

    /// `∫_lo^hi ω(s) ds` (`hi = None` meaning 1), zero for an empty range.
    pub fn mass_between(&self, lo: Radius, hi: Option<Radius>) -> Result<f64> {
        if let Some(h) = hi {
            if h.log_gap() <= lo.log_gap() {
                return Ok(0.0);
            }
        }
        if self.analytic_tail(lo).is_some() {
            let t_lo = self.analytic_tail(lo).unwrap_or(0.0);
            let t_hi = hi.and_then(|h| self.analytic_tail(h)).unwrap_or(0.0);
            let diff = t_lo - t_hi;
            // differences of tails lose accuracy when the interval is short
            if diff > 1e-6 * t_lo {
                return Ok(diff);
            }
        }
        quad::integrate_log_gap(|s| self.du_density(s), lo, hi, self.breaks(), TAIL_REL_TOL)
    }

    /// `ω_{t,x} = ∫_t^1 s^x ω(s) ds`.
    pub fn moment(&self, t: f64, x: f64) -> Result<f64> {
        self.moment_at(Radius::new(t)?, x)
    }

    pub fn moment_at(&self, t: Radius, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("moment order {x} must be a finite x >= 0")));
        }
        if x == 0.0 {
            return self.tail_at(t);
        }
        if self.scale == 0.0 {
            return Ok(0.0);
        }
        let closed = match &self.family {
            Family::PowerLog { a, b } if *a == 0.0 && *b == 0.0 => {
                Some(one_minus_power(t, x + 1.0) / (x + 1.0))
            }
            Family::PowerLog { a, b } if *b == 0.0 && t.s() == 0.0 => {
                Some(statrs::function::beta::ln_beta(x + 1.0, a + 1.0).exp())
            }
            Family::Monomial { c } => Some(one_minus_power(t, x + c + 1.0) / (x + c + 1.0)),
            Family::Tabulated(tab) => Some(tab.moment(t, x)),
            Family::Oscillating(o) if x == 1.0 => Some(o.first_moment(t)?),
            _ => None,
        };
        if let Some(v) = closed {
            return Ok(self.scale * v);
        }
        // s^x ω(s) concentrates where x·(1-s) is of order one
        let mut breaks = self.breaks().to_vec();
        breaks.push(x.ln_1p());
        breaks.sort_by(f64::total_cmp);
        quad::integrate_log_gap(
            |s| ext::mul(ext::pow(s.s(), x), self.du_density(s)),
            t,
            None,
            &breaks,
            TAIL_REL_TOL,
        )
    }

    /// Smallest `t ≥ from` with `ŵ(t) ≤ target` (bisection in the log-gap).
    pub fn level_radius(&self, from: Radius, target: f64) -> Result<Radius> {
        if !(target > 0.0) {
            return Err(Error::Domain(format!("tail level {target} must be positive")));
        }
        if self.tail_or_zero(from)? <= target {
            return Ok(from);
        }
        let mut lo = from.log_gap();
        let mut hi = lo + 1.0;
        while self.tail_or_zero(Radius::from_log_gap(hi))? > target {
            if hi >= MAX_LOG_GAP {
                return Err(Error::Domain(format!(
                    "tail does not fall to {target:e} before the gap underflows"
                )));
            }
            lo = hi;
            hi = (2.0 * hi + 1.0).min(MAX_LOG_GAP);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.tail_or_zero(Radius::from_log_gap(mid))? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Radius::from_log_gap(hi))
    }

    fn tail_or_zero(&self, r: Radius) -> Result<f64> {
        match self.tail_at(r) {
            Ok(v) => Ok(v),
            Err(Error::NonPositiveTail { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    /// `ρ_0 = r` and `ρ_n = min{t : ŵ(t) = ŵ(r) K^-n}`, `n = 1..=n_max`.
    pub fn rho_sequence(&self, k: f64, r: f64, n_max: usize) -> Result<Vec<f64>> {
        Ok(self
            .rho_radii(k, Radius::new(r)?, n_max)?
            .iter()
            .map(|x| x.s())
            .collect())
    }

    pub fn rho_radii(&self, k: f64, r: Radius, n_max: usize) -> Result<Vec<Radius>> {
        if !(k > 1.0 && k.is_finite()) {
            return Err(Error::Domain(format!("K = {k} must exceed 1")));
        }
        let top = self.tail_at(r)?;
        let mut out = vec![r];
        let mut prev = r;
        for n in 1..=n_max {
            let target = top * k.powi(-(n as i32));
            prev = self.level_radius(prev, target)?;
            out.push(prev);
        }
        Ok(out)
    }
}

fn power_log_density(a: f64, b: f64, r: Radius) -> f64 {
    let u = r.log_gap();
    let log_part = if b == 0.0 { 1.0 } else { (1.0 + u).powf(b) };
    ext::mul(ext::pow(r.gap(), a), log_part)
}

/// `1 - s^e` without cancellation near `s = 1`.
fn one_minus_power(r: Radius, e: f64) -> f64 {
    if r.s() == 0.0 {
        return 1.0;
    }
    -(e * (-r.gap()).ln_1p()).exp_m1()
}

impl fmt::Display for RadialWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::PowerLog { a, b } => write!(f, "power_log(a={a}, b={b}")?,
            Family::Monomial { c } => write!(f, "monomial(c={c}")?,
            Family::Oscillating(o) => write!(f, "oscillating(K={}, base={}", o.k(), o.base())?,
            Family::Tabulated(t) => match t.source() {
                Some(path) => write!(f, "tabulated(path={path}")?,
                None => write!(f, "tabulated(knots={}", t.len())?,
            },
        }
        if self.scale != 1.0 {
            write!(f, ", scale={}", self.scale)?;
        }
        write!(f, ")")
    }
}

impl Serialize for RadialWeight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
