use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::Radius;

use super::RadialWeight;

/// Stop adding levels once the target tail is this small or the gap this deep.
const MIN_LEVEL_TAIL: f64 = 1e-290;
const MAX_LEVEL_LOG_GAP: f64 = 700.0;
const MAX_LEVELS: usize = 5000;

/// `ν(t) = ω(t)/t · Σ_n χ_[r_{2n}, r_{2n+1})(t)` where `ŵ(r_n) = K^-n ŵ(0)`.
///
/// Beyond the last stored level the indicator is replaced by its average
/// density `K / (K + 1)`.
#[derive(Debug, Clone)]
pub struct Oscillating {
    base: RadialWeight,
    k: f64,
    /// `r_0 = 0, r_1, …, r_L`.
    levels: Vec<Radius>,
    level_log_gaps: Vec<f64>,
    /// Base tails at the levels.
    level_tails: Vec<f64>,
    breaks: Vec<f64>,
}

impl Oscillating {
    pub fn new(base: RadialWeight, k: f64) -> Result<Self> {
        if !(k > 1.0 && k.is_finite()) {
            return Err(Error::Domain(format!("K = {k} must exceed 1")));
        }
        let top = base.tail_at(Radius::ZERO)?;
        if !top.is_finite() {
            return Err(Error::Domain(format!("base tail at 0 is {top}")));
        }
        let mut levels = vec![Radius::ZERO];
        let mut level_tails = vec![top];
        for n in 1..=MAX_LEVELS {
            let target = top * k.powi(-(n as i32));
            if target < MIN_LEVEL_TAIL {
                break;
            }
            let prev = levels[levels.len() - 1];
            let r = match base.level_radius(prev, target) {
                Ok(r) => r,
                Err(Error::Domain(_)) => break,
                Err(e) => return Err(e),
            };
            if r.log_gap() > MAX_LEVEL_LOG_GAP || r.log_gap() <= prev.log_gap() {
                break;
            }
            levels.push(r);
            level_tails.push(base.tail_at(r)?);
        }
        let level_log_gaps: Vec<f64> = levels.iter().map(|r| r.log_gap()).collect();
        let mut breaks: Vec<f64> = level_log_gaps[1..].to_vec();
        breaks.extend_from_slice(base.breaks());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(Oscillating {
            base,
            k,
            levels,
            level_log_gaps,
            level_tails,
            breaks,
        })
    }

    pub fn base(&self) -> &RadialWeight {
        &self.base
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn levels(&self) -> &[Radius] {
        &self.levels
    }

    /// Limiting fraction of base mass that is switched on.
    pub fn density_factor(&self) -> f64 {
        self.k / (self.k + 1.0)
    }

    pub(crate) fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    fn band(&self, r: Radius) -> usize {
        self.level_log_gaps.partition_point(|&u| u <= r.log_gap()) - 1
    }

    /// Indicator value at `r`, the density factor past the last level.
    pub fn indicator(&self, r: Radius) -> f64 {
        let n = self.band(r);
        if n + 1 == self.levels.len() {
            self.density_factor()
        } else if n % 2 == 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Whether `r` lies in a band where `ν` vanishes.
    pub fn in_gap(&self, r: Radius) -> bool {
        self.indicator(r) == 0.0
    }

    pub(crate) fn density(&self, r: Radius) -> f64 {
        ext::mul(self.indicator(r), ext::div(self.base.density(r), r.s()))
    }

    pub(crate) fn du_density(&self, r: Radius) -> f64 {
        ext::mul(self.indicator(r), ext::div(self.base.du_density(r), r.s()))
    }

    pub(crate) fn s_du_density(&self, r: Radius) -> f64 {
        ext::mul(self.indicator(r), self.base.du_density(r))
    }

    pub(crate) fn ln_du_density(&self, r: Radius) -> f64 {
        self.indicator(r).ln() + self.base.ln_du_density(r) - r.s().ln()
    }

    pub(crate) fn ln_s_du_density(&self, r: Radius) -> f64 {
        self.indicator(r).ln() + self.base.ln_du_density(r)
    }

    /// `∫_t^1 s ν(s) ds = ∫_t^1 ω χ`, assembled from base tails.
    pub(crate) fn first_moment(&self, t: Radius) -> Result<f64> {
        let last = self.levels.len() - 1;
        let n = self.band(t);
        if n == last {
            return Ok(self.density_factor() * self.base.tail_at(t)?);
        }
        let mut acc = 0.0;
        if n % 2 == 0 {
            acc += self.base.mass_between(t, Some(self.levels[n + 1]))?;
        }
        let mut m = n + 1;
        while m < last {
            if m % 2 == 0 {
                acc += self.level_tails[m] - self.level_tails[m + 1];
            }
            m += 1;
        }
        acc += self.density_factor() * self.level_tails[last];
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_for_the_constant_weight() {
        let o = Oscillating::new(RadialWeight::one(), 2.0).unwrap();
        for (n, r) in o.levels().iter().enumerate().take(60) {
            assert!((r.gap() - 0.5f64.powi(n as i32)).abs() <= 1e-13 * r.gap(), "level {n}");
        }
        assert!(o.levels().len() > 900);
    }

    #[test]
    fn switched_off_on_odd_bands() {
        let o = Oscillating::new(RadialWeight::one(), 2.0).unwrap();
        assert_eq!(o.density(Radius::new(0.25).unwrap()), 4.0);
        assert_eq!(o.density(Radius::new(0.6).unwrap()), 0.0);
        assert!((o.density(Radius::new(0.8).unwrap()) - 1.25).abs() < 1e-15);
        assert!(o.density(Radius::ZERO).is_infinite());
    }

    #[test]
    fn first_moment_against_closed_form() {
        let o = Oscillating::new(RadialWeight::one(), 2.0).unwrap();
        // ∫_0^1 ω χ = Σ_n 2^{-2n}/2 = 2/3
        assert!((o.first_moment(Radius::ZERO).unwrap() - 2.0 / 3.0).abs() < 1e-13);
        let t = Radius::new(0.6).unwrap();
        assert!((o.first_moment(t).unwrap() - (2.0 / 3.0) / 4.0).abs() < 1e-13);
    }
}
