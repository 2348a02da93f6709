use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::grid::RadialGrid;

use super::{classify_dhat, Membership, Oscillating, RadialWeight};

/// `(ω, ν, η)`.
#[derive(Debug, Clone, Serialize)]
pub struct WeightTriple {
    pub omega: RadialWeight,
    pub nu: RadialWeight,
    pub eta: RadialWeight,
}

impl WeightTriple {
    pub fn new(omega: RadialWeight, nu: RadialWeight, eta: RadialWeight) -> Self {
        WeightTriple { omega, nu, eta }
    }

    /// `η = ν`.
    pub fn pair(omega: RadialWeight, nu: RadialWeight) -> Self {
        WeightTriple {
            eta: nu.clone(),
            omega,
            nu,
        }
    }

    pub fn constant() -> Self {
        Self::pair(RadialWeight::one(), RadialWeight::one())
    }

    pub fn with_eta(&self, eta: RadialWeight) -> Self {
        WeightTriple {
            omega: self.omega.clone(),
            nu: self.nu.clone(),
            eta,
        }
    }
}

/// Weight `ν` with `ν ds` absolutely continuous neither way with respect to
/// `ω ds`, for which analytic boundedness holds but weak boundedness fails.
///
/// `ω` must be doubling; this is checked on a 24-level probe grid.
pub fn make_counterexample_nu(omega: &RadialWeight, k: f64) -> Result<RadialWeight> {
    let grid = RadialGrid::new(24, 4)?;
    let report = classify_dhat(omega, &grid)?;
    if report.verdict == Membership::NotMember {
        return Err(Error::Domain(format!(
            "{omega} is not doubling (ratio verdict {})",
            report.ratio_verdict
        )));
    }
    Ok(RadialWeight::from_oscillating(Oscillating::new(omega.clone(), k)?))
}

/// `ω(s) = s`, `ν = (1-s)^{p-1} L^{2(p-1)}`, `η = (1-s)^{p-1} L^{p-1}` with
/// `L = log(e/(1-s))`: weakly but not strongly bounded.
pub fn make_log_example_triple(p: f64) -> Result<WeightTriple> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p = {p} must exceed 1")));
    }
    Ok(WeightTriple {
        omega: RadialWeight::monomial(1.0)?,
        nu: RadialWeight::power_log(p - 1.0, 2.0 * (p - 1.0))?,
        eta: RadialWeight::power_log(p - 1.0, p - 1.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::Radius;

    #[test]
    fn log_triple_at_p2() {
        let t = make_log_example_triple(2.0).unwrap();
        assert_eq!(t.nu.eval(0.0).unwrap(), 1.0);
        assert_eq!(t.eta.eval(0.0).unwrap(), 1.0);
        let s: f64 = 0.75;
        let l = (std::f64::consts::E / (1.0 - s)).ln();
        assert!((t.nu.eval(s).unwrap() - (1.0 - s) * l * l).abs() < 1e-14);
        assert!((t.omega.eval(s).unwrap() - s).abs() < 1e-15);
    }

    #[test]
    fn counterexample_vanishes_on_gaps_where_omega_does_not() {
        let omega = RadialWeight::one();
        let nu = make_counterexample_nu(&omega, 2.0).unwrap();
        let o = nu.as_oscillating().unwrap();
        for n in 0..20 {
            let lo = o.levels()[2 * n + 1];
            let hi = o.levels()[2 * n + 2];
            let mid = Radius::from_gap(0.5 * (lo.gap() + hi.gap()));
            assert_eq!(nu.density(mid), 0.0);
            assert!(omega.density(mid) > 0.0);
        }
    }

    #[test]
    fn counterexample_first_moment_comparable_to_tail() {
        let omega = RadialWeight::power_log(0.5, 0.0).unwrap();
        let k = 3.0;
        let nu = make_counterexample_nu(&omega, k).unwrap();
        let lower = (1.0 - 1.0 / k) / (1.0 + 1.0 / k) / k;
        for j in 0..10 {
            let t = Radius::from_gap(0.37 * 0.3f64.powi(j));
            let ratio = nu.moment_at(t, 1.0).unwrap() / omega.tail_at(t).unwrap();
            assert!(ratio <= 1.0 + 1e-12 && ratio >= lower, "{ratio}");
        }
    }

    #[test]
    fn rejects_non_doubling_base() {
        // band masses exp(-j²/2): the doubling ratio grows like e^j
        let gaps: Vec<f64> = (0..30).map(|j| 0.5f64.powi(j)).collect();
        let values: Vec<f64> = (0..30)
            .map(|j| (-((j * j) as f64) / 2.0).exp() * 2f64.powi(j + 1))
            .collect();
        let steep = RadialWeight::tabulated(super::super::Tabulated::from_gaps(&gaps, &values).unwrap());
        assert!(make_counterexample_nu(&steep, 2.0).is_err());
    }
}
