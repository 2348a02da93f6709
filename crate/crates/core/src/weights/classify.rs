use serde::Serialize;

use crate::error::Result;
use crate::numerics::grid::{RadialGrid, Radius};
use crate::numerics::profile::{sup_profile, Verdict};

use super::RadialWeight;

/// Certification protocol attached to every report.
pub const PROTOCOL: &str = "ratio probed on the radial grid; Member iff its running extremum moves \
by < 0.1% over the last 8 levels (or its increments are summable); NotMember on a fitted trend \
toward the forbidden limit; otherwise Inconclusive";

/// Reverse-doubling ratios must stay at least this far above 1.
const DCHECK_MIN_RATIO: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassTested {
    Dhat,
    Dcheck,
    Regular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Member,
    NotMember,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub class_tested: ClassTested,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(rename = "C_estimate")]
    pub c_estimate: f64,
    pub max_probe_r: f64,
    pub verdict: Membership,
    /// Diagnosis of the quantity whose boundedness decides membership.
    pub ratio_verdict: Verdict,
    pub protocol: &'static str,
}

fn max_probe(grid: &RadialGrid) -> f64 {
    grid.nodes().last().map_or(0.0, |r| r.s())
}

fn trend_verdict(v: &Verdict, fit: f64) -> Membership {
    match v {
        Verdict::Bounded { .. } => Membership::Member,
        Verdict::Infinite | Verdict::DivergesLog { .. } | Verdict::DivergesPower { .. } => {
            Membership::NotMember
        }
        Verdict::DivergesOther { .. } if fit > 0.99 => Membership::NotMember,
        Verdict::DivergesOther { .. } => Membership::Inconclusive,
    }
}

/// `ŵ(r) ≤ C ŵ((1+r)/2)`.
pub fn classify_dhat(w: &RadialWeight, grid: &RadialGrid) -> Result<DoublingReport> {
    let prof = sup_profile(|r| Ok(w.tail_at(r)? / w.tail_at(r.halfway())?), grid)?;
    Ok(DoublingReport {
        class_tested: ClassTested::Dhat,
        k: None,
        c_estimate: prof.sup().max(1.0),
        max_probe_r: max_probe(grid),
        verdict: trend_verdict(&prof.verdict, prof.fit_quality),
        ratio_verdict: prof.verdict,
        protocol: PROTOCOL,
    })
}

/// `ŵ(r) ≥ C ŵ(1 - (1-r)/K)` with `C > 1`, for the given `K`.
///
/// Decided on `1/(ratio - 1)`, which is bounded exactly when the ratio stays
/// away from 1.
pub fn classify_dcheck(w: &RadialWeight, k: f64, grid: &RadialGrid) -> Result<DoublingReport> {
    let ratio = |r: Radius| -> Result<f64> { Ok(w.tail_at(r)? / w.tail_at(r.toward_one(k))?) };
    let ratios = grid.nodes().iter().map(|&r| ratio(r)).collect::<Result<Vec<_>>>()?;
    let inf = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let prof = sup_profile(
        |r| {
            let q = ratio(r)? - 1.0;
            Ok(if q <= 0.0 { f64::INFINITY } else { 1.0 / q })
        },
        grid,
    )?;
    let verdict = match prof.verdict {
        Verdict::Bounded { sup_estimate } if 1.0 + 1.0 / sup_estimate >= DCHECK_MIN_RATIO => {
            Membership::Member
        }
        Verdict::Bounded { .. } => Membership::Inconclusive,
        ref v => trend_verdict(v, prof.fit_quality),
    };
    Ok(DoublingReport {
        class_tested: ClassTested::Dcheck,
        k: Some(k),
        c_estimate: inf.max(1.0),
        max_probe_r: max_probe(grid),
        verdict,
        ratio_verdict: prof.verdict,
        protocol: PROTOCOL,
    })
}

/// Tries `K ∈ {2, 4, 8}`; returns the first Member report, else the last one.
pub fn classify_dcheck_sweep(w: &RadialWeight, grid: &RadialGrid) -> Result<DoublingReport> {
    let mut last = None;
    for k in [2.0, 4.0, 8.0] {
        let rep = classify_dcheck(w, k, grid)?;
        if rep.verdict == Membership::Member {
            return Ok(rep);
        }
        last = Some(rep);
    }
    Ok(last.expect("the sweep is nonempty"))
}

/// `ŵ(r) ≍ ω(r)(1 - r)`: both the ratio and its reciprocal bounded.
pub fn classify_regular(w: &RadialWeight, grid: &RadialGrid) -> Result<DoublingReport> {
    let vanishes = grid.nodes().iter().any(|&r| w.du_density(r) == 0.0);
    if vanishes {
        return Ok(DoublingReport {
            class_tested: ClassTested::Regular,
            k: None,
            c_estimate: f64::INFINITY,
            max_probe_r: max_probe(grid),
            verdict: Membership::NotMember,
            ratio_verdict: Verdict::Infinite,
            protocol: PROTOCOL,
        });
    }
    let up = sup_profile(|r| Ok(w.tail_at(r)? / w.du_density(r)), grid)?;
    let down = sup_profile(|r| Ok(w.du_density(r) / w.tail_at(r)?), grid)?;
    let verdict = match (trend_verdict(&up.verdict, up.fit_quality), trend_verdict(&down.verdict, down.fit_quality)) {
        (Membership::Member, Membership::Member) => Membership::Member,
        (Membership::NotMember, _) | (_, Membership::NotMember) => Membership::NotMember,
        _ => Membership::Inconclusive,
    };
    // report the diagnosis of whichever side is worse
    let ratio_verdict = if up.verdict.is_bounded() { down.verdict } else { up.verdict };
    Ok(DoublingReport {
        class_tested: ClassTested::Regular,
        k: None,
        c_estimate: up.sup().max(down.sup()).max(1.0),
        max_probe_r: max_probe(grid),
        verdict,
        ratio_verdict,
        protocol: PROTOCOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_counterexample_nu, Tabulated};

    fn grid() -> RadialGrid {
        RadialGrid::default()
    }

    #[test]
    fn constant_weight_is_in_every_class() {
        let w = RadialWeight::one();
        let d = classify_dhat(&w, &grid()).unwrap();
        assert_eq!(d.verdict, Membership::Member);
        assert!((d.c_estimate - 2.0).abs() < 1e-12);
        let c = classify_dcheck(&w, 2.0, &grid()).unwrap();
        assert_eq!(c.verdict, Membership::Member);
        assert!((c.c_estimate - 2.0).abs() < 1e-12);
        let r = classify_regular(&w, &grid()).unwrap();
        assert_eq!(r.verdict, Membership::Member);
        assert!((r.c_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_weights() {
        for a in [-0.5, 0.5, 2.0] {
            let w = RadialWeight::power_log(a, 0.0).unwrap();
            let d = classify_dhat(&w, &grid()).unwrap();
            assert_eq!(d.verdict, Membership::Member);
            assert!((d.c_estimate / 2f64.powf(a + 1.0) - 1.0).abs() < 1e-10);
            let c = classify_dcheck(&w, 3.0, &grid()).unwrap();
            assert_eq!(c.verdict, Membership::Member);
            assert!((c.c_estimate / 3f64.powf(a + 1.0) - 1.0).abs() < 1e-10);
            let r = classify_regular(&w, &grid()).unwrap();
            assert_eq!(r.verdict, Membership::Member);
        }
    }

    #[test]
    fn inverse_log_tail_is_doubling_but_not_reverse_doubling() {
        let w = RadialWeight::tabulated(Tabulated::inverse_log_tail(60).unwrap());
        let d = classify_dhat(&w, &grid()).unwrap();
        assert_eq!(d.verdict, Membership::Member);
        assert!(d.c_estimate <= 1.0 + std::f64::consts::LN_2 + 1e-12);
        let c = classify_dcheck_sweep(&w, &grid()).unwrap();
        assert_eq!(c.verdict, Membership::NotMember, "{:?}", c.ratio_verdict);
    }

    #[test]
    fn oscillating_weight_is_not_regular() {
        let nu = make_counterexample_nu(&RadialWeight::one(), 2.0).unwrap();
        assert_eq!(classify_regular(&nu, &grid()).unwrap().verdict, Membership::NotMember);
    }
}
