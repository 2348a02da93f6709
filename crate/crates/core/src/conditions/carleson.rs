//! The Fubini identity behind the Carleson-measure characterization, the
//! Carleson-square ratio and the self-improvement of `D_p`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::{RadialGrid, Radius};
use crate::numerics::profile::{ConditionProfile, Verdict};
use crate::numerics::quad;
use crate::weights::RadialWeight;

use super::integrals::{merged_breaks, REL_TOL};
use super::sup::d_p;

/// Both sides of
/// `∫_a^1 ŵ^{p-1} ω (∫_0^t ν s/ŵ^p) dt = ŵ(a)^p/p ∫_0^a ν s/ŵ^p + (1/p) ∫_a^1 ν s`,
/// each computed on its own.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CarlesonSides {
    pub lhs: f64,
    pub rhs: f64,
    /// `∫_a^1 s ν`.
    pub nu_mass: f64,
}

const CHECKPOINT_STEP: f64 = 0.5;
const CHECKPOINTS: usize = 1500;
/// Past this tail level the densities are subnormal and quadrature stalls.
const TINY_TAIL: f64 = 1e-280;

/// `du`-density of `ν(s) s (ŵ(t)/ŵ(s))^p` for a fixed `ln ŵ(t)`.
fn scaled_density<'a>(omega: &'a RadialWeight, nu: &'a RadialWeight, p: f64, ln_top: f64) -> impl Fn(Radius) -> f64 + Sync + 'a {
    move |s| {
        let ln = nu.ln_s_du_density(s);
        if ln == f64::NEG_INFINITY {
            return 0.0;
        }
        match omega.tail_at(s) {
            Ok(w) => (ln + p * (ln_top - w.ln())).exp(),
            Err(_) => f64::NAN,
        }
    }
}

pub fn carleson_sides(omega: &RadialWeight, nu: &RadialWeight, p: f64, a: f64) -> Result<CarlesonSides> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must be positive")));
    }
    let ra = Radius::new(a)?;
    let breaks = merged_breaks(&[omega, nu]);
    let ln_tail = |t: Radius| omega.tail_at(t).map(f64::ln);
    // H(t) = ŵ(t)^p ∫_0^t ν s/ŵ^p stays bounded where the unscaled integral
    // overflows
    let h_from = |lo: Radius, h_lo: f64, t: Radius, brk: &[f64]| -> Result<f64> {
        let top = ln_tail(t)?;
        let piece = quad::integrate_log_gap(scaled_density(omega, nu, p, top), lo, Some(t), brk, REL_TOL * 0.1)?;
        let carried = if h_lo == 0.0 { 0.0 } else { h_lo * (p * (top - ln_tail(lo)?)).exp() };
        Ok(carried + piece)
    };
    let h_a = h_from(Radius::ZERO, 0.0, ra, &breaks)?;

    // checkpoints at the jumps and on a uniform u-lattice keep every inner
    // quadrature short
    let u_a = ra.log_gap();
    let level = |w: &RadialWeight| w.level_radius(ra, TINY_TAIL).map_or(f64::INFINITY, |r| r.log_gap());
    let u_end = level(omega).min(level(nu));
    let mut cps: Vec<f64> = breaks.iter().copied().filter(|&u| u > u_a && u <= u_end).collect();
    cps.extend(
        (0..=CHECKPOINTS)
            .map(|k| u_a + CHECKPOINT_STEP * k as f64)
            .take_while(|&u| u <= u_end),
    );
    cps.sort_by(f64::total_cmp);
    cps.dedup();
    let steps: Vec<Result<(f64, f64)>> = cps
        .par_windows(2)
        .map(|w| {
            let (lo, hi) = (Radius::from_log_gap(w[0]), Radius::from_log_gap(w[1]));
            let top = ln_tail(hi)?;
            let piece = quad::integrate_log_gap(scaled_density(omega, nu, p, top), lo, Some(hi), &[], REL_TOL * 0.1)?;
            Ok(((p * (top - ln_tail(lo)?)).exp(), piece))
        })
        .collect();
    let mut h_cp = Vec::with_capacity(cps.len());
    let mut acc = h_a;
    h_cp.push(acc);
    for st in steps {
        match st {
            Ok((decay, piece)) if (acc * decay + piece).is_finite() => acc = acc * decay + piece,
            _ => break,
        }
        h_cp.push(acc);
    }
    cps.truncate(h_cp.len());
    let (u_cut, h_cut) = (cps[cps.len() - 1], h_cp[h_cp.len() - 1]);
    let h_at = |t: Radius| -> Result<f64> {
        let i = cps.partition_point(|&u| u <= t.log_gap()).max(1) - 1;
        h_from(Radius::from_log_gap(cps[i]), h_cp[i], t, &[])
    };
    let outer_breaks: Vec<f64> = breaks.iter().copied().filter(|&u| u < u_cut).collect();

    // ∫_a^1 ŵ^{p-1} ω G = ∫_a^1 (ω/ŵ) H
    let lhs = quad::integrate_log_gap(
        |t| {
            let lw = omega.ln_du_density(t);
            if lw == f64::NEG_INFINITY {
                return 0.0;
            }
            let Ok(w) = omega.tail_at(t) else {
                // ŵ has underflowed, and ω with it
                return 0.0;
            };
            match h_at(t) {
                Ok(h) => (lw - w.ln()).exp() * h,
                Err(_) => f64::NAN,
            }
        },
        ra,
        Some(Radius::from_log_gap(u_cut)),
        &outer_breaks,
        REL_TOL,
    )?;
    // past the cut ν contributes nothing and H(t) = H(u_cut) (ŵ(t)/ŵ(u_cut))^p,
    // so the rest of the outer integral is H(u_cut)/p
    let lhs = lhs + h_cut / p;

    let nu_mass = nu.moment_at(ra, 1.0)?;
    let rhs = (h_a + nu_mass) / p;
    Ok(CarlesonSides { lhs, rhs, nu_mass })
}

/// `|LHS - RHS| / RHS` of the Fubini identity at radius `a`.
pub fn carleson_identity_residual(omega: &RadialWeight, nu: &RadialWeight, p: f64, a: f64) -> Result<f64> {
    let s = carleson_sides(omega, nu, p, a)?;
    Ok((s.lhs - s.rhs).abs() / s.rhs)
}

/// `μ_{p,ω,ν}(S(a)) / ν(S(a))` for the sector `|arg z - arg a| < (1-|a|)/2`,
/// `|z| ≥ |a|`; the angular widths cancel and the radial part of `μ` is the
/// nested left-hand side of the identity.
pub fn carleson_ratio(omega: &RadialWeight, nu: &RadialWeight, p: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("a = {a} must lie in (0, 1)")));
    }
    let s = carleson_sides(omega, nu, p, a)?;
    Ok(ext::div(s.lhs, s.nu_mass))
}

/// `p · (carleson_ratio - 1/p)` over the grid nodes (the origin excluded);
/// equals the `D_p` profile.
pub fn carleson_profile(omega: &RadialWeight, nu: &RadialWeight, p: f64, grid: &RadialGrid) -> Result<ConditionProfile> {
    let values = grid
        .nodes()
        .par_iter()
        .map(|&r| {
            if r.s() == 0.0 {
                return Ok(0.0);
            }
            let s = carleson_sides(omega, nu, p, r.s())?;
            Ok(p * (ext::div(s.lhs, s.nu_mass) - 1.0 / p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionProfile::from_values(grid.nodes(), grid.node_levels(), values))
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfImproveReport {
    pub p: f64,
    pub eps: f64,
    #[serde(rename = "Dp")]
    pub dp: f64,
    #[serde(rename = "DpMinusEps")]
    pub dp_minus_eps: f64,
    /// `p / (p - ε(1 + D_p))`.
    pub upper_factor: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub sandwich_ok: bool,
}

/// Relative slack allowed for quadrature error.
pub const SANDWICH_SLACK: f64 = 0.01;

/// Checks `D_p ≤ D_{p-ε} ≤ p/(p - ε(1+D_p)) · D_p` on the grid.
///
/// The lower inequality holds node by node, the upper one for the suprema.
pub fn self_improve_check(
    omega: &RadialWeight,
    nu: &RadialWeight,
    p: f64,
    eps: f64,
    grid: &RadialGrid,
) -> Result<SelfImproveReport> {
    let dp_prof = d_p(omega, nu, p, grid)?;
    let dp = match dp_prof.verdict {
        Verdict::Bounded { sup_estimate } => sup_estimate.max(dp_prof.sup()),
        v => return Err(Error::Range(format!("D_p is not bounded ({v})"))),
    };
    let eps_max = p / (dp + 1.0);
    if !(eps > 0.0 && eps < eps_max) {
        return Err(Error::Range(format!("eps = {eps} is outside the admissible interval (0, {eps_max})")));
    }
    let lower_prof = d_p(omega, nu, p - eps, grid)?;
    let dp_minus_eps = match lower_prof.verdict {
        Verdict::Bounded { sup_estimate } => sup_estimate.max(lower_prof.sup()),
        _ => f64::INFINITY,
    };
    let upper_factor = p / (p - eps * (1.0 + dp));
    let lower_ok = dp_prof
        .values
        .iter()
        .zip(&lower_prof.values)
        .all(|(a, b)| *b >= *a * (1.0 - SANDWICH_SLACK));
    let upper_ok = dp_minus_eps <= upper_factor * dp * (1.0 + SANDWICH_SLACK);
    Ok(SelfImproveReport {
        p,
        eps,
        dp,
        dp_minus_eps,
        upper_factor,
        lower_ok,
        upper_ok,
        sandwich_ok: lower_ok && upper_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_vanishes_at_origin() {
        let w = RadialWeight::power_log(1.0, 0.0).unwrap();
        let nu = RadialWeight::monomial(2.0).unwrap();
        let s = carleson_sides(&w, &nu, 1.5, 0.0).unwrap();
        assert!((s.rhs - s.nu_mass / 1.5).abs() < 1e-15);
        assert!((s.lhs - s.rhs).abs() / s.rhs < 1e-8);
    }

    #[test]
    fn constant_weights_p1_closed_form() {
        let one = RadialWeight::one();
        let a: f64 = 0.5;
        // RHS: (1-a) ∫_0^a s/(1-s) ds + (1-a²)/2
        let exact = (1.0 - a) * (-(1.0 - a).ln() - a) + (1.0 - a * a) / 2.0;
        let s = carleson_sides(&one, &one, 1.0, a).unwrap();
        assert!((s.rhs - exact).abs() < 1e-12);
        assert!(carleson_identity_residual(&one, &one, 1.0, a).unwrap() < 1e-8);
    }

    #[test]
    fn ratio_matches_dp() {
        let one = RadialWeight::one();
        let grid = RadialGrid::new(6, 2).unwrap();
        let c = carleson_profile(&one, &one, 2.0, &grid).unwrap();
        let d = d_p(&one, &one, 2.0, &grid).unwrap();
        for (x, y) in c.values.iter().zip(&d.values).skip(1) {
            assert!((x - y).abs() < 1e-7 * y.max(1e-3), "{x} vs {y}");
        }
        let r = carleson_ratio(&one, &one, 2.0, 1e-6).unwrap();
        assert!((r - 0.5).abs() < 1e-6);
    }

    #[test]
    fn sandwich_constant_weights() {
        let one = RadialWeight::one();
        let rep = self_improve_check(&one, &one, 2.0, 0.5, &RadialGrid::new(30, 4).unwrap()).unwrap();
        assert!(rep.sandwich_ok, "{rep:?}");
        assert!(matches!(
            self_improve_check(&one, &one, 2.0, 1.5, &RadialGrid::new(30, 4).unwrap()),
            Err(Error::Range(_))
        ));
    }
}
