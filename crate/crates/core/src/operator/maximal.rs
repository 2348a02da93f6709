//! The two weighted inequalities for the radial maximal function
//! `h*(z) = sup_{0<s<|z|} |h(s z/|z|)|`, checked ray by ray on fields that are
//! piecewise constant in the radius.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::Radius;
use crate::numerics::quad;
use crate::weights::RadialWeight;

use super::apply::REL_TOL;
use super::field::{FieldKind, RadialFunctionField};

/// Allowed relative change of the empirical constants under refinement.
pub const STABILITY_TOL: f64 = 0.2;

/// Left- and right-hand sides along one ray, without the constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RaySides {
    /// `(∫_r^1 h ω)^p`.
    pub lhs1: f64,
    /// `∫_r^1 (h*)^p ŵ^{p-1} ω t dt`.
    pub rhs1: f64,
    /// `∫_r^1 h^q ŵ^{q-1} ω`.
    pub lhs2: f64,
    /// `(∫_r^1 h* ω t dt)^q`.
    pub rhs2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialMaximalCheck {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub r: f64,
    pub rho1: f64,
    /// `K (K-1)^{p-1} / ρ_1`.
    pub c1: f64,
    /// `K^{2q-1} (K-1)^{1-q} / ρ_1^q`.
    pub c2: f64,
    /// Largest `lhs1/rhs1` and `lhs2/rhs2` over the grid rays.
    pub needed1: f64,
    pub needed2: f64,
    /// The same over the rays of the refined grid.
    pub needed1_refined: f64,
    pub needed2_refined: f64,
    pub holds1: bool,
    pub holds2: bool,
    pub stable: bool,
}

/// Pieces `(lo, hi, value)` of `s ↦ |h(s e^{iθ})|` on `[0, 1)`.
fn ray_pieces(field: &RadialFunctionField, theta: f64) -> Result<Vec<(Radius, Option<Radius>, f64)>> {
    if !matches!(field.kind(), FieldKind::StepFunction(_) | FieldKind::Sampled) {
        return Err(Error::Range("the radial maximal check needs a step or sampled field".into()));
    }
    let mut cuts: Vec<Radius> = vec![Radius::ZERO];
    cuts.extend(field.radial_breaks().into_iter().map(Radius::from_log_gap));
    let mut out = Vec::with_capacity(cuts.len());
    for (i, &lo) in cuts.iter().enumerate() {
        let hi = cuts.get(i + 1).copied();
        let mid = match hi {
            Some(h) => Radius::from_log_gap(0.5 * (lo.log_gap() + h.log_gap())),
            None => Radius::from_log_gap(lo.log_gap() + 1.0),
        };
        out.push((lo, hi, field.abs_polar(mid, theta)));
    }
    Ok(out)
}

/// Both sides of the two inequalities along the ray at angle `theta`.
pub fn ray_sides(omega: &RadialWeight, field: &RadialFunctionField, p: f64, q: f64, r: f64, theta: f64) -> Result<RaySides> {
    let rr = Radius::new(r)?;
    let mut i1 = 0.0;
    let mut r1 = 0.0;
    let mut i2 = 0.0;
    let mut r2 = 0.0;
    let mut star: f64 = 0.0;
    for (lo, hi, h) in ray_pieces(field, theta)? {
        star = star.max(h);
        if hi.is_some_and(|x| x.log_gap() <= rr.log_gap()) {
            continue;
        }
        let a = if lo.log_gap() < rr.log_gap() { rr } else { lo };
        let wa = omega.tail_at(a)?;
        let wb = match hi {
            Some(b) => omega.tail_at(b)?,
            None => 0.0,
        };
        if h > 0.0 {
            i1 += h * omega.mass_between(a, hi)?;
            i2 += h.powf(q) * (wa.powf(q) - wb.powf(q)) / q;
        }
        if star > 0.0 {
            let w_pow = quad::integrate_log_gap(
                |s| {
                    let d = omega.s_du_density(s);
                    if d == 0.0 {
                        return 0.0;
                    }
                    match omega.tail_at(s) {
                        Ok(w) => ((p - 1.0) * w.ln()).exp() * d,
                        Err(_) => f64::NAN,
                    }
                },
                a,
                hi,
                omega.breaks(),
                REL_TOL,
            )?;
            r1 += star.powf(p) * w_pow;
            let m = quad::integrate_log_gap(|s| omega.s_du_density(s), a, hi, omega.breaks(), REL_TOL)?;
            r2 += star * m;
        }
    }
    Ok(RaySides {
        lhs1: ext::pow(i1, p),
        rhs1: r1,
        lhs2: i2,
        rhs2: ext::pow(r2, q),
    })
}

fn needed(rays: &[RaySides]) -> (f64, f64) {
    rays.iter().fold((0.0f64, 0.0f64), |(a, b), s| {
        (a.max(ext::div(s.lhs1, s.rhs1)), b.max(ext::div(s.lhs2, s.rhs2)))
    })
}

fn rays_over(omega: &RadialWeight, field: &RadialFunctionField, angles: &[f64], p: f64, q: f64, r: f64) -> Result<Vec<RaySides>> {
    angles.iter().map(|&t| ray_sides(omega, field, p, q, r, t)).collect()
}

/// Checks both inequalities with the constants from the level radii
/// `ρ_n(ω, K, r)`, for `0 < p ≤ 1 ≤ q`.
pub fn radial_maximal_check(
    omega: &RadialWeight,
    field: &RadialFunctionField,
    p: f64,
    q: f64,
    k: f64,
    r: f64,
) -> Result<RadialMaximalCheck> {
    if !(p > 0.0 && p <= 1.0 && q >= 1.0 && q.is_finite()) {
        return Err(Error::Range(format!("need 0 < p <= 1 <= q, got p = {p}, q = {q}")));
    }
    let rho1 = omega.rho_sequence(k, r, 1)?[1];
    let c1 = k * (k - 1.0).powf(p - 1.0) / rho1;
    let c2 = k.powf(2.0 * q - 1.0) * (k - 1.0).powf(1.0 - q) / rho1.powf(q);
    let angles: Vec<f64> = field.grid().angles().collect();
    let (needed1, needed2) = needed(&rays_over(omega, field, &angles, p, q, r)?);
    let fine: Vec<f64> = field.grid().refined().angles().collect();
    let (needed1_refined, needed2_refined) = needed(&rays_over(omega, field, &fine, p, q, r)?);
    let close = |a: f64, b: f64| (a - b).abs() <= STABILITY_TOL * a.max(b) || a.max(b) == 0.0;
    let slack = 1.0 + 1e-9;
    Ok(RadialMaximalCheck {
        p,
        q,
        k,
        r,
        rho1,
        c1,
        c2,
        needed1,
        needed2,
        needed1_refined,
        needed2_refined,
        holds1: needed1.max(needed1_refined) <= c1 * slack,
        holds2: needed2.max(needed2_refined) <= c2 * slack,
        stable: close(needed1, needed1_refined) && close(needed2, needed2_refined),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::{PolarGrid, RadialGrid};
    use crate::operator::field::StepRect;

    fn grid() -> PolarGrid {
        PolarGrid::new(RadialGrid::new(6, 2).unwrap(), 32).unwrap()
    }

    #[test]
    fn annulus_sides_in_closed_form() {
        // ω ≡ 1, h = χ_[0.2, 0.6), r = 0: h* = χ_[0.2, 1)
        let f = RadialFunctionField::annulus(grid(), 0.2, 0.6).unwrap();
        let s = ray_sides(&RadialWeight::one(), &f, 1.0, 2.0, 0.0, 0.3).unwrap();
        assert!((s.lhs1 - 0.4).abs() < 1e-14);
        // ∫_0.2^1 t dt
        assert!((s.rhs1 - 0.48).abs() < 1e-12);
        // ∫_0.2^0.6 (1-t) dt
        assert!((s.lhs2 - 0.24).abs() < 1e-14);
        assert!((s.rhs2 - 0.48f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn inequalities_hold_for_a_step_field() {
        let f = RadialFunctionField::step_function(
            grid(),
            vec![
                StepRect::new(0.1, 0.5, 0.3, 2.0, 1.5).unwrap(),
                StepRect::new(0.4, 0.95, 1.0, 3.0, 0.7).unwrap(),
            ],
        )
        .unwrap();
        let w = RadialWeight::power_log(1.0, 0.0).unwrap();
        for (p, q) in [(0.5, 1.0), (1.0, 2.0)] {
            let c = radial_maximal_check(&w, &f, p, q, 2.0, 0.2).unwrap();
            assert!(c.holds1 && c.holds2 && c.stable, "{c:?}");
        }
        assert!(radial_maximal_check(&w, &f, 1.5, 2.0, 2.0, 0.2).is_err());
    }
}
