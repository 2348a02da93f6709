//! The averaging operator, its nontangential version, and Lebesgue-type norms
//! of fields.

use num_complex::Complex64;

use crate::conditions::h_power;
use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::{PolarGrid, Radius};
use crate::numerics::quad;
use crate::weights::RadialWeight;

use super::field::{FieldKind, RadialFunctionField};

pub(crate) const REL_TOL: f64 = 1e-10;
/// Level-set integrands jump, so they are integrated more loosely.
const LEVEL_REL_TOL: f64 = 1e-8;
const MAXIMAL_REL_TOL: f64 = 1e-6;

/// Radial samples of `Γ(z)` before refinement; angles use one more.
pub const GAMMA_RADII: usize = 32;
const GAMMA_REFINEMENTS: usize = 2;
const GAMMA_STABLE: f64 = 1e-3;
/// Depth of the radial sampling toward the vertex: the last radius sits at
/// `|z| (1 - 2^-GAMMA_DEPTH)`.
const GAMMA_DEPTH: f64 = 30.0;

fn merged(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn ray_point(z: Complex64) -> Result<(Radius, f64)> {
    let (s, theta) = z.to_polar();
    if s == 0.0 {
        return Err(Error::Origin);
    }
    Ok((Radius::new(s)?, theta))
}

/// `e^{a + b}` for log-magnitudes, with `0 · ∞ = 0`.
fn exp_sum(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        0.0
    } else {
        (a + b).exp()
    }
}

/// `T_ω f(z) = ŵ(z)^{-1} ∫_{|z|}^1 f(s z/|z|) ω(s) ds`.
pub fn apply_t(omega: &RadialWeight, f: &RadialFunctionField, z: Complex64) -> Result<Complex64> {
    let (r, theta) = ray_point(z)?;
    let top = omega.tail_at(r)?;
    if let FieldKind::Constant(c) = f.kind() {
        return Ok(Complex64::new(*c, 0.0));
    }
    let breaks = merged(&f.radial_breaks(), omega.breaks());
    if f.is_nonnegative() {
        let v = quad::integrate_log_gap(
            |s| exp_sum(f.ln_abs_polar(s, theta), omega.ln_du_density(s)),
            r,
            None,
            &breaks,
            REL_TOL,
        )?;
        return Ok(Complex64::new(ext::div(v, top), 0.0));
    }
    let part = |pick: fn(Complex64) -> f64| {
        quad::integrate_log_gap(
            |s| ext::mul(pick(f.eval_polar(s, theta)), omega.du_density(s)),
            r,
            None,
            &breaks,
            REL_TOL,
        )
    };
    Ok(Complex64::new(part(|c| c.re)?, part(|c| c.im)?) / top)
}

/// `sup_{Γ(z)} |f|` over a radius × angle sampling of
/// `Γ(z) = {ξ : |arg z - arg ξ| < (1 - |ξ|/|z|)/2}`, refined until stable.
pub fn nontangential_max(f: &RadialFunctionField, z: Complex64, samples: usize) -> f64 {
    let (s, theta) = z.to_polar();
    if s == 0.0 {
        return f.abs_polar(Radius::ZERO, 0.0);
    }
    let sample = |n: usize| {
        let m = n + 1;
        let mut best: f64 = 0.0;
        for i in 0..n {
            // geometric clustering at the vertex: 1 - ρ/|z| = 2^{-depth·i/(n-1)}
            let delta = (-(GAMMA_DEPTH * i as f64 / (n - 1).max(1) as f64) * std::f64::consts::LN_2).exp();
            let rho = s * (1.0 - delta);
            let half = 0.5 * delta;
            let Ok(rr) = Radius::new(rho) else { continue };
            for j in 0..m {
                let phi = theta + half * (2.0 * (j as f64 + 1.0) / (m as f64 + 1.0) - 1.0);
                best = best.max(f.abs_polar(rr, phi));
            }
        }
        best
    };
    let mut n = samples.max(2);
    let mut best = sample(n);
    for _ in 0..GAMMA_REFINEMENTS {
        n = 2 * n - 1;
        let next = sample(n);
        let stable = (next - best).abs() <= GAMMA_STABLE * next.abs();
        best = best.max(next);
        if stable {
            break;
        }
    }
    best
}

/// `T_ω (N f)(z)` with the nontangential maximal function sampled along the ray.
pub fn apply_tn(omega: &RadialWeight, f: &RadialFunctionField, z: Complex64) -> Result<f64> {
    let (r, theta) = ray_point(z)?;
    let top = omega.tail_at(r)?;
    if let FieldKind::Constant(c) = f.kind() {
        return Ok(*c);
    }
    let v = quad::integrate_log_gap(
        |s| {
            let w = omega.du_density(s);
            if w == 0.0 {
                return 0.0;
            }
            ext::mul(nontangential_max(f, Complex64::from_polar(s.s(), theta), GAMMA_RADII), w)
        },
        r,
        None,
        &merged(&f.radial_breaks(), omega.breaks()),
        MAXIMAL_REL_TOL,
    )?;
    Ok(ext::div(v, top))
}

/// `‖f‖_{L^p_ν} = (2 ∫_0^1 M_p^p(s, f) ν(s) s ds)^{1/p}` with `dA = dx dy / π`.
pub fn lp_norm(f: &RadialFunctionField, nu: &RadialWeight, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must be positive")));
    }
    let breaks = merged(&f.radial_breaks(), nu.breaks());
    let integrand = |s: Radius| {
        let ln_nu = nu.ln_s_du_density(s);
        if f.is_radial() {
            let l = f.ln_abs_polar(s, 0.0);
            exp_sum(if l == f64::NEG_INFINITY { l } else { p * l }, ln_nu)
        } else {
            let m = f.angular_mean_pow(s, p);
            exp_sum(m.ln(), ln_nu)
        }
    };
    let v = quad::integrate_log_gap(integrand, Radius::ZERO, None, &breaks, REL_TOL)?;
    Ok(ext::pow(2.0 * v, 1.0 / p))
}

/// `η({|g| > λ})` with the normalized area measure.
pub fn level_set_measure(g: &RadialFunctionField, eta: &RadialWeight, lambda: f64) -> Result<f64> {
    let breaks = merged(&g.radial_breaks(), eta.breaks());
    let v = quad::integrate_log_gap(
        |s| {
            let fr = g.angular_fraction_above(s, lambda);
            if fr == 0.0 {
                0.0
            } else {
                fr * eta.s_du_density(s)
            }
        },
        Radius::ZERO,
        None,
        &breaks,
        LEVEL_REL_TOL,
    )?;
    Ok(2.0 * v)
}

/// `sup_λ λ η({|g| > λ})^{1/p}` over the given levels.
pub fn weak_quasinorm(g: &RadialFunctionField, eta: &RadialWeight, p: f64, lambdas: &[f64]) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must be positive")));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Range("levels must be positive".into()));
    }
    let mut best: f64 = 0.0;
    for &l in lambdas {
        best = best.max(ext::mul(l, ext::pow(level_set_measure(g, eta, l)?, 1.0 / p)));
    }
    Ok(best)
}

/// `count` levels log-spaced over `[1e-6, 1e6] · scale`.
pub fn default_lambda_grid(scale: f64, count: usize) -> Vec<f64> {
    let n = count.max(2);
    (0..n)
        .map(|k| scale * 10f64.powf(-6.0 + 12.0 * k as f64 / (n - 1) as f64))
        .collect()
}

/// `f_r(z) = (ω(|z|)/(|z| ν(|z|)))^{p'/p} χ_{|z| ≥ r}`.
///
/// The field is returned even when `h(r) ∈ {0, ∞}`; see
/// [`RadialFunctionField::degeneracy`].
pub fn extremal_fr(omega: &RadialWeight, nu: &RadialWeight, p: f64, r: f64, grid: PolarGrid) -> Result<RadialFunctionField> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must exceed 1")));
    }
    let h = h_power(omega, nu, p, Radius::new(r)?)?;
    Ok(RadialFunctionField::extremal(grid, omega.clone(), nu.clone(), p, r, h))
}

/// `λ_{r,t} = ∫_r^1 (ω/(sν))^{p'} sν ds / ŵ(t)`.
pub fn lambda_rt(omega: &RadialWeight, nu: &RadialWeight, p: f64, r: f64, t: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must exceed 1")));
    }
    if !(t <= r) {
        return Err(Error::Domain(format!("need t <= r, got t = {t}, r = {r}")));
    }
    let h = h_power(omega, nu, p, Radius::new(r)?)?;
    Ok(ext::div(h, omega.tail(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::RadialGrid;

    fn grid() -> PolarGrid {
        PolarGrid::new(RadialGrid::new(10, 2).unwrap(), 16).unwrap()
    }

    fn modulus() -> RadialFunctionField {
        RadialFunctionField::radial(grid(), "|z|", vec![], |r| r.s())
    }

    #[test]
    fn constants_are_fixed() {
        let c = RadialFunctionField::constant(grid(), 3.5).unwrap();
        let w = RadialWeight::power_log(0.5, 1.0).unwrap();
        let z = Complex64::from_polar(0.7, 1.0);
        assert_eq!(apply_t(&w, &c, z).unwrap().re, 3.5);
        let one = RadialFunctionField::radial(grid(), "1", vec![], |_| 1.0);
        assert!((apply_t(&w, &one, z).unwrap().re - 1.0).abs() < 1e-12);
        assert!(matches!(apply_t(&w, &c, Complex64::new(0.0, 0.0)), Err(Error::Origin)));
    }

    #[test]
    fn modulus_average_for_unit_weight() {
        let w = RadialWeight::one();
        for r in [0.1, 0.5, 0.99] {
            let v = apply_t(&w, &modulus(), Complex64::from_polar(r, 2.0)).unwrap();
            assert!((v.re - (1.0 + r) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_integrates_the_tail() {
        let w = RadialWeight::power_log(2.0, 0.0).unwrap();
        let f = RadialFunctionField::annulus(grid(), 0.6, 0.999_999).unwrap();
        for r in [0.3, 0.8] {
            let v = apply_t(&w, &f, Complex64::from_polar(r, 0.5)).unwrap().re;
            let exact = (w.tail(0.6f64.max(r)).unwrap() - w.tail(0.999_999).unwrap()) / w.tail(r).unwrap();
            assert!((v - exact).abs() < 1e-10 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn maximal_function_of_the_modulus() {
        let f = modulus();
        let z = Complex64::from_polar(0.8, 1.0);
        let n = nontangential_max(&f, z, GAMMA_RADII);
        assert!(n < 0.8 && n > 0.8 * (1.0 - 1e-6), "{n}");
        let c = RadialFunctionField::constant(grid(), 2.0).unwrap();
        assert_eq!(nontangential_max(&c, z, GAMMA_RADII), 2.0);
        // a thin sector around the ray
        let ray = RadialFunctionField::step_function(
            grid(),
            vec![super::super::field::StepRect::new(0.0, 0.5, 0.999, 0.002, 4.0).unwrap()],
        )
        .unwrap();
        assert_eq!(nontangential_max(&ray, z, GAMMA_RADII), 4.0);
    }

    #[test]
    fn maximal_average_dominates() {
        let w = RadialWeight::monomial(1.0).unwrap();
        let f = RadialFunctionField::step_function(
            grid(),
            vec![super::super::field::StepRect::new(0.2, 0.9, 1.0, 0.5, 1.0).unwrap()],
        )
        .unwrap();
        let z = Complex64::from_polar(0.5, 1.2);
        let t = apply_t(&w, &f, z).unwrap().re;
        let tn = apply_tn(&w, &f, z).unwrap();
        assert!(tn >= t - 1e-9, "{tn} < {t}");
        let c = RadialFunctionField::constant(grid(), 1.0).unwrap();
        assert_eq!(apply_tn(&w, &c, z).unwrap(), 1.0);
    }

    #[test]
    fn lp_norm_examples() {
        let one = RadialFunctionField::constant(grid(), 1.0).unwrap();
        assert!((lp_norm(&one, &RadialWeight::one(), 2.0).unwrap() - 1.0).abs() < 1e-12);
        let nu = RadialWeight::monomial(1.0).unwrap();
        for p in [0.5, 1.0, 3.0] {
            assert!((lp_norm(&one, &nu, p).unwrap() - (2.0f64 / 3.0).powf(1.0 / p)).abs() < 1e-12);
        }
        let ann = RadialFunctionField::annulus(grid(), 0.2, 0.7).unwrap();
        let v = lp_norm(&ann, &nu, 2.0).unwrap();
        assert!((v - (2.0 * (0.7f64.powi(3) - 0.2f64.powi(3)) / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weak_quasinorm_of_an_indicator() {
        let eta = RadialWeight::one();
        let ann = RadialFunctionField::annulus(grid(), 0.2, 0.7).unwrap();
        let v = weak_quasinorm(&ann, &eta, 2.0, &default_lambda_grid(1.0 - 1e-9, 25)).unwrap();
        let exact = (0.49f64 - 0.04).sqrt();
        assert!((v - exact).abs() < 1e-7, "{v} vs {exact}");
        let zero = RadialFunctionField::constant(grid(), 0.0).unwrap();
        assert_eq!(weak_quasinorm(&zero, &eta, 2.0, &default_lambda_grid(1.0, 5)).unwrap(), 0.0);
    }

    #[test]
    fn extremal_function_and_lambda() {
        let one = RadialWeight::one();
        let f = extremal_fr(&one, &one, 2.0, 0.4, grid()).unwrap();
        let v = f.eval_polar(Radius::new(0.5).unwrap(), 0.0).re;
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(f.eval_polar(Radius::new(0.3).unwrap(), 0.0).re, 0.0);
        let l = lambda_rt(&one, &one, 2.0, 0.4, 0.2).unwrap();
        assert!((l - (1.0f64 / 0.4).ln() / 0.8).abs() < 1e-10);
        // ‖f_r‖^p = 2 h^{p'}
        let n = lp_norm(&f, &one, 2.0).unwrap();
        assert!((n * n - 2.0 * (1.0f64 / 0.4).ln()).abs() < 1e-9);
        let nu = crate::weights::make_counterexample_nu(&one, 2.0).unwrap();
        assert!(lambda_rt(&one, &nu, 2.0, 0.4, 0.2).unwrap().is_infinite());
    }
}
