//! Lower bounds for the strong and weak operator norms from explicit test
//! functions.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::integrals::{eta_over_tail, h_density, merged_breaks, node_integrals, REL_TOL};
use crate::conditions::h_power;
use crate::error::{Error, Result};
use crate::kernels::{angular_mean_q, build_kernel, default_angular_points, kernel_image_coefficients};
use crate::numerics::ext;
use crate::numerics::grid::{PolarGrid, RadialGrid, Radius};
use crate::numerics::quad;
use crate::weights::WeightTriple;

use super::apply::{apply_t, extremal_fr, lp_norm};
use super::field::{RadialFunctionField, StepRect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    StrongLower,
    WeakLower,
}

/// A certified lower bound for an operator norm and the test function
/// parameters attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub kind: NormKind,
    pub value: f64,
    pub family: String,
    pub maximizer: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum TestFamily {
    /// `f ≡ 1`.
    Constants,
    /// `(ω/(sν))^{p'-1} χ_{[r,1)}` over the grid radii.
    MuckenhouptTest,
    /// `(B^ν_a)^{(N)}` for `a` in [`KERNEL_RADII`].
    KernelDerivatives { order: u32 },
    /// Random nonnegative step functions.
    RandomSteps { seed: u64, count: usize },
}

impl TestFamily {
    pub fn tag(&self) -> String {
        match self {
            TestFamily::Constants => "constants".into(),
            TestFamily::MuckenhouptTest => "muckenhoupt".into(),
            TestFamily::KernelDerivatives { order } => format!("kernel(N={order})"),
            TestFamily::RandomSteps { seed, count } => format!("random_steps(seed={seed},count={count})"),
        }
    }
}

pub const KERNEL_RADII: [f64; 4] = [0.3, 0.5, 0.7, 0.8];
const KERNEL_TOL: f64 = 1e-10;
const KERNEL_NORM_TOL: f64 = 1e-6;

/// A polar grid for fields whose samples are never needed.
fn scratch_grid() -> PolarGrid {
    PolarGrid::new(RadialGrid::new(1, 1).expect("valid"), 16).expect("valid")
}

struct Candidate {
    value: f64,
    family: String,
    maximizer: BTreeMap<String, f64>,
}

fn one_param(name: &str, v: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([(name.to_string(), v)])
}

/// `‖T_ω f_r‖_{L^p_η} / ‖f_r‖_{L^p_ν}` for the Muckenhoupt test function
/// `f_r = (ω/(sν))^{p'-1} χ_{[r,1)}`, by direct quadrature.
///
/// `T_ω f_r(s) = h(max(s, r))^{p'} / ŵ(s)`, so with `H = h(r)^{p'}` the ratio
/// is `((H^p ∫_0^r ηs/ŵ^p + ∫_r^1 (h(s)^{p'}/ŵ(s))^p ηs) / H)^{1/p}`.
pub fn muckenhoupt_ratio(triple: &WeightTriple, p: f64, r: f64) -> Result<f64> {
    let WeightTriple { omega, nu, eta } = triple;
    let rr = Radius::new(r)?;
    let h = h_power(omega, nu, p, rr)?;
    let breaks = merged_breaks(&[omega, nu, eta]);
    let a = quad::integrate_log_gap(eta_over_tail(omega, eta, p), Radius::ZERO, Some(rr), &breaks, REL_TOL)?;
    let b = lower_tail(outer_image_density(triple, p), rr, &breaks)?;
    Ok(muckenhoupt_combine(h, a, b, p))
}

/// Log-gap where a tail that fails to converge is cut off.
const TRUNCATION_GAP: f64 = 600.0;

/// `∫_from^1 g` for `g ≥ 0`, or the integral up to `TRUNCATION_GAP` when the
/// full tail does not converge (slowly divergent images). Either way a lower
/// bound for the true value.
fn lower_tail<G: Fn(Radius) -> f64 + Sync>(g: G, from: Radius, breaks: &[f64]) -> Result<f64> {
    match quad::integrate_log_gap(&g, from, None, breaks, REL_TOL) {
        Err(Error::NonConvergence(_)) if from.log_gap() < TRUNCATION_GAP => {
            quad::integrate_log_gap(&g, from, Some(Radius::from_log_gap(TRUNCATION_GAP)), breaks, REL_TOL)
        }
        Err(Error::NonConvergence(_)) => Ok(0.0),
        other => other,
    }
}

fn muckenhoupt_combine(h: f64, a: f64, b: f64, p: f64) -> f64 {
    if !(h > 0.0 && h.is_finite()) {
        return f64::NAN;
    }
    ((h.powf(p) * a + b) / h).powf(1.0 / p)
}

/// `du`-density of `(h(s)^{p'} / ŵ(s))^p s η(s)`.
fn outer_image_density(triple: &WeightTriple, p: f64) -> impl Fn(Radius) -> f64 + Sync + '_ {
    let WeightTriple { omega, nu, eta } = triple;
    move |s| {
        let le = eta.ln_s_du_density(s);
        if le == f64::NEG_INFINITY {
            return 0.0;
        }
        match (h_power(omega, nu, p, s), omega.tail_at(s)) {
            (Ok(h), Ok(w)) => {
                if h == 0.0 {
                    0.0
                } else {
                    (p * (h.ln() - w.ln()) + le).exp()
                }
            }
            // tails underflowed: truncating here keeps a lower bound
            (Err(Error::NonPositiveTail { value, .. }), _) | (_, Err(Error::NonPositiveTail { value, .. }))
                if value == 0.0 =>
            {
                0.0
            }
            _ => f64::NAN,
        }
    }
}

fn muckenhoupt_family(triple: &WeightTriple, p: f64, grid: &RadialGrid) -> Result<Option<Candidate>> {
    let WeightTriple { omega, nu, eta } = triple;
    let nodes = grid.nodes();
    let hb = merged_breaks(&[omega, nu]);
    let h = node_integrals(h_density(omega, nu, p), nodes, &hb, true)?;
    let a = node_integrals(eta_over_tail(omega, eta, p), nodes, &merged_breaks(&[omega, eta]), false)?;
    let bb = merged_breaks(&[omega, nu, eta]);
    let image = outer_image_density(triple, p);
    let mut b = node_integrals(&image, nodes, &bb, false)?;
    let mut acc = lower_tail(&image, nodes[nodes.len() - 1], &bb)?;
    for k in (0..nodes.len()).rev() {
        if k + 1 < nodes.len() {
            acc += b.pieces[k];
        }
        b.suffix[k] = acc;
    }
    let mut best: Option<Candidate> = None;
    for k in 1..nodes.len() {
        let v = muckenhoupt_combine(h.suffix[k], a.prefix[k], b.suffix[k], p);
        if v.is_nan() {
            continue;
        }
        if best.as_ref().is_none_or(|c| v > c.value) {
            best = Some(Candidate {
                value: v,
                family: TestFamily::MuckenhouptTest.tag(),
                maximizer: one_param("r", nodes[k].s()),
            });
        }
    }
    Ok(best)
}

fn constants_family(triple: &WeightTriple, p: f64) -> Result<Option<Candidate>> {
    let one = RadialFunctionField::constant(scratch_grid(), 1.0)?;
    let num = lp_norm(&one, &triple.eta, p)?;
    let den = lp_norm(&one, &triple.nu, p)?;
    Ok((den > 0.0 && den.is_finite()).then(|| Candidate {
        value: num / den,
        family: TestFamily::Constants.tag(),
        maximizer: BTreeMap::new(),
    }))
}

/// The rectangles of the `index`-th random step function for `seed`.
pub fn random_step_rects(seed: u64, index: usize) -> Vec<StepRect> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..0.95);
            let b = a + (0.999 - a) * rng.gen_range(0.05..1.0);
            let theta = rng.gen_range(0.0..TAU);
            let width = rng.gen_range(0.1..=TAU);
            let amp = rng.gen_range(0.1..2.0);
            StepRect::new(a, b, theta, width, amp).expect("sampled inside the admissible ranges")
        })
        .collect()
}

/// `‖T_ω f‖_{L^p_η} / ‖f‖_{L^p_ν}` for a step function `f`.
pub fn step_ratio(triple: &WeightTriple, p: f64, rects: &[StepRect]) -> Result<f64> {
    let f = RadialFunctionField::step_function(scratch_grid(), rects.to_vec())?;
    let den = lp_norm(&f, &triple.nu, p)?;
    let tf = RadialFunctionField::step_image(scratch_grid(), triple.omega.clone(), rects.to_vec());
    let num = lp_norm(&tf, &triple.eta, p)?;
    Ok(if den > 0.0 && den.is_finite() { num / den } else { f64::NAN })
}

fn random_steps_family(triple: &WeightTriple, p: f64, seed: u64, count: usize) -> Result<Option<Candidate>> {
    let vals = (0..count)
        .into_par_iter()
        .map(|i| step_ratio(triple, p, &random_step_rects(seed, i)).map(|v| (i, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, v)| Candidate {
            value: v,
            family: TestFamily::RandomSteps { seed, count }.tag(),
            maximizer: one_param("index", i as f64),
        }))
}

/// `‖T_ω (B^ν_a)^(N)‖_{L^p_η} / ‖(B^ν_a)^(N)‖_{L^p_ν}` with the image norm
/// taken from the angular means of the image coefficients.
pub fn kernel_ratio(triple: &WeightTriple, p: f64, order: u32, a: f64) -> Result<f64> {
    let WeightTriple { omega, nu, eta } = triple;
    let k = Arc::new(build_kernel(nu, a, KERNEL_TOL)?);
    let f = RadialFunctionField::kernel_derivative(scratch_grid(), k.clone(), order, a)?;
    let den = lp_norm(&f, nu, p)?;
    let num = quad::integrate_log_gap(
        |t| {
            let le = eta.ln_s_du_density(t);
            if le == f64::NEG_INFINITY {
                return 0.0;
            }
            let (Ok(b), Ok(w)) = (kernel_image_coefficients(&k, omega, order, a, t), omega.tail_at(t)) else {
                return f64::NAN;
            };
            let m = angular_mean_q(&b, p, default_angular_points(b.len()));
            if m == 0.0 {
                0.0
            } else {
                (m.ln() - p * w.ln() + le).exp()
            }
        },
        Radius::ZERO,
        None,
        &merged_breaks(&[omega, eta]),
        KERNEL_NORM_TOL,
    )?;
    Ok(ext::pow(2.0 * num, 1.0 / p) / den)
}

fn kernel_family(triple: &WeightTriple, p: f64, order: u32) -> Result<Option<Candidate>> {
    let mut best: Option<Candidate> = None;
    for a in KERNEL_RADII {
        let v = kernel_ratio(triple, p, order, a)?;
        if !v.is_nan() && best.as_ref().is_none_or(|c| v > c.value) {
            best = Some(Candidate {
                value: v,
                family: TestFamily::KernelDerivatives { order }.tag(),
                maximizer: BTreeMap::from([("a".to_string(), a), ("N".to_string(), order as f64)]),
            });
        }
    }
    Ok(best)
}

/// Largest `‖T_ω f‖_{L^p_η}/‖f‖_{L^p_ν}` over the requested families: a lower
/// bound for `‖T_ω‖_{L^p_ν → L^p_η}`.
pub fn estimate_strong_norm(
    triple: &WeightTriple,
    p: f64,
    families: &[TestFamily],
    grid: &RadialGrid,
) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must exceed 1")));
    }
    let mut best: Option<Candidate> = None;
    for fam in families {
        let c = match *fam {
            TestFamily::Constants => constants_family(triple, p)?,
            TestFamily::MuckenhouptTest => muckenhoupt_family(triple, p, grid)?,
            TestFamily::KernelDerivatives { order } => kernel_family(triple, p, order)?,
            TestFamily::RandomSteps { seed, count } => random_steps_family(triple, p, seed, count)?,
        };
        if let Some(c) = c {
            if best.as_ref().is_none_or(|b| c.value > b.value) {
                best = Some(c);
            }
        }
    }
    let c = best.ok_or_else(|| Error::Degenerate("every test function has zero or infinite norm".into()))?;
    Ok(NormEstimate {
        kind: NormKind::StrongLower,
        value: c.value,
        family: c.family,
        maximizer: c.maximizer,
    })
}

/// `λ_{r,t} (2∫_t^r sη)^{1/p} / ‖f_r‖_{L^p_ν}` computed through the operator:
/// `λ = T_ω f_r(t)`, the annulus measure and the norm of `f_r` by [`lp_norm`].
pub fn weak_pipeline_value(triple: &WeightTriple, p: f64, t: f64, r: f64) -> Result<f64> {
    if !(0.0 < t && t <= r) {
        return Err(Error::Domain(format!("need 0 < t <= r, got t = {t}, r = {r}")));
    }
    let g = scratch_grid();
    let f = extremal_fr(&triple.omega, &triple.nu, p, r, g.clone())?;
    let lambda = apply_t(&triple.omega, &f, Complex64::new(t, 0.0))?.re;
    let measure = lp_norm(&RadialFunctionField::annulus(g, t, r)?, &triple.eta, 1.0)?;
    let norm = lp_norm(&f, &triple.nu, p)?;
    Ok(ext::div(ext::mul(lambda, ext::pow(measure, 1.0 / p)), norm))
}

/// Supremum of [`weak_pipeline_value`] over `(t, r)` pairs: a lower bound for
/// `‖T_ω‖_{L^p_ν → L^{p,∞}_η}` up to the constant of the testing argument.
pub fn estimate_weak_norm(triple: &WeightTriple, p: f64, rt_grid: &[(f64, f64)]) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must exceed 1")));
    }
    let vals = rt_grid
        .par_iter()
        .map(|&(t, r)| weak_pipeline_value(triple, p, t, r).map(|v| (t, r, v)))
        .collect::<Result<Vec<_>>>()?;
    let (t, r, v) = vals
        .into_iter()
        .filter(|x| !x.2.is_nan())
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or_else(|| Error::Degenerate("empty (t, r) grid".into()))?;
    Ok(NormEstimate {
        kind: NormKind::WeakLower,
        value: v,
        family: "extremal_fr".into(),
        maximizer: BTreeMap::from([("t".to_string(), t), ("r".to_string(), r)]),
    })
}

/// Pairs `t < r` drawn from the grid nodes beyond the origin.
pub fn default_rt_grid(grid: &RadialGrid) -> Vec<(f64, f64)> {
    let nodes: Vec<f64> = grid.nodes().iter().map(|r| r.s()).filter(|s| *s > 0.0).collect();
    let mut out = Vec::new();
    for (i, &r) in nodes.iter().enumerate() {
        for &t in &nodes[..i] {
            out.push((t, r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{m_p, n_value};
    use crate::weights::RadialWeight;

    #[test]
    fn muckenhoupt_grid_matches_direct_ratio() {
        let t = WeightTriple::constant();
        let grid = RadialGrid::new(8, 2).unwrap();
        let est = estimate_strong_norm(&t, 2.0, &[TestFamily::MuckenhouptTest], &grid).unwrap();
        let r = est.maximizer["r"];
        let direct = muckenhoupt_ratio(&t, 2.0, r).unwrap();
        assert!((direct / est.value - 1.0).abs() < 1e-6, "{direct} vs {}", est.value);
        // the test function attains at least M_p(r)
        let m = m_p(&t.omega, &t.nu, &t.eta, 2.0, &grid).unwrap();
        assert!(est.value >= m.sup() * (1.0 - 1e-9));
        assert!(est.value <= 2.0 * 2f64.sqrt() * m.sup());
    }

    #[test]
    fn image_of_extremal_matches_closed_form() {
        let t = WeightTriple::new(
            RadialWeight::power_log(1.0, 0.0).unwrap(),
            RadialWeight::monomial(0.5).unwrap(),
            RadialWeight::one(),
        );
        let f = extremal_fr(&t.omega, &t.nu, 3.0, 0.6, scratch_grid()).unwrap();
        let h = h_power(&t.omega, &t.nu, 3.0, Radius::new(0.6).unwrap()).unwrap();
        for s in [0.2, 0.6, 0.9] {
            let v = apply_t(&t.omega, &f, Complex64::new(s, 0.0)).unwrap().re;
            let hs = h_power(&t.omega, &t.nu, 3.0, Radius::new(s.max(0.6)).unwrap()).unwrap();
            let exact = hs / t.omega.tail(s).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-9, "s={s}");
        }
        assert!(h > 0.0);
    }

    #[test]
    fn weak_pipeline_equals_n() {
        let t = WeightTriple::new(
            RadialWeight::power_log(0.5, 1.0).unwrap(),
            RadialWeight::monomial(2.0).unwrap(),
            RadialWeight::power_log(1.5, 0.0).unwrap(),
        );
        for (tt, r) in [(0.1, 0.5), (0.5, 0.95), (0.9, 0.999)] {
            let v = weak_pipeline_value(&t, 2.5, tt, r).unwrap();
            let n = n_value(&t.omega, &t.nu, &t.eta, 2.5, tt, r).unwrap();
            assert!((v / n - 1.0).abs() < 1e-6, "{v} vs {n}");
        }
    }

    #[test]
    fn weak_estimate_edge_cases() {
        let one = RadialWeight::one();
        let zero = WeightTriple::new(one.clone(), one.clone(), RadialWeight::zero());
        let grid = default_rt_grid(&RadialGrid::new(3, 1).unwrap());
        assert_eq!(estimate_weak_norm(&zero, 2.0, &grid).unwrap().value, 0.0);
        let nu = crate::weights::make_counterexample_nu(&one, 2.0).unwrap();
        let ce = WeightTriple::pair(one, nu);
        assert!(estimate_weak_norm(&ce, 2.0, &grid).unwrap().value.is_infinite());
    }

    #[test]
    fn random_steps_are_reproducible() {
        assert_eq!(random_step_rects(7, 3), random_step_rects(7, 3));
        assert_ne!(random_step_rects(7, 3), random_step_rects(7, 4));
        let t = WeightTriple::constant();
        let a = estimate_strong_norm(&t, 2.0, &[TestFamily::RandomSteps { seed: 1, count: 8 }], &RadialGrid::default())
            .unwrap();
        let i = a.maximizer["index"] as usize;
        let again = step_ratio(&t, 2.0, &random_step_rects(1, i)).unwrap();
        assert_eq!(a.value, again);
        assert!(a.value <= 2.0 * 2f64.sqrt() * 1.01);
    }

    #[test]
    fn constants_ratio() {
        let t = WeightTriple::new(RadialWeight::one(), RadialWeight::monomial(1.0).unwrap(), RadialWeight::one());
        let e = estimate_strong_norm(&t, 2.0, &[TestFamily::Constants], &RadialGrid::default()).unwrap();
        assert!((e.value - (1.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kernel_family_is_finite() {
        let t = WeightTriple::constant();
        let v = kernel_ratio(&t, 2.0, 1, 0.5).unwrap();
        assert!(v.is_finite() && v > 0.0 && v <= 2.0 * 2f64.sqrt() * 1.01, "{v}");
    }
}
