//! Supremum-type conditions `M_p`, `D_p`, `N_p`, `M_{p,ε}` and the necessary
//! conditions for `A^p_ν → L^q_η`, as profiles over a radial grid.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::{RadialGrid, Radius};
use crate::numerics::profile::ConditionProfile;
use crate::numerics::quad;
use crate::weights::RadialWeight;

use super::integrals::{eta_over_tail, h_density, merged_breaks, node_integrals, root, NodeIntegrals, REL_TOL};

fn need_p_above_one(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Range(format!("p = {p} must exceed 1")));
    }
    Ok(())
}

fn need_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Range(format!("{name} = {x} must be positive")));
    }
    Ok(())
}

fn tails(w: &RadialWeight, nodes: &[Radius]) -> Result<Vec<f64>> {
    nodes.par_iter().map(|&r| w.tail_at(r)).collect()
}

/// `h(r)^{p'}` at every node.
fn h_at_nodes(omega: &RadialWeight, nu: &RadialWeight, p: f64, grid: &RadialGrid) -> Result<NodeIntegrals> {
    node_integrals(h_density(omega, nu, p), grid.nodes(), &merged_breaks(&[omega, nu]), true)
}

/// `∫_0^r s η / ŵ^e` at every node.
fn eta_prefix(omega: &RadialWeight, eta: &RadialWeight, e: f64, grid: &RadialGrid) -> Result<NodeIntegrals> {
    node_integrals(eta_over_tail(omega, eta, e), grid.nodes(), &merged_breaks(&[omega, eta]), false)
}

/// `∫_r^1 s w` at every node.
fn first_moment_suffix(w: &RadialWeight, grid: &RadialGrid) -> Result<NodeIntegrals> {
    node_integrals(|r| w.s_du_density(r), grid.nodes(), w.breaks(), true)
}

/// `M_p(r) = h(r) · (∫_0^r η s / ŵ^p)^{1/p}`.
pub fn m_p(omega: &RadialWeight, nu: &RadialWeight, eta: &RadialWeight, p: f64, grid: &RadialGrid) -> Result<ConditionProfile> {
    need_p_above_one(p)?;
    let pc = ext::conjugate(p);
    let h = h_at_nodes(omega, nu, p, grid)?;
    let a = eta_prefix(omega, eta, p, grid)?;
    let values = (0..grid.len())
        .map(|k| ext::mul(root(h.suffix[k], pc), root(a.prefix[k], p)))
        .collect();
    Ok(ConditionProfile::from_values(grid.nodes(), grid.node_levels(), values))
}

/// `M_{p,ε}(r) = (ŵ(r)^ε ∫_0^r s η / ŵ^{p+ε})^{1/p} · h(r)`.
pub fn m_p_eps(
    omega: &RadialWeight,
    nu: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    eps: f64,
    grid: &RadialGrid,
) -> Result<ConditionProfile> {
    need_p_above_one(p)?;
    need_positive("eps", eps)?;
    let pc = ext::conjugate(p);
    let h = h_at_nodes(omega, nu, p, grid)?;
    let a = eta_prefix(omega, eta, p + eps, grid)?;
    let w = tails(omega, grid.nodes())?;
    let values = (0..grid.len())
        .map(|k| ext::mul(root(h.suffix[k], pc), root(w[k].powf(eps) * a.prefix[k], p)))
        .collect();
    Ok(ConditionProfile::from_values(grid.nodes(), grid.node_levels(), values))
}

/// `D_p(r) = ŵ(r)^p / (∫_r^1 s ν) · ∫_0^r t ν / ŵ^p`.
pub fn d_p(omega: &RadialWeight, nu: &RadialWeight, p: f64, grid: &RadialGrid) -> Result<ConditionProfile> {
    need_positive("p", p)?;
    let b = eta_prefix(omega, nu, p, grid)?;
    let s = first_moment_suffix(nu, grid)?;
    let w = tails(omega, grid.nodes())?;
    let values = (0..grid.len())
        .map(|k| ext::div((p * w[k].ln()).exp() * b.prefix[k], s.suffix[k]))
        .collect();
    Ok(ConditionProfile::from_values(grid.nodes(), grid.node_levels(), values))
}

/// `N(t, r) = (∫_t^r η s / ŵ(t)^p)^{1/p} · h(r)` by direct quadrature.
pub fn n_value(omega: &RadialWeight, nu: &RadialWeight, eta: &RadialWeight, p: f64, t: f64, r: f64) -> Result<f64> {
    need_p_above_one(p)?;
    if !(t <= r) {
        return Err(Error::Domain(format!("need t <= r, got t = {t}, r = {r}")));
    }
    n_value_at(omega, nu, eta, p, Radius::new(t)?, Radius::new(r)?)
}

pub(crate) fn n_value_at(
    omega: &RadialWeight,
    nu: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    t: Radius,
    r: Radius,
) -> Result<f64> {
    let pc = ext::conjugate(p);
    let mass = quad::integrate_log_gap(|s| eta.s_du_density(s), t, Some(r), eta.breaks(), REL_TOL)?;
    let h = quad::integrate_log_gap(h_density(omega, nu, p), r, None, &merged_breaks(&[omega, nu]), REL_TOL)?;
    let w = omega.tail_at(t)?;
    Ok(ext::mul(root(mass / w.powf(p), p), root(h, pc)))
}

#[derive(Debug, Clone, Serialize)]
pub struct NpProfile {
    pub profile: ConditionProfile,
    /// Maximizing `t` for each `r` node.
    pub t_argmax: Vec<f64>,
    /// Best grid pair `(t, r, N(t, r))`.
    pub best: (f64, f64, f64),
    /// The best pair after golden-section refinement in `t`, then `r`.
    pub refined: Option<(f64, f64, f64)>,
}

/// Golden-section maximization of `f` on `[lo, hi]` in the log-gap variable.
fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// `N_p = sup_{t<r} N(t, r)`: nested grid maximum, then a local refinement.
pub fn n_p(omega: &RadialWeight, nu: &RadialWeight, eta: &RadialWeight, p: f64, grid: &RadialGrid) -> Result<NpProfile> {
    need_p_above_one(p)?;
    let pc = ext::conjugate(p);
    let nodes = grid.nodes();
    let n = nodes.len();
    let h = h_at_nodes(omega, nu, p, grid)?;
    let em = node_integrals(|s| eta.s_du_density(s), nodes, eta.breaks(), false)?;
    let w = tails(omega, nodes)?;
    let rows: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let hr = root(h.suffix[i], pc);
            let mut best = (0.0, 0usize);
            let mut mass = 0.0;
            // ∫_t^r accumulated downward from r avoids differences of prefix sums
            for j in (0..i).rev() {
                mass += em.pieces[j];
                let v = ext::mul(root(mass / w[j].powf(p), p), hr);
                if v > best.0 {
                    best = (v, j);
                }
            }
            best
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let t_argmax = rows.iter().map(|&(_, j)| nodes[j].s()).collect();
    let profile = ConditionProfile::from_values(nodes, grid.node_levels(), values);
    let i = profile.argmax().unwrap_or(0);
    let j = rows[i].1;
    let best = (nodes[j].s(), nodes[i].s(), rows[i].0);
    let refined = if best.2.is_finite() && best.2 > 0.0 && i > 0 {
        let ut_lo = nodes[j.saturating_sub(1)].log_gap();
        let ut_hi = nodes[(j + 1).min(i)].log_gap();
        let r_i = nodes[i];
        let (ut, _) = golden_max(
            |u| n_value_at(omega, nu, eta, p, Radius::from_log_gap(u), r_i),
            ut_lo,
            ut_hi,
            40,
        )?;
        let ur_lo = nodes[i - 1].log_gap().max(ut);
        let ur_hi = nodes[(i + 1).min(n - 1)].log_gap();
        let t = Radius::from_log_gap(ut);
        let (ur, v) = golden_max(|u| n_value_at(omega, nu, eta, p, t, Radius::from_log_gap(u)), ur_lo, ur_hi, 40)?;
        let v0 = best.2;
        Some(if v >= v0 { (t.s(), Radius::from_log_gap(ur).s(), v) } else { best })
    } else {
        None
    };
    Ok(NpProfile {
        profile,
        t_argmax,
        best,
        refined,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessaryPq {
    pub first: ConditionProfile,
    pub second: ConditionProfile,
    /// `inf_r ∫_0^r tη/ŵ^q ÷ (η̂(r)/ŵ(r)^q)` over nodes `r ≥ 1/2`; `None` when `η ≡ 0`.
    pub implication_ratio: Option<f64>,
}

/// Profiles of the two necessary conditions for `T_ω : A^p_ν → L^q_η`.
pub fn necessary_pq(
    omega: &RadialWeight,
    nu: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    q: f64,
    grid: &RadialGrid,
) -> Result<NecessaryPq> {
    need_positive("p", p)?;
    if !(q >= p && q.is_finite()) {
        return Err(Error::Range(format!("need p <= q, got p = {p}, q = {q}")));
    }
    let nodes = grid.nodes();
    let e = q / p;
    let a = eta_prefix(omega, eta, q, grid)?;
    let sn = first_moment_suffix(nu, grid)?;
    let se = first_moment_suffix(eta, grid)?;
    let w = tails(omega, nodes)?;
    let denom: Vec<f64> = (0..nodes.len())
        .map(|k| ((e - 1.0) * -nodes[k].log_gap()).exp() * sn.suffix[k].powf(e))
        .collect();
    let first = (0..nodes.len())
        .map(|k| ext::div((q * w[k].ln()).exp() * a.prefix[k], denom[k]))
        .collect();
    let second = (0..nodes.len()).map(|k| ext::div(se.suffix[k], denom[k])).collect();
    let implication_ratio = if eta.is_zero() {
        None
    } else {
        let mut inf = f64::INFINITY;
        for (k, (j, r)) in grid.node_levels().iter().zip(nodes).enumerate() {
            if *j >= 1 {
                let target = eta.tail_at(*r)? / (q * w[k].ln()).exp();
                inf = inf.min(a.prefix[k] / target);
            }
        }
        Some(inf)
    };
    Ok(NecessaryPq {
        first: ConditionProfile::from_values(nodes, grid.node_levels(), first),
        second: ConditionProfile::from_values(nodes, grid.node_levels(), second),
        implication_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::profile::Verdict;
    use crate::weights::{make_counterexample_nu, make_log_example_triple};

    fn grid() -> RadialGrid {
        RadialGrid::default()
    }

    /// ω = ν ≡ 1: D_p(r) = (1-r)^p/((1-r²)/2) ∫_0^r t/(1-t)^p dt.
    fn dp_constant(p: f64, r: f64) -> f64 {
        let d = 1.0 - r;
        let inner = if p == 1.0 {
            -(d.ln()) - r
        } else if p == 2.0 {
            1.0 / d + d.ln() - 1.0
        } else {
            unreachable!()
        };
        d.powf(p) / ((1.0 - r * r) / 2.0) * inner
    }

    #[test]
    fn dp_constant_weights() {
        let one = RadialWeight::one();
        let prof = d_p(&one, &one, 2.0, &grid()).unwrap();
        for (k, &r) in prof.nodes.iter().enumerate().take(200) {
            let exact = dp_constant(2.0, r);
            assert!((prof.values[k] - exact).abs() <= 1e-8 * exact.max(1e-3), "r={r}");
        }
        match prof.verdict {
            Verdict::Bounded { sup_estimate } => assert!((sup_estimate - 1.0).abs() < 0.02),
            v => panic!("{v}"),
        }
        let prof = d_p(&one, &one, 1.0, &grid()).unwrap();
        match prof.verdict {
            Verdict::DivergesLog { rate } => assert!((rate / std::f64::consts::LN_2 - 1.0).abs() < 0.1),
            v => panic!("{v}"),
        }
    }

    #[test]
    fn mp_constant_weights_is_bounded() {
        let one = RadialWeight::one();
        let prof = m_p(&one, &one, &one, 2.0, &grid()).unwrap();
        // log(1/r)^{1/2} (∫_0^r s/(1-s)^2)^{1/2}
        for (k, &r) in prof.nodes.iter().enumerate().skip(1).take(150) {
            let exact = ((1.0 / r).ln() * (1.0 / (1.0 - r) + (1.0 - r).ln() - 1.0)).sqrt();
            assert!((prof.values[k] / exact - 1.0).abs() < 1e-8, "r={r}");
        }
        assert!(prof.verdict.is_bounded(), "{}", prof.verdict);
    }

    #[test]
    fn log_triple_verdicts() {
        let t = make_log_example_triple(2.0).unwrap();
        let m = m_p(&t.omega, &t.nu, &t.eta, 2.0, &grid()).unwrap();
        match m.verdict {
            Verdict::DivergesOther { level_exponent } => assert!((level_exponent - 0.5).abs() < 0.075, "{level_exponent}"),
            v => panic!("{v}"),
        }
        let n = n_p(&t.omega, &t.nu, &t.eta, 2.0, &grid()).unwrap();
        assert!(n.profile.verdict.is_bounded(), "{}", n.profile.verdict);
        let e = m_p_eps(&t.omega, &t.nu, &t.eta, 2.0, 1.0, &grid()).unwrap();
        assert!(e.verdict.is_bounded(), "{}", e.verdict);
    }

    #[test]
    fn counterexample_verdicts() {
        let omega = RadialWeight::one();
        let nu = make_counterexample_nu(&omega, 2.0).unwrap();
        let m = m_p(&omega, &nu, &nu, 2.0, &grid()).unwrap();
        assert!(m.verdict.is_infinite());
        let n = n_p(&omega, &nu, &nu, 2.0, &grid()).unwrap();
        assert!(n.profile.verdict.is_infinite());
        let d = d_p(&omega, &nu, 2.0, &grid()).unwrap();
        assert!(d.verdict.is_bounded(), "{}", d.verdict);
    }

    #[test]
    fn zero_eta_gives_zero_profiles() {
        let one = RadialWeight::one();
        let zero = RadialWeight::zero();
        let n = n_p(&one, &one, &zero, 2.0, &grid()).unwrap();
        assert!(n.profile.values.iter().all(|&v| v == 0.0));
        let e = m_p_eps(&one, &one, &zero, 2.0, 1.0, &grid()).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_necessary_condition_reduces_to_dp() {
        let omega = RadialWeight::power_log(1.0, 0.0).unwrap();
        let nu = RadialWeight::one();
        let nec = necessary_pq(&omega, &nu, &nu, 2.0, 2.0, &grid()).unwrap();
        let d = d_p(&omega, &nu, 2.0, &grid()).unwrap();
        for (a, b) in nec.first.values.iter().zip(&d.values) {
            assert!((a - b).abs() <= 1e-14 * b.abs());
        }
    }

    #[test]
    fn second_necessary_condition_power_rate() {
        let one = RadialWeight::one();
        let nec = necessary_pq(&one, &one, &one, 2.0, 4.0, &grid()).unwrap();
        match nec.second.verdict {
            Verdict::DivergesPower { exponent } => assert!((exponent - 2.0).abs() < 0.1, "{exponent}"),
            v => panic!("{v}"),
        }
    }

    #[test]
    fn np_pipeline_matches_direct_value() {
        let one = RadialWeight::one();
        let w = RadialWeight::power_log(0.5, 0.0).unwrap();
        let n = n_p(&w, &one, &one, 3.0, &RadialGrid::new(12, 4).unwrap()).unwrap();
        let (t, r, v) = n.best;
        let direct = n_value(&w, &one, &one, 3.0, t, r).unwrap();
        assert!((direct / v - 1.0).abs() < 1e-8);
        let (_, _, vr) = n.refined.unwrap();
        assert!(vr >= v);
    }
}
