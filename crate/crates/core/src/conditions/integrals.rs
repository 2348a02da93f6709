//! Radial integrals shared by the condition evaluators, all taken in the
//! log-gap variable.

use rayon::prelude::*;

use crate::error::Result;
use crate::numerics::ext;
use crate::numerics::grid::Radius;
use crate::numerics::quad;
use crate::weights::RadialWeight;

pub const REL_TOL: f64 = 1e-10;

/// Sorted union of the weights' jump locations.
pub fn merged_breaks(weights: &[&RadialWeight]) -> Vec<f64> {
    let mut b: Vec<f64> = weights.iter().flat_map(|w| w.breaks().iter().copied()).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `du`-density of `(ω/(sν))^{p'} sν ds`, i.e. `ω^{p'} (sν)^{1-p'}` per unit `s`.
///
/// Both factors are taken as `du`-densities; the expression is homogeneous of
/// degree one, so the gap factors combine exactly. Where `ν` vanishes and `ω`
/// does not the density is `+∞`.
pub fn h_density<'a>(omega: &'a RadialWeight, nu: &'a RadialWeight, p: f64) -> impl Fn(Radius) -> f64 + Sync + 'a {
    let pc = ext::conjugate(p);
    // in logs: both densities may underflow together far out
    move |r| {
        let lw = omega.ln_du_density(r);
        let ln = nu.ln_s_du_density(r);
        if lw == f64::NEG_INFINITY {
            0.0
        } else if ln == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (pc * lw + (1.0 - pc) * ln).exp()
        }
    }
}

/// `h(r)^{p'} = ∫_r^1 (ω/(sν))^{p'} sν ds`.
pub fn h_power(omega: &RadialWeight, nu: &RadialWeight, p: f64, r: Radius) -> Result<f64> {
    quad::integrate_log_gap(h_density(omega, nu, p), r, None, &merged_breaks(&[omega, nu]), REL_TOL)
}

/// `du`-density of `s η(s) / ŵ(s)^e ds`.
pub fn eta_over_tail<'a>(
    omega: &'a RadialWeight,
    eta: &'a RadialWeight,
    e: f64,
) -> impl Fn(Radius) -> f64 + Sync + 'a {
    move |r| {
        let num = eta.s_du_density(r);
        if num == 0.0 {
            return 0.0;
        }
        match omega.tail_at(r) {
            Ok(t) => num * (-e * t.ln()).exp(),
            Err(_) => f64::NAN,
        }
    }
}

/// `∫_lo^hi g du` between consecutive grid nodes, plus the range beyond the
/// last node, with prefix (`∫_0^{r_k}`) and suffix (`∫_{r_k}^1`) sums.
#[derive(Debug, Clone)]
pub struct NodeIntegrals {
    pub pieces: Vec<f64>,
    pub prefix: Vec<f64>,
    pub suffix: Vec<f64>,
}

pub fn node_integrals<G>(g: G, nodes: &[Radius], breaks: &[f64], with_tail: bool) -> Result<NodeIntegrals>
where
    G: Fn(Radius) -> f64 + Sync,
{
    let n = nodes.len();
    let head = if nodes[0].log_gap() > 0.0 {
        quad::integrate_log_gap(&g, Radius::ZERO, Some(nodes[0]), breaks, REL_TOL)?
    } else {
        0.0
    };
    let pieces = (0..n.saturating_sub(1))
        .into_par_iter()
        .map(|k| quad::integrate_log_gap(&g, nodes[k], Some(nodes[k + 1]), breaks, REL_TOL))
        .collect::<Result<Vec<_>>>()?;
    let tail = if with_tail {
        Some(quad::integrate_log_gap(&g, nodes[n - 1], None, breaks, REL_TOL)?)
    } else {
        None
    };
    let mut prefix = Vec::with_capacity(n);
    let mut acc = head;
    prefix.push(acc);
    for &p in &pieces {
        acc += p;
        prefix.push(acc);
    }
    let mut suffix = vec![0.0; n];
    if let Some(t) = tail {
        let mut acc = t;
        suffix[n - 1] = acc;
        for k in (0..n - 1).rev() {
            acc += pieces[k];
            suffix[k] = acc;
        }
    }
    Ok(NodeIntegrals {
        pieces,
        prefix,
        suffix,
    })
}

/// `x^{1/e}` on extended reals.
pub fn root(x: f64, e: f64) -> f64 {
    ext::pow(x, 1.0 / e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::RadialGrid;

    #[test]
    fn prefix_and_suffix_sums() {
        let grid = RadialGrid::new(10, 4).unwrap();
        let w = RadialWeight::one();
        let ni = node_integrals(|r| w.du_density(r), grid.nodes(), &[], true).unwrap();
        for (k, r) in grid.nodes().iter().enumerate() {
            assert!((ni.prefix[k] - r.s()).abs() < 1e-13);
            assert!((ni.suffix[k] - r.gap()).abs() < 1e-13 * r.gap().max(1e-3));
        }
    }

    #[test]
    fn h_is_infinite_where_nu_vanishes() {
        let omega = RadialWeight::one();
        let nu = crate::weights::make_counterexample_nu(&omega, 2.0).unwrap();
        let h = h_power(&omega, &nu, 2.0, Radius::new(0.9).unwrap()).unwrap();
        assert!(h.is_infinite());
        // ω = ν ≡ 1, p = 2: ∫_r^1 ds/s = log(1/r)
        let h = h_power(&omega, &omega, 2.0, Radius::new(0.3).unwrap()).unwrap();
        assert!((h - (1.0f64 / 0.3).ln()).abs() < 1e-10);
    }
}
