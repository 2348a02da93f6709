//! Reproducing kernels `B^ν_a(ζ) = Σ (ζ ā)^n / (2 ν_{2n+1})` of `A²_ν` as
//! certified truncated series, and the test-function estimates built on them.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ext;
use crate::numerics::grid::Radius;
use crate::numerics::quad;
use crate::weights::RadialWeight;

/// Highest derivative order whose truncation is certified.
pub const MAX_ORDER: u32 = 4;
pub const MAX_TERMS: usize = 2_000_000;
const CHUNK: usize = 512;
/// Terms inspected by the ratio test.
const RATIO_WINDOW: usize = 64;

/// `j (j-1) ⋯ (j-N+1)`.
pub fn falling(j: usize, n: u32) -> f64 {
    (0..n as usize).map(|i| j.saturating_sub(i) as f64).product()
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSeries {
    #[serde(skip)]
    nu: RadialWeight,
    coefficients: Vec<f64>,
    a_max: f64,
    tol: f64,
    /// Certified bound of `Σ_{n > n_max} n^(N) c_n a_max^n`, indexed by `N`.
    remainders: Vec<f64>,
}

fn coefficient(nu: &RadialWeight, n: usize) -> Result<f64> {
    let m = nu.moment_at(Radius::ZERO, 2.0 * n as f64 + 1.0)?;
    Ok(ext::recip(2.0 * m))
}

/// Ratio-test bound on the tail beyond the last term, `None` if the terms are
/// not yet geometrically decreasing.
fn ratio_remainder(terms: &[f64]) -> Option<f64> {
    if terms.len() < RATIO_WINDOW + 1 {
        return None;
    }
    let w = &terms[terms.len() - RATIO_WINDOW - 1..];
    let mut rho: f64 = 0.0;
    for p in w.windows(2) {
        if !(p[0] > 0.0) {
            return None;
        }
        rho = rho.max(p[1] / p[0]);
    }
    if rho >= 1.0 {
        return None;
    }
    Some(terms[terms.len() - 1] * rho / (1.0 - rho))
}

/// Kernel coefficients `c_n = 1/(2 ν_{2n+1})` up to the first `n_max` at
/// which the tails `Σ_{n>n_max} n^(N) c_n a_max^n` are below `tol` for every
/// `N ≤ MAX_ORDER`.
pub fn build_kernel(nu: &RadialWeight, a_max: f64, tol: f64) -> Result<KernelSeries> {
    if !(a_max > 0.0 && a_max < 1.0) {
        return Err(Error::Domain(format!("a_max = {a_max} must lie in (0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let mut coefficients: Vec<f64> = Vec::new();
    loop {
        let start = coefficients.len();
        if start >= MAX_TERMS {
            return Err(Error::Truncation(format!(
                "more than {MAX_TERMS} terms needed at a_max = {a_max}, tol = {tol:e}"
            )));
        }
        let block = (start..start + CHUNK)
            .into_par_iter()
            .map(|n| coefficient(nu, n))
            .collect::<Result<Vec<_>>>()?;
        coefficients.extend(block);
        let remainders: Option<Vec<f64>> = (0..=MAX_ORDER)
            .map(|order| {
                let terms: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(coefficients.len().saturating_sub(RATIO_WINDOW + 1))
                    .map(|(n, &c)| falling(n, order) * c * a_max.powi(n as i32))
                    .collect();
                ratio_remainder(&terms).filter(|&r| r < tol)
            })
            .collect();
        if let Some(remainders) = remainders {
            return Ok(KernelSeries {
                nu: nu.clone(),
                coefficients,
                a_max,
                tol,
                remainders,
            });
        }
    }
}

impl KernelSeries {
    pub fn nu(&self) -> &RadialWeight {
        &self.nu
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Certified truncation remainder of the `N`-th derivative series at `|a|`
    /// (monotone in `|a|`, so the bound at `a_max` is used).
    pub fn remainder(&self, order: u32, a: f64) -> Result<f64> {
        self.check(order, a)?;
        Ok(self.remainders[order as usize])
    }

    fn check(&self, order: u32, a: f64) -> Result<()> {
        if order > MAX_ORDER {
            return Err(Error::Truncation(format!("derivative order {order} exceeds {MAX_ORDER}")));
        }
        if a > self.a_max * (1.0 + 1e-15) {
            return Err(Error::Radius { a, a_max: self.a_max });
        }
        Ok(())
    }

    /// `(B^ν_a)^(N)(z) = Σ_{j≥N} j^(N) z^{j-N} ā^j c_j`.
    pub fn eval_derivative(&self, order: u32, a: Complex64, z: Complex64) -> Result<Complex64> {
        self.check(order, a.norm())?;
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("|z| = {} is not below 1", z.norm())));
        }
        let ab = a.conj();
        let w = z * ab;
        let n0 = order as usize;
        let mut pow = ab.powu(order);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in n0..self.coefficients.len() {
            acc += pow * (falling(j, order) * self.coefficients[j]);
            pow *= w;
        }
        Ok(acc)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["n", "c_n"])?;
        for (n, c) in self.coefficients.iter().enumerate() {
            w.write_record([n.to_string(), format!("{c:.17e}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn eval_kernel_derivative(k: &KernelSeries, order: u32, a: Complex64, z: Complex64) -> Result<Complex64> {
    k.eval_derivative(order, a, z)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelNormBound {
    /// `∫_0^a dt / (ν̂(t)^{p-1} (1-t)^{p(N+1)})`.
    pub integral: f64,
    /// `1 / (ν̂(a)^{p-1} (1-a)^{p(N+1)-1})`.
    pub upper_bound: f64,
}

/// Size of `‖(B^ν_a)^(N)‖^p_{A^p_ν}` up to constants, for `p ≥ 1`.
pub fn kernel_norm_bound(nu: &RadialWeight, p: f64, order: u32, a: f64) -> Result<KernelNormBound> {
    if !(p >= 1.0) {
        return Err(Error::Range(format!(
            "p = {p}: the kernel norm comparison below p = 1 depends on a weight constant this library does not define"
        )));
    }
    let ra = Radius::new(a)?;
    let e = p * (order as f64 + 1.0);
    // du-density: (1-t)^{1-e} ν̂(t)^{1-p} = exp((e-1)u) ν̂^{1-p}
    let integral = quad::integrate_log_gap(
        |t| match nu.tail_at(t) {
            Ok(tail) => ((e - 1.0) * t.log_gap() + (1.0 - p) * tail.ln()).exp(),
            Err(_) => f64::NAN,
        },
        Radius::ZERO,
        Some(ra),
        nu.breaks(),
        1e-10,
    )?;
    let upper_bound = ((e - 1.0) * ra.log_gap() + (1.0 - p) * nu.tail_at(ra)?.ln()).exp();
    Ok(KernelNormBound { integral, upper_bound })
}

/// Coefficients `b_k`, `k ≥ 0`, of `θ ↦ ŵ(t) T_ω((B^ν_a)^(N))(t e^{iθ}) = Σ_k b_k e^{ikθ}`
/// for real `a ≥ 0`.
pub fn kernel_image_coefficients(
    k: &KernelSeries,
    omega: &RadialWeight,
    order: u32,
    a: f64,
    t: Radius,
) -> Result<Vec<f64>> {
    k.check(order, a)?;
    let n0 = order as usize;
    let c = k.coefficients();
    (n0..c.len())
        .into_par_iter()
        .map(|j| {
            let m = omega.moment_at(t, (j - n0) as f64)?;
            Ok(ext::mul(falling(j, order) * c[j] * a.powi(j as i32), m))
        })
        .collect()
}

/// `(1/2π) ∫ |Σ_k b_k e^{ikθ}|^q dθ` by the trapezoid rule on `points` angles
/// (evaluated with an FFT).
pub fn angular_mean_q(coeffs: &[f64], q: f64, points: usize) -> f64 {
    let mut buf = vec![Complex64::new(0.0, 0.0); points];
    for (k, &b) in coeffs.iter().enumerate() {
        buf[k % points] += b;
    }
    let fft = FftPlanner::new().plan_fft_inverse(points);
    fft.process(&mut buf);
    buf.iter().map(|v| v.norm().powf(q)).sum::<f64>() / points as f64
}

/// Smallest power of two `≥ max(16, 2·len)`.
pub fn default_angular_points(len: usize) -> usize {
    (2 * len).max(16).next_power_of_two()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Lemma4Bound {
    pub lhs: f64,
    pub rhs: f64,
    pub angular_points: usize,
}

/// `ŵ(t)^q M_q^q(t, T_ω((B^ν_a)^(N)))` against its lower-bound shape, using a
/// prebuilt kernel certified at `|a|`.
pub fn lemma4_with_kernel(
    k: &KernelSeries,
    omega: &RadialWeight,
    q: f64,
    order: u32,
    a: f64,
    t: f64,
    angular_points: Option<usize>,
) -> Result<Lemma4Bound> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q = {q} must be positive")));
    }
    if order == 0 || a < 1.0 - 1.0 / (2.0 * order as f64) || a >= 1.0 {
        return Err(Error::Domain(format!(
            "need N >= 1 and 1 - 1/(2N) <= |a| < 1, got N = {order}, |a| = {a}"
        )));
    }
    let rt = Radius::new(t)?;
    let ra = Radius::new(a)?;
    let coeffs = kernel_image_coefficients(k, omega, order, a, rt)?;
    let points = angular_points.unwrap_or_else(|| default_angular_points(coeffs.len()));
    let lhs = angular_mean_q(&coeffs, q, points);
    let w_hat = if t <= a { omega.tail_at(ra)? } else { omega.tail_at(rt)? };
    let denom = k.nu().tail_at(ra)?.powf(q) * ra.gap().powf(q * (order as f64 + 1.0) - 1.0);
    Ok(Lemma4Bound {
        lhs,
        rhs: w_hat.powf(q) / denom,
        angular_points: points,
    })
}

/// Builds the kernel at `a_max = |a|` and evaluates [`lemma4_with_kernel`].
///
/// `ν` is expected to be doubling; that is not re-checked here.
pub fn lemma4_lower_bound(
    omega: &RadialWeight,
    nu: &RadialWeight,
    q: f64,
    order: u32,
    a: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let k = build_kernel(nu, a, 1e-9)?;
    let b = lemma4_with_kernel(&k, omega, q, order, a, t, None)?;
    Ok((b.lhs, b.rhs))
}
