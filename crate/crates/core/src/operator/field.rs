//! Functions on the disc sampled on a polar grid, with exact pointwise rules
//! for the structured kinds.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{angular_mean_q, default_angular_points, falling, KernelSeries};
use crate::numerics::ext;
use crate::numerics::grid::{PolarGrid, Radius};
use crate::weights::RadialWeight;

/// `P · χ` of `{r_lo ≤ |z| < r_hi, arg z ∈ [theta, theta + width)}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepRect {
    pub r_lo: f64,
    pub r_hi: f64,
    pub theta: f64,
    pub width: f64,
    pub amp: f64,
}

impl StepRect {
    pub fn new(r_lo: f64, r_hi: f64, theta: f64, width: f64, amp: f64) -> Result<Self> {
        if !(0.0 <= r_lo && r_lo <= r_hi && r_hi < 1.0) {
            return Err(Error::Domain(format!("need 0 <= A <= B < 1, got A = {r_lo}, B = {r_hi}")));
        }
        if !(width >= 0.0 && width <= TAU) {
            return Err(Error::Domain(format!("angular width {width} outside [0, 2π]")));
        }
        if !(amp >= 0.0 && amp.is_finite() && theta.is_finite()) {
            return Err(Error::Domain(format!("amplitude {amp} must be finite and nonnegative")));
        }
        Ok(StepRect { r_lo, r_hi, theta, width, amp })
    }

    /// Full annulus `{r_lo ≤ |z| < r_hi}` with amplitude 1.
    pub fn annulus(r_lo: f64, r_hi: f64) -> Result<Self> {
        Self::new(r_lo, r_hi, 0.0, TAU, 1.0)
    }

    pub fn contains_angle(&self, phi: f64) -> bool {
        self.width >= TAU || (phi - self.theta).rem_euclid(TAU) < self.width
    }

    fn contains_radius(&self, s: f64) -> bool {
        self.r_lo <= s && s < self.r_hi
    }
}

pub type RadialFn = Arc<dyn Fn(Radius) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind {
    Constant(f64),
    /// Piecewise constant between grid radii and angles.
    Sampled,
    StepFunction(Vec<StepRect>),
    /// `T_ω` of a step function, evaluated in closed form from tails.
    StepImage { omega: RadialWeight, rects: Vec<StepRect> },
    /// `(ω/(sν))^{p'/p} χ_{|z| ≥ r}`; `h_power` is `∫_r^1 (ω/(sν))^{p'} sν`.
    ExtremalFr {
        omega: RadialWeight,
        nu: RadialWeight,
        p: f64,
        r: f64,
        h_power: f64,
    },
    /// `(B^ν_a)^{(N)}` for real `a`.
    KernelImage { series: Arc<KernelSeries>, order: u32, a: f64 },
    /// Nonnegative radial function with jumps at the given log-gaps.
    Radial { f: RadialFn, breaks: Vec<f64>, label: String },
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Constant(c) => write!(f, "Constant({c})"),
            FieldKind::Sampled => write!(f, "Sampled"),
            FieldKind::StepFunction(r) => write!(f, "StepFunction({} rects)", r.len()),
            FieldKind::StepImage { omega, rects } => write!(f, "StepImage({omega}, {} rects)", rects.len()),
            FieldKind::ExtremalFr { omega, nu, p, r, .. } => write!(f, "ExtremalFr({omega}, {nu}, p={p}, r={r})"),
            FieldKind::KernelImage { order, a, .. } => write!(f, "KernelImage(N={order}, a={a})"),
            FieldKind::Radial { label, .. } => write!(f, "Radial({label})"),
        }
    }
}

/// Which way the extremal function degenerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Degeneracy {
    ZeroH,
    InfiniteH,
}

#[derive(Debug, Clone)]
pub struct RadialFunctionField {
    grid: PolarGrid,
    kind: FieldKind,
    samples: Arc<OnceLock<Vec<Complex64>>>,
}

impl RadialFunctionField {
    fn with_kind(grid: PolarGrid, kind: FieldKind) -> Self {
        RadialFunctionField {
            grid,
            kind,
            samples: Arc::new(OnceLock::new()),
        }
    }

    pub fn constant(grid: PolarGrid, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("constant field value {c} must be nonnegative")));
        }
        Ok(Self::with_kind(grid, FieldKind::Constant(c)))
    }

    /// Values in row-major order: one row of `grid.angular()` entries per radial node.
    pub fn sampled(grid: PolarGrid, values: Vec<Complex64>) -> Result<Self> {
        let want = grid.radial().len() * grid.angular();
        if values.len() != want {
            return Err(Error::Range(format!("expected {want} samples, got {}", values.len())));
        }
        let f = Self::with_kind(grid, FieldKind::Sampled);
        let _ = f.samples.set(values);
        Ok(f)
    }

    /// Samples `f` at the grid points.
    pub fn from_fn<F: Fn(Complex64) -> Complex64 + Sync>(grid: PolarGrid, f: F) -> Result<Self> {
        let angles: Vec<f64> = grid.angles().collect();
        let values = grid
            .radial()
            .nodes()
            .par_iter()
            .flat_map_iter(|r| angles.iter().map(|&t| f(Complex64::from_polar(r.s(), t))).collect::<Vec<_>>())
            .collect();
        Self::sampled(grid, values)
    }

    pub fn step_function(grid: PolarGrid, rects: Vec<StepRect>) -> Result<Self> {
        for r in &rects {
            StepRect::new(r.r_lo, r.r_hi, r.theta, r.width, r.amp)?;
        }
        Ok(Self::with_kind(grid, FieldKind::StepFunction(rects)))
    }

    /// `χ_{t ≤ |z| < r}`.
    pub fn annulus(grid: PolarGrid, t: f64, r: f64) -> Result<Self> {
        Self::step_function(grid, vec![StepRect::annulus(t, r)?])
    }

    pub fn radial<F>(grid: PolarGrid, label: &str, breaks: Vec<f64>, f: F) -> Self
    where
        F: Fn(Radius) -> f64 + Send + Sync + 'static,
    {
        Self::with_kind(
            grid,
            FieldKind::Radial {
                f: Arc::new(f),
                breaks,
                label: label.to_string(),
            },
        )
    }

    pub fn kernel_derivative(grid: PolarGrid, series: Arc<KernelSeries>, order: u32, a: f64) -> Result<Self> {
        series.remainder(order, a)?;
        Ok(Self::with_kind(grid, FieldKind::KernelImage { series, order, a }))
    }

    pub(crate) fn step_image(grid: PolarGrid, omega: RadialWeight, rects: Vec<StepRect>) -> Self {
        Self::with_kind(grid, FieldKind::StepImage { omega, rects })
    }

    pub(crate) fn extremal(grid: PolarGrid, omega: RadialWeight, nu: RadialWeight, p: f64, r: f64, h_power: f64) -> Self {
        Self::with_kind(grid, FieldKind::ExtremalFr { omega, nu, p, r, h_power })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// Whether values are real and nonnegative by construction.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self.kind, FieldKind::KernelImage { .. } | FieldKind::Sampled)
    }

    pub fn is_radial(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::Constant(_) | FieldKind::ExtremalFr { .. } | FieldKind::Radial { .. }
        )
    }

    pub fn degeneracy(&self) -> Option<Degeneracy> {
        match self.kind {
            FieldKind::ExtremalFr { h_power, .. } if h_power == 0.0 => Some(Degeneracy::ZeroH),
            FieldKind::ExtremalFr { h_power, .. } if h_power.is_infinite() => Some(Degeneracy::InfiniteH),
            _ => None,
        }
    }

    /// Grid samples, row-major by radius (computed on first use).
    pub fn values(&self) -> &[Complex64] {
        self.samples.get_or_init(|| {
            let angles: Vec<f64> = self.grid.angles().collect();
            self.grid
                .radial()
                .nodes()
                .par_iter()
                .flat_map_iter(|&r| angles.iter().map(|&t| self.eval_polar(r, t)).collect::<Vec<_>>())
                .collect()
        })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let (s, t) = z.to_polar();
        Ok(self.eval_polar(Radius::new(s)?, t))
    }

    pub fn eval_polar(&self, r: Radius, theta: f64) -> Complex64 {
        let re = |x: f64| Complex64::new(x, 0.0);
        match &self.kind {
            FieldKind::Constant(c) => re(*c),
            FieldKind::Sampled => {
                let nodes = self.grid.radial().nodes();
                let i = nodes.partition_point(|n| n.log_gap() <= r.log_gap()).max(1) - 1;
                let n = self.grid.angular();
                let j = ((theta.rem_euclid(TAU) / TAU * n as f64).floor() as usize).min(n - 1);
                self.values()[i * n + j]
            }
            FieldKind::StepFunction(rects) => re(step_value(rects, r.s(), theta)),
            FieldKind::StepImage { omega, rects } => re(step_image_value(omega, rects, r, theta)),
            FieldKind::ExtremalFr { .. } | FieldKind::Radial { .. } => re(self.ln_abs_polar(r, theta).exp()),
            FieldKind::KernelImage { series, order, a } => series
                .eval_derivative(*order, Complex64::new(*a, 0.0), Complex64::from_polar(r.s(), theta))
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
        }
    }

    pub fn abs_polar(&self, r: Radius, theta: f64) -> f64 {
        self.eval_polar(r, theta).norm()
    }

    /// `ln |f|`, kept finite for the extremal function where `ω` and `ν`
    /// underflow together.
    pub fn ln_abs_polar(&self, r: Radius, theta: f64) -> f64 {
        match &self.kind {
            FieldKind::ExtremalFr { omega, nu, p, r: r0, .. } => {
                if r.s() < *r0 {
                    return f64::NEG_INFINITY;
                }
                let lw = omega.ln_du_density(r);
                if lw == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                let ln = nu.ln_s_du_density(r);
                if ln == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                (ext::conjugate(*p) / p) * (lw - ln)
            }
            FieldKind::Radial { f, .. } => f(r).abs().ln(),
            _ => self.abs_polar(r, theta).ln(),
        }
    }

    /// Log-gaps where the field may jump in the radial direction.
    pub fn radial_breaks(&self) -> Vec<f64> {
        let lg = |s: f64| Radius::new(s).map(|r| r.log_gap()).unwrap_or(0.0);
        let mut b: Vec<f64> = match &self.kind {
            FieldKind::Constant(_) | FieldKind::KernelImage { .. } => vec![],
            FieldKind::Sampled => self.grid.radial().nodes().iter().map(|r| r.log_gap()).collect(),
            FieldKind::StepFunction(rects) => rects.iter().flat_map(|r| [lg(r.r_lo), lg(r.r_hi)]).collect(),
            FieldKind::StepImage { omega, rects } => rects
                .iter()
                .flat_map(|r| [lg(r.r_lo), lg(r.r_hi)])
                .chain(omega.breaks().iter().copied())
                .collect(),
            FieldKind::ExtremalFr { omega, nu, r, .. } => std::iter::once(lg(*r))
                .chain(omega.breaks().iter().copied())
                .chain(nu.breaks().iter().copied())
                .collect(),
            FieldKind::Radial { breaks, .. } => breaks.clone(),
        };
        b.retain(|u| *u > 0.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Angular pieces `(fraction of the circle, representative angle)` on
    /// which a step-type field does not depend on the angle.
    fn angular_pieces(rects: &[StepRect]) -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0];
        for r in rects.iter().filter(|r| r.width < TAU) {
            cuts.push(r.theta.rem_euclid(TAU));
            cuts.push((r.theta + r.width).rem_euclid(TAU));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(TAU);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| ((w[1] - w[0]) / TAU, 0.5 * (w[0] + w[1])))
            .collect()
    }

    /// Kernel coefficients of `θ ↦ f(s e^{iθ})`.
    fn kernel_coeffs(series: &KernelSeries, order: u32, a: f64, s: f64) -> Vec<f64> {
        let c = series.coefficients();
        let n0 = order as usize;
        (n0..c.len())
            .map(|j| falling(j, order) * c[j] * a.powi(j as i32) * s.powi((j - n0) as i32))
            .collect()
    }

    /// `(1/2π) ∫ |f(s e^{iθ})|^p dθ`, exact for radial and step kinds.
    pub fn angular_mean_pow(&self, r: Radius, p: f64) -> f64 {
        let powered = |x: f64| ext::pow(x, p);
        match &self.kind {
            FieldKind::Constant(_) | FieldKind::ExtremalFr { .. } | FieldKind::Radial { .. } => {
                let l = self.ln_abs_polar(r, 0.0);
                if l == f64::NEG_INFINITY {
                    0.0
                } else {
                    (p * l).exp()
                }
            }
            FieldKind::StepFunction(rects) | FieldKind::StepImage { rects, .. } => Self::angular_pieces(rects)
                .into_iter()
                .map(|(w, t)| ext::mul(w, powered(self.abs_polar(r, t))))
                .sum(),
            FieldKind::Sampled => {
                let n = self.grid.angular();
                (0..n)
                    .map(|j| powered(self.abs_polar(r, TAU * (j as f64 + 0.5) / n as f64)))
                    .sum::<f64>()
                    / n as f64
            }
            FieldKind::KernelImage { series, order, a } => {
                let b = Self::kernel_coeffs(series, *order, *a, r.s());
                angular_mean_q(&b, p, default_angular_points(b.len()))
            }
        }
    }

    /// Fraction of the circle `|z| = s` where `|f| > λ`.
    pub fn angular_fraction_above(&self, r: Radius, lambda: f64) -> f64 {
        match &self.kind {
            FieldKind::Constant(_) | FieldKind::ExtremalFr { .. } | FieldKind::Radial { .. } => {
                if self.ln_abs_polar(r, 0.0) > lambda.ln() {
                    1.0
                } else {
                    0.0
                }
            }
            FieldKind::StepFunction(rects) | FieldKind::StepImage { rects, .. } => Self::angular_pieces(rects)
                .into_iter()
                .filter(|&(_, t)| self.abs_polar(r, t) > lambda)
                .map(|(w, _)| w)
                .sum(),
            FieldKind::Sampled | FieldKind::KernelImage { .. } => {
                let n = match &self.kind {
                    FieldKind::KernelImage { series, .. } => default_angular_points(series.n_max()),
                    _ => self.grid.angular(),
                };
                let hits = (0..n)
                    .filter(|&j| self.abs_polar(r, TAU * (j as f64 + 0.5) / n as f64) > lambda)
                    .count();
                hits as f64 / n as f64
            }
        }
    }

    /// Largest sampled modulus on the grid.
    pub fn max_abs(&self) -> f64 {
        self.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns `r, theta, value` (the modulus) over the grid.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "theta", "value"])?;
        let n = self.grid.angular();
        let angles: Vec<f64> = self.grid.angles().collect();
        for (i, r) in self.grid.radial().nodes().iter().enumerate() {
            for (j, t) in angles.iter().enumerate() {
                let v = self.values()[i * n + j].norm();
                w.write_record([format!("{:.17e}", r.s()), format!("{t:.17e}"), format!("{v:.17e}")])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn step_value(rects: &[StepRect], s: f64, theta: f64) -> f64 {
    rects
        .iter()
        .filter(|r| r.contains_radius(s) && r.contains_angle(theta))
        .map(|r| r.amp)
        .sum()
}

/// `Σ P_j (ŵ(max(s, A_j)) - ŵ(max(s, B_j))) / ŵ(s)` over rectangles containing `θ`.
fn step_image_value(omega: &RadialWeight, rects: &[StepRect], r: Radius, theta: f64) -> f64 {
    let Ok(top) = omega.tail_at(r) else {
        return f64::NAN;
    };
    let mut acc = 0.0;
    for rect in rects.iter().filter(|x| x.contains_angle(theta) && x.r_hi > r.s()) {
        let lo = if rect.r_lo > r.s() { Radius::new(rect.r_lo) } else { Ok(r) };
        let mass = lo.and_then(|lo| omega.mass_between(lo, Some(Radius::new(rect.r_hi)?)));
        match mass {
            Ok(m) => acc += rect.amp * m,
            Err(_) => return f64::NAN,
        }
    }
    ext::div(acc, top)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PolarGrid {
        PolarGrid::new(crate::numerics::grid::RadialGrid::new(8, 2).unwrap(), 16).unwrap()
    }

    #[test]
    fn step_angular_mean_is_exact() {
        let f = RadialFunctionField::step_function(
            grid(),
            vec![
                StepRect::new(0.2, 0.6, 0.0, TAU / 4.0, 2.0).unwrap(),
                StepRect::new(0.4, 0.8, 6.0, 1.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let r = Radius::new(0.5).unwrap();
        // overlap of [0, π/2) with [6, 7) mod 2π is [0, 7 - 2π)
        let overlap = 7.0 - TAU;
        let expect = (2f64.powi(2) * (TAU / 4.0 - overlap) + 9.0 * overlap + 1.0 * (1.0 - overlap)) / TAU;
        assert!((f.angular_mean_pow(r, 2.0) - expect).abs() < 1e-14);
        assert!((f.angular_fraction_above(r, 1.5) - TAU / 4.0 / TAU).abs() < 1e-14);
    }

    #[test]
    fn sampled_interpolation_is_piecewise_constant() {
        let g = grid();
        let f = RadialFunctionField::from_fn(g.clone(), |z| Complex64::new(z.norm(), 0.0)).unwrap();
        let v = f.eval_polar(Radius::new(0.3).unwrap(), 1.0).re;
        // largest node ≤ 0.3 on the 2-point grid is 0.25
        assert!((v - 0.25).abs() < 1e-15, "{v}");
    }

    #[test]
    fn rect_validation() {
        assert!(StepRect::new(0.5, 0.4, 0.0, 1.0, 1.0).is_err());
        assert!(StepRect::new(0.1, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(StepRect::new(0.1, 0.2, 0.0, 7.0, 1.0).is_err());
        assert!(StepRect::new(0.1, 0.2, 0.0, 1.0, -1.0).is_err());
    }
}
