//! Running-supremum profiles of `r ↦ expr(r)` over a [`RadialGrid`] and the
//! classification of their behaviour as `r → 1⁻`.

use std::f64::consts::LN_2;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::{RadialGrid, Radius};

/// Number of trailing levels inspected by every verdict.
pub const WINDOW: usize = 8;
/// Relative change of the running sup over the window below which it is stable.
pub const STABLE_CHANGE: f64 = 1e-3;
/// R² required for a divergence-rate fit.
pub const FIT_R2: f64 = 0.98;
/// Log-log slope of the increments below which their sum is finite.
const SUMMABLE_SLOPE: f64 = -1.3;
const SUMMABLE_R2: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    Bounded { sup_estimate: f64 },
    /// Running sup grows linearly in the level, i.e. like `rate/ln 2 · log(1/(1-r))`.
    DivergesLog { rate: f64 },
    /// Running sup grows like `(1 - r)^(-exponent)`.
    DivergesPower { exponent: f64 },
    /// Any other unbounded growth; `level_exponent` is the fitted power of
    /// `log(1/(1-r))`.
    DivergesOther { level_exponent: f64 },
    Infinite,
}

impl Verdict {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Verdict::Bounded { .. })
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Verdict::Infinite)
    }

    pub fn diverges(&self) -> bool {
        !self.is_bounded()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Bounded { .. } => "Bounded",
            Verdict::DivergesLog { .. } => "DivergesLog",
            Verdict::DivergesPower { .. } => "DivergesPower",
            Verdict::DivergesOther { .. } => "DivergesOther",
            Verdict::Infinite => "Infinite",
        }
    }

    /// Same variant, parameters ignored.
    pub fn same_kind(&self, other: &Verdict) -> bool {
        self.name() == other.name()
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Bounded { sup_estimate } => write!(f, "Bounded({sup_estimate:.6e})"),
            Verdict::DivergesLog { rate } => write!(f, "DivergesLog(rate={rate:.4})"),
            Verdict::DivergesPower { exponent } => write!(f, "DivergesPower(exponent={exponent:.4})"),
            Verdict::DivergesOther { level_exponent } => {
                write!(f, "DivergesOther(level_exponent={level_exponent:.4})")
            }
            Verdict::Infinite => write!(f, "Infinite"),
        }
    }
}

/// Least-squares line `y ≈ slope·x + intercept` with its coefficient of determination.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy / (sxx * syy)).min(1.0)
    } else {
        1.0
    };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

/// Diagnoses a nondecreasing per-level sequence `sups[i]` observed at level
/// `levels[i]`. Returns the verdict and the quality of the deciding fit.
///
/// Protocol: `Infinite` if any value is `+∞`; `Bounded` if the sequence moved
/// by less than [`STABLE_CHANGE`] over the last [`WINDOW`] levels, or if its
/// increments decay like a summable power of the level (the bound is then
/// extrapolated); otherwise the growth is fitted against the level, linear
/// growth being `DivergesLog` and geometric growth `DivergesPower`.
pub fn diagnose_levels(levels: &[u32], sups: &[f64]) -> (Verdict, f64) {
    assert_eq!(levels.len(), sups.len());
    if sups.iter().any(|v| v.is_infinite()) {
        return (Verdict::Infinite, 1.0);
    }
    let n = sups.len();
    if n == 0 {
        return (Verdict::Bounded { sup_estimate: 0.0 }, 0.0);
    }
    let last = sups[n - 1];
    if n <= WINDOW || last == 0.0 {
        return (Verdict::Bounded { sup_estimate: last }, 0.0);
    }
    let base = sups[n - 1 - WINDOW];
    if (last - base) <= STABLE_CHANGE * last.abs() {
        return (Verdict::Bounded { sup_estimate: last }, 1.0);
    }

    let win = n - WINDOW..n;
    let lv: Vec<f64> = levels[win.clone()].iter().map(|&j| j.max(1) as f64).collect();
    let increments: Vec<f64> = win.clone().map(|i| sups[i] - sups[i - 1]).collect();

    // summable increments: power-law or geometric decay in the level
    if increments.iter().all(|&d| d > 0.0) {
        let log_inc: Vec<f64> = increments.iter().map(|d| d.ln()).collect();
        let log_lv: Vec<f64> = lv.iter().map(|j| (j * LN_2).ln()).collect();
        let pw = fit_line(&log_lv, &log_inc);
        if pw.slope < SUMMABLE_SLOPE && pw.r2 > SUMMABLE_R2 {
            let jl = lv[WINDOW - 1];
            let rest = increments[WINDOW - 1] * jl / (-pw.slope - 1.0);
            return (Verdict::Bounded { sup_estimate: last + rest }, pw.r2);
        }
        let geo = fit_line(&lv, &log_inc);
        let ratio = geo.slope.exp();
        if ratio < 0.8 && geo.r2 > SUMMABLE_R2 {
            let rest = increments[WINDOW - 1] * ratio / (1.0 - ratio);
            return (Verdict::Bounded { sup_estimate: last + rest }, geo.r2);
        }
    }

    let vals: Vec<f64> = sups[win.clone()].to_vec();
    let log_vals: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let u: Vec<f64> = lv.iter().map(|j| j * LN_2).collect();
    let log_u: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let lin = fit_line(&lv, &vals);
    let exp = fit_line(&u, &log_vals);
    let poly = fit_line(&log_u, &log_vals);

    let growing_increments = increments[WINDOW - 1] > 1.2 * increments[0].max(0.0);
    if exp.r2 > FIT_R2 && exp.slope > 0.05 && growing_increments {
        return (Verdict::DivergesPower { exponent: exp.slope }, exp.r2);
    }
    let inc_pos: Vec<(f64, f64)> = increments
        .iter()
        .zip(&lv)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, j)| ((j * LN_2).ln(), d.ln()))
        .collect();
    let flat_increments = if inc_pos.len() >= WINDOW / 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = inc_pos.into_iter().unzip();
        fit_line(&x, &y).slope.abs() < 0.3
    } else {
        false
    };
    if lin.r2 > FIT_R2 && lin.slope > 0.0 && flat_increments {
        return (Verdict::DivergesLog { rate: lin.slope }, lin.r2);
    }
    (
        Verdict::DivergesOther {
            level_exponent: poly.slope,
        },
        poly.r2,
    )
}

/// Values of a supremum-type condition's expression on a radial grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionProfile {
    pub nodes: Vec<f64>,
    pub levels: Vec<u32>,
    pub values: Vec<f64>,
    pub running_sup: Vec<f64>,
    pub verdict: Verdict,
    pub fit_quality: f64,
}

impl ConditionProfile {
    /// Builds the profile from values already evaluated at `nodes`.
    pub fn from_values(nodes: &[Radius], levels: &[u32], values: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), values.len());
        let mut running_sup = Vec::with_capacity(values.len());
        let mut sup = f64::NEG_INFINITY;
        for &v in &values {
            if v > sup || v.is_nan() {
                sup = if v.is_nan() { sup } else { v };
            }
            running_sup.push(sup.max(0.0));
        }
        // S_j = sup over r <= 1 - 2^-j, read at the first node of level j
        let mut lvl = Vec::new();
        let mut sups = Vec::new();
        for (i, &j) in levels.iter().enumerate() {
            if j >= 1 && (i == 0 || levels[i - 1] != j) {
                lvl.push(j);
                sups.push(running_sup[i]);
            }
        }
        let (verdict, fit_quality) = diagnose_levels(&lvl, &sups);
        ConditionProfile {
            nodes: nodes.iter().map(|r| r.s()).collect(),
            levels: levels.to_vec(),
            values,
            running_sup,
            verdict,
            fit_quality,
        }
    }

    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }

    /// Index of the node attaining the supremum.
    pub fn argmax(&self) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["level", "r", "value", "running_sup"])?;
        for i in 0..self.values.len() {
            w.write_record([
                self.levels[i].to_string(),
                format!("{:.17e}", self.nodes[i]),
                format!("{:.17e}", self.values[i]),
                format!("{:.17e}", self.running_sup[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "fit": self.fit_quality,
            "sup_estimate": match self.verdict {
                Verdict::Bounded { sup_estimate } => sup_estimate,
                _ => self.sup(),
            },
        })
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut f, &self.summary_json())?;
        writeln!(f).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Evaluates `expr` at every node (in parallel) and classifies the running sup.
///
/// Evaluation errors surface as the first error in node order.
pub fn sup_profile<F>(expr: F, grid: &RadialGrid) -> Result<ConditionProfile>
where
    F: Fn(Radius) -> Result<f64> + Sync,
{
    let values: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|&r| expr(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionProfile::from_values(grid.nodes(), grid.node_levels(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::default()
    }

    #[test]
    fn constant_is_bounded() {
        let p = sup_profile(|_| Ok(5.0), &grid()).unwrap();
        assert_eq!(p.verdict, Verdict::Bounded { sup_estimate: 5.0 });
    }

    #[test]
    fn log_growth_rate_is_ln2_per_level() {
        let p = sup_profile(|r| Ok(r.log_gap()), &grid()).unwrap();
        match p.verdict {
            Verdict::DivergesLog { rate } => assert!((rate - LN_2).abs() < 1e-3, "{rate}"),
            v => panic!("{v}"),
        }
    }

    #[test]
    fn power_growth_exponent() {
        let p = sup_profile(|r| Ok(r.gap().powf(-0.5)), &grid()).unwrap();
        match p.verdict {
            Verdict::DivergesPower { exponent } => assert!((exponent - 0.5).abs() < 0.05, "{exponent}"),
            v => panic!("{v}"),
        }
    }

    #[test]
    fn infinite_node() {
        let p = sup_profile(|r| Ok(if r.s() > 0.9 { f64::INFINITY } else { 1.0 }), &grid()).unwrap();
        assert!(p.verdict.is_infinite());
    }

    #[test]
    fn slowly_converging_sequence_is_bounded() {
        // 1 - 1/u approaches its limit too slowly for the plain stability rule
        let p = sup_profile(|r| Ok(1.0 - 1.0 / (1.0 + r.log_gap())), &grid()).unwrap();
        match p.verdict {
            Verdict::Bounded { sup_estimate } => assert!((sup_estimate - 1.0).abs() < 0.01, "{sup_estimate}"),
            v => panic!("{v}"),
        }
    }

    #[test]
    fn square_root_of_level_is_other_divergence() {
        let p = sup_profile(|r| Ok(r.log_gap().sqrt()), &grid()).unwrap();
        match p.verdict {
            Verdict::DivergesOther { level_exponent } => assert!((level_exponent - 0.5).abs() < 0.05),
            v => panic!("{v}"),
        }
    }

    #[test]
    fn running_sup_is_nondecreasing() {
        let p = sup_profile(|r| Ok((7.0 * r.s()).sin()), &grid()).unwrap();
        for w in p.running_sup.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
