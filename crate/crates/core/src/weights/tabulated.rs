use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numerics::grid::Radius;

/// Piecewise-constant weight: `values[i]` on `[knots[i], knots[i+1])`, the last
/// value extending to 1 and zero before the first knot.
///
/// The tail is piecewise linear and computed exactly from suffix sums.
#[derive(Debug, Clone)]
pub struct Tabulated {
    knots: Vec<Radius>,
    values: Vec<f64>,
    breaks: Vec<f64>,
    /// `suffix[i] = ∫_{knots[i]}^1 ω`, with a trailing zero.
    suffix: Vec<f64>,
    source: Option<String>,
}

#[derive(Deserialize)]
struct Row {
    r: f64,
    value: f64,
}

impl Tabulated {
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self> {
        let radii = knots.iter().map(|&r| Radius::new(r)).collect::<Result<Vec<_>>>()?;
        Self::from_radii(radii, values.to_vec())
    }

    /// Knots given by their distances to the boundary (decreasing).
    pub fn from_gaps(gaps: &[f64], values: &[f64]) -> Result<Self> {
        if let Some(g) = gaps.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::Domain(format!("knot gap {g} is not in (0, 1]")));
        }
        Self::from_radii(gaps.iter().map(|&g| Radius::from_gap(g)).collect(), values.to_vec())
    }

    fn from_radii(knots: Vec<Radius>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::Domain(format!(
                "tabulated weight needs matching nonempty knots and values ({} vs {})",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| w[1].log_gap() <= w[0].log_gap()) {
            return Err(Error::Domain("tabulated knots must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("tabulated value {v} must be finite and nonnegative")));
        }
        if values[values.len() - 1] <= 0.0 {
            return Err(Error::Domain(
                "the last tabulated value must be positive, otherwise the tail vanishes near 1".into(),
            ));
        }
        let n = knots.len();
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let next_gap = if i + 1 < n { knots[i + 1].gap() } else { 0.0 };
            suffix[i] = suffix[i + 1] + values[i] * (knots[i].gap() - next_gap);
        }
        let breaks = knots.iter().map(|k| k.log_gap()).collect();
        Ok(Tabulated {
            knots,
            values,
            breaks,
            suffix,
            source: None,
        })
    }

    /// Reads a two-column CSV with header `r,value` and strictly increasing `r`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            knots.push(row.r);
            values.push(row.value);
        }
        let mut t = Self::new(&knots, &values)?;
        t.source = Some(path.display().to_string());
        Ok(t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "value"])?;
        for (k, v) in self.knots.iter().zip(&self.values) {
            w.write_record([format!("{:.17e}", k.s()), format!("{v:.17e}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Tabulation whose tail equals `1 / log(e / (1 - r))` at the knots
    /// `r = 1 - 2^-j`, `j = 0..=levels`.
    pub fn inverse_log_tail(levels: u32) -> Result<Self> {
        let tail = |j: u32| 1.0 / (1.0 + j as f64 * std::f64::consts::LN_2);
        let gaps: Vec<f64> = (0..=levels).map(|j| 0.5f64.powi(j as i32)).collect();
        let mut values = Vec::with_capacity(gaps.len());
        for j in 0..levels {
            let width = gaps[j as usize] - gaps[j as usize + 1];
            values.push((tail(j) - tail(j + 1)) / width);
        }
        values.push(tail(levels) / gaps[levels as usize]);
        Self::from_gaps(&gaps, &values)
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn knots(&self) -> &[Radius] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Index of the piece containing `r`, `None` before the first knot.
    fn piece(&self, r: Radius) -> Option<usize> {
        let k = self.breaks.partition_point(|&b| b <= r.log_gap());
        k.checked_sub(1)
    }

    pub(crate) fn density(&self, r: Radius) -> f64 {
        self.piece(r).map_or(0.0, |i| self.values[i])
    }

    fn gap_after(&self, i: usize) -> f64 {
        self.knots.get(i + 1).map_or(0.0, |k| k.gap())
    }

    pub(crate) fn tail(&self, r: Radius) -> f64 {
        match self.piece(r) {
            None => self.suffix[0],
            Some(i) => self.values[i] * (r.gap() - self.gap_after(i)).max(0.0) + self.suffix[i + 1],
        }
    }

    /// `∫_t^1 s^x ω(s) ds`, exact piece by piece.
    pub(crate) fn moment(&self, t: Radius, x: f64) -> f64 {
        let e = x + 1.0;
        let one_minus = |gap: f64| -> f64 {
            if gap >= 1.0 {
                1.0
            } else if gap <= 0.0 {
                0.0
            } else {
                -(e * (-gap).ln_1p()).exp_m1()
            }
        };
        let first = self.piece(t).unwrap_or(0);
        let mut acc = 0.0;
        for i in first..self.knots.len() {
            let lo_gap = if t.log_gap() > self.breaks[i] { t.gap() } else { self.knots[i].gap() };
            // ∫_lo^hi s^x ds = ((1 - lo^e) - (1 - hi^e)) / e
            acc += self.values[i] * (one_minus(lo_gap) - one_minus(self.gap_after(i))) / e;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_is_exact_and_piecewise_linear() {
        let t = Tabulated::new(&[0.0, 0.5, 0.75], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(t.tail(Radius::ZERO), 0.5 + 0.5 + 1.0);
        assert!((t.tail(Radius::new(0.6).unwrap()) - (0.15 * 2.0 + 1.0)).abs() < 1e-15);
        assert!((t.tail(Radius::new(0.9).unwrap()) - 0.4).abs() < 1e-15);
        assert_eq!(t.density(Radius::new(0.74).unwrap()), 2.0);
        assert_eq!(t.density(Radius::new(0.75).unwrap()), 4.0);
    }

    #[test]
    fn inverse_log_tail_at_knots() {
        let t = Tabulated::inverse_log_tail(60).unwrap();
        for j in 0..=60 {
            let r = Radius::from_gap(0.5f64.powi(j));
            let exact = 1.0 / (1.0 + j as f64 * std::f64::consts::LN_2);
            assert!((t.tail(r) - exact).abs() <= 1e-13 * exact, "level {j}");
        }
    }

    #[test]
    fn moments_match_direct_sum() {
        let t = Tabulated::new(&[0.0, 0.5], &[1.0, 3.0]).unwrap();
        let exact = (0.25f64 / 2.0) + 3.0 * (1.0 - 0.25) / 2.0;
        assert!((t.moment(Radius::ZERO, 1.0) - exact).abs() < 1e-15);
        let from = Radius::new(0.6).unwrap();
        assert!((t.moment(from, 2.0) - 3.0 * (1.0 - 0.216) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let t = Tabulated::new(&[0.0, 0.25, 0.5], &[1.0, 0.0, 2.0]).unwrap();
        t.write_csv(&path).unwrap();
        let back = Tabulated::from_csv(&path).unwrap();
        assert_eq!(back.values(), t.values());
        assert_eq!(back.source(), Some(path.display().to_string().as_str()));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(Tabulated::new(&[0.0, 0.5, 0.5], &[1.0, 1.0, 1.0]).is_err());
        assert!(Tabulated::new(&[0.0, 0.5], &[1.0, 0.0]).is_err());
        assert!(Tabulated::new(&[0.0], &[-1.0]).is_err());
        assert!(Tabulated::new(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }
}
