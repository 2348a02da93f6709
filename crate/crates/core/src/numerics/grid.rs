use crate::error::{Error, Result};

/// A radius in `[0, 1)` stored together with its distance to the boundary
/// `gap = 1 - s` and the log-gap `u = -ln(1 - s)`.
///
/// Everything interesting happens as `s → 1⁻`, so the gap is the primary
/// coordinate: it is exact for dyadic levels and never suffers the
/// cancellation of `1 - s`. For `u` beyond ~745 the gap underflows to zero
/// and only `u` remains meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius {
    s: f64,
    gap: f64,
    u: f64,
}

impl Radius {
    pub const ZERO: Radius = Radius {
        s: 0.0,
        gap: 1.0,
        u: 0.0,
    };

    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!("radius {r} is not in [0, 1)")));
        }
        Ok(Self::from_gap(1.0 - r))
    }

    /// From the boundary distance `1 - s`, `gap ∈ (0, 1]`.
    pub fn from_gap(gap: f64) -> Self {
        debug_assert!(gap > 0.0 && gap <= 1.0, "gap {gap}");
        Radius {
            s: 1.0 - gap,
            gap,
            u: -gap.ln(),
        }
    }

    /// From the log-gap `u = -ln(1 - s) ≥ 0`.
    pub fn from_log_gap(u: f64) -> Self {
        debug_assert!(u >= 0.0, "log-gap {u}");
        Radius {
            s: -(-u).exp_m1(),
            gap: (-u).exp(),
            u,
        }
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    #[inline]
    pub fn gap(&self) -> f64 {
        self.gap
    }

    #[inline]
    pub fn log_gap(&self) -> f64 {
        self.u
    }

    /// `(1 + s) / 2`.
    pub fn halfway(&self) -> Self {
        Self::from_gap(self.gap / 2.0)
    }

    /// `1 - (1 - s) / k`.
    pub fn toward_one(&self, k: f64) -> Self {
        Self::from_gap(self.gap / k)
    }
}

/// Radial nodes clustered geometrically at the boundary: `m` equispaced
/// nodes in each dyadic band `[1 - 2^-j, 1 - 2^-(j+1))`, `j = 0..J`, plus the
/// closing node `1 - 2^-J`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    levels: u32,
    points_per_level: u32,
    nodes: Vec<Radius>,
    node_levels: Vec<u32>,
}

impl RadialGrid {
    pub const DEFAULT_LEVELS: u32 = 40;
    pub const DEFAULT_POINTS_PER_LEVEL: u32 = 8;

    pub fn new(levels: u32, points_per_level: u32) -> Result<Self> {
        if levels == 0 || points_per_level == 0 {
            return Err(Error::Range(
                "grid needs at least one level and one point per level".into(),
            ));
        }
        if levels > 1000 {
            return Err(Error::Range(format!("{levels} levels underflow f64")));
        }
        let m = points_per_level as usize;
        let mut nodes = Vec::with_capacity(levels as usize * m + 1);
        let mut node_levels = Vec::with_capacity(nodes.capacity());
        for j in 0..levels {
            let band = 0.5f64.powi(j as i32);
            for k in 0..m {
                // gap runs from 2^-j down to 2^-(j+1) across the band
                let gap = band * (1.0 - k as f64 / (2.0 * m as f64));
                nodes.push(Radius::from_gap(gap));
                node_levels.push(j);
            }
        }
        nodes.push(Radius::from_gap(0.5f64.powi(levels as i32)));
        node_levels.push(levels);
        Ok(RadialGrid {
            levels,
            points_per_level,
            nodes,
            node_levels,
        })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn points_per_level(&self) -> u32 {
        self.points_per_level
    }

    pub fn nodes(&self) -> &[Radius] {
        &self.nodes
    }

    pub fn node_levels(&self) -> &[u32] {
        &self.node_levels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same levels, twice the nodes per band.
    pub fn refined(&self) -> Self {
        Self::new(self.levels, self.points_per_level * 2).expect("refinement of a valid grid")
    }

    /// Nodes at or beyond band `min_level` (classification probes start at r = 1/2).
    pub fn probes_from_level(&self, min_level: u32) -> impl Iterator<Item = (u32, Radius)> + '_ {
        self.node_levels
            .iter()
            .copied()
            .zip(self.nodes.iter().copied())
            .filter(move |(j, _)| *j >= min_level)
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_LEVELS, Self::DEFAULT_POINTS_PER_LEVEL)
            .expect("default grid parameters are valid")
    }
}

/// Radial grid times `angular` equispaced angles on `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    radial: RadialGrid,
    angular: usize,
}

impl PolarGrid {
    pub fn new(radial: RadialGrid, angular: usize) -> Result<Self> {
        if angular < 16 || !angular.is_power_of_two() {
            return Err(Error::Range(format!(
                "angular count {angular} must be a power of two and at least 16"
            )));
        }
        Ok(PolarGrid { radial, angular })
    }

    pub fn radial(&self) -> &RadialGrid {
        &self.radial
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    /// Refined radial grid and twice the angles.
    pub fn refined(&self) -> Self {
        PolarGrid {
            radial: self.radial.refined(),
            angular: self.angular * 2,
        }
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> {
        let n = self.angular;
        (0..n).map(move |k| std::f64::consts::TAU * k as f64 / n as f64)
    }
}

impl Default for PolarGrid {
    fn default() -> Self {
        PolarGrid {
            radial: RadialGrid::default(),
            angular: 64,
        }
    }
}
