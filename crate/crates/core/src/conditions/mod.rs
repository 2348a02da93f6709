//! Weight conditions as profiles over a radial grid.
//!
//! Every evaluator works with the conventions `0·∞ = 0` and `1/0 = ∞`, so a
//! weight that vanishes on a set of positive measure yields `Infinite` rather
//! than an error.

mod carleson;
pub(crate) mod integrals;
mod sup;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::RadialGrid;
use crate::numerics::profile::ConditionProfile;
use crate::weights::WeightTriple;

pub use carleson::{
    carleson_identity_residual, carleson_profile, carleson_ratio, carleson_sides, self_improve_check, CarlesonSides,
    SelfImproveReport, SANDWICH_SLACK,
};
pub use integrals::h_power;
pub use sup::{d_p, m_p, m_p_eps, n_p, n_value, necessary_pq, NecessaryPq, NpProfile};

/// Which condition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ConditionKind {
    Mp,
    Dp,
    Np,
    MpEps { eps: f64 },
    CarlesonRatio,
    NecessaryFirst { q: f64 },
    NecessarySecond { q: f64 },
}

impl ConditionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConditionKind::Mp => "Mp",
            ConditionKind::Dp => "Dp",
            ConditionKind::Np => "Np",
            ConditionKind::MpEps { .. } => "MpEps",
            ConditionKind::CarlesonRatio => "CarlesonRatio",
            ConditionKind::NecessaryFirst { .. } => "NecessaryFirst",
            ConditionKind::NecessarySecond { .. } => "NecessarySecond",
        }
    }

    /// Parses `Mp`, `Dp`, `Np`, `MpEps`, `Carleson`, `Nec1`, `Nec2` (case-insensitive);
    /// `eps` and `q` fill the parametrised kinds.
    pub fn parse(name: &str, eps: Option<f64>, q: Option<f64>) -> Result<Self> {
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| Error::Parse(format!("{name} needs --{what}")));
        Ok(match name.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "mp" => ConditionKind::Mp,
            "dp" => ConditionKind::Dp,
            "np" => ConditionKind::Np,
            "mpeps" => ConditionKind::MpEps { eps: need(eps, "eps")? },
            "carleson" | "carlesonratio" => ConditionKind::CarlesonRatio,
            "nec1" | "necessaryfirst" => ConditionKind::NecessaryFirst { q: need(q, "q")? },
            "nec2" | "necessarysecond" => ConditionKind::NecessarySecond { q: need(q, "q")? },
            other => return Err(Error::Parse(format!("unknown condition '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRequest {
    pub which: ConditionKind,
    pub triple: WeightTriple,
    pub p: f64,
    #[serde(skip)]
    pub grid: RadialGrid,
}

impl ConditionRequest {
    pub fn new(which: ConditionKind, triple: WeightTriple, p: f64, grid: RadialGrid) -> Self {
        ConditionRequest { which, triple, p, grid }
    }

    pub fn evaluate(&self) -> Result<ConditionProfile> {
        let WeightTriple { omega, nu, eta } = &self.triple;
        let (p, g) = (self.p, &self.grid);
        match self.which {
            ConditionKind::Mp => m_p(omega, nu, eta, p, g),
            ConditionKind::Dp => d_p(omega, nu, p, g),
            ConditionKind::Np => Ok(n_p(omega, nu, eta, p, g)?.profile),
            ConditionKind::MpEps { eps } => m_p_eps(omega, nu, eta, p, eps, g),
            ConditionKind::CarlesonRatio => carleson_profile(omega, nu, p, g),
            ConditionKind::NecessaryFirst { q } => Ok(necessary_pq(omega, nu, eta, p, q, g)?.first),
            ConditionKind::NecessarySecond { q } => Ok(necessary_pq(omega, nu, eta, p, q, g)?.second),
        }
    }
}

/// Exponents of a problem: `p`, its conjugate, and the optional `q` and `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentContext {
    pub p: f64,
    /// `p' = p/(p-1)`, present for `p > 1`.
    pub p_conj: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
}

impl ExponentContext {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Range(format!("p = {p} must be positive")));
        }
        Ok(ExponentContext {
            p,
            p_conj: (p > 1.0).then(|| crate::numerics::ext::conjugate(p)),
            q: None,
            eps: None,
        })
    }

    pub fn with_q(mut self, q: f64) -> Result<Self> {
        if !(q >= self.p && q.is_finite()) {
            return Err(Error::Range(format!("q = {q} must satisfy p <= q < ∞")));
        }
        self.q = Some(q);
        Ok(self)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Range(format!("eps = {eps} must be positive")));
        }
        self.eps = Some(eps);
        Ok(self)
    }
}
