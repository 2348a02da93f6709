//! Named weight triples with expected verdicts, and the batch run that
//! evaluates every applicable classifier, condition and norm estimate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::conditions::{carleson_profile, d_p, m_p, m_p_eps, n_p, necessary_pq, ExponentContext};
use crate::error::{Error, Result};
use crate::numerics::grid::RadialGrid;
use crate::numerics::profile::{ConditionProfile, Verdict};
use crate::operator::{
    default_rt_grid, estimate_strong_norm, estimate_weak_norm, NormEstimate, TestFamily,
};
use crate::weights::{
    classify_dcheck_sweep, classify_dhat, classify_regular, make_counterexample_nu, make_log_example_triple,
    DoublingReport, Membership, RadialWeight, WeightTriple,
};

/// Version tag carried by every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// ε values over which `M_{p,ε}` is evaluated.
pub const EPS_SWEEP: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Expected {
    Bounded,
    Infinite,
    DivergesLog,
    DivergesPower { exponent: f64, rel_tol: f64 },
    /// Any verdict other than `Bounded`.
    Diverging,
    Member,
    NotMember,
}

impl Expected {
    pub fn matches_verdict(&self, v: &Verdict) -> bool {
        match (self, v) {
            (Expected::Bounded, Verdict::Bounded { .. }) => true,
            (Expected::Infinite, Verdict::Infinite) => true,
            (Expected::DivergesLog, Verdict::DivergesLog { .. }) => true,
            (Expected::DivergesPower { exponent, rel_tol }, Verdict::DivergesPower { exponent: e }) => {
                (e - exponent).abs() <= rel_tol * exponent.abs()
            }
            (Expected::Diverging, v) => v.diverges(),
            _ => false,
        }
    }

    pub fn matches_membership(&self, m: Membership) -> bool {
        matches!(
            (self, m),
            (Expected::Member, Membership::Member) | (Expected::NotMember, Membership::NotMember)
        )
    }
}

impl std::fmt::Display for Expected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expected::DivergesPower { exponent, rel_tol } => {
                write!(f, "DivergesPower({exponent} ± {:.0}%)", rel_tol * 100.0)
            }
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    /// Where in the theory the scenario comes from.
    pub anchor: String,
    pub triple: WeightTriple,
    pub p: f64,
    pub q: Option<f64>,
    pub expected: BTreeMap<String, Expected>,
    pub seed: u64,
}

impl Scenario {
    /// A user scenario: no expectations.
    pub fn custom(name: &str, triple: WeightTriple, p: f64, q: Option<f64>, seed: u64) -> Result<Self> {
        let ctx = ExponentContext::new(p)?;
        if let Some(q) = q {
            ctx.with_q(q)?;
        }
        Ok(Scenario {
            name: name.into(),
            anchor: "user supplied".into(),
            triple,
            p,
            q,
            expected: BTreeMap::new(),
            seed,
        })
    }

    pub fn exponents(&self) -> Result<ExponentContext> {
        let c = ExponentContext::new(self.p)?;
        match self.q {
            Some(q) => c.with_q(q),
            None => Ok(c),
        }
    }
}

fn expect(pairs: &[(&str, Expected)]) -> BTreeMap<String, Expected> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// The six built-in scenarios.
pub fn builtins() -> Result<Vec<Scenario>> {
    use Expected::*;
    let one = RadialWeight::one();
    let lin = RadialWeight::power_log(1.0, 0.0)?;
    let ce_nu = make_counterexample_nu(&one, 2.0)?;
    let (p, q) = (2.0, 4.0);
    Ok(vec![
        Scenario {
            name: "power-basic".into(),
            anchor: "Theorem A and Theorem 1 with ω = ν = η ≡ 1".into(),
            triple: WeightTriple::constant(),
            p: 2.0,
            q: None,
            expected: expect(&[
                ("d_p", Bounded),
                ("m_p", Bounded),
                ("n_p", Bounded),
                ("omega.dhat", Member),
            ]),
            seed: 0,
        },
        Scenario {
            name: "power-p1-log-divergence".into(),
            anchor: "Theorem 1 condition D_p at p = 1, ω = ν ≡ 1".into(),
            triple: WeightTriple::constant(),
            p: 1.0,
            q: None,
            expected: expect(&[("d_p", DivergesLog), ("carleson", DivergesLog)]),
            seed: 0,
        },
        Scenario {
            name: "weak-not-strong".into(),
            anchor: "closing three-weight example: weak type holds, strong type fails".into(),
            triple: make_log_example_triple(2.0)?,
            p: 2.0,
            q: None,
            expected: expect(&[("n_p", Bounded), ("m_p", Diverging)]),
            seed: 0,
        },
        Scenario {
            name: "analytic-not-weak".into(),
            anchor: "oscillating counterexample: A^p_ν → L^p_ν bounded, L^p_ν → L^{p,∞}_ν not".into(),
            triple: WeightTriple::pair(one.clone(), ce_nu),
            p: 2.0,
            q: None,
            expected: expect(&[("d_p", Bounded), ("n_p", Infinite), ("m_p", Infinite)]),
            seed: 0,
        },
        Scenario {
            name: "co7-qgtp".into(),
            anchor: "A^p_ν → L^q_ν is unbounded for q > p: second necessary condition fails".into(),
            triple: WeightTriple::constant(),
            p,
            q: Some(q),
            // grows like (1-r)^{-2(q/p-1)}; see the README note on this exponent
            expected: expect(&[
                ("d_p", Bounded),
                (
                    "necessary_second",
                    DivergesPower {
                        exponent: 2.0 * (q / p - 1.0),
                        rel_tol: 0.1,
                    },
                ),
            ]),
            seed: 0,
        },
        Scenario {
            name: "weird-conjunction".into(),
            anchor: "ω ∈ D̂, ν ∈ D: strong boundedness iff analytic plus weak boundedness".into(),
            triple: WeightTriple::pair(lin.clone(), lin),
            p: 2.0,
            q: None,
            expected: expect(&[
                ("omega.dhat", Member),
                ("nu.dhat", Member),
                ("nu.dcheck", Member),
                ("d_p", Bounded),
                ("n_p", Bounded),
                ("m_p", Bounded),
            ]),
            seed: 0,
        },
    ])
}

pub fn builtin(name: &str) -> Result<Scenario> {
    builtins()?
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Parse(format!("no built-in scenario named '{name}'")))
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogueEntry {
    pub name: String,
    pub anchor: String,
    pub p: f64,
    pub q: Option<f64>,
    pub expected: BTreeMap<String, String>,
}

pub fn list_builtins() -> Result<Vec<CatalogueEntry>> {
    Ok(builtins()?
        .into_iter()
        .map(|s| CatalogueEntry {
            expected: s.expected.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            name: s.name,
            anchor: s.anchor,
            p: s.p,
            q: s.q,
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub grid: RadialGrid,
    pub out_dir: Option<PathBuf>,
    pub norms: bool,
    /// Random step functions in the strong-norm search.
    pub steps: usize,
    /// Levels of the `(t, r)` grid for the weak-norm search.
    pub weak_levels: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            grid: RadialGrid::default(),
            out_dir: None,
            norms: true,
            steps: 16,
            weak_levels: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionSummary {
    pub verdict: Verdict,
    pub sup: f64,
    pub argmax_r: f64,
    pub fit: f64,
}

impl From<&ConditionProfile> for ConditionSummary {
    fn from(p: &ConditionProfile) -> Self {
        ConditionSummary {
            verdict: p.verdict.clone(),
            sup: p.sup(),
            argmax_r: p.argmax().map_or(f64::NAN, |i| p.nodes[i]),
            fit: p.fit_quality,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub evaluator: String,
    pub expected: String,
    pub observed: String,
    pub matched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub schema: u32,
    pub scenario: String,
    pub anchor: String,
    pub p: f64,
    pub q: Option<f64>,
    pub seed: u64,
    pub weights: BTreeMap<String, String>,
    pub classification: BTreeMap<String, DoublingReport>,
    pub conditions: BTreeMap<String, ConditionSummary>,
    pub norms: BTreeMap<String, NormEstimate>,
    pub checks: Vec<Check>,
    pub all_matched: bool,
    #[serde(skip)]
    pub profiles: BTreeMap<String, ConditionProfile>,
}

impl ScenarioReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.matched)
    }

    /// `summary.json` plus one CSV per condition profile under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        for (name, prof) in &self.profiles {
            prof.write_csv(&dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }
}

/// Runs everything applicable to the scenario; `all_matched` is false when
/// an expected verdict was not observed.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<ScenarioReport> {
    s.exponents()?;
    let WeightTriple { omega, nu, eta } = &s.triple;
    let g = &opts.grid;
    let p = s.p;

    let mut classification = BTreeMap::new();
    classification.insert("omega.dhat".to_string(), classify_dhat(omega, g)?);
    classification.insert("omega.regular".to_string(), classify_regular(omega, g)?);
    classification.insert("nu.dhat".to_string(), classify_dhat(nu, g)?);
    classification.insert("nu.dcheck".to_string(), classify_dcheck_sweep(nu, g)?);

    let mut profiles = BTreeMap::new();
    profiles.insert("d_p".to_string(), d_p(omega, nu, p, g)?);
    profiles.insert("carleson".to_string(), carleson_profile(omega, nu, p, g)?);
    if p > 1.0 {
        profiles.insert("m_p".to_string(), m_p(omega, nu, eta, p, g)?);
        profiles.insert("n_p".to_string(), n_p(omega, nu, eta, p, g)?.profile);
        for eps in EPS_SWEEP {
            profiles.insert(format!("m_p_eps_{eps}"), m_p_eps(omega, nu, eta, p, eps, g)?);
        }
    }
    if let Some(q) = s.q {
        let nec = necessary_pq(omega, nu, eta, p, q, g)?;
        profiles.insert("necessary_first".to_string(), nec.first);
        profiles.insert("necessary_second".to_string(), nec.second);
    }

    let mut norms = BTreeMap::new();
    if opts.norms && p > 1.0 {
        let fams = [
            TestFamily::Constants,
            TestFamily::MuckenhouptTest,
            TestFamily::RandomSteps {
                seed: s.seed,
                count: opts.steps,
            },
        ];
        match estimate_strong_norm(&s.triple, p, &fams, g) {
            Ok(e) => {
                norms.insert("strong".to_string(), e);
            }
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
        let rt = default_rt_grid(&RadialGrid::new(opts.weak_levels, 1)?);
        norms.insert("weak".to_string(), estimate_weak_norm(&s.triple, p, &rt)?);
    }

    let mut checks = Vec::new();
    for (key, exp) in &s.expected {
        let (observed, matched) = if let Some(c) = classification.get(key) {
            (format!("{:?}", c.verdict), exp.matches_membership(c.verdict))
        } else if let Some(prof) = profiles.get(key) {
            (prof.verdict.to_string(), exp.matches_verdict(&prof.verdict))
        } else {
            ("not evaluated".to_string(), false)
        };
        checks.push(Check {
            evaluator: key.clone(),
            expected: exp.to_string(),
            observed,
            matched,
        });
    }
    let all_matched = checks.iter().all(|c| c.matched);
    let report = ScenarioReport {
        schema: SCHEMA_VERSION,
        scenario: s.name.clone(),
        anchor: s.anchor.clone(),
        p,
        q: s.q,
        seed: s.seed,
        weights: BTreeMap::from([
            ("omega".to_string(), omega.to_string()),
            ("nu".to_string(), nu.to_string()),
            ("eta".to_string(), eta.to_string()),
        ]),
        classification,
        conditions: profiles.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
        norms,
        checks,
        all_matched,
        profiles,
    };
    if let Some(dir) = &opts.out_dir {
        report.write(&dir.join(&s.name))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_has_the_six_builtins() {
        let names: Vec<String> = list_builtins().unwrap().into_iter().map(|e| e.name).collect();
        for n in [
            "power-basic",
            "power-p1-log-divergence",
            "weak-not-strong",
            "analytic-not-weak",
            "co7-qgtp",
            "weird-conjunction",
        ] {
            assert!(names.iter().any(|x| x == n), "{n}");
        }
        assert!(list_builtins().unwrap().iter().all(|e| !e.anchor.is_empty()));
    }

    #[test]
    fn expectation_matching() {
        let e = Expected::DivergesPower {
            exponent: 2.0,
            rel_tol: 0.1,
        };
        assert!(e.matches_verdict(&Verdict::DivergesPower { exponent: 2.1 }));
        assert!(!e.matches_verdict(&Verdict::DivergesPower { exponent: 1.0 }));
        assert!(Expected::Diverging.matches_verdict(&Verdict::Infinite));
        assert!(!Expected::Diverging.matches_verdict(&Verdict::Bounded { sup_estimate: 1.0 }));
    }

    #[test]
    fn power_basic_runs_clean() {
        let opts = RunOptions {
            grid: RadialGrid::new(24, 4).unwrap(),
            steps: 4,
            weak_levels: 6,
            ..RunOptions::default()
        };
        let r = run_scenario(&builtin("power-basic").unwrap(), &opts).unwrap();
        assert!(r.all_matched, "{:?}", r.checks);
        assert_eq!(r.schema, 1);
        assert!(r.norms.contains_key("strong") && r.norms.contains_key("weak"));
    }
}
