use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use radavg::conditions::{
    carleson_identity_residual, carleson_ratio, n_p, necessary_pq, self_improve_check, ConditionKind, ConditionRequest,
};
use radavg::numerics::grid::{PolarGrid, RadialGrid};
use radavg::operator::{
    apply_t, default_rt_grid, estimate_strong_norm, estimate_weak_norm, radial_maximal_check, random_step_rects,
    RadialFunctionField, TestFamily,
};
use radavg::scenario::{builtin, builtins, list_builtins, run_scenario, RunOptions, Scenario, SCHEMA_VERSION};
use radavg::weights::{
    classify_dcheck, classify_dcheck_sweep, classify_dhat, classify_regular, parse_weight, WeightTriple,
};
use radavg::{kernels, Error};

#[derive(Parser)]
#[command(name = "avg", version, about = "Radial averaging operators on weighted Bergman spaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// ω: inline family spec (e.g. `power_log(a=1,b=0)`) or a config/CSV path
    #[arg(long, default_value = "one")]
    weight: String,
    /// ν (defaults to ω)
    #[arg(long)]
    nu: Option<String>,
    /// η (defaults to ν)
    #[arg(long)]
    eta: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Dyadic levels of the radial grid
    #[arg(long, default_value_t = 40)]
    levels: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for CSV and JSON output
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn grid(&self) -> Result<RadialGrid, Error> {
        RadialGrid::new(self.levels, RadialGrid::DEFAULT_POINTS_PER_LEVEL)
    }

    fn triple(&self) -> Result<WeightTriple, Error> {
        let omega = parse_weight(&self.weight)?;
        let nu = match &self.nu {
            Some(s) => parse_weight(s)?,
            None => omega.clone(),
        };
        let eta = match &self.eta {
            Some(s) => parse_weight(s)?,
            None => nu.clone(),
        };
        Ok(WeightTriple::new(omega, nu, eta))
    }

    fn out_dir(&self) -> Result<Option<&Path>, Error> {
        if let Some(d) = &self.out {
            std::fs::create_dir_all(d).map_err(|e| Error::Io {
                path: d.clone(),
                source: e,
            })?;
        }
        Ok(self.out.as_deref())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    Dhat,
    Dcheck,
    Regular,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormWhich {
    Strong,
    Weak,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Family {
    Constants,
    Muckenhoupt,
    Steps,
    Kernel,
}

#[derive(Subcommand)]
enum VerifyWhat {
    /// Residual of the Fubini identity and the Carleson ratio at radius a
    Carleson {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
    },
    /// D_p ≤ D_{p-ε} ≤ p/(p-ε(1+D_p)) D_p
    Sandwich {
        #[command(flatten)]
        common: Common,
    },
    /// Lower bound for the kernel image means
    Lemma4 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        order: u32,
        #[arg(long, default_value_t = 0.9)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Radial maximal inequalities on random step fields (p ≤ 1 ≤ q)
    Maximal {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// T_ω(1) = 1 at probe points
    Constants {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ScenarioWhat {
    /// Print the built-in catalogue
    List,
    /// Run a built-in scenario (or `all`)
    Run {
        name: String,
        #[arg(long, default_value_t = 40)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the norm estimates
        #[arg(long)]
        no_norms: bool,
    },
    /// Run a user scenario (no expected verdicts)
    Custom {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "custom")]
        name: String,
    },
}

#[derive(Subcommand)]
enum Cmd {
    /// Doubling / reverse-doubling / regularity classification of --weight
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Class::All)]
        class: Class,
        /// K for the reverse-doubling test (default: sweep 2, 4, 8)
        #[arg(long)]
        k: Option<f64>,
    },
    /// Evaluate one condition profile: mp, dp, np, mpeps, carleson, nec1, nec2
    Condition {
        which: String,
        #[command(flatten)]
        common: Common,
    },
    /// Lower bounds for the strong or weak operator norm
    Norm {
        #[arg(value_enum)]
        which: NormWhich,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Family::Constants, Family::Muckenhoupt, Family::Steps])]
        families: Vec<Family>,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        order: u32,
    },
    /// Identity and inequality checks
    Verify {
        #[command(subcommand)]
        what: VerifyWhat,
    },
    /// List, run or define verdict scenarios
    Scenario {
        #[command(subcommand)]
        what: ScenarioWhat,
    },
}

enum Outcome {
    Ok(Value),
    Mismatch(Value),
}

fn envelope(command: &str, mut body: Value) -> Value {
    if let Value::Object(m) = &mut body {
        m.insert("schema".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(command));
    }
    body
}

fn write_json(dir: Option<&Path>, name: &str, v: &Value) -> Result<(), Error> {
    if let Some(d) = dir {
        let path = d.join(name);
        let text = serde_json::to_string_pretty(v)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    }
    Ok(())
}

fn classify(common: &Common, class: Class, k: Option<f64>) -> Result<Outcome, Error> {
    let w = parse_weight(&common.weight)?;
    let g = common.grid()?;
    let mut out = serde_json::Map::new();
    if matches!(class, Class::Dhat | Class::All) {
        out.insert("dhat".into(), serde_json::to_value(classify_dhat(&w, &g)?)?);
    }
    if matches!(class, Class::Dcheck | Class::All) {
        let r = match k {
            Some(k) => classify_dcheck(&w, k, &g)?,
            None => classify_dcheck_sweep(&w, &g)?,
        };
        out.insert("dcheck".into(), serde_json::to_value(r)?);
    }
    if matches!(class, Class::Regular | Class::All) {
        out.insert("regular".into(), serde_json::to_value(classify_regular(&w, &g)?)?);
    }
    let v = envelope("classify", json!({ "weight": w.to_string(), "reports": out }));
    write_json(common.out_dir()?, "classify.json", &v)?;
    Ok(Outcome::Ok(v))
}

fn condition(which: &str, common: &Common) -> Result<Outcome, Error> {
    let kind = ConditionKind::parse(which, common.eps, common.q)?;
    let triple = common.triple()?;
    let grid = common.grid()?;
    let mut extra = json!({});
    let prof = match kind {
        ConditionKind::Np => {
            let np = n_p(&triple.omega, &triple.nu, &triple.eta, common.p, &grid)?;
            extra = json!({ "best": np.best, "refined": np.refined });
            np.profile
        }
        ConditionKind::NecessaryFirst { q } | ConditionKind::NecessarySecond { q } => {
            let nec = necessary_pq(&triple.omega, &triple.nu, &triple.eta, common.p, q, &grid)?;
            extra = json!({ "implication_ratio": nec.implication_ratio });
            if matches!(kind, ConditionKind::NecessaryFirst { .. }) {
                nec.first
            } else {
                nec.second
            }
        }
        _ => ConditionRequest::new(kind, triple.clone(), common.p, grid).evaluate()?,
    };
    let v = envelope(
        "condition",
        json!({
            "condition": kind,
            "p": common.p,
            "weights": { "omega": triple.omega.to_string(), "nu": triple.nu.to_string(), "eta": triple.eta.to_string() },
            "summary": prof.summary_json(),
            "extra": extra,
        }),
    );
    if let Some(d) = common.out_dir()? {
        prof.write_csv(&d.join(format!("{}.csv", kind.name())))?;
        write_json(Some(d), &format!("{}.json", kind.name()), &v)?;
    }
    Ok(Outcome::Ok(v))
}

fn norm(which: NormWhich, common: &Common, families: &[Family], steps: usize, order: u32) -> Result<Outcome, Error> {
    let triple = common.triple()?;
    let grid = common.grid()?;
    let est = match which {
        NormWhich::Strong => {
            let fams: Vec<TestFamily> = families
                .iter()
                .map(|f| match f {
                    Family::Constants => TestFamily::Constants,
                    Family::Muckenhoupt => TestFamily::MuckenhouptTest,
                    Family::Steps => TestFamily::RandomSteps {
                        seed: common.seed,
                        count: steps,
                    },
                    Family::Kernel => TestFamily::KernelDerivatives { order },
                })
                .collect();
            estimate_strong_norm(&triple, common.p, &fams, &grid)?
        }
        NormWhich::Weak => {
            let rt = default_rt_grid(&RadialGrid::new(common.levels.min(16), 1)?);
            estimate_weak_norm(&triple, common.p, &rt)?
        }
    };
    let v = envelope("norm", json!({ "p": common.p, "estimate": est }));
    write_json(common.out_dir()?, "norm.json", &v)?;
    Ok(Outcome::Ok(v))
}

fn verify(what: &VerifyWhat) -> Result<Outcome, Error> {
    let (name, common, body, ok) = match what {
        VerifyWhat::Carleson { common, a } => {
            let t = common.triple()?;
            let res = carleson_identity_residual(&t.omega, &t.nu, common.p, *a)?;
            let ratio = if *a > 0.0 {
                Some(carleson_ratio(&t.omega, &t.nu, common.p, *a)?)
            } else {
                None
            };
            ("carleson", common, json!({ "a": a, "residual": res, "ratio": ratio }), res < 1e-6)
        }
        VerifyWhat::Sandwich { common } => {
            let t = common.triple()?;
            let eps = common.eps.ok_or_else(|| Error::Parse("sandwich needs --eps".into()))?;
            let rep = self_improve_check(&t.omega, &t.nu, common.p, eps, &common.grid()?)?;
            let ok = rep.sandwich_ok;
            ("sandwich", common, serde_json::to_value(rep)?, ok)
        }
        VerifyWhat::Lemma4 { common, order, a, t } => {
            let tr = common.triple()?;
            let q = common.q.ok_or_else(|| Error::Parse("lemma4 needs --q".into()))?;
            let (lhs, rhs) = kernels::lemma4_lower_bound(&tr.omega, &tr.nu, q, *order, *a, *t)?;
            let ratio = lhs / rhs;
            (
                "lemma4",
                common,
                json!({ "q": q, "N": order, "a": a, "t": t, "lhs": lhs, "rhs": rhs, "ratio": ratio }),
                ratio > 0.0 && ratio.is_finite(),
            )
        }
        VerifyWhat::Maximal { common, k, r, count } => {
            let w = parse_weight(&common.weight)?;
            let q = common.q.unwrap_or(1.0);
            let grid = PolarGrid::new(RadialGrid::new(8, 2)?, 32)?;
            let mut checks = Vec::new();
            let mut ok = true;
            for i in 0..*count {
                let f = RadialFunctionField::step_function(grid.clone(), random_step_rects(common.seed, i))?;
                let c = radial_maximal_check(&w, &f, common.p, q, *k, *r)?;
                ok &= c.holds1 && c.holds2 && c.stable;
                checks.push(c);
            }
            ("maximal", common, json!({ "checks": checks }), ok)
        }
        VerifyWhat::Constants { common } => {
            let w = parse_weight(&common.weight)?;
            let one = RadialFunctionField::radial(PolarGrid::default(), "1", vec![], |_| 1.0);
            let mut worst: f64 = 0.0;
            for i in 1..=10 {
                for j in 0..10 {
                    let z = Complex64::from_polar(1.0 - 0.5f64.powi(i), 0.628 * j as f64);
                    worst = worst.max((apply_t(&w, &one, z)?.re - 1.0).abs());
                }
            }
            ("constants", common, json!({ "weight": w.to_string(), "max_residual": worst }), worst < 1e-9)
        }
    };
    let v = envelope("verify", json!({ "check": name, "passed": ok, "result": body }));
    write_json(common.out_dir()?, &format!("verify_{name}.json"), &v)?;
    Ok(if ok { Outcome::Ok(v) } else { Outcome::Mismatch(v) })
}

fn scenario(what: &ScenarioWhat) -> Result<Outcome, Error> {
    match what {
        ScenarioWhat::List => Ok(Outcome::Ok(envelope("scenario list", json!({ "builtins": list_builtins()? })))),
        ScenarioWhat::Run {
            name,
            levels,
            out,
            no_norms,
        } => {
            let list: Vec<Scenario> = if name == "all" { builtins()? } else { vec![builtin(name)?] };
            let opts = RunOptions {
                grid: RadialGrid::new(*levels, RadialGrid::DEFAULT_POINTS_PER_LEVEL)?,
                out_dir: out.clone(),
                norms: !no_norms,
                ..RunOptions::default()
            };
            let mut reports = Vec::new();
            let mut all = true;
            for s in &list {
                let r = run_scenario(s, &opts)?;
                for m in r.mismatches() {
                    eprintln!("{}: {} expected {}, observed {}", s.name, m.evaluator, m.expected, m.observed);
                }
                all &= r.all_matched;
                reports.push(json!({ "scenario": r.scenario, "all_matched": r.all_matched, "checks": r.checks }));
            }
            let v = envelope("scenario run", json!({ "reports": reports, "all_matched": all }));
            Ok(if all { Outcome::Ok(v) } else { Outcome::Mismatch(v) })
        }
        ScenarioWhat::Custom { common, name } => {
            let s = Scenario::custom(name, common.triple()?, common.p, common.q, common.seed)?;
            let opts = RunOptions {
                grid: common.grid()?,
                out_dir: common.out.clone(),
                ..RunOptions::default()
            };
            let r = run_scenario(&s, &opts)?;
            Ok(Outcome::Ok(envelope("scenario custom", serde_json::to_value(&r)?)))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence(_) | Error::Truncation(_) | Error::Degenerate(_) | Error::NonPositiveTail { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Classify { common, class, k } => classify(common, *class, *k),
        Cmd::Condition { which, common } => condition(which, common),
        Cmd::Norm {
            which,
            common,
            families,
            steps,
            order,
        } => norm(*which, common, families, *steps, *order),
        Cmd::Verify { what } => verify(what),
        Cmd::Scenario { what } => scenario(what),
    };
    // a closed pipe (e.g. `| head`) is not an error
    let print = |v: &Value| {
        let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).unwrap_or_default());
    };
    match res {
        Ok(Outcome::Ok(v)) => {
            print(&v);
            ExitCode::SUCCESS
        }
        Ok(Outcome::Mismatch(v)) => {
            print(&v);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
