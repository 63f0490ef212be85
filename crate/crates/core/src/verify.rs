//! Verification suites: operator identities, trajectory properties, value-function
//! structure and the HJB checks, assembled from one scenario config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::dde::{comparison_gap, hpp_lower_bound, integrate, ControlPath};
use crate::error::{Error, Result};
use crate::hjb::{
    concavity_probe, dpp_probe, hjb_probe, large_present_scan, monotonicity_probe, regularity_probe, Planted,
    ProbeOpts, Recording, Sequence,
};
use crate::lift::checks::{equivalence_check, gronwall_check, gronwall_semigroup_check, operator_suite, OperatorCheckOpts};
use crate::model::Model;
use crate::report::{write_file, write_rows, write_summary, CheckRow, ProbeReport};
use crate::sampling::{random_hpp_state, seeded_rng};
use crate::scalar::Real;
use crate::state::HState;
use crate::value::ValueProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Operators,
    Trajectories,
    Value,
    Hjb,
    All,
}

impl Suite {
    pub fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Operators, Suite::Trajectories, Suite::Value, Suite::Hjb],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Operators => "operators",
            Suite::Trajectories => "trajectories",
            Suite::Value => "value",
            Suite::Hjb => "hjb",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operators" => Ok(Suite::Operators),
            "trajectories" => Ok(Suite::Trajectories),
            "value" => Ok(Suite::Value),
            "hjb" => Ok(Suite::Hjb),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!(
                "unknown suite `{other}` (operators, trajectories, value, hjb, all)"
            ))),
        }
    }
}

fn f(v: impl Real) -> f64 {
    v.as_f64()
}

/// Piecewise-constant consumption with random levels in `[0, max)` on `segments`
/// pieces of length `len`.
fn random_control<T: Real>(rng: &mut impl Rng, len: T, segments: usize, max: f64) -> ControlPath<T> {
    let values = (0..segments).map(|_| T::lit(rng.gen_range(0.0..max))).collect();
    ControlPath::new(len, values).expect("nonnegative levels")
}

/// Comparison on random `(η, c, δ ≥ 0, η' ≤ η)`: paths with more consumption or
/// smaller data stay below `x(·; η, c)` within `grid_tol`. Planted violations (larger
/// data or less consumption) must be detected.
pub fn comparison_probe<T: Real>(model: &Model<T>, samples: usize, dt: T, horizon: T, seed: u64) -> Vec<ProbeReport> {
    let mut rng = seeded_rng(seed, 40);
    let (delay, n) = (model.delay(), model.n());
    let len = delay * T::lit(0.25);
    let segments = (horizon / len).ceil().to_usize().unwrap_or(1);
    let cases: Vec<_> = (0..samples)
        .map(|_| {
            let eta: HState<T> = random_hpp_state(&mut rng, delay, n);
            let c = random_control(&mut rng, len, segments, 0.5);
            let delta = T::lit(rng.gen_range(0.0..0.3));
            let (u0, u1) = (T::lit(rng.gen_range(0.5..1.0)), T::lit(rng.gen_range(0.5..1.0)));
            let lower = HState {
                eta0: eta.eta0 * u0,
                eta1: eta.eta1.iter().map(|&v| v * u1).collect(),
                dxi: eta.dxi,
            };
            (eta, c, delta, lower)
        })
        .collect();
    type Rows = (CheckRow, CheckRow, CheckRow);
    let rows: Vec<Rows> = cases
        .par_iter()
        .enumerate()
        .map(|(k, (eta, c, delta, lower))| {
            let input = format!("sample {k}, eta0 {}, delta {delta}", eta.eta0);
            let gap = |sub_eta: &HState<T>, sub_c: &ControlPath<T>| -> Result<(T, T)> {
                let sub = integrate(model, sub_eta, sub_c, horizon, dt)?;
                comparison_gap(model, &sub, eta, c)
            };
            let more = c.shifted(*delta).and_then(|cd| {
                let (g1, tol) = gap(eta, &cd)?;
                let (g2, _) = gap(lower, c)?;
                Ok((g1.max(g2), tol))
            });
            let sub_row = match more {
                Ok((g, tol)) => CheckRow::new("traj.comparison", k, input.clone(), f(g), 0.0, f(g.max(T::zero())), f(tol)),
                Err(e) => CheckRow::failed("traj.comparison", k, e.to_string()),
            };
            // planted: start at twice the data, and consume less
            let up = eta.scaled(T::lit(2.0));
            let planted = |check: &str, res: Result<(T, T)>| match res {
                Ok((g, tol)) => CheckRow::new(check, k, input.clone(), f(g), f(tol), if g > tol { 0.0 } else { 1.0 }, 0.0),
                Err(e) => CheckRow::failed(check, k, e.to_string()),
            };
            let data = planted("traj.comparison_planted_data", gap(&up, c));
            let less = ControlPath::constant(T::zero(), horizon, 1).and_then(|zero| {
                let raised = c.shifted(T::lit(0.5))?;
                let sub = integrate(model, eta, &zero, horizon, dt)?;
                comparison_gap(model, &sub, eta, &raised)
            });
            let cons = planted("traj.comparison_planted_control", less);
            (sub_row, data, cons)
        })
        .collect();
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (x, y, z) in rows {
        a.push(x);
        b.push(y);
        c.push(z);
    }
    vec![
        ProbeReport::from_rows("traj.comparison", a),
        ProbeReport::from_rows("traj.comparison_planted_data", b),
        ProbeReport::from_rows("traj.comparison_planted_control", c),
    ]
}

/// `x(t; η, 0) ≥ η₀ e^{-C_f0 t} - grid_tol` on `[0, horizon]` for random `η ∈ H₊₊`.
pub fn positivity_probe<T: Real>(model: &Model<T>, samples: usize, dt: T, horizon: T, seed: u64) -> ProbeReport {
    let mut rng = seeded_rng(seed, 41);
    let states: Vec<HState<T>> = (0..samples)
        .map(|_| random_hpp_state(&mut rng, model.delay(), model.n()))
        .collect();
    let rows = states
        .par_iter()
        .enumerate()
        .map(|(k, eta)| {
            let run = || -> Result<CheckRow> {
                let tr = integrate(model, eta, &ControlPath::zero(), horizon, dt)?;
                let mut worst = T::neg_infinity();
                for (t, x) in tr.times.iter().zip(&tr.x).skip(tr.history_len) {
                    worst = worst.max(hpp_lower_bound(&model.params, eta, *t)? - *x);
                }
                Ok(CheckRow::new(
                    "traj.positivity_bound",
                    k,
                    format!("sample {k}, eta0 {}", eta.eta0),
                    f(worst),
                    0.0,
                    f(worst.max(T::zero())),
                    f(tr.grid_tol()),
                ))
            };
            run().unwrap_or_else(|e| CheckRow::failed("traj.positivity_bound", k, e.to_string()))
        })
        .collect();
    ProbeReport::from_rows("traj.positivity_bound", rows)
}

/// `η ≤ η̄` gives `x(·; η, c) ≤ x(·; η̄, c) + grid_tol`.
pub fn data_monotonicity_probe<T: Real>(model: &Model<T>, samples: usize, dt: T, horizon: T, seed: u64) -> ProbeReport {
    let mut rng = seeded_rng(seed, 42);
    let (delay, n) = (model.delay(), model.n());
    let len = delay * T::lit(0.25);
    let segments = (horizon / len).ceil().to_usize().unwrap_or(1);
    let cases: Vec<_> = (0..samples)
        .map(|_| {
            let eta: HState<T> = random_hpp_state(&mut rng, delay, n);
            let bump: HState<T> = random_hpp_state(&mut rng, delay, n);
            let s = T::lit(rng.gen_range(0.0..0.5));
            let c = random_control(&mut rng, len, segments, 0.5);
            (eta.clone(), eta.axpy(s, &bump), c)
        })
        .collect();
    let rows = cases
        .par_iter()
        .enumerate()
        .map(|(k, (eta, above, c))| {
            let run = || -> Result<CheckRow> {
                let sub = integrate(model, eta, c, horizon, dt)?;
                let (g, tol) = comparison_gap(model, &sub, above, c)?;
                Ok(CheckRow::new("traj.data_monotonicity", k, format!("sample {k}"), f(g), 0.0, f(g.max(T::zero())), f(tol)))
            };
            run().unwrap_or_else(|e| CheckRow::failed("traj.data_monotonicity", k, e.to_string()))
        })
        .collect();
    ProbeReport::from_rows("traj.data_monotonicity", rows)
}

/// Terminal error against a `dt/16` reference must drop by `min_ratio` when `dt` halves.
pub fn self_convergence_probe<T: Real>(model: &Model<T>, eta: &HState<T>, dt: T, horizon: T, min_ratio: f64) -> ProbeReport {
    let run = || -> Result<CheckRow> {
        let end = |step: T| -> Result<T> {
            let tr = integrate(model, eta, &ControlPath::zero(), horizon, step)?;
            Ok(*tr.x.last().expect("nonempty"))
        };
        let reference = end(dt / T::lit(16.0))?;
        let e1 = (end(dt)? - reference).abs();
        let e2 = (end(dt * T::lit(0.5))? - reference).abs();
        let ratio = e1 / e2.max(T::min_positive_value());
        Ok(CheckRow::new(
            "traj.self_convergence",
            0,
            format!("dt {dt}, terminal errors {e1:e} / {e2:e}"),
            f(ratio),
            min_ratio,
            (min_ratio - f(ratio)).max(0.0),
            0.0,
        ))
    };
    ProbeReport::single(run().unwrap_or_else(|e| CheckRow::failed("traj.self_convergence", 0, e.to_string())))
}

/// Passes iff the planted report fails: the probe is able to see a violation.
fn detects(name: &str, planted: &ProbeReport) -> ProbeReport {
    ProbeReport::single(CheckRow::new(
        name,
        0,
        format!("planted {}: max violation {:e}", planted.probe_name, planted.max_violation),
        planted.max_violation,
        planted.tolerance,
        if planted.pass { 1.0 } else { 0.0 },
        0.0,
    ))
}

/// Models and grids for the suites, built once from a config.
pub struct Verifier {
    pub cfg: ScenarioConfig,
    /// The model on the simulation grid; unchecked when hypotheses fail.
    pub model: Model<f64>,
    /// `Some(reason)` when the config fails hypothesis validation.
    pub invalid: Option<String>,
}

impl Verifier {
    pub fn new(cfg: ScenarioConfig, text: Option<&str>) -> Result<Self> {
        let n = cfg.grid_n()?;
        let (model, invalid) = match cfg.model::<f64>(n, text) {
            Ok(m) => (m, None),
            Err(Error::Hypothesis(msg)) => (cfg.model_unchecked::<f64>(n)?, Some(msg)),
            Err(e) => return Err(e),
        };
        Ok(Self { cfg, model, invalid })
    }

    fn dt(&self) -> f64 {
        self.cfg.numerics.dt
    }

    fn horizon(&self) -> f64 {
        3.0 * self.model.delay()
    }

    fn probe_opts(&self) -> ProbeOpts {
        self.cfg.probe_opts()
    }

    pub fn run(&self, suite: Suite) -> Result<Vec<ProbeReport>> {
        let mut out = Vec::new();
        if let Some(msg) = &self.invalid {
            out.push(ProbeReport::single(CheckRow::failed("config.hypotheses", 0, msg.clone())));
        }
        for part in suite.parts() {
            out.extend(match part {
                Suite::Operators => self.operators(),
                Suite::Trajectories => self.trajectories(),
                Suite::Value => self.value()?,
                Suite::Hjb => self.hjb()?,
                Suite::All => unreachable!("expanded by parts"),
            });
        }
        Ok(out)
    }

    pub fn operators(&self) -> Vec<ProbeReport> {
        let opts = OperatorCheckOpts {
            samples: self.cfg.numerics.tolerances.samples,
            seed: self.cfg.seed,
        };
        operator_suite(&self.model, opts)
    }

    pub fn trajectories(&self) -> Vec<ProbeReport> {
        let (m, dt, h, seed) = (&self.model, self.dt(), self.horizon(), self.cfg.seed);
        let mut out = comparison_probe(m, 100, dt, h, seed);
        out.push(positivity_probe(m, 100, dt, h, seed));
        out.push(data_monotonicity_probe(m, 100, dt, h, seed));
        let eta = HState::constant(1.0, 1.0, m.delay(), m.n());
        out.push(self_convergence_probe(m, &eta, dt, h, 1.8));
        let smooth = |delay: f64, n: usize| HState::from_fn(1.0, delay, n, |s: f64| 1.0 + 0.5 * (std::f64::consts::PI * s / delay).sin());
        out.extend(equivalence_check(m, &smooth, &ControlPath::zero(), dt, 5e-3, 1.8));
        out.extend(gronwall_check(m, 50, dt, seed));
        out.push(gronwall_semigroup_check(m, 50, dt, seed));
        out
    }

    fn value_problem(&self) -> Result<std::result::Result<ValueProblem<f64>, ProbeReport>> {
        if let Some(msg) = &self.invalid {
            return Ok(Err(ProbeReport::single(CheckRow::failed(
                "value.setup",
                0,
                format!("skipped: {msg}"),
            ))));
        }
        Ok(Ok(ValueProblem::new(&self.model, self.cfg.value_opts()?)?))
    }

    pub fn value(&self) -> Result<Vec<ProbeReport>> {
        let prob = match self.value_problem()? {
            Ok(p) => p,
            Err(r) => return Ok(vec![r]),
        };
        let opts = self.probe_opts();
        let rec = Recording::new(&prob);
        let mut out = vec![concavity_probe(&rec, &opts), monotonicity_probe(&rec, &opts)];
        let past = HState::constant(1.0, 1.0, prob.model.delay(), prob.model.n());
        let levels = [1.0, 10.0, 100.0, 1e3, 1e4];
        out.push(large_present_scan(&rec, &past, &levels, 0.05));
        out.push(rec.ceiling_report());
        let small = ProbeOpts {
            pairs: 8,
            ..opts.clone()
        };
        out.push(detects("selftest.concavity", &concavity_probe(&Planted::Convex(prob.clone()), &small)));
        out.push(detects(
            "selftest.monotonicity",
            &monotonicity_probe(&Planted::Decreasing(prob.clone()), &small),
        ));
        Ok(out)
    }

    pub fn hjb(&self) -> Result<Vec<ProbeReport>> {
        let prob = match self.value_problem()? {
            Ok(p) => p,
            Err(r) => return Ok(vec![r]),
        };
        let opts = self.probe_opts();
        let mut out = hjb_probe(&prob, &opts);
        out.push(dpp_probe(&prob, &[0.5, 1.0], &opts));
        let (delay, n) = (prob.model.delay(), prob.model.n());
        let eta = crate::hjb::hjb_sample_points(&prob, 1, opts.seed)[0].clone();
        let bump = HState::from_fn(0.0, delay, n, |s: f64| 1.0 + s / delay);
        for seq in [Sequence::Present(0.1), Sequence::Past(bump), Sequence::Constant] {
            out.push(regularity_probe(&prob, &eta, &seq, &opts));
        }
        Ok(out)
    }
}

/// Runs `suite` and writes `verify_<suite>.csv` (rows) and `verify_<suite>_summary.csv`
/// into `out`. Returns the reports and the two paths.
pub fn verify_to_dir(verifier: &Verifier, suite: Suite, out: &Path) -> Result<(Vec<ProbeReport>, [PathBuf; 2])> {
    let reports = verifier.run(suite)?;
    std::fs::create_dir_all(out)?;
    let rows = out.join(format!("verify_{suite}.csv"));
    let summary = out.join(format!("verify_{suite}_summary.csv"));
    write_file(&rows, |b| write_rows(b, &reports))?;
    write_file(&summary, |b| write_summary(b, &reports))?;
    Ok((reports, [rows, summary]))
}

/// No non-diagnostic probe failed.
pub fn all_pass(reports: &[ProbeReport]) -> bool {
    reports.iter().all(|r| r.pass || r.diagnostic)
}
