//! `delay-hjb`: simulate the delay state equation, approximate the value function and
//! the feedback map, and run the verification suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use delay_hjb::config::{parse_control, parse_eta, ScenarioConfig};
use delay_hjb::dde::{integrate, verdict_of};
use delay_hjb::lift::equivalence_profile;
use delay_hjb::report::{write_file, write_trajectory};
use delay_hjb::value::{default_stencil, feedback_c, hamiltonian, partial_v_eta0, value_upper_bound, ValueProblem};
use delay_hjb::verify::{all_pass, verify_to_dir, Suite, Verifier};
use delay_hjb::{HState, Model};

#[derive(Parser, Debug)]
#[command(name = "delay-hjb", version, about = "Optimal consumption with a distributed delay")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML); the default scenario when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step (value search grid for `value` and `feedback`).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Delay grid spacing (value search grid for `value` and `feedback`).
    #[arg(long, global = true)]
    dxi: Option<f64>,
    /// Simulation horizon, or the value search horizon for `value` and `feedback`.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Control segments of the value search.
    #[arg(long, global = true)]
    segments: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the state equation under a control and report admissibility.
    Simulate {
        /// Initial history: const:v, ramp:v0:v1, bump:center:width:mass[:eta0], file:path.
        #[arg(long, default_value = "const:1")]
        eta: String,
        /// Consumption: zero, constant:v, pulse:v:until, file:path.
        #[arg(long, default_value = "zero")]
        control: String,
        /// Also run the lifted equation and compare it with the delay equation.
        #[arg(long)]
        lifted: bool,
    },
    /// Value surface over a grid of present values.
    Value {
        /// Past of the initial history; its present is replaced by each grid value.
        #[arg(long, default_value = "const:1")]
        eta: String,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
        eta0: Vec<f64>,
    },
    /// Feedback consumption `argmax_c (U1(c) - c V_eta0)` over a grid of present values.
    Feedback {
        #[arg(long, default_value = "const:1")]
        eta: String,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
        eta0: Vec<f64>,
    },
    /// Run a verification suite; exits nonzero when a probe fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Check the standing hypotheses of the scenario.
    Hypotheses,
}

struct Scenario {
    cfg: ScenarioConfig,
    text: Option<String>,
}

impl Scenario {
    fn load(common: &Common) -> Result<Self> {
        let (mut cfg, text) = match &common.config {
            Some(p) => {
                let (c, t) = ScenarioConfig::load(p)?;
                (c, Some(t))
            }
            None => (ScenarioConfig::default(), None),
        };
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(s) = common.segments {
            cfg.numerics.value.segments = s;
        }
        Ok(Self { cfg, text })
    }

    fn simulation_grid(&mut self, common: &Common) {
        let n = &mut self.cfg.numerics;
        n.dt = common.dt.unwrap_or(n.dt);
        n.dxi = common.dxi.unwrap_or(n.dxi);
        n.horizon = common.horizon.unwrap_or(n.horizon);
    }

    fn value_grid(&mut self, common: &Common) {
        let v = &mut self.cfg.numerics.value;
        v.dt = common.dt.unwrap_or(v.dt);
        v.dxi = common.dxi.unwrap_or(v.dxi);
        v.horizon = common.horizon.or(v.horizon);
    }

    fn model(&self, n: usize) -> Result<Model<f64>> {
        Ok(self.cfg.model::<f64>(n, self.text.as_deref())?)
    }
}

fn csv_file(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_file(path, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn num(v: f64) -> String {
    v.to_string()
}

fn simulate(common: &Common, eta_spec: &str, control_spec: &str, lifted: bool) -> Result<()> {
    let mut sc = Scenario::load(common)?;
    sc.simulation_grid(common);
    let model = sc.model(sc.cfg.grid_n()?)?;
    let nu = &sc.cfg.numerics;
    let eta = parse_eta(eta_spec, model.delay(), model.n())?;
    let control = parse_control(control_spec, nu.horizon)?;
    let traj = integrate(&model, &eta, &control, nu.horizon, nu.dt)?;
    let verdict = verdict_of(&traj, &control);
    fs::create_dir_all(&common.out)?;
    write_file(&common.out.join("trajectory.csv"), |b| write_trajectory(b, &traj))?;
    let until = verdict.admissible_until.map_or_else(|| "+inf".to_string(), num);
    csv_file(
        &common.out.join("verdict.csv"),
        &["eta", "control", "horizon", "admissible_until", "certified_forever"],
        &[vec![
            eta_spec.to_string(),
            control_spec.to_string(),
            num(nu.horizon),
            until.clone(),
            verdict.certified_forever.to_string(),
        ]],
    )?;
    println!("admissible_until={until} certified_forever={}", verdict.certified_forever);
    if lifted {
        let p = equivalence_profile(&model, &eta, &control, nu.horizon, nu.dt)?;
        let mut worst = 0.0f64;
        let rows: Vec<Vec<String>> = (0..p.distance.len())
            .map(|i| {
                worst = worst.max(p.distance[i]);
                vec![
                    num(p.lifted.times[i]),
                    num(p.lifted.states[i].eta0),
                    num(p.dde_present(i)),
                    num(p.distance[i]),
                    num(worst),
                ]
            })
            .collect();
        csv_file(
            &common.out.join("lifted.csv"),
            &["time", "x_lifted", "x_dde", "h_distance", "max_discrepancy"],
            &rows,
        )?;
        println!("max_discrepancy={}", p.sup());
    }
    Ok(())
}

struct ValueRow {
    eta0: f64,
    v_lo: f64,
    v_hi: f64,
    v_eta0: f64,
    feedback: f64,
    hamiltonian: f64,
}

fn value_rows(common: &Common, eta_spec: &str, grid: &[f64]) -> Result<(Vec<ValueRow>, f64)> {
    if grid.is_empty() {
        bail!("--eta0 needs at least one value");
    }
    let mut sc = Scenario::load(common)?;
    sc.value_grid(common);
    let model = sc.model(sc.cfg.value_n()?)?;
    let prob = ValueProblem::new(&model, sc.cfg.value_opts()?)?;
    let past = parse_eta(eta_spec, model.delay(), model.n())?;
    let bound = value_upper_bound(&model.params);
    let rows = grid
        .par_iter()
        .map(|&eta0| -> Result<ValueRow> {
            let eta = HState { eta0, ..past.clone() };
            let est = prob.solve(&eta, None).with_context(|| format!("eta0 = {eta0}"))?;
            let mut row = ValueRow {
                eta0,
                v_lo: est.v_lo,
                v_hi: est.v_hi,
                v_eta0: f64::NAN,
                feedback: f64::NAN,
                hamiltonian: f64::NAN,
            };
            if est.in_domain() {
                // near the boundary the stencil may leave the domain; the row then keeps NaN
                if let Ok(g) = partial_v_eta0(&prob, &eta, default_stencil(eta0), Some(&est)) {
                    row.v_eta0 = g.v_eta0;
                    if let (Ok(c), Ok(h)) = (feedback_c(&model.utilities, g.v_eta0), hamiltonian(&model.utilities, g.v_eta0)) {
                        row.feedback = c;
                        row.hamiltonian = h;
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, bound))
}

fn value(common: &Common, eta_spec: &str, grid: &[f64]) -> Result<()> {
    let (rows, bound) = value_rows(common, eta_spec, grid)?;
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.eta0),
                eta_spec.to_string(),
                num(r.v_lo),
                num(r.v_hi),
                num(bound),
                num(r.v_eta0),
                num(r.feedback),
            ]
        })
        .collect();
    fs::create_dir_all(&common.out)?;
    csv_file(
        &common.out.join("value.csv"),
        &["eta0", "eta1_tag", "v_lo", "v_hi", "v_bound", "v_eta0", "feedback_c"],
        &rows,
    )?;
    println!("{} rows written to {}", rows.len(), common.out.join("value.csv").display());
    Ok(())
}

fn feedback(common: &Common, eta_spec: &str, grid: &[f64]) -> Result<()> {
    let (rows, _) = value_rows(common, eta_spec, grid)?;
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.eta0),
                eta_spec.to_string(),
                num(r.v_eta0),
                num(r.feedback),
                num(r.hamiltonian),
            ]
        })
        .collect();
    fs::create_dir_all(&common.out)?;
    csv_file(
        &common.out.join("feedback.csv"),
        &["eta0", "eta1_tag", "v_eta0", "feedback_c", "hamiltonian"],
        &rows,
    )?;
    println!("{} rows written to {}", rows.len(), common.out.join("feedback.csv").display());
    Ok(())
}

fn verify(common: &Common, suite: &str) -> Result<bool> {
    let suite: Suite = suite.parse()?;
    let mut sc = Scenario::load(common)?;
    sc.simulation_grid(common);
    let verifier = Verifier::new(sc.cfg, sc.text.as_deref())?;
    let (reports, paths) = verify_to_dir(&verifier, suite, &common.out)?;
    for r in &reports {
        println!("{r}");
    }
    println!("reports: {}, {}", paths[0].display(), paths[1].display());
    Ok(all_pass(&reports))
}

fn hypotheses(common: &Common) -> Result<bool> {
    let mut sc = Scenario::load(common)?;
    sc.simulation_grid(common);
    let model = sc.cfg.model_unchecked::<f64>(sc.cfg.grid_n()?)?;
    model.params.check()?;
    let report = model.hypotheses();
    print!("{report}");
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.pass.to_string(), c.witness.clone().unwrap_or_default()])
        .collect();
    fs::create_dir_all(&common.out)?;
    csv_file(&common.out.join("hypotheses.csv"), &["hypothesis", "pass", "witness"], &rows)?;
    if !report.all_pass() {
        // the line-pointing message
        if let Err(e) = sc.model(model.n()) {
            eprintln!("error: {e}");
        }
    }
    Ok(report.all_pass())
}

fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate { eta, control, lifted } => simulate(c, eta, control, *lifted).map(|_| true),
        Command::Value { eta, eta0 } => value(c, eta, eta0).map(|_| true),
        Command::Feedback { eta, eta0 } => feedback(c, eta, eta0).map(|_| true),
        Command::Verify { suite } => verify(c, suite),
        Command::Hypotheses => hypotheses(c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
