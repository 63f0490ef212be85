//! TOML scenario files and the small spec languages for initial histories and
//! controls.
//!
//! ```toml
//! seed = 2011
//!
//! [model]
//! r = 0.05
//! delay = 1.0
//! rho = 0.5
//!
//! [kernel]
//! family = "linear_ramp"
//! params = [1.0]
//!
//! [f0]
//! kind = "affine"
//! a1 = 0.1
//! a2 = 0.4
//! cap = 10.0
//! b = 0.05
//!
//! [utility.u1]
//! kind = "bounded_power"
//! gamma = 0.5
//!
//! [numerics]
//! dt = 1e-3
//! dxi = 5e-3
//! ```
//!
//! Every key is optional; missing ones take the default scenario's values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dde::ControlPath;
use crate::error::{Error, Result};
use crate::hjb::ProbeOpts;
use crate::model::kernel::{Kernel, KernelFamily};
use crate::model::nonlinearity::{Nonlinearity, Table};
use crate::model::params::ModelParams;
use crate::model::utility::{ConsumptionUtility, StateUtility, UtilityPair};
use crate::model::Model;
use crate::scalar::{integer_ratio, Real};
use crate::state::HState;
use crate::value::ValueOpts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub model: ModelBlock,
    pub kernel: KernelBlock,
    pub f0: F0Block,
    pub utility: UtilityBlock,
    pub numerics: Numerics,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 2011,
            model: ModelBlock::default(),
            kernel: KernelBlock::default(),
            f0: F0Block::default(),
            utility: UtilityBlock::default(),
            numerics: Numerics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub r: f64,
    pub delay: f64,
    pub rho: f64,
    /// Lipschitz constant of `f₀`; derived from the `f0` block when absent.
    pub c_f0: Option<f64>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            r: 0.05,
            delay: 1.0,
            rho: 0.5,
            c_f0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelBlock {
    pub family: String,
    pub params: Vec<f64>,
}

impl Default for KernelBlock {
    fn default() -> Self {
        Self {
            family: "linear_ramp".into(),
            params: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum F0Block {
    /// `a1 min(x, cap) + a2 min(y, cap) + b`.
    Affine { a1: f64, a2: f64, cap: f64, b: f64 },
    /// Bilinear interpolation; `values` row-major over `(x_nodes, y_nodes)`.
    Table {
        x_nodes: Vec<f64>,
        y_nodes: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Default for F0Block {
    fn default() -> Self {
        F0Block::Affine {
            a1: 0.1,
            a2: 0.4,
            cap: 10.0,
            b: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityBlock {
    pub u1: U1Block,
    pub u2: U2Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum U1Block {
    BoundedPower { gamma: f64 },
    Exponential { k: f64 },
}

impl Default for U1Block {
    fn default() -> Self {
        U1Block::BoundedPower { gamma: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum U2Block {
    #[default]
    Zero,
    Log,
    NegPower { weight: f64, beta: f64 },
}

/// Grids for simulation (`dt`, `dxi`, `horizon`) and for the value search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub dxi: f64,
    pub horizon: f64,
    pub value: ValueNumerics,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            dxi: 5e-3,
            horizon: 3.0,
            value: ValueNumerics::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueNumerics {
    pub dt: f64,
    pub dxi: f64,
    /// `max(5/ρ, 3T)` when absent.
    pub horizon: Option<f64>,
    pub segments: usize,
    pub tol: f64,
}

impl Default for ValueNumerics {
    fn default() -> Self {
        let v = ValueOpts::<f64>::default();
        Self {
            dt: v.dt,
            dxi: 1.0 / v.n as f64,
            horizon: v.horizon,
            segments: v.segments,
            tol: v.tol,
        }
    }
}

/// Probe sample counts and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub samples: usize,
    pub pairs: usize,
    pub cont_tol: f64,
    pub hjb_tol: f64,
    pub stab_tol: f64,
    pub hjb_points: usize,
    pub refine_points: usize,
    pub refine_factor: usize,
    pub refine_decrease: f64,
    pub sequence_len: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = ProbeOpts::default();
        Self {
            samples: 1000,
            pairs: p.pairs,
            cont_tol: p.cont_tol,
            hjb_tol: p.hjb_tol,
            stab_tol: p.stab_tol,
            hjb_points: p.hjb_points,
            refine_points: p.refine_points,
            refine_factor: p.refine_factor,
            refine_decrease: p.refine_decrease,
            sequence_len: p.sequence_len,
        }
    }
}

/// Line of `key` inside `[section]` (or of the section header), 1-based.
fn locate(text: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if header.is_none() && (current == section || current.starts_with(&format!("{section}."))) {
                header = Some(i + 1);
            }
            continue;
        }
        if let Some(k) = key {
            let name = t.split('=').next().unwrap_or("").trim();
            if name == k && (current == section || current.starts_with(&format!("{section}."))) {
                return Some(i + 1);
            }
        }
    }
    header
}

fn pointer(text: Option<&str>, section: &str, key: Option<&str>) -> String {
    match text.and_then(|t| locate(t, section, key)) {
        Some(line) => format!("line {line} ([{section}])"),
        None => format!("[{section}] (default value)"),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    /// Kernel grid intervals `T / dxi`.
    pub fn grid_n(&self) -> Result<usize> {
        integer_ratio(self.model.delay, self.numerics.dxi, 1e-9)
            .filter(|&n| n >= 8)
            .ok_or_else(|| {
                Error::Config(format!(
                    "numerics.dxi = {} must divide the delay {} into at least 8 intervals",
                    self.numerics.dxi, self.model.delay
                ))
            })
    }

    pub fn value_n(&self) -> Result<usize> {
        integer_ratio(self.model.delay, self.numerics.value.dxi, 1e-9)
            .filter(|&n| n >= 8)
            .ok_or_else(|| {
                Error::Config(format!(
                    "numerics.value.dxi = {} must divide the delay {} into at least 8 intervals",
                    self.numerics.value.dxi, self.model.delay
                ))
            })
    }

    fn utilities<T: Real>(&self) -> UtilityPair<T> {
        let u1 = match self.utility.u1 {
            U1Block::BoundedPower { gamma } => ConsumptionUtility::BoundedPower { gamma: T::lit(gamma) },
            U1Block::Exponential { k } => ConsumptionUtility::Exponential { k: T::lit(k) },
        };
        let u2 = match self.utility.u2 {
            U2Block::Zero => StateUtility::Zero,
            U2Block::Log => StateUtility::Log,
            U2Block::NegPower { weight, beta } => StateUtility::NegPower {
                weight: T::lit(weight),
                beta: T::lit(beta),
            },
        };
        UtilityPair::new(u1, u2)
    }

    fn nonlinearity<T: Real>(&self) -> Result<Nonlinearity<T>> {
        Ok(match &self.f0 {
            F0Block::Affine { a1, a2, cap, b } => Nonlinearity::affine(T::lit(*a1), T::lit(*a2), T::lit(*cap), T::lit(*b)),
            F0Block::Table { x_nodes, y_nodes, values } => {
                if x_nodes.len() * y_nodes.len() != values.len() || x_nodes.is_empty() || y_nodes.is_empty() {
                    return Err(Error::Config(format!(
                        "f0 table has {} values for a {} x {} grid",
                        values.len(),
                        x_nodes.len(),
                        y_nodes.len()
                    )));
                }
                let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
                if !sorted(x_nodes) || !sorted(y_nodes) {
                    return Err(Error::Config("f0 table nodes must be strictly increasing".into()));
                }
                let lit = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect();
                Nonlinearity::Table(Table {
                    x_nodes: lit(x_nodes),
                    y_nodes: lit(y_nodes),
                    values: lit(values),
                })
            }
        })
    }

    /// The model on the simulation grid, without hypothesis validation.
    pub fn model_unchecked<T: Real>(&self, n: usize) -> Result<Model<T>> {
        let family: KernelFamily = self.kernel.family.parse()?;
        let delay = T::lit(self.model.delay);
        let kparams: Vec<T> = self.kernel.params.iter().map(|&v| T::lit(v)).collect();
        let kernel = Kernel::build_unchecked(family, &kparams, delay, n)?;
        let nl = self.nonlinearity()?;
        let utilities = self.utilities();
        let c_f0 = match self.model.c_f0 {
            Some(c) => T::lit(c),
            None => nl
                .lipschitz_bound()
                .ok_or_else(|| Error::Config("model.c_f0 is required for this f0".into()))?,
        };
        let params = ModelParams {
            r: T::lit(self.model.r),
            delay,
            rho: T::lit(self.model.rho),
            c_f0,
            u1_sup: utilities.u1.sup(),
            u2_sup: utilities.u2.sup(),
        };
        Ok(Model::new_unchecked(params, kernel, nl, utilities))
    }

    /// The validated model on an `n`-interval grid. `text` is the file contents, used
    /// to point errors at a line.
    pub fn model<T: Real>(&self, n: usize, text: Option<&str>) -> Result<Model<T>> {
        let m = self.model_unchecked::<T>(n)?;
        if let Err(e) = m.params.check() {
            let key = if self.model.r <= 0.0 || !self.model.r.is_finite() {
                Some("r")
            } else if self.model.rho <= 0.0 {
                Some("rho")
            } else {
                Some("delay")
            };
            return Err(Error::Config(format!("{}: {e}", pointer(text, "model", key))));
        }
        let report = m.hypotheses();
        if let Some(fail) = report.failures().next() {
            let section = match fail.name.split('.').next().unwrap_or("") {
                "u1" | "u2" => "utility",
                "model" if fail.name.contains("u2") => "utility",
                s => s,
            };
            let names: Vec<_> = report.failures().map(|c| c.name).collect();
            return Err(Error::Hypothesis(format!(
                "{}: {} ({})",
                pointer(text, section, None),
                names.join(", "),
                fail.witness.clone().unwrap_or_default()
            )));
        }
        Model::new(m.params, m.kernel, m.nl, m.utilities)
    }

    pub fn value_opts<T: Real>(&self) -> Result<ValueOpts<T>> {
        let v = &self.numerics.value;
        Ok(ValueOpts {
            dt: T::lit(v.dt),
            n: self.value_n()?,
            horizon: v.horizon.map(T::lit),
            segments: v.segments,
            tol: T::lit(v.tol),
            ..ValueOpts::default()
        })
    }

    pub fn probe_opts(&self) -> ProbeOpts {
        let t = &self.numerics.tolerances;
        ProbeOpts {
            seed: self.seed,
            pairs: t.pairs,
            cont_tol: t.cont_tol,
            hjb_tol: t.hjb_tol,
            stab_tol: t.stab_tol,
            hjb_points: t.hjb_points,
            refine_points: t.refine_points,
            refine_factor: t.refine_factor,
            refine_decrease: t.refine_decrease,
            sequence_len: t.sequence_len,
        }
    }
}

fn num(field: &str, spec: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{field}` is not a number in spec `{spec}`")))
}

fn fields<'a>(spec: &'a str, kind: &str, counts: &[usize]) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = spec.split(':').skip(1).collect();
    if counts.contains(&parts.len()) {
        Ok(parts)
    } else {
        Err(Error::Config(format!(
            "`{spec}`: {kind} takes {} field(s)",
            counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" or ")
        )))
    }
}

/// Initial histories:
///
/// * `const:v`: `η₀ = v`, `η₁ ≡ v`;
/// * `ramp:v0:v1`: past linear from `v0` at `-T` to `v1` at `0`, `η₀ = v1`;
/// * `bump:center:width:mass[:eta0]`: a tent of the given mass on `[center ± width/2]`,
///   `η₀ = eta0` (default 1);
/// * `file:path`: CSV `xi,eta1`, interpolated onto the grid, with an optional row
///   `eta0,v` (default: the value at `ξ = 0`).
pub fn parse_eta<T: Real>(spec: &str, delay: T, n: usize) -> Result<HState<T>> {
    let kind = spec.split(':').next().unwrap_or("");
    match kind {
        "const" => {
            let f = fields(spec, kind, &[1])?;
            let v = T::lit(num(f[0], spec)?);
            Ok(HState::constant(v, v, delay, n))
        }
        "ramp" => {
            let f = fields(spec, kind, &[2])?;
            let (v0, v1) = (num(f[0], spec)?, num(f[1], spec)?);
            let d = delay.as_f64();
            Ok(HState::from_fn(T::lit(v1), delay, n, |s| {
                T::lit(v1 + (v1 - v0) * s.as_f64() / d)
            }))
        }
        "bump" => {
            let f = fields(spec, kind, &[3, 4])?;
            let (center, width, mass) = (num(f[0], spec)?, num(f[1], spec)?, num(f[2], spec)?);
            let eta0 = if f.len() == 4 { num(f[3], spec)? } else { 1.0 };
            if !(width > 0.0) {
                return Err(Error::Config(format!("`{spec}`: bump width must be positive")));
            }
            let height = 2.0 * mass / width;
            Ok(HState::from_fn(T::lit(eta0), delay, n, |s| {
                let u = (s.as_f64() - center).abs() / (0.5 * width);
                T::lit(height * (1.0 - u).max(0.0))
            }))
        }
        "file" => {
            let path = spec.strip_prefix("file:").unwrap_or("");
            eta_from_csv(Path::new(path), delay, n)
        }
        _ => Err(Error::Config(format!(
            "unknown initial history `{spec}` (expected const:, ramp:, bump: or file:)"
        ))),
    }
}

fn eta_from_csv<T: Real>(path: &Path, delay: T, n: usize) -> Result<HState<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut eta0 = None;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = || Error::Config(format!("{}: line {line}: expected `xi,eta1`", path.display()));
        let (a, b) = (rec.get(0).ok_or_else(bad)?, rec.get(1).ok_or_else(bad)?);
        let v: f64 = b.parse().map_err(|_| bad())?;
        if a == "eta0" {
            eta0 = Some(v);
        } else {
            pts.push((a.parse().map_err(|_| bad())?, v));
        }
    }
    if pts.len() < 2 || pts.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Config(format!(
            "{}: need at least two rows with increasing xi",
            path.display()
        )));
    }
    let at = |s: f64| {
        let j = pts.partition_point(|p| p.0 <= s).clamp(1, pts.len() - 1);
        let ((x0, y0), (x1, y1)) = (pts[j - 1], pts[j]);
        let t = ((s - x0) / (x1 - x0)).clamp(0.0, 1.0);
        y0 + t * (y1 - y0)
    };
    let eta0 = eta0.unwrap_or_else(|| at(0.0));
    Ok(HState::from_fn(T::lit(eta0), delay, n, |s| T::lit(at(s.as_f64()))))
}

/// Controls: `zero`, `constant:v` (over `[0, horizon)`), `pulse:v:until`, or
/// `file:path` (CSV `t,c` on equally spaced segment starts).
pub fn parse_control<T: Real>(spec: &str, horizon: T) -> Result<ControlPath<T>> {
    let kind = spec.split(':').next().unwrap_or("");
    match kind {
        "zero" => Ok(ControlPath::zero()),
        "constant" => {
            let f = fields(spec, kind, &[1])?;
            ControlPath::constant(T::lit(num(f[0], spec)?), horizon, 1)
        }
        "pulse" => {
            let f = fields(spec, kind, &[2])?;
            ControlPath::new(T::lit(num(f[1], spec)?), vec![T::lit(num(f[0], spec)?)])
        }
        "file" => {
            let path = Path::new(spec.strip_prefix("file:").unwrap_or(""));
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let mut rows = Vec::new();
            for rec in reader.records() {
                let rec = rec?;
                let parse = |k: usize| -> Result<f64> {
                    rec.get(k)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::Config(format!("{}: expected `t,c` rows", path.display())))
                };
                rows.push((parse(0)?, parse(1)?));
            }
            if rows.len() < 2 {
                return Err(Error::Config(format!("{}: need at least two segments", path.display())));
            }
            let dt = rows[1].0 - rows[0].0;
            if rows
                .windows(2)
                .any(|w| ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.abs().max(1.0))
            {
                return Err(Error::Config(format!("{}: segment starts must be equally spaced", path.display())));
            }
            ControlPath::new(T::lit(dt), rows.iter().map(|r| T::lit(r.1)).collect())
        }
        _ => Err(Error::Config(format!(
            "unknown control `{spec}` (expected zero, constant:, pulse: or file:)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_scenario() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        let m: Model<f64> = cfg.model(cfg.grid_n().unwrap(), None).unwrap();
        let d = Model::<f64>::default_scenario();
        assert_eq!(m.n(), 200);
        assert_eq!(m.params, d.params);
        assert_eq!(m.kernel, d.kernel);
    }

    #[test]
    fn nonpositive_rate_points_at_its_line() {
        let text = "seed = 1\n\n[model]\nrho = 0.5\nr = -0.1\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let err = cfg.model::<f64>(200, Some(text)).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn bad_kernel_points_at_its_section() {
        let text = "[kernel]\nfamily = \"constant\"\nparams = [1.0]\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let err = cfg.model::<f64>(200, Some(text)).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("kernel.vanishes_at_minus_T"), "{err}");
        assert!(cfg.model_unchecked::<f64>(200).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = ScenarioConfig::from_toml_str("[model]\nrr = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn eta_specs() {
        let e: HState<f64> = parse_eta("const:2", 1.0, 10).unwrap();
        assert_eq!((e.eta0, e.eta1[0]), (2.0, 2.0));
        let e: HState<f64> = parse_eta("ramp:0:1", 1.0, 10).unwrap();
        assert_eq!((e.eta0, e.eta1[0], e.eta1[10]), (1.0, 0.0, 1.0));
        let e: HState<f64> = parse_eta("bump:-0.5:0.4:0.3", 1.0, 200).unwrap();
        let mass: f64 = e.eta1.iter().sum::<f64>() * e.dxi;
        assert!((mass - 0.3).abs() < 1e-3, "{mass}");
        assert!(parse_eta::<f64>("bump:-0.5:0:1", 1.0, 10).is_err());
        assert!(parse_eta::<f64>("spline:1", 1.0, 10).is_err());
    }

    #[test]
    fn control_specs() {
        let c: ControlPath<f64> = parse_control("pulse:2:0.5", 3.0).unwrap();
        assert_eq!((c.value_at(0.25), c.value_at(0.75)), (2.0, 0.0));
        let c: ControlPath<f64> = parse_control("constant:1000", 3.0).unwrap();
        assert_eq!(c.value_at(2.9), 1000.0);
        assert!(parse_control::<f64>("constant:-1", 3.0).is_err());
        assert!(parse_control::<f64>("zero", 3.0).unwrap().is_zero());
    }
}
