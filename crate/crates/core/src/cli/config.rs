//! The JSON run configuration and its translation into a ready-to-run problem.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::families::InitialData;
use crate::error::{Error, Result};
use crate::model::{build_params, mass_profile_from_density, MassProfile, Params, RadialProfile};
use crate::solver::{rescale_initial, Grid, StepControls};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub n: u32,
    #[serde(rename = "R")]
    pub radius: f64,
    pub beta: f64,
    pub alpha: f64,
}

fn default_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "N")]
    pub nodes: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}
fn tol_mass() -> f64 {
    1e-6
}
fn tol_tight() -> f64 {
    1e-8
}
fn tol_vr() -> f64 {
    1e-10
}
fn tol_odi() -> f64 {
    crate::blowup::ODI_TOL
}

/// Which invariant suites `verify` runs, and their tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksBlock {
    #[serde(default = "yes")]
    pub bounds: bool,
    #[serde(default = "yes")]
    pub mass: bool,
    #[serde(default = "yes")]
    pub barrier: bool,
    #[serde(default = "yes")]
    pub concavity: bool,
    #[serde(default = "yes")]
    pub slope: bool,
    #[serde(default = "yes")]
    pub vr_bound: bool,
    #[serde(default)]
    pub epsilon_monotonicity: bool,
    #[serde(default)]
    pub odi: bool,
    #[serde(default)]
    pub comparison: bool,
    #[serde(default = "tol_mass")]
    pub tol_mass: f64,
    #[serde(default = "tol_tight")]
    pub tol_barrier: f64,
    #[serde(default = "tol_tight")]
    pub tol_concavity: f64,
    #[serde(default = "tol_tight")]
    pub tol_slope: f64,
    #[serde(default = "tol_vr")]
    pub tol_vr: f64,
    #[serde(default = "tol_tight")]
    pub tol_eps: f64,
    #[serde(default = "tol_odi")]
    pub tol_odi: f64,
    #[serde(default = "tol_tight")]
    pub tol_comparison: f64,
}

impl Default for ChecksBlock {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupBlock {
    /// Mass required inside the concentration ball; defaults to `m`.
    #[serde(default)]
    pub m0: Option<f64>,
    /// Alternative to `m0`: a fraction of the total mass.
    #[serde(default)]
    pub m0_fraction: Option<f64>,
    #[serde(default, rename = "C4")]
    pub c4: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// JSON pointer into the configuration, e.g. `/initial/height`.
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsBlock,
    pub initial: InitialData,
    pub grid: GridBlock,
    #[serde(default)]
    pub controls: StepControls,
    #[serde(default)]
    pub checks: ChecksBlock,
    #[serde(default)]
    pub blowup: Option<BlowupBlock>,
    #[serde(default)]
    pub output: Option<OutputBlock>,
    /// Existing trajectory directory for `verify`.
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

/// A configuration together with the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub raw: Value,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    from_value(raw, base)
}

pub fn from_value(raw: Value, base: PathBuf) -> Result<LoadedConfig> {
    let config: RunConfig =
        serde_json::from_value(raw.clone()).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
    config.validate()?;
    Ok(LoadedConfig { config, raw, base })
}

impl RunConfig {
    /// Range checks that do not need the initial data.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        crate::model::Params::new(p.n, p.radius, p.beta, p.alpha, 1.0)?;
        self.initial.validate(p.radius)?;
        self.controls.validate()?;
        let g = &self.grid;
        if g.nodes < 3 {
            return Err(Error::GridTooCoarse { needed: 3, got: g.nodes });
        }
        let top = p.radius.powi(p.n as i32);
        if !(g.epsilon >= 0.0 && g.epsilon < top) {
            return Err(Error::InvalidParameter(format!("grid.epsilon = {} outside [0, R^n)", g.epsilon)));
        }
        if !(g.q >= 1.0) {
            return Err(Error::InvalidParameter(format!("grid.q = {} must be at least 1", g.q)));
        }
        if let Some(list) = &g.eps_list {
            if list.is_empty() || list.windows(2).any(|e| !(e[1] < e[0])) || list.iter().any(|&e| !(e > 0.0 && e < top)) {
                return Err(Error::InvalidParameter(
                    "grid.eps_list must be strictly decreasing inside (0, R^n)".into(),
                ));
            }
        }
        if let Some(b) = &self.blowup {
            if b.m0.is_some() && b.m0_fraction.is_some() {
                return Err(Error::InvalidParameter("give at most one of blowup.m0 and blowup.m0_fraction".into()));
            }
            if let Some(f) = b.m0_fraction {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::InvalidParameter(format!("blowup.m0_fraction = {f} must lie in (0, 1]")));
                }
            }
            if let Some(c4) = b.c4 {
                if !(c4 > 0.0) {
                    return Err(Error::InvalidParameter(format!("blowup.C4 = {c4} must be positive")));
                }
                if p.alpha == 1.0 && c4 != 1.0 {
                    return Err(Error::InvalidParameter("C4 is fixed to 1 when alpha = 1".into()));
                }
            }
            crate::blowup::select_gamma(p.n, p.beta, b.gamma)?;
        }
        Ok(())
    }
}

/// Everything a run needs, derived from a configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: Params,
    pub u0: RadialProfile,
    /// Initial mass profile on the `ε = 0` grid.
    pub w0_full: MassProfile,
    /// Initial mass profile on the run's own `[ε, Rⁿ]` grid.
    pub w0: MassProfile,
    pub epsilon: f64,
}

pub fn build_problem(cfg: &RunConfig, base: &Path) -> Result<Problem> {
    let pb = &cfg.params;
    // The ε = 0 grid only depends on R, n; a unit-mass placeholder suffices.
    let shape = Params::new(pb.n, pb.radius, pb.beta, pb.alpha, 1.0)?;
    let grid0 = Grid::graded(&shape, cfg.grid.nodes, cfg.grid.q, 0.0)?;
    let nf = f64::from(pb.n);
    let last = grid0.len() - 1;
    let radii: Vec<f64> = grid0.nodes()[1..]
        .iter()
        .enumerate()
        .map(|(k, s)| if k + 1 == last { pb.radius } else { s.powf(1.0 / nf) })
        .collect();
    let u0 = cfg.initial.sample(&radii, pb.radius, base)?;
    let params = build_params(pb.n, pb.radius, pb.beta, pb.alpha, &u0)?;
    let w0_full = mass_profile_from_density(&u0, &params, grid0.nodes())?;
    let w0 = rescale_initial(&w0_full, &params, cfg.grid.epsilon)?;
    Ok(Problem { params, u0, w0_full, w0, epsilon: cfg.grid.epsilon })
}

impl Problem {
    /// `(m0, C4, γ)` from the blow-up block with documented defaults.
    pub fn blowup_inputs(&self, block: Option<&BlowupBlock>) -> Result<(f64, f64, f64)> {
        let p = &self.params;
        let empty = BlowupBlock { m0: None, m0_fraction: None, c4: None, gamma: None };
        let b = block.unwrap_or(&empty);
        let m0 = match (b.m0, b.m0_fraction) {
            (Some(m0), _) => m0,
            (None, Some(f)) => f * p.mass,
            (None, None) => p.mass,
        };
        let c4 = if p.alpha == 1.0 {
            1.0
        } else {
            b.c4.unwrap_or_else(|| crate::blowup::default_c4(p, self.u0.sup()))
        };
        let gamma = crate::blowup::select_gamma(p.n, p.beta, b.gamma)?;
        Ok((m0, c4, gamma))
    }
}

/// Sets the value at a JSON pointer, creating the last key if its parent object exists.
pub fn set_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<()> {
    if let Some(slot) = doc.pointer_mut(pointer) {
        *slot = value;
        return Ok(());
    }
    let (parent, key) = pointer
        .rsplit_once('/')
        .ok_or_else(|| Error::InvalidParameter(format!("sweep key {pointer:?} is not a JSON pointer")))?;
    match doc.pointer_mut(parent) {
        Some(Value::Object(map)) => {
            map.insert(key.replace("~1", "/").replace("~0", "~"), value);
            Ok(())
        }
        _ => Err(Error::InvalidParameter(format!("sweep key {pointer:?} does not name a config field"))),
    }
}
