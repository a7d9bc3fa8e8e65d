//! Declarative experiment configuration (TOML).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marching::{InitialData, PlaneWave, StartScheme};
use crate::medium::{Medium, Point};
use crate::separation::SeparationVariant;
use crate::tracker::RayDynamics;
use crate::assembly::C;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub rays: RaysConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub reference: ReferenceOverrides,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `c1`, `c2` or `constant(v)`.
    pub medium: String,
    pub omega: f64,
    /// Cells per side, `1/h`.
    pub n: usize,
    #[serde(default = "one")]
    pub t_final: f64,
    /// Defaults to `h/100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "ten")]
    pub gamma: f64,
}

/// One plane-wave component `a e^{iω(g·x + c)}` with `u_t = iω b e^{iω(g·x + c)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    /// `[re, im]`.
    pub amplitude: [f64; 2],
    /// `[re, im]`.
    pub velocity: [f64; 2],
    pub grad: Point,
    #[serde(default)]
    pub offset: f64,
}

impl WaveConfig {
    pub fn to_plane_wave(self) -> PlaneWave {
        PlaneWave {
            amplitude: C::new(self.amplitude[0], self.amplitude[1]),
            velocity: C::new(self.velocity[0], self.velocity[1]),
            grad: self.grad,
            offset: self.offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub waves: Vec<WaveConfig>,
}

impl InitialConfig {
    pub fn data(&self) -> InitialData {
        InitialData::PlaneWaves(self.waves.iter().map(|w| w.to_plane_wave()).collect())
    }
}

/// A family of straight initial wavefronts `x_axis = β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontFamily {
    pub axis: usize,
    pub betas: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsName {
    #[default]
    Eikonal,
    Normalized,
}

impl DynamicsName {
    pub fn dynamics(self) -> RayDynamics {
        match self {
            DynamicsName::Eikonal => RayDynamics::Eikonal,
            DynamicsName::Normalized => RayDynamics::Normalized,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    #[default]
    Centroid,
    Representative,
}

impl VariantName {
    pub fn variant(self) -> SeparationVariant {
        match self {
            VariantName::Centroid => SeparationVariant::Centroid,
            VariantName::Representative => SeparationVariant::Representative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaysConfig {
    /// When false, every cell carries only the default directions.
    pub enabled: bool,
    /// Defaults to the PDE time step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub alpha_x: f64,
    pub alpha_p: f64,
    pub epsilon: f64,
    pub variant: VariantName,
    pub dynamics: DynamicsName,
    pub defaults: Vec<Point>,
    pub fronts: Vec<FrontFamily>,
    pub samples: usize,
    pub splits: usize,
}

impl Default for RaysConfig {
    fn default() -> Self {
        RaysConfig {
            enabled: true,
            dt: None,
            alpha_x: 10.0,
            alpha_p: 100.0,
            epsilon: 0.2,
            variant: VariantName::default(),
            dynamics: DynamicsName::default(),
            defaults: vec![[1.0, 0.0]],
            fronts: vec![FrontFamily { axis: 0, betas: default_betas() }],
            samples: 200,
            splits: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartName {
    #[default]
    ForwardEuler,
    Taylor,
}

impl StartName {
    pub fn scheme(self) -> StartScheme {
        match self {
            StartName::ForwardEuler => StartScheme::ForwardEuler,
            StartName::Taylor => StartScheme::Taylor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// POD threshold; `None` disables truncation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pod: Option<f64>,
    pub start: StartName,
    pub snapshots: usize,
    pub weight_degree: usize,
    pub weight_tolerance: f64,
    /// Plain bilinear IPDG: one direction `(0, 0)` per cell, no ray stage.
    pub baseline: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let a = crate::assembly::AssemblyOptions::default();
        SolverConfig {
            pod: None,
            start: StartName::default(),
            snapshots: 10,
            weight_degree: a.weight_degree,
            weight_tolerance: a.weight_tolerance,
            baseline: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Also run the refined reference and report the self-convergence gap.
    pub self_check: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// `x₂` of the 1D slice.
    pub slice_x2: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { slice_x2: 0.3 }
    }
}

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

pub fn default_betas() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Parses `31.4`, `10pi`, `10*pi`, `pi`.
pub fn parse_frequency(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    let bad = || Error::config(format!("cannot parse frequency `{s}`"));
    let v = if let Some(head) = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        let head = head.strip_suffix('*').unwrap_or(head);
        let k: f64 = if head.is_empty() { 1.0 } else { head.parse().map_err(|_| bad())? };
        k * PI
    } else {
        t.parse().map_err(|_| bad())?
    };
    if !(v.is_finite() && v >= 0.0) {
        return Err(bad());
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn medium(&self) -> Result<Medium> {
        Medium::from_name(&self.problem.medium)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.problem.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.problem.dt.unwrap_or(self.h() / 100.0)
    }

    pub fn ray_dt(&self) -> f64 {
        self.rays.dt.unwrap_or_else(|| self.dt())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        self.medium()?;
        let positive = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be positive")))
            }
        };
        if p.n == 0 {
            return Err(Error::config("mesh size n must be at least 1"));
        }
        if !(p.omega >= 0.0 && p.omega.is_finite()) {
            return Err(Error::config("omega must be finite and nonnegative"));
        }
        positive(p.gamma, "gamma")?;
        positive(self.dt(), "time step")?;
        if !(p.t_final >= 0.0) {
            return Err(Error::config("final time must be nonnegative"));
        }
        if self.initial.waves.is_empty() {
            return Err(Error::config("initial data needs at least one wave"));
        }
        if let Some(eta) = self.solver.pod {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::config("POD threshold must lie in (0, 1)"));
            }
        }
        let r = &self.rays;
        if r.enabled && !self.solver.baseline {
            positive(self.ray_dt(), "ray time step")?;
            positive(r.epsilon, "epsilon")?;
            positive(r.alpha_x, "alpha_x")?;
            positive(r.alpha_p, "alpha_p")?;
            if r.samples < 2 {
                return Err(Error::config("fronts need at least two samples"));
            }
            if r.fronts.iter().any(|f| f.axis > 1) {
                return Err(Error::config("front axis must be 0 or 1"));
            }
        }
        if !self.solver.baseline && r.defaults.is_empty() {
            return Err(Error::config("at least one default direction is required"));
        }
        Ok(())
    }
}
