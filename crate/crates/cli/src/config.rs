use anyhow::{bail, Context, Result};
use legendrian_core::contact::{IntegratorOptions, PolarGrid};
use legendrian_core::holo::{HoloFunction, HoloPair};
use legendrian_core::keylemma::SweepOptions;
use legendrian_core::runge::{BumpFallback, RungeOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Taylor coefficients `[re, im]` of the two components of the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPair {
    pub phi1: Vec<[f64; 2]>,
    pub phi2: Vec<[f64; 2]>,
}

impl Default for InitialPair {
    fn default() -> Self {
        Self { phi1: vec![[1.0, 0.0]], phi2: vec![[0.0, 0.0], [0.5, 0.0]] }
    }
}

impl InitialPair {
    pub fn pair(&self) -> Result<HoloPair> {
        let f = |c: &[[f64; 2]]| HoloFunction::new(c.iter().map(|v| Complex64::new(v[0], v[1])).collect());
        Ok(HoloPair::new(f(&self.phi1)?, f(&self.phi2)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Obj => "obj",
            Self::Ply => "ply",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub det: f64,
    pub legendrian: f64,
    pub center: f64,
    /// Relative gap between stored samples and a fresh integration.
    pub recipe: f64,
    pub singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { det: 1e-9, legendrian: 1e-8, center: 1e-10, recipe: 1e-8, singular: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub initial: InitialPair,
    pub n: usize,
    pub eps: f64,
    pub s: f64,
    pub rounds: usize,
    pub grid: PolarGrid,
    /// Base resolution of the distance solver.
    pub distance_resolution: usize,
    pub runge_samples: usize,
    pub p_rays: usize,
    pub step_radius: bool,
    /// Abort on the first uncertified bump instead of continuing with `h = 1`.
    pub strict_bumps: bool,
    pub out: Option<PathBuf>,
    /// Mesh formats for fronts of the final curve.
    pub formats: Vec<MeshFormat>,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            initial: InitialPair::default(),
            n: 8,
            eps: 0.05,
            s: 0.2,
            rounds: 1,
            grid: PolarGrid::default(),
            distance_resolution: 64,
            runge_samples: legendrian_core::runge::CERT_SAMPLES,
            p_rays: 64,
            step_radius: false,
            strict_bumps: false,
            out: None,
            formats: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if [t.det, t.legendrian, t.center, t.recipe, t.singular].iter().any(|v| !(*v > 0.0)) {
            bail!("all tolerances must be positive");
        }
        if self.rounds == 0 {
            bail!("rounds must be at least 1");
        }
        if self.n < 4 {
            bail!("n must be at least 4");
        }
        if !(self.eps > 0.0) || !(self.s > 0.0 && self.s < 1.0 / 3.0) {
            bail!("need eps > 0 and 0 < s < 1/3");
        }
        if self.grid.radii < 2 || self.grid.angles < 4 || self.distance_resolution < 4 || self.runge_samples < 16 {
            bail!("grid, distance resolution or sample count too small");
        }
        self.initial.pair()?;
        Ok(())
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            runge: RungeOptions {
                samples: self.runge_samples,
                fallback: if self.strict_bumps { BumpFallback::Fail } else { BumpFallback::Identity },
                ..RungeOptions::default()
            },
            integrator: IntegratorOptions::default(),
            resolution: self.distance_resolution,
            p_rays: self.p_rays,
            step_radius: self.step_radius,
        }
    }
}
