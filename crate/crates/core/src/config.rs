//! Run configuration: a versioned TOML file with one table per stage.
//! Every key has a default; unknown keys are rejected.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::mesh::{generate_disk_mesh, refine, Mesh};
use crate::rla::{frequency_schedule, Beta, ContinuationSchedule, ReconstructionSettings, SweepContext};
use crate::synth::Phantom;
use serde::Deserialize;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format: u32,
    /// worker threads; 0 uses the available parallelism
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub born: BornConfig,
    #[serde(default)]
    pub rla: RlaConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub forward: ForwardConfig,
    #[serde(default)]
    pub plot: PlotConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    /// `example1`, `example2`, `zero`, `bump` or `grid`
    pub kind: String,
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    /// grid CSV for `kind = "grid"`, relative to the config file
    pub path: Option<PathBuf>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { kind: "example2".into(), center: [0.0, 0.0], radius: 0.5, amplitude: 0.01, path: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub radius: f64,
    /// reconstruction mesh size as points per shortest wavelength
    pub points_per_wavelength: f64,
    /// explicit reconstruction mesh size, overriding the rule above
    pub h: Option<f64>,
    /// uniform refinements from the reconstruction mesh to the data mesh
    pub data_refinements: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { radius: 1.0, points_per_wavelength: 20.0, h: None, data_refinements: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub angles: usize,
    /// data modes above the reconstruction minimum at `k_max`
    pub extra_modes: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { angles: 32, extra_modes: 8, noise_level: 0.0, seed: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub step: f64,
    pub sweeps_per_k: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { k_min: 0.6, k_max: 12.1, step: 0.5, sweeps_per_k: 3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BornConfig {
    /// Tikhonov weight relative to the largest squared singular value
    pub alpha_rel: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for BornConfig {
    fn default() -> Self {
        Self { alpha_rel: 1e-2, sigma_min: -10.0, sigma_max: 10.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlaConfig {
    /// `beta = beta_scale / k^2` unless `beta` is set
    pub beta_scale: f64,
    pub beta: Option<f64>,
    pub support_radius: f64,
    /// reconstruction modes above the minimum `ceil(k r) + 8`
    pub extra_modes: usize,
    pub snapshots: bool,
}

impl Default for RlaConfig {
    fn default() -> Self {
        Self { beta_scale: 0.1, beta: None, support_radius: 1.0, extra_modes: 0, snapshots: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    pub k: f64,
    pub theta: f64,
    /// `coupled` or `abc`
    pub method: String,
    /// 0 picks `ceil(k r) + 8`
    pub n_modes: usize,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self { k: 2.0, theta: 0.0, method: "coupled".into(), n_modes: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotConfig {
    pub cross_section_y: f64,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self { cross_section_y: -0.6 }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            Error::parse(origin, line, e.message().to_string())
        })?;
        if cfg.format != 1 {
            return Err(Error::parse(origin, 1, format!("unsupported format {}", cfg.format)));
        }
        let base = origin.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.phantom.path {
            if p.is_relative() {
                cfg.phantom.path = Some(base.join(p));
            }
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn validate(&self, origin: &Path) -> Result<()> {
        let bad = |msg: String| Err(Error::parse(origin, 0, msg));
        let s = &self.schedule;
        if !(s.k_min > 0.0 && s.k_max >= s.k_min && s.step > 0.0) {
            return bad(format!("schedule needs 0 < k_min <= k_max and step > 0, got {s:?}"));
        }
        if s.sweeps_per_k == 0 || self.data.angles == 0 || self.grid.n == 0 {
            return bad("sweeps_per_k, data.angles and grid.n must be positive".into());
        }
        if !(self.mesh.radius > 0.0 && self.mesh.points_per_wavelength > 0.0) {
            return bad("mesh.radius and mesh.points_per_wavelength must be positive".into());
        }
        if let Some(h) = self.mesh.h {
            if !(h > 0.0 && h < self.mesh.radius) {
                return bad(format!("mesh.h must lie in (0, radius), got {h}"));
            }
        }
        if !(self.data.noise_level >= 0.0) || !(self.born.alpha_rel > 0.0) {
            return bad("noise_level must be >= 0 and alpha_rel > 0".into());
        }
        if !(self.rla.beta_scale > 0.0) || self.rla.beta.is_some_and(|b| !(b > 0.0)) {
            return bad("beta must be positive".into());
        }
        if !(self.rla.support_radius > 0.0) || !(self.forward.k > 0.0) {
            return bad("support_radius and forward.k must be positive".into());
        }
        if !matches!(self.forward.method.as_str(), "coupled" | "abc") {
            return bad(format!("forward.method must be `coupled` or `abc`, got `{}`", self.forward.method));
        }
        Ok(())
    }

    pub fn phantom(&self) -> Result<Phantom> {
        let p = &self.phantom;
        Ok(match p.kind.as_str() {
            "zero" => Phantom::Zero,
            "example1" => Phantom::Example1,
            "example2" => Phantom::Example2,
            "bump" => Phantom::Bump { center: p.center, radius: p.radius, amplitude: p.amplitude },
            "grid" => {
                let path = p
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Contract("phantom.kind = \"grid\" needs phantom.path".into()))?;
                Phantom::Custom(GridField::load(path)?)
            }
            other => return Err(Error::Contract(format!("unknown phantom kind `{other}`"))),
        })
    }

    pub fn schedule(&self) -> Result<ContinuationSchedule> {
        let s = &self.schedule;
        let mut sched = if s.k_max > s.k_min {
            frequency_schedule(s.k_min, s.k_max, s.step)?
        } else {
            ContinuationSchedule { wavenumbers: vec![s.k_min], sweeps_per_k: 3, beta: Beta::default() }
        };
        sched.sweeps_per_k = s.sweeps_per_k;
        sched.beta = match self.rla.beta {
            Some(b) => Beta::Fixed(b),
            None => Beta::InverseSquare(self.rla.beta_scale),
        };
        Ok(sched)
    }

    pub fn recon_h(&self) -> f64 {
        self.mesh
            .h
            .unwrap_or(TAU / (self.schedule.k_max * self.mesh.points_per_wavelength))
    }

    pub fn recon_mesh(&self) -> Result<Arc<Mesh>> {
        let h = self.recon_h();
        if h > TAU / (10.0 * self.schedule.k_max) {
            log::warn!("mesh size {h:.4} is coarser than ten points per wavelength at k = {}", self.schedule.k_max);
        }
        Ok(Arc::new(generate_disk_mesh(self.mesh.radius, h)?))
    }

    pub fn data_mesh(&self) -> Result<Arc<Mesh>> {
        let mut m = (*self.recon_mesh()?).clone();
        for _ in 0..self.mesh.data_refinements {
            m = refine(&m)?;
        }
        Ok(Arc::new(m))
    }

    /// Exterior modes for data generation: the reconstruction minimum at
    /// `k_max` plus `data.extra_modes`.
    pub fn data_modes(&self) -> usize {
        crate::forward::min_modes(self.schedule.k_max, self.mesh.radius) + self.rla.extra_modes + self.data.extra_modes
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.mesh.radius)
    }

    pub fn reconstruction_settings(&self) -> Result<ReconstructionSettings> {
        Ok(ReconstructionSettings {
            schedule: self.schedule()?,
            grid: self.grid()?,
            ctx: SweepContext {
                mesh: self.recon_mesh()?,
                support: self.rla.support_radius,
                extra_modes: self.rla.extra_modes,
            },
            alpha_rel: self.born.alpha_rel,
            sigma_bounds: (self.born.sigma_min, self.born.sigma_max),
        })
    }
}
