//! Recursive linearization: a Born start at the lowest wavenumber, then one
//! averaged Landweber step per sweep, marching up a wavenumber ladder.

use crate::born::born_initialize;
use crate::error::{Error, Result};
use crate::forward::{
    min_modes, product_load, scattering_load, solve_adjoint_with, solve_scattered_abc, trig_interpolate, BoundaryKind,
    BoundaryTrace, CoupledSolver, FactoredOperator, IncidentWave, Scatterer,
};
use crate::grid::{mesh_to_grid, Grid, GridField};
use crate::mesh::{Mesh, NodalField};
use crate::synth::{relative_error, ScatteringDataset};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Relaxation rule for the Landweber step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    /// `beta = c / k^2`
    InverseSquare(f64),
    Fixed(f64),
}

impl Beta {
    pub fn at(&self, k: f64) -> f64 {
        match *self {
            Beta::InverseSquare(c) => c / (k * k),
            Beta::Fixed(b) => b,
        }
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta::InverseSquare(0.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    pub wavenumbers: Vec<f64>,
    pub sweeps_per_k: usize,
    pub beta: Beta,
}

/// Ladder `k_min, k_min + step, ...` below `k_max`, closed by `k_max`
/// itself. Rungs are rounded to 12 decimals so that file names and
/// lookups see the values one would type.
pub fn frequency_schedule(k_min: f64, k_max: f64, step: f64) -> Result<ContinuationSchedule> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Contract(format!("schedule step must be positive, got {step}")));
    }
    if !(k_min > 0.0 && k_min < k_max) || !k_max.is_finite() {
        return Err(Error::Contract(format!("need 0 < k_min < k_max, got {k_min} and {k_max}")));
    }
    let round = |x: f64| (x * 1e12).round() / 1e12;
    let mut ks = Vec::new();
    for i in 0.. {
        let k = round(k_min + i as f64 * step);
        if k >= k_max - 1e-9 * k_max {
            break;
        }
        ks.push(if i == 0 { k_min } else { k });
    }
    ks.push(k_max);
    Ok(ContinuationSchedule { wavenumbers: ks, sweeps_per_k: 3, beta: Beta::default() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub k: f64,
    pub sweep: usize,
    /// data misfit of the iterate entering the sweep
    pub residual_l2: f64,
    /// error of the iterate leaving the sweep, when a truth is known
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub sigma: GridField,
    pub k_index: usize,
    pub log: Vec<LogEntry>,
}

impl ReconstructionState {
    pub fn new(sigma: GridField) -> Self {
        Self { sigma, k_index: 0, log: Vec::new() }
    }

    /// Convergence log as CSV `k,sweep,residual_l2,rel_error`.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("k,sweep,residual_l2,rel_error\n");
        for e in &self.log {
            let err = e.rel_error.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:.16e},{}", e.k, e.sweep, e.residual_l2, err);
        }
        s
    }
}

/// Fixed ingredients of a sweep.
#[derive(Debug, Clone)]
pub struct SweepContext {
    pub mesh: Arc<Mesh>,
    /// cells (and mesh values) beyond this radius are held at zero
    pub support: f64,
    /// exterior modes above the minimum `ceil(k r) + 8`
    pub extra_modes: usize,
}

/// Nodal scatterer `q = i sigma / k` carried by the grid.
pub fn grid_scatterer(sigma: &GridField, mesh: &Arc<Mesh>, k: f64) -> Scatterer {
    let mut f = sigma.to_mesh(mesh);
    for v in f.values_mut() {
        *v = Complex64::new(0.0, v.re / k);
    }
    f.into()
}

/// Derivative of the scattered field with respect to `q` in direction
/// `delta_q`, absorbing boundary: `Delta v + k^2 (1+q) v = -k^2 dq u`.
/// The load repeats the quadratures of the forward problem (midpoint rule
/// against `u^s`, exact incident wave), so this is the exact derivative of
/// the discrete scattering map.
pub fn frechet_apply(mesh: &Arc<Mesh>, q: &Scatterer, delta_q: &NodalField, wave: &IncidentWave) -> Result<NodalField> {
    if !Arc::ptr_eq(delta_q.mesh(), mesh) && **delta_q.mesh() != **mesh {
        return Err(Error::Contract("delta_q lives on a different mesh".into()));
    }
    let us = solve_scattered_abc(mesh, q, wave)?;
    let dq = NodalField::new(mesh.clone(), delta_q.values().to_vec())?;
    let mut load = product_load(wave.k(), &dq, &us)?;
    for (l, v) in load.iter_mut().zip(scattering_load(&Scatterer::from(dq), wave)) {
        *l += v;
    }
    if load.iter().all(|v| v.norm() == 0.0) {
        return Ok(NodalField::zeros(mesh.clone()));
    }
    let op = FactoredOperator::new(mesh, q, wave.k(), BoundaryKind::Absorbing)?;
    NodalField::new(mesh.clone(), op.solve(&load)?)
}

/// `beta conj(u_tilde) psi`, pointwise.
pub fn landweber_update(u_tilde: &NodalField, psi: &NodalField, beta: f64) -> Result<NodalField> {
    if !u_tilde.same_mesh(psi) {
        return Err(Error::Contract("u_tilde and psi live on different meshes".into()));
    }
    NodalField::new(
        u_tilde.mesh().clone(),
        u_tilde.values().iter().zip(psi.values()).map(|(u, p)| u.conj() * p * beta).collect(),
    )
}

/// Misfit of the current iterate at one wavenumber, with the per-angle
/// residual traces.
struct Misfit {
    /// `sqrt(mean over angles of ||R||^2_{L2(Gamma)})`
    norm: f64,
    fields: Vec<(NodalField, Vec<Complex64>)>,
}

fn misfit(solver: &CoupledSolver, traces: &[&BoundaryTrace], angles: &[f64], boundary: &[f64]) -> Result<Misfit> {
    let r = solver.mesh().radius();
    let per: Vec<(NodalField, Vec<Complex64>, f64)> = angles
        .par_iter()
        .zip(traces.par_iter())
        .map(|(&th, data)| {
            let res = solver.solve(th)?;
            let pred = solver.exterior_trace(&res.lambda_coefficients, data.angles())?;
            let diff: Vec<Complex64> = data.dirichlet().iter().zip(pred.dirichlet()).map(|(a, b)| a - b).collect();
            let norm_sq = diff.iter().map(|v| v.norm_sqr()).sum::<f64>() * TAU * r / diff.len() as f64;
            Ok((res.total_field, trig_interpolate(&diff, boundary), norm_sq))
        })
        .collect::<Result<_>>()?;
    let total: f64 = per.iter().map(|p| p.2).sum();
    Ok(Misfit {
        norm: (total / angles.len() as f64).sqrt(),
        fields: per.into_iter().map(|(u, r, _)| (u, r)).collect(),
    })
}

fn check_traces(traces: &[&BoundaryTrace], angles: &[f64]) -> Result<()> {
    if traces.len() != angles.len() || angles.is_empty() {
        return Err(Error::Missing(format!("{} traces for {} angles", traces.len(), angles.len())));
    }
    for t in traces {
        let m = t.len();
        let equispaced = t
            .angles()
            .iter()
            .enumerate()
            .all(|(j, a)| (a - TAU * j as f64 / m as f64).abs() < 1e-12);
        if !equispaced {
            return Err(Error::Contract("trace angles must be equispaced from 0".into()));
        }
    }
    Ok(())
}

/// Result of one sweep.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// misfit of the iterate entering the sweep
    pub residual: f64,
    /// applied conductivity update on the grid
    pub delta_sigma: GridField,
    /// `||Re dq|| / ||Im dq||` of the averaged nodal update (discarded part)
    pub real_part_ratio: f64,
}

/// Averaged Landweber direction `delta sigma` for `sigma` at wavenumber
/// `k`, together with the misfit of `sigma`.
pub fn landweber_direction(
    sigma: &GridField,
    traces: &[&BoundaryTrace],
    k: f64,
    angles: &[f64],
    beta: f64,
    ctx: &SweepContext,
) -> Result<SweepOutcome> {
    check_traces(traces, angles)?;
    let mesh = &ctx.mesh;
    let q = grid_scatterer(sigma, mesh, k);
    let n_modes = min_modes(k, mesh.radius()) + ctx.extra_modes;
    let solver = CoupledSolver::new(mesh, &q, k, n_modes)?;
    let abc = FactoredOperator::new(mesh, &q, k, BoundaryKind::Absorbing)?;
    let boundary = mesh.boundary_angles();
    let m = misfit(&solver, traces, angles, &boundary)?;
    let updates: Vec<NodalField> = m
        .fields
        .par_iter()
        .map(|(u, r)| {
            let psi = solve_adjoint_with(&abc, mesh, k, r)?;
            landweber_update(u, &psi, beta)
        })
        .collect::<Result<_>>()?;
    let nv = mesh.num_vertices();
    let mut mean = vec![Complex64::new(0.0, 0.0); nv];
    for u in &updates {
        for (a, b) in mean.iter_mut().zip(u.values()) {
            *a += b;
        }
    }
    let scale = 1.0 / updates.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for v in mean.iter_mut() {
        *v *= scale;
        re += v.re * v.re;
        im += v.im * v.im;
    }
    let dsigma = NodalField::new(mesh.clone(), mean.iter().map(|v| Complex64::new(k * v.im, 0.0)).collect())?;
    let mut delta_sigma = mesh_to_grid(&dsigma, sigma.grid(), ctx.support, |z| z.re)?;
    delta_sigma.apply_support(ctx.support);
    Ok(SweepOutcome {
        residual: m.norm,
        delta_sigma,
        real_part_ratio: if im > 0.0 { (re / im).sqrt() } else { 0.0 },
    })
}

/// Data misfit of `sigma` at wavenumber `k` (coupled forward model).
pub fn data_misfit(sigma: &GridField, traces: &[&BoundaryTrace], k: f64, angles: &[f64], ctx: &SweepContext) -> Result<f64> {
    check_traces(traces, angles)?;
    let q = grid_scatterer(sigma, &ctx.mesh, k);
    let n_modes = min_modes(k, ctx.mesh.radius()) + ctx.extra_modes;
    let solver = CoupledSolver::new(&ctx.mesh, &q, k, n_modes)?;
    Ok(misfit(&solver, traces, angles, &ctx.mesh.boundary_angles())?.norm)
}

/// One sweep: on success the state carries the updated sigma and a new log
/// entry; on failure it is returned untouched with the error.
pub fn sweep(
    state: &ReconstructionState,
    traces: &[&BoundaryTrace],
    k: f64,
    angles: &[f64],
    beta: f64,
    ctx: &SweepContext,
) -> Result<(ReconstructionState, SweepOutcome)> {
    let out = landweber_direction(&state.sigma, traces, k, angles, beta, ctx)?;
    log::debug!("k = {k}: discarded real part ratio {:.3e}", out.real_part_ratio);
    let mut next = state.clone();
    for (s, d) in next.sigma.values_mut().iter_mut().zip(out.delta_sigma.values()) {
        *s += d;
    }
    next.sigma.apply_support(ctx.support);
    let sweep_no = state.log.iter().filter(|e| e.k == k).count() + 1;
    next.log.push(LogEntry { k, sweep: sweep_no, residual_l2: out.residual, rel_error: None });
    Ok((next, out))
}

/// Settings of a full reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionSettings {
    pub schedule: ContinuationSchedule,
    pub grid: Grid,
    pub ctx: SweepContext,
    /// Tikhonov weight relative to the largest squared singular value
    pub alpha_rel: f64,
    pub sigma_bounds: (f64, f64),
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub born_error: Option<f64>,
    /// error after the last sweep at each wavenumber
    pub per_k: Vec<(f64, Option<f64>)>,
    /// wavenumbers abandoned after a solver failure
    pub skipped: Vec<f64>,
}

/// Born start at the lowest rung, then `sweeps_per_k` sweeps per rung.
/// Snapshots `sigma_kNNN.csv` go to `snapshots` when given.
pub fn reconstruct(
    settings: &ReconstructionSettings,
    data: &ScatteringDataset,
    truth: Option<&GridField>,
    snapshots: Option<&Path>,
) -> Result<(ReconstructionState, Report)> {
    let ks = &settings.schedule.wavenumbers;
    let gaps = data.gaps(ks);
    if !gaps.is_empty() {
        return Err(Error::Contract(format!("dataset lacks wavenumbers {gaps:?}")));
    }
    if let Some(dir) = snapshots {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let err_of = |s: &GridField| truth.map(|t| relative_error(s, t)).transpose();
    let angles = data.angles();
    let k0 = ks[0];
    let (sigma0, born) = born_initialize(
        &settings.grid,
        settings.ctx.support,
        k0,
        angles,
        &data.traces_at(k0)?,
        settings.ctx.mesh.radius(),
        settings.alpha_rel,
        settings.sigma_bounds,
    )?;
    let mut report = Report { born_error: err_of(&sigma0)?, ..Default::default() };
    log::info!("Born start at k = {k0}, alpha = {:.3e}, error {:?}", born.alpha, report.born_error);
    let mut state = ReconstructionState::new(sigma0);
    for (ki, &k) in ks.iter().enumerate() {
        state.k_index = ki;
        let traces = data.traces_at(k)?;
        let beta = settings.schedule.beta.at(k);
        for _ in 0..settings.schedule.sweeps_per_k {
            match sweep(&state, &traces, k, angles, beta, &settings.ctx) {
                Ok((mut next, _)) => {
                    let (lo, hi) = settings.sigma_bounds;
                    next.sigma.values_mut().iter_mut().for_each(|v| *v = v.clamp(lo, hi));
                    let e = err_of(&next.sigma)?;
                    if let Some(last) = next.log.last_mut() {
                        last.rel_error = e;
                        log::info!("k = {k} sweep {}: residual {:.4e}, error {e:?}", last.sweep, last.residual_l2);
                    }
                    state = next;
                }
                Err(e) => {
                    log::warn!("sweep at k = {k} failed, moving to the next wavenumber: {e}");
                    report.skipped.push(k);
                    break;
                }
            }
        }
        report.per_k.push((k, err_of(&state.sigma)?));
        if let Some(dir) = snapshots {
            state.sigma.save(&dir.join(format!("sigma_k{ki:03}.csv")))?;
        }
    }
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders() {
        assert_eq!(frequency_schedule(0.5, 2.0, 0.5).unwrap().wavenumbers, vec![0.5, 1.0, 1.5, 2.0]);
        let s = frequency_schedule(0.5, 10.1, 0.8).unwrap().wavenumbers;
        assert_eq!(*s.last().unwrap(), 10.1);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.len(), 13);
        let eps = 1e-6;
        assert_eq!(frequency_schedule(1.0, 1.0 + eps, 5.0).unwrap().wavenumbers, vec![1.0, 1.0 + eps]);
        assert!(frequency_schedule(1.0, 2.0, 0.0).is_err());
        assert!(frequency_schedule(1.0, 2.0, -1.0).is_err());
        assert!(frequency_schedule(2.0, 1.0, 0.5).is_err());
        let p = frequency_schedule(0.6, 12.1, 0.5).unwrap().wavenumbers;
        assert_eq!(p[1], 1.1);
        assert_eq!(p.len(), 24);
    }

    #[test]
    fn beta_rules() {
        assert_eq!(Beta::default().at(2.0), 0.025);
        assert_eq!(Beta::Fixed(0.3).at(7.0), 0.3);
    }
}
