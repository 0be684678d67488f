//! Phantoms, synthetic multi-frequency data, the multiplicative noise model
//! and the relative-error metric.

use crate::error::{Error, Result};
use crate::forward::{BoundaryTrace, CoupledSolver, Scatterer};
use crate::grid::{Grid, GridField};
use crate::mesh::{Mesh, Point};
use num_complex::Complex64;
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Name of the generator behind [`add_noise`], recorded in dataset metadata.
pub const NOISE_RNG: &str = "xoshiro256++/seed_from_u64/f64=(u64>>11)*2^-53";

/// Peaks-type conductivity of the first example, before the argument
/// scaling `(x, y) -> (3x, 3y - 1)` applied by the phantom.
pub fn example1_sigma(x: f64, y: f64) -> f64 {
    0.3 * (1.0 - x).powi(2) * (-x * x - (y + 1.0).powi(2)).exp()
        - (x / 5.0 - x.powi(3) - y.powi(5)) * (-(x * x + y * y)).exp()
        - (-(x + 1.0).powi(2) - y * y).exp() / 30.0
}

/// Two-disk scatterer of the second example.
pub fn example2_q(x: f64, y: f64, k: f64) -> Complex64 {
    Complex64::new(0.0, example2_sigma(x, y) / k)
}

fn example2_sigma(x: f64, y: f64) -> f64 {
    let inside = |cx: f64| (x - cx).powi(2) + y * y < 0.04;
    if inside(-0.25) || inside(0.25) {
        0.2
    } else {
        0.0
    }
}

/// Ground-truth conductivity; the scatterer is `q = i sigma / k`.
#[derive(Debug, Clone)]
pub enum Phantom {
    Zero,
    Example1,
    Example2,
    /// `amplitude * (1 - |x - center|^2 / radius^2)^2` inside the disk.
    Bump { center: Point, radius: f64, amplitude: f64 },
    /// Bilinear interpolation of a grid.
    Custom(GridField),
}

impl Phantom {
    pub fn name(&self) -> &'static str {
        match self {
            Phantom::Zero => "zero",
            Phantom::Example1 => "example1",
            Phantom::Example2 => "example2",
            Phantom::Bump { .. } => "bump",
            Phantom::Custom(_) => "custom",
        }
    }

    pub fn sigma(&self, p: Point) -> f64 {
        match self {
            Phantom::Zero => 0.0,
            Phantom::Example1 => example1_sigma(3.0 * p[0], 3.0 * p[1] - 1.0),
            Phantom::Example2 => example2_sigma(p[0], p[1]),
            Phantom::Bump { center, radius, amplitude } => {
                let s = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
                if s < 1.0 {
                    amplitude * (1.0 - s).powi(2)
                } else {
                    0.0
                }
            }
            Phantom::Custom(g) => g.sample(p),
        }
    }

    /// Truth sampled at cell centres inside the disk of radius `r`.
    pub fn truth_grid(&self, grid: &Grid, r: f64) -> GridField {
        let mut g = GridField::from_fn(grid.clone(), |p| self.sigma(p));
        g.apply_support(r);
        g
    }

    /// Scatterer at wavenumber `k` on `mesh`. Analytic phantoms are averaged
    /// over each triangle on a sub-lattice (the second example has jumps);
    /// grid phantoms are interpolated at the vertices exactly as the
    /// reconstruction does, so data generated from an iterate is consistent.
    pub fn scatterer(&self, mesh: &Arc<Mesh>, k: f64) -> Result<Scatterer> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
        }
        match self {
            Phantom::Zero => Ok(Scatterer::zero(mesh.clone())),
            Phantom::Custom(g) => {
                let mut f = g.to_mesh(mesh);
                for v in f.values_mut() {
                    *v = Complex64::new(0.0, v.re / k);
                }
                Ok(f.into())
            }
            _ => {
                let vals = (0..mesh.num_triangles())
                    .map(|t| Complex64::new(0.0, triangle_average(mesh, t, 6, |p| self.sigma(p)) / k))
                    .collect();
                Scatterer::per_triangle(mesh.clone(), vals)
            }
        }
    }
}

/// Mean of `f` over the `s(s+1)/2 + s(s-1)/2` sub-triangle centroids.
fn triangle_average(mesh: &Mesh, t: usize, s: usize, f: impl Fn(Point) -> f64) -> f64 {
    let p = mesh.corners(t);
    let at = |u: f64, v: f64| {
        [
            p[0][0] + u * (p[1][0] - p[0][0]) + v * (p[2][0] - p[0][0]),
            p[0][1] + u * (p[1][1] - p[0][1]) + v * (p[2][1] - p[0][1]),
        ]
    };
    let (mut sum, mut count) = (0.0, 0usize);
    let h = 1.0 / s as f64;
    for i in 0..s {
        for j in 0..s - i {
            let (u, v) = (i as f64 * h, j as f64 * h);
            sum += f(at(u + h / 3.0, v + h / 3.0));
            count += 1;
            if i + j + 1 < s {
                sum += f(at(u + 2.0 * h / 3.0, v + 2.0 * h / 3.0));
                count += 1;
            }
        }
    }
    sum / count as f64
}

/// Generation metadata stored in the dataset's `meta` file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub phantom: String,
    pub mesh_h: f64,
    pub n_modes: usize,
    pub radius: f64,
    pub seed: u64,
    pub level: f64,
    pub partial: bool,
}

/// Scattered-field traces indexed by (wavenumber, incidence angle).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringDataset {
    pub meta: DatasetMeta,
    ks: Vec<f64>,
    angles: Vec<f64>,
    traces: Vec<Vec<Option<BoundaryTrace>>>,
}

/// Equispaced incidence angles `2 pi j / n`.
pub fn incidence_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| std::f64::consts::TAU * j as f64 / n as f64).collect()
}

fn trace_file_name(k: f64, th: usize) -> String {
    format!("k{k}_th{th:03}.csv")
}

impl ScatteringDataset {
    pub fn new(meta: DatasetMeta, ks: Vec<f64>, angles: Vec<f64>, traces: Vec<Vec<Option<BoundaryTrace>>>) -> Result<Self> {
        if traces.len() != ks.len() || traces.iter().any(|row| row.len() != angles.len()) {
            return Err(Error::Contract("trace table does not match wavenumbers x angles".into()));
        }
        let mut common: Option<&[f64]> = None;
        for tr in traces.iter().flatten().flatten() {
            match common {
                None => common = Some(tr.angles()),
                Some(a) if a != tr.angles() => {
                    return Err(Error::Contract("traces do not share one quadrature-angle set".into()))
                }
                _ => {}
            }
        }
        Ok(Self { meta, ks, angles, traces })
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.ks
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn is_partial(&self) -> bool {
        self.traces.iter().flatten().any(Option::is_none)
    }

    pub fn k_index(&self, k: f64) -> Option<usize> {
        self.ks.iter().position(|&v| (v - k).abs() <= 1e-9 * k.max(1.0))
    }

    pub fn trace(&self, k_index: usize, th_index: usize) -> Option<&BoundaryTrace> {
        self.traces.get(k_index)?.get(th_index)?.as_ref()
    }

    /// All traces at wavenumber `k`, in angle order.
    pub fn traces_at(&self, k: f64) -> Result<Vec<&BoundaryTrace>> {
        let ki = self
            .k_index(k)
            .ok_or_else(|| Error::Missing(format!("no data at k = {k}")))?;
        let missing: Vec<usize> = (0..self.angles.len()).filter(|&j| self.traces[ki][j].is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Missing(format!("k = {k}: no trace for angle indices {missing:?}")));
        }
        Ok(self.traces[ki].iter().map(|t| t.as_ref().unwrap()).collect())
    }

    /// Wavenumbers of `wanted` absent from the dataset.
    pub fn gaps(&self, wanted: &[f64]) -> Vec<f64> {
        wanted
            .iter()
            .copied()
            .filter(|&k| self.traces_at(k).is_err())
            .collect()
    }

    pub fn map_traces(&self, mut f: impl FnMut(&BoundaryTrace) -> BoundaryTrace) -> Self {
        let traces = self
            .traces
            .iter()
            .map(|row| row.iter().map(|t| t.as_ref().map(&mut f)).collect())
            .collect();
        Self { traces, ..self.clone() }
    }

    fn meta_text(&self) -> String {
        let m = &self.meta;
        let ks: Vec<String> = self.ks.iter().map(|k| format!("{k}")).collect();
        let mut s = String::new();
        let _ = writeln!(s, "format=1");
        let _ = writeln!(s, "phantom={}", m.phantom);
        let _ = writeln!(s, "mesh_h={:e}", m.mesh_h);
        let _ = writeln!(s, "n_modes={}", m.n_modes);
        let _ = writeln!(s, "radius={}", m.radius);
        let _ = writeln!(s, "seed={}", m.seed);
        let _ = writeln!(s, "level={}", m.level);
        let _ = writeln!(s, "rng={NOISE_RNG}");
        let _ = writeln!(s, "partial={}", self.is_partial() || m.partial);
        let _ = writeln!(s, "angles={}", self.angles.len());
        let _ = writeln!(s, "ks={}", ks.join(","));
        s
    }

    /// Writes `meta` and one CSV per available trace, creating `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = dir.join("meta");
        std::fs::write(&meta, self.meta_text()).map_err(|e| Error::io(&meta, e))?;
        for (ki, &k) in self.ks.iter().enumerate() {
            for (j, &th) in self.angles.iter().enumerate() {
                if let Some(tr) = &self.traces[ki][j] {
                    let p = dir.join(trace_file_name(k, j));
                    std::fs::write(&p, tr.to_csv(th, k)).map_err(|e| Error::io(&p, e))?;
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta");
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut kv = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&meta_path, ln + 1, "expected key=value"))?;
            kv.insert(key.trim().to_string(), (ln + 1, val.trim().to_string()));
        }
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, (usize, String)>, key: &str, path: &Path) -> Result<T> {
            let (ln, v) = kv
                .get(key)
                .ok_or_else(|| Error::parse(path, 0, format!("missing key `{key}`")))?;
            v.parse()
                .map_err(|_| Error::parse(path, *ln, format!("invalid value for `{key}`")))
        }
        let format: u32 = get(&kv, "format", &meta_path)?;
        if format != 1 {
            return Err(Error::parse(&meta_path, kv["format"].0, format!("unsupported format {format}")));
        }
        let n_angles: usize = get(&kv, "angles", &meta_path)?;
        let ks_line: String = get(&kv, "ks", &meta_path)?;
        let ks: Vec<f64> = ks_line
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(&meta_path, kv["ks"].0, "invalid wavenumber list"))?;
        let meta = DatasetMeta {
            phantom: get(&kv, "phantom", &meta_path)?,
            mesh_h: get(&kv, "mesh_h", &meta_path)?,
            n_modes: get(&kv, "n_modes", &meta_path)?,
            radius: get(&kv, "radius", &meta_path)?,
            seed: get(&kv, "seed", &meta_path)?,
            level: get(&kv, "level", &meta_path)?,
            partial: get(&kv, "partial", &meta_path)?,
        };
        let angles = incidence_angles(n_angles);
        let mut traces = Vec::with_capacity(ks.len());
        for &k in &ks {
            let mut row = Vec::with_capacity(n_angles);
            for (j, &th) in angles.iter().enumerate() {
                let p = dir.join(trace_file_name(k, j));
                if !p.exists() {
                    row.push(None);
                    continue;
                }
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let (theta, kk, tr) = BoundaryTrace::from_csv(&text, &p)?;
                if (theta - th).abs() > 1e-12 || (kk - k).abs() > 1e-12 * k {
                    return Err(Error::parse(&p, 2, "theta_inc/k columns disagree with the file name"));
                }
                row.push(Some(tr));
            }
            traces.push(row);
        }
        Self::new(meta, ks, angles, traces)
    }
}

/// Synthetic data by coupled solves on `mesh` with `n_modes` exterior modes
/// at every wavenumber. Failed solves leave holes and mark the set partial.
pub fn generate_data(
    phantom: &Phantom,
    ks: &[f64],
    angles: &[f64],
    mesh: &Arc<Mesh>,
    n_modes: usize,
) -> Result<ScatteringDataset> {
    let mut traces = Vec::with_capacity(ks.len());
    let mut partial = false;
    for &k in ks {
        let q = phantom.scatterer(mesh, k)?;
        let solver = match CoupledSolver::new(mesh, &q, k, n_modes) {
            Ok(s) => s,
            Err(e @ Error::Contract(_)) => return Err(e),
            Err(e) => {
                log::warn!("data generation failed at k = {k}: {e}");
                partial = true;
                traces.push(vec![None; angles.len()]);
                continue;
            }
        };
        let row: Vec<Option<BoundaryTrace>> = angles
            .par_iter()
            .map(|&th| match solver.solve(th) {
                Ok(r) => Some(r.trace),
                Err(e) => {
                    log::warn!("data generation failed at k = {k}, theta = {th}: {e}");
                    None
                }
            })
            .collect();
        partial |= row.iter().any(Option::is_none);
        traces.push(row);
    }
    let meta = DatasetMeta {
        phantom: phantom.name().into(),
        mesh_h: mesh.max_edge_length(),
        n_modes,
        radius: mesh.radius(),
        seed: 0,
        level: 0.0,
        partial,
    };
    ScatteringDataset::new(meta, ks.to_vec(), angles.to_vec(), traces)
}

/// Uniform sample in `[-1, 1)` from the top 53 bits of one `u64` draw.
fn symmetric_unit(rng: &mut Xoshiro256PlusPlus) -> f64 {
    ((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) * 2.0 - 1.0
}

/// Multiplies every Dirichlet and Neumann sample by `1 + level * rand`,
/// `rand` uniform on `[-1, 1)`, one draw per complex sample. Draw order:
/// wavenumbers, then angles, then the Dirichlet samples followed by the
/// Neumann samples of each trace.
pub fn add_noise(data: &ScatteringDataset, level: f64, seed: u64) -> Result<ScatteringDataset> {
    if !(level >= 0.0) {
        return Err(Error::Domain(format!("noise level must be nonnegative, got {level}")));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out = data.map_traces(|tr| {
        let d: Vec<Complex64> = tr.dirichlet().iter().map(|v| v * (1.0 + level * symmetric_unit(&mut rng))).collect();
        let n: Vec<Complex64> = tr.neumann().iter().map(|v| v * (1.0 + level * symmetric_unit(&mut rng))).collect();
        BoundaryTrace::new(tr.angles().to_vec(), d, n).expect("same shape as the source trace")
    });
    out.meta.seed = seed;
    out.meta.level = level;
    Ok(out)
}

/// `||rec - truth|| / ||truth||` over the grid cells inside the disk.
pub fn relative_error(rec: &GridField, truth: &GridField) -> Result<f64> {
    if rec.grid() != truth.grid() {
        return Err(Error::Contract("reconstruction and truth live on different grids".into()));
    }
    let cells = truth.grid().domain_cells();
    let (mut num, mut den) = (0.0, 0.0);
    for c in cells {
        num += (rec.values()[c] - truth.values()[c]).powi(2);
        den += truth.values()[c].powi(2);
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("truth has zero norm".into()));
    }
    Ok((num / den).sqrt())
}
