//! Direct scattering solvers on the disk.
//!
//! Two boundary treatments are provided:
//!
//! * the first-order absorbing condition `du/dn - i k u = 0` on the
//!   truncation circle ([`solve_scattered_abc`]);
//! * an exact coupling of the interior P1 problem with the outgoing
//!   Hankel-series solution outside the disk ([`couple_fem_bem`]). The
//!   unknown is the impedance trace `lambda = du^s/dn + i k u^s`, expanded in
//!   `e^{i n t}` for `n = -N..N-1` and fixed by collocation at `2N`
//!   equispaced points on the circle.
//!
//! The adjoint problem used by the reconstruction shares the absorbing
//! system: its matrix is the complex conjugate of the forward one.

use crate::error::{Error, Result};
use crate::mesh::{polar_angle, Mesh, NodalField, Point};
use crate::sparse::{BandLu, CsrMatrix, TripletBuilder};
use crate::specfun;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Condition estimate above which the collocation system is reported.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Plane wave `exp(i k x . d)` with `d = (cos theta, sin theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    k: f64,
    theta: f64,
}

impl IncidentWave {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Contract(format!("wavenumber must be positive, got {k}")));
        }
        if !theta.is_finite() {
            return Err(Error::Contract("incidence angle must be finite".into()));
        }
        Ok(Self { k, theta: theta.rem_euclid(TAU) })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn direction(&self) -> Point {
        [self.theta.cos(), self.theta.sin()]
    }

    pub fn value(&self, p: Point) -> Complex64 {
        let d = self.direction();
        (I * self.k * (p[0] * d[0] + p[1] * d[1])).exp()
    }

    /// `du^i/dn` for the unit normal `n`.
    pub fn normal_derivative(&self, p: Point, n: Point) -> Complex64 {
        let d = self.direction();
        I * self.k * (n[0] * d[0] + n[1] * d[1]) * self.value(p)
    }
}

/// Scatterer coefficient `q` on a mesh: either P1 nodal values or one
/// constant per triangle (for piecewise-constant media whose interfaces
/// follow mesh edges).
#[derive(Debug, Clone)]
pub enum Scatterer {
    Nodal(NodalField),
    PerTriangle { mesh: Arc<Mesh>, values: Vec<Complex64> },
}

impl From<NodalField> for Scatterer {
    fn from(f: NodalField) -> Self {
        Scatterer::Nodal(f)
    }
}

impl Scatterer {
    pub fn zero(mesh: Arc<Mesh>) -> Self {
        Scatterer::Nodal(NodalField::zeros(mesh))
    }

    pub fn per_triangle(mesh: Arc<Mesh>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.num_triangles() {
            return Err(Error::Contract(format!(
                "{} triangle values for {} triangles",
                values.len(),
                mesh.num_triangles()
            )));
        }
        Ok(Scatterer::PerTriangle { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        match self {
            Scatterer::Nodal(f) => f.mesh(),
            Scatterer::PerTriangle { mesh, .. } => mesh,
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            Scatterer::Nodal(f) => {
                let v = f.values().iter().map(|z| z.conj()).collect();
                Scatterer::Nodal(NodalField::new(f.mesh().clone(), v).expect("same length"))
            }
            Scatterer::PerTriangle { mesh, values } => Scatterer::PerTriangle {
                mesh: mesh.clone(),
                values: values.iter().map(|z| z.conj()).collect(),
            },
        }
    }

    /// Value at the midpoint of the edge between local vertices `a` and `b`
    /// of triangle `t`.
    fn at_edge_midpoint(&self, t: usize, a: usize, b: usize) -> Complex64 {
        match self {
            Scatterer::Nodal(f) => {
                let tri = f.mesh().triangles()[t];
                (f.values()[tri[a]] + f.values()[tri[b]]) * 0.5
            }
            Scatterer::PerTriangle { values, .. } => values[t],
        }
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        let own = self.mesh();
        if std::ptr::eq(own.as_ref(), mesh) || **own == *mesh {
            Ok(())
        } else {
            Err(Error::Contract("scatterer is defined on a different mesh".into()))
        }
    }
}

/// Sign of the `i k` boundary term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// `du/dn - i k u = 0`
    Absorbing,
    /// `du/dn + i k u = g`
    Impedance,
}

/// Assembled P1 system: `K - k^2 M_(1+q) -/+ i k M_Gamma`.
#[derive(Debug, Clone)]
pub struct HelmholtzSystem {
    pub matrix: CsrMatrix,
    pub load: Vec<Complex64>,
    pub k: f64,
}

/// Edge pairs whose midpoints form the mass quadrature nodes.
const MIDPOINTS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Sparse operator for the given boundary treatment.
pub fn assemble_operator(
    mesh: &Mesh,
    q: &Scatterer,
    k: f64,
    kind: BoundaryKind,
) -> Result<CsrMatrix> {
    q.check_mesh(mesh)?;
    if !(k > 0.0) {
        return Err(Error::Contract(format!("wavenumber must be positive, got {k}")));
    }
    let mut b = TripletBuilder::new(mesh.num_vertices());
    let k2 = k * k;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t);
        let grads = mesh.basis_gradients(t);
        let mut mass = [[ZERO; 3]; 3];
        for &(a, c) in &MIDPOINTS {
            let w = (Complex64::new(1.0, 0.0) + q.at_edge_midpoint(t, a, c)) * (area / 3.0);
            // hats a and c are 1/2 at this midpoint, the third vanishes
            for &i in &[a, c] {
                for &j in &[a, c] {
                    mass[i][j] += w * 0.25;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let stiff = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                b.add(tri[i], tri[j], Complex64::new(stiff, 0.0) - mass[i][j] * k2);
            }
        }
    }
    let sign = match kind {
        BoundaryKind::Absorbing => -1.0,
        BoundaryKind::Impedance => 1.0,
    };
    for (u, v) in mesh.boundary_edges() {
        let len = edge_length(mesh, u, v);
        let diag = I * (sign * k * len / 3.0);
        let off = I * (sign * k * len / 6.0);
        b.add(u, u, diag);
        b.add(v, v, diag);
        b.add(u, v, off);
        b.add(v, u, off);
    }
    Ok(b.build())
}

fn edge_length(mesh: &Mesh, u: usize, v: usize) -> f64 {
    let (a, b) = (mesh.vertices()[u], mesh.vertices()[v]);
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// The absorbing-boundary system of the weak scattering problem, with a
/// zero load (see [`scattering_load`]).
pub fn assemble_system(mesh: &Mesh, q: &Scatterer, k: f64) -> Result<HelmholtzSystem> {
    let matrix = assemble_operator(mesh, q, k, BoundaryKind::Absorbing)?;
    Ok(HelmholtzSystem { load: vec![ZERO; mesh.num_vertices()], matrix, k })
}

/// Load `k^2 (q u^i, phi_j)` by the edge-midpoint rule with the incident
/// wave sampled exactly.
pub fn scattering_load(q: &Scatterer, wave: &IncidentWave) -> Vec<Complex64> {
    let mesh = q.mesh();
    let k2 = wave.k() * wave.k();
    let mut load = vec![ZERO; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.corners(t);
        let area = mesh.signed_area(t);
        let qv = match q {
            Scatterer::Nodal(f) => [f.values()[tri[0]], f.values()[tri[1]], f.values()[tri[2]]],
            Scatterer::PerTriangle { values, .. } => [values[t]; 3],
        };
        if qv.iter().all(|v| *v == ZERO) {
            continue;
        }
        for &(l, w) in &DUNAVANT5 {
            let x = [
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ];
            let qx = qv[0] * l[0] + qv[1] * l[1] + qv[2] * l[2];
            let v = qx * wave.value(x) * (k2 * w * area);
            for i in 0..3 {
                load[tri[i]] += v * l[i];
            }
        }
    }
    load
}

/// Seven-point degree-5 rule on the reference triangle: barycentric point
/// and weight (weights sum to one).
pub const DUNAVANT5: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Load `k^2 (f g, phi_j)` for two nodal fields, edge-midpoint rule on the
/// linear interpolants.
pub fn product_load(k: f64, f: &NodalField, g: &NodalField) -> Result<Vec<Complex64>> {
    if !f.same_mesh(g) {
        return Err(Error::Contract("fields live on different meshes".into()));
    }
    let mesh = f.mesh();
    let mut load = vec![ZERO; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = mesh.signed_area(t) / 3.0;
        for &(a, c) in &MIDPOINTS {
            let fm = (f.values()[tri[a]] + f.values()[tri[c]]) * 0.5;
            let gm = (g.values()[tri[a]] + g.values()[tri[c]]) * 0.5;
            let v = fm * gm * (k * k * w * 0.5);
            load[tri[a]] += v;
            load[tri[c]] += v;
        }
    }
    Ok(load)
}

/// `(M_Gamma g)_j` for `g` given per boundary-loop vertex (P1 on the
/// boundary polygon, exact).
pub fn robin_load_nodal(mesh: &Mesh, data: &[Complex64]) -> Result<Vec<Complex64>> {
    let nb = mesh.boundary_loop().len();
    if data.len() != nb {
        return Err(Error::Contract(format!(
            "{} boundary values for {nb} boundary vertices",
            data.len()
        )));
    }
    let mut load = vec![ZERO; mesh.num_vertices()];
    for i in 0..nb {
        let (u, v) = (mesh.boundary_loop()[i], mesh.boundary_loop()[(i + 1) % nb]);
        let len = edge_length(mesh, u, v);
        let (gu, gv) = (data[i], data[(i + 1) % nb]);
        load[u] += (gu * 2.0 + gv) * (len / 6.0);
        load[v] += (gu + gv * 2.0) * (len / 6.0);
    }
    Ok(load)
}

/// `(g, phi_j)_Gamma` for `g` given as a function of the polar angle,
/// two-point Gauss rule on each boundary edge.
pub fn robin_load_fn(mesh: &Mesh, g: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut load = vec![ZERO; mesh.num_vertices()];
    for (u, v) in mesh.boundary_edges() {
        let (a, b) = (mesh.vertices()[u], mesh.vertices()[v]);
        let len = edge_length(mesh, u, v);
        for &s in &gauss {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let val = g(polar_angle(p)) * (0.5 * len);
            load[u] += val * (1.0 - s);
            load[v] += val * s;
        }
    }
    load
}

/// A factorized operator with residual-checked solves.
#[derive(Debug, Clone)]
pub struct FactoredOperator {
    matrix: CsrMatrix,
    lu: BandLu,
    k: f64,
    h: f64,
}

impl FactoredOperator {
    pub fn new(mesh: &Mesh, q: &Scatterer, k: f64, kind: BoundaryKind) -> Result<Self> {
        let matrix = assemble_operator(mesh, q, k, kind)?;
        let h = mesh.max_edge_length();
        let lu = BandLu::factor(&matrix).map_err(|e| {
            Error::Solver(format!("{e}; k = {k}, mesh h = {h:.4} (possible interior resonance)"))
        })?;
        Ok(Self { matrix, lu, k, h })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `A x = b`, with one refinement step when the relative
    /// residual exceeds `1e-12`; fails above `1e-10`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_with(b, false)
    }

    /// Solves `conj(A) x = b`.
    pub fn solve_conj(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_with(b, true)
    }

    fn solve_with(&self, b: &[Complex64], conj: bool) -> Result<Vec<Complex64>> {
        let bnorm = l2(b);
        if bnorm == 0.0 {
            return Ok(vec![ZERO; b.len()]);
        }
        let solve = |rhs: &[Complex64]| {
            if conj {
                self.lu.solve_conj(rhs)
            } else {
                self.lu.solve(rhs)
            }
        };
        let residual = |x: &[Complex64]| -> Vec<Complex64> {
            let ax = if conj {
                conj_vec(&self.matrix.mul_vec(&conj_vec(x)))
            } else {
                self.matrix.mul_vec(x)
            };
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        let mut x = solve(b);
        let mut r = residual(&x);
        if l2(&r) > 1e-12 * bnorm {
            let dx = solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = residual(&x);
        }
        let rel = l2(&r) / bnorm;
        if !(rel <= 1e-10) {
            return Err(Error::Solver(format!(
                "relative residual {rel:e} after refinement; k = {}, mesh h = {:.4}",
                self.k, self.h
            )));
        }
        Ok(x)
    }
}

fn conj_vec(x: &[Complex64]) -> Vec<Complex64> {
    x.iter().map(|v| v.conj()).collect()
}

fn l2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Scattered field with the absorbing boundary condition.
pub fn solve_scattered_abc(mesh: &Arc<Mesh>, q: &Scatterer, wave: &IncidentWave) -> Result<NodalField> {
    q.check_mesh(mesh)?;
    let load = scattering_load(q, wave);
    if load.iter().all(|v| *v == ZERO) {
        return Ok(NodalField::zeros(mesh.clone()));
    }
    let op = FactoredOperator::new(mesh, q, wave.k(), BoundaryKind::Absorbing)?;
    NodalField::new(mesh.clone(), op.solve(&load)?)
}

/// Interior impedance problem `dw/dn + i k w = g` with `g` per boundary
/// vertex.
pub fn solve_robin(mesh: &Arc<Mesh>, q: &Scatterer, k: f64, robin_data: &[Complex64]) -> Result<NodalField> {
    q.check_mesh(mesh)?;
    let load = robin_load_nodal(mesh, robin_data)?;
    if load.iter().all(|v| *v == ZERO) {
        return Ok(NodalField::zeros(mesh.clone()));
    }
    let op = FactoredOperator::new(mesh, q, k, BoundaryKind::Impedance)?;
    NodalField::new(mesh.clone(), op.solve(&load)?)
}

/// Adjoint field: `Delta psi + k^2 (1 + conj q) psi = 0`,
/// `dpsi/dn + i k psi = k^2 R` on the boundary.
pub fn solve_adjoint(mesh: &Arc<Mesh>, q: &Scatterer, k: f64, residual: &[Complex64]) -> Result<NodalField> {
    q.check_mesh(mesh)?;
    let op = FactoredOperator::new(mesh, q, k, BoundaryKind::Absorbing)?;
    solve_adjoint_with(&op, mesh, k, residual)
}

/// Adjoint solve reusing the factorization of the absorbing operator at
/// the same `(q, k)`.
pub fn solve_adjoint_with(
    abc: &FactoredOperator,
    mesh: &Arc<Mesh>,
    k: f64,
    residual: &[Complex64],
) -> Result<NodalField> {
    let data: Vec<Complex64> = residual.iter().map(|r| r * (k * k)).collect();
    let load = robin_load_nodal(mesh, &data)?;
    NodalField::new(mesh.clone(), abc.solve_conj(&load)?)
}

/// Dirichlet and outward Neumann traces on the circle at a list of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    angles: Vec<f64>,
    dirichlet: Vec<Complex64>,
    neumann: Vec<Complex64>,
}

impl BoundaryTrace {
    pub fn new(angles: Vec<f64>, dirichlet: Vec<Complex64>, neumann: Vec<Complex64>) -> Result<Self> {
        if angles.len() != dirichlet.len() || angles.len() != neumann.len() {
            return Err(Error::Contract("trace arrays have different lengths".into()));
        }
        if angles.iter().any(|a| !(0.0..TAU).contains(a)) {
            return Err(Error::Contract("trace angles must lie in [0, 2pi)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("trace angles must be strictly increasing".into()));
        }
        Ok(Self { angles, dirichlet, neumann })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dirichlet(&self) -> &[Complex64] {
        &self.dirichlet
    }

    pub fn neumann(&self) -> &[Complex64] {
        &self.neumann
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn map_samples(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        Self {
            angles: self.angles.clone(),
            dirichlet: self.dirichlet.iter().map(|&v| f(v)).collect(),
            neumann: self.neumann.iter().map(|&v| f(v)).collect(),
        }
    }

    /// CSV with header `theta_inc,k,t,re_u,im_u,re_dudn,im_dudn`, 17
    /// significant digits.
    pub fn to_csv(&self, theta_inc: f64, k: f64) -> String {
        let mut out = String::from("theta_inc,k,t,re_u,im_u,re_dudn,im_dudn\n");
        for i in 0..self.len() {
            let (u, du) = (self.dirichlet[i], self.neumann[i]);
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                theta_inc, k, self.angles[i], u.re, u.im, du.re, du.im
            );
        }
        out
    }

    /// Parses the CSV form; returns `(theta_inc, k, trace)`.
    pub fn from_csv(text: &str, origin: &Path) -> Result<(f64, f64, Self)> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "theta_inc,k,t,re_u,im_u,re_dudn,im_dudn" => {}
            _ => return Err(Error::parse(origin, 1, "missing or unexpected trace header")),
        }
        let (mut theta, mut k) = (None, None);
        let (mut angles, mut dir, mut neu) = (Vec::new(), Vec::new(), Vec::new());
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, ln + 1, "non-numeric field"))?;
            if f.len() != 7 {
                return Err(Error::parse(origin, ln + 1, "expected 7 fields"));
            }
            if *theta.get_or_insert(f[0]) != f[0] || *k.get_or_insert(f[1]) != f[1] {
                return Err(Error::parse(origin, ln + 1, "theta_inc or k changes within one file"));
            }
            angles.push(f[2]);
            dir.push(Complex64::new(f[3], f[4]));
            neu.push(Complex64::new(f[5], f[6]));
        }
        let (theta, k) = theta
            .zip(k)
            .ok_or_else(|| Error::parse(origin, 2, "trace file has no samples"))?;
        Ok((theta, k, Self::new(angles, dir, neu)?))
    }
}

/// Traces of the incident plane wave on the circle of radius `r`.
pub fn incident_trace(wave: &IncidentWave, trace_angles: &[f64], r: f64) -> Result<BoundaryTrace> {
    let (dir, neu) = trace_angles
        .iter()
        .map(|&t| {
            let n = [t.cos(), t.sin()];
            let p = [r * n[0], r * n[1]];
            (wave.value(p), wave.normal_derivative(p, n))
        })
        .unzip();
    BoundaryTrace::new(trace_angles.to_vec(), dir, neu)
}

/// `2n` equispaced angles `2 pi j / (2n)`.
pub fn nystrom_angles(n: usize) -> Vec<f64> {
    (0..2 * n).map(|j| PI * j as f64 / n as f64).collect()
}

/// Coefficients `a_m`, `m = -N..N-1`, of a trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    order: usize,
    values: Vec<Complex64>,
}

impl ModeCoefficients {
    pub fn new(order: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != 2 * order {
            return Err(Error::Contract(format!(
                "{} coefficients for order {order} (expected {})",
                values.len(),
                2 * order
            )));
        }
        Ok(Self { order, values })
    }

    pub fn zeros(order: usize) -> Self {
        Self { order, values: vec![ZERO; 2 * order] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(m, a_m)` pairs in increasing `m`.
    pub fn modes(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        let n = self.order as i32;
        self.values.iter().enumerate().map(move |(i, &a)| (i as i32 - n, a))
    }

    pub fn set(&mut self, m: i32, a: Complex64) {
        let idx = (m + self.order as i32) as usize;
        self.values[idx] = a;
    }

    /// `sum a_m e^{i m t}`.
    pub fn eval(&self, t: f64) -> Complex64 {
        self.modes().map(|(m, a)| a * (I * (m as f64 * t)).exp()).sum()
    }
}

/// Per-mode factor `1 / (k H_m'(k r) + i k H_m(k r))`: the outgoing
/// solution with impedance trace `e^{i m t}` is `H_m(k r) e^{i m t}` times
/// this factor.
fn exterior_mode_factors(k: f64, r_gamma: f64, order: usize) -> Result<Vec<Complex64>> {
    if order as u32 > specfun::DEFAULT_MAX_ORDER {
        return Err(Error::Domain(format!(
            "mode order {order} exceeds the Hankel table limit {}",
            specfun::DEFAULT_MAX_ORDER
        )));
    }
    let hs = specfun::hankel1_sequence(order + 2, k * r_gamma);
    Ok((-(order as i32)..order as i32)
        .map(|m| {
            let (h, dh) = specfun::hankel1_signed(&hs, m);
            1.0 / (k * dh + I * k * h)
        })
        .collect())
}

/// Exterior field values with a truncation flag.
#[derive(Debug, Clone)]
pub struct ExteriorValues {
    pub values: Vec<Complex64>,
    /// set when the last retained term exceeds `1e-12` of the partial sum
    pub truncated: bool,
}

/// Outgoing Helmholtz solution in `|x| >= r_gamma` whose impedance trace
/// `dw/dn + i k w` on the circle is `sum a_m e^{i m t}`.
pub fn exterior_hankel_eval(
    k: f64,
    r_gamma: f64,
    coeffs: &ModeCoefficients,
    points: &[Point],
) -> Result<ExteriorValues> {
    let order = coeffs.order();
    let factors = exterior_mode_factors(k, r_gamma, order)?;
    let mut values = Vec::with_capacity(points.len());
    let mut truncated = false;
    for &p in points {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r < r_gamma * (1.0 - 1e-12) {
            return Err(Error::Domain(format!(
                "point ({}, {}) lies inside the circle of radius {r_gamma}",
                p[0], p[1]
            )));
        }
        let t = polar_angle(p);
        let hs = specfun::hankel1_sequence(order + 1, k * r);
        let mut sum = ZERO;
        let mut last = 0.0f64;
        for ((m, a), f) in coeffs.modes().zip(&factors) {
            let (h, _) = specfun::hankel1_signed(&hs, m);
            let term = a * f * h * (I * (m as f64 * t)).exp();
            sum += term;
            if m.unsigned_abs() as usize >= order.saturating_sub(1) {
                last = last.max(term.norm());
            }
        }
        if order > 0 && last > 1e-12 * sum.norm() && last > 0.0 {
            truncated = true;
        }
        values.push(sum);
    }
    Ok(ExteriorValues { values, truncated })
}

/// Radial derivative of [`exterior_hankel_eval`] at the given points.
pub fn exterior_hankel_radial_derivative(
    k: f64,
    r_gamma: f64,
    coeffs: &ModeCoefficients,
    points: &[Point],
) -> Result<Vec<Complex64>> {
    let order = coeffs.order();
    let factors = exterior_mode_factors(k, r_gamma, order)?;
    points
        .iter()
        .map(|&p| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r < r_gamma * (1.0 - 1e-12) {
                return Err(Error::Domain("point lies inside the circle".into()));
            }
            let t = polar_angle(p);
            let hs = specfun::hankel1_sequence(order + 2, k * r);
            Ok(coeffs
                .modes()
                .zip(&factors)
                .map(|((m, a), f)| {
                    let (_, dh) = specfun::hankel1_signed(&hs, m);
                    a * f * dh * k * (I * (m as f64 * t)).exp()
                })
                .sum())
        })
        .collect()
}

/// Linear interpolation weights along the boundary polygon for a set of
/// polar angles.
#[derive(Debug, Clone)]
pub struct BoundarySampler {
    stencils: Vec<(usize, usize, f64)>,
}

impl BoundarySampler {
    pub fn new(mesh: &Mesh, angles: &[f64]) -> Self {
        let loop_ = mesh.boundary_loop();
        let nb = loop_.len();
        let node_angles = mesh.boundary_angles();
        let stencils = angles
            .iter()
            .map(|&t| {
                let t = t.rem_euclid(TAU);
                for i in 0..nb {
                    let a0 = node_angles[i];
                    let span = (node_angles[(i + 1) % nb] - a0).rem_euclid(TAU);
                    let off = (t - a0).rem_euclid(TAU);
                    if off <= span + 1e-14 {
                        let w = if span > 0.0 { (off / span).min(1.0) } else { 0.0 };
                        return (loop_[i], loop_[(i + 1) % nb], w);
                    }
                }
                (loop_[0], loop_[0], 0.0)
            })
            .collect();
        Self { stencils }
    }

    pub fn sample(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.stencils
            .iter()
            .map(|&(a, b, w)| values[a] * (1.0 - w) + values[b] * w)
            .collect()
    }
}

/// Output of the coupled interior/exterior solve.
#[derive(Debug, Clone)]
pub struct CouplingResult {
    pub total_field: NodalField,
    pub scattered_field: NodalField,
    pub lambda_coefficients: ModeCoefficients,
    /// traces of the scattered field at the `2N` collocation angles
    pub trace: BoundaryTrace,
    /// 1-norm condition estimate of the collocation matrix
    pub condition: f64,
}

/// Wavenumber-level state of the coupled solver: the factorized impedance
/// operator, the `2N` interior basis solutions and the LU of the
/// collocation matrix. Each incidence angle then costs one sparse solve.
#[derive(Debug)]
pub struct CoupledSolver {
    mesh: Arc<Mesh>,
    q: Scatterer,
    k: f64,
    order: usize,
    operator: FactoredOperator,
    angles: Vec<f64>,
    sampler: BoundarySampler,
    basis: Vec<Vec<Complex64>>,
    exterior_factors: Vec<Complex64>,
    collocation: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

/// Smallest admissible number of modes for wavenumber `k` on radius `r`.
pub fn min_modes(k: f64, r_gamma: f64) -> usize {
    (k * r_gamma).ceil() as usize + 8
}

impl CoupledSolver {
    pub fn new(mesh: &Arc<Mesh>, q: &Scatterer, k: f64, order: usize) -> Result<Self> {
        q.check_mesh(mesh)?;
        let need = min_modes(k, mesh.radius());
        if order < need {
            return Err(Error::Contract(format!(
                "N = {order} does not resolve the propagating modes at k = {k} (need N >= {need})"
            )));
        }
        let operator = FactoredOperator::new(mesh, q, k, BoundaryKind::Impedance)?;
        let angles = nystrom_angles(order);
        let sampler = BoundarySampler::new(mesh, &angles);
        let modes: Vec<i32> = (-(order as i32)..order as i32).collect();
        let basis: Vec<Vec<Complex64>> = modes
            .par_iter()
            .map(|&m| {
                let load = robin_load_fn(mesh, |t| (I * (m as f64 * t)).exp());
                operator.solve(&load)
            })
            .collect::<Result<_>>()?;
        let exterior_factors = exterior_mode_factors(k, mesh.radius(), order)?;
        let hk = specfun::hankel1_sequence(order + 2, k * mesh.radius());
        let size = 2 * order;
        let mut c = DMatrix::<Complex64>::zeros(size, size);
        for (col, &m) in modes.iter().enumerate() {
            let interior = sampler.sample(&basis[col]);
            let (h, _) = specfun::hankel1_signed(&hk, m);
            let ge = exterior_factors[col] * h;
            for (row, &t) in angles.iter().enumerate() {
                c[(row, col)] = interior[row] - ge * (I * (m as f64 * t)).exp();
            }
        }
        let condition = condition_1(&c);
        if !(condition <= ILL_CONDITIONED) {
            log::warn!("collocation matrix condition estimate {condition:e} at k = {k}, N = {order}");
        }
        Ok(Self {
            mesh: mesh.clone(),
            q: q.clone(),
            k,
            order,
            operator,
            angles,
            sampler,
            basis,
            exterior_factors,
            collocation: c.lu(),
            condition,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn collocation_angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves for one incidence angle.
    pub fn solve(&self, theta: f64) -> Result<CouplingResult> {
        let wave = IncidentWave::new(self.k, theta)?;
        let nv = self.mesh.num_vertices();
        // particular part: scattered response with homogeneous impedance data
        let load = scattering_load(&self.q, &wave);
        let particular = if load.iter().all(|v| *v == ZERO) {
            vec![ZERO; nv]
        } else {
            self.operator.solve(&load)?
        };
        let rhs: Vec<Complex64> = self.sampler.sample(&particular).iter().map(|v| -v).collect();
        let a = self
            .collocation
            .solve(&nalgebra::DVector::from_vec(rhs))
            .ok_or_else(|| Error::Solver(format!("singular collocation matrix at k = {}", self.k)))?;
        let coeffs = ModeCoefficients::new(self.order, a.iter().copied().collect())?;
        let mut scattered = particular;
        for (col, (_, am)) in coeffs.modes().enumerate() {
            if am == ZERO {
                continue;
            }
            for (s, b) in scattered.iter_mut().zip(&self.basis[col]) {
                *s += am * b;
            }
        }
        let total: Vec<Complex64> = scattered
            .iter()
            .zip(self.mesh.vertices())
            .map(|(s, &p)| s + wave.value(p))
            .collect();
        let trace = self.exterior_trace(&coeffs, &self.angles)?;
        Ok(CouplingResult {
            total_field: NodalField::new(self.mesh.clone(), total)?,
            scattered_field: NodalField::new(self.mesh.clone(), scattered)?,
            lambda_coefficients: coeffs,
            trace,
            condition: self.condition,
        })
    }

    /// Exterior-representation traces of `u^s` on the coupling circle at
    /// arbitrary angles, from the coefficients of a solve.
    pub fn exterior_trace(&self, coeffs: &ModeCoefficients, angles: &[f64]) -> Result<BoundaryTrace> {
        let hk = specfun::hankel1_sequence(self.order + 2, self.k * self.mesh.radius());
        let weights: Vec<(i32, Complex64, Complex64)> = coeffs
            .modes()
            .zip(&self.exterior_factors)
            .map(|((m, am), f)| (m, am, am * f * specfun::hankel1_signed(&hk, m).0))
            .collect();
        let mut dir = Vec::with_capacity(angles.len());
        let mut neu = Vec::with_capacity(angles.len());
        for &t in angles {
            let mut us = ZERO;
            let mut lambda = ZERO;
            for &(m, am, w) in &weights {
                let e = (I * (m as f64 * t)).exp();
                us += w * e;
                lambda += am * e;
            }
            dir.push(us);
            neu.push(lambda - I * self.k * us);
        }
        BoundaryTrace::new(angles.to_vec(), dir, neu)
    }
}

fn condition_1(c: &DMatrix<Complex64>) -> f64 {
    let norm1 = |m: &DMatrix<Complex64>| {
        (0..m.ncols())
            .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match c.clone().try_inverse() {
        Some(inv) => norm1(c) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// One-shot coupled solve for a single incident wave.
pub fn couple_fem_bem(mesh: &Arc<Mesh>, q: &Scatterer, wave: &IncidentWave, n: usize) -> Result<CouplingResult> {
    CoupledSolver::new(mesh, q, wave.k(), n)?.solve(wave.theta())
}

/// Trigonometric interpolation of equispaced samples `f(2 pi j / M)` to
/// arbitrary angles.
pub fn trig_interpolate(samples: &[Complex64], at: &[f64]) -> Vec<Complex64> {
    let m = samples.len();
    if m == 0 {
        return vec![ZERO; at.len()];
    }
    let coeffs: Vec<(i64, Complex64)> = (0..m as i64)
        .map(|j| {
            // symmetric frequency set; the Nyquist mode is split evenly
            let freq = if j <= (m as i64) / 2 { j } else { j - m as i64 };
            let c: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(l, s)| s * (-I * (TAU * (freq * l as i64) as f64 / m as f64)).exp())
                .sum::<Complex64>()
                / m as f64;
            (freq, c)
        })
        .collect();
    at.iter()
        .map(|&t| {
            coeffs
                .iter()
                .map(|&(f, c)| {
                    if m.is_multiple_of(2) && f == (m as i64) / 2 {
                        c * (f as f64 * t).cos()
                    } else {
                        c * (I * (f as f64 * t)).exp()
                    }
                })
                .sum()
        })
        .collect()
}
