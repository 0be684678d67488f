//! Conforming triangulations of the disk `|x| < r` and P1 nodal fields.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, OnceLock};

pub type Point = [f64; 2];

/// Upper bound on the vertex count accepted by [`generate_disk_mesh`].
pub const MAX_VERTICES: usize = 4_000_000;

#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_loop: Vec<usize>,
    radius: f64,
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary_loop: self.boundary_loop.clone(),
            radius: self.radius,
            locator: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.boundary_loop == other.boundary_loop
            && self.radius == other.radius
    }
}

impl Mesh {
    /// Builds a mesh from raw parts, checking orientation, boundary radius
    /// and loop structure.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_loop: Vec<usize>,
        radius: f64,
    ) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
            boundary_loop,
            radius,
            locator: OnceLock::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if !(self.radius > 0.0) {
            return Err(Error::Contract(format!("radius {} must be positive", self.radius)));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Contract(format!("triangle {t} references a missing vertex")));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(Error::Contract(format!("triangle {t} is not counterclockwise")));
            }
        }
        let tol = 1e-12 * self.radius;
        let mut seen = vec![false; nv];
        for &b in &self.boundary_loop {
            if b >= nv || seen[b] {
                return Err(Error::Contract("boundary loop is not a simple cycle".into()));
            }
            seen[b] = true;
            let [x, y] = self.vertices[b];
            if ((x * x + y * y).sqrt() - self.radius).abs() > tol {
                return Err(Error::Contract(format!("boundary vertex {b} is off the circle")));
            }
        }
        if self.boundary_loop.len() < 3 {
            return Err(Error::Contract("boundary loop has fewer than 3 vertices".into()));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Polar angle in `[0, 2pi)` of each boundary vertex, in loop order.
    pub fn boundary_angles(&self) -> Vec<f64> {
        self.boundary_loop
            .iter()
            .map(|&b| polar_angle(self.vertices[b]))
            .collect()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [i, j, k] = self.triangles[t];
        [self.vertices[i], self.vertices[j], self.vertices[k]]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Gradients of the three P1 hat functions on triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.corners(t);
        let two_area = 2.0 * self.signed_area(t);
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(u, v)| dist(self.vertices[u], self.vertices[v]))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let p = self.corners(t);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Boundary edges as consecutive pairs of the loop.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.boundary_loop.len();
        (0..n).map(move |i| (self.boundary_loop[i], self.boundary_loop[(i + 1) % n]))
    }

    fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::build(self))
    }

    /// Containing triangle and barycentric coordinates of `p`, accepting
    /// points within `1e-10` of the hull.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10;
        let loc = self.locator();
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in loc.candidates(p) {
            let bary = self.barycentric(t, p);
            let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((t, bary));
            }
            if worst >= -tol && best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, bary, worst));
            }
        }
        best.map(|(t, b, _)| (t, b))
    }

    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn write_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} vertices {} triangles {} boundary",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_loop.len()
        );
        let _ = writeln!(out, "radius {:.16e}", self.radius);
        for v in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        for b in &self.boundary_loop {
            let _ = writeln!(out, "{b}");
        }
        out
    }

    pub fn parse_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: &str| Error::parse(origin, line + 1, msg);
        let (ln, header) = lines.next().ok_or_else(|| bad(0, "empty mesh file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 || h[1] != "vertices" || h[3] != "triangles" || h[5] != "boundary" {
            return Err(bad(ln, "expected `V vertices T triangles B boundary`"));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| bad(ln, "bad count"));
        let (nv, nt, nb) = (count(h[0])?, count(h[2])?, count(h[4])?);
        let (ln, rline) = lines.next().ok_or_else(|| bad(ln, "missing radius line"))?;
        let radius = rline
            .strip_prefix("radius")
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| bad(ln, "expected `radius <value>`"))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "truncated vertex list"))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| bad(ln, "bad coordinate")))
                .collect::<Result<_>>()?;
            if xy.len() != 2 {
                return Err(bad(ln, "expected two coordinates"));
            }
            vertices.push([xy[0], xy[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "truncated triangle list"))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|_| bad(ln, "bad index")))
                .collect::<Result<_>>()?;
            if idx.len() != 3 {
                return Err(bad(ln, "expected three indices"));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "truncated boundary list"))?;
            boundary.push(l.trim().parse::<usize>().map_err(|_| bad(ln, "bad index"))?);
        }
        Mesh::from_parts(vertices, triangles, boundary, radius)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.write_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, path)
    }
}

pub fn polar_angle(p: Point) -> f64 {
    let a = p[1].atan2(p[0]);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

fn dist(a: Point, b: Point) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

fn norm(v: Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Quasi-uniform ring triangulation of the disk of the given radius: ring
/// `i` carries `6 i` equispaced vertices and adjacent rings are zipped by
/// angle.
pub fn generate_disk_mesh(radius: f64, target_h: f64) -> Result<Mesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Contract(format!("radius must be positive, got {radius}")));
    }
    if !(target_h > 0.0 && target_h < radius) {
        return Err(Error::Contract(format!(
            "target_h must lie in (0, radius), got {target_h}"
        )));
    }
    let rings = (radius / target_h).ceil() as usize;
    let estimate = 1 + 3 * rings * (rings + 1);
    if estimate > MAX_VERTICES {
        return Err(Error::Resource(format!(
            "target_h = {target_h} needs about {estimate} vertices, above the limit of {MAX_VERTICES}; \
             use a coarser target_h or refine selectively"
        )));
    }
    let mut vertices: Vec<Point> = Vec::with_capacity(estimate);
    let mut ring_start = vec![0usize];
    vertices.push([0.0, 0.0]);
    for i in 1..=rings {
        ring_start.push(vertices.len());
        let n = 6 * i;
        let r = if i == rings { radius } else { radius * i as f64 / rings as f64 };
        for j in 0..n {
            let a = std::f64::consts::TAU * j as f64 / n as f64;
            vertices.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for i in 2..=rings {
        let (n0, n1) = (6 * (i - 1), 6 * i);
        let (s0, s1) = (ring_start[i - 1], ring_start[i]);
        let (mut p, mut q) = (0usize, 0usize);
        while p < n0 || q < n1 {
            let inner = s0 + p % n0;
            let outer = s1 + q % n1;
            // shorter diagonal wins
            let advance_outer = p >= n0
                || (q < n1
                    && dist(vertices[inner], vertices[s1 + (q + 1) % n1])
                        <= dist(vertices[outer], vertices[s0 + (p + 1) % n0]));
            if advance_outer {
                triangles.push([inner, outer, s1 + (q + 1) % n1]);
                q += 1;
            } else {
                triangles.push([inner, outer, s0 + (p + 1) % n0]);
                p += 1;
            }
        }
    }
    let boundary_loop: Vec<usize> = (ring_start[rings]..vertices.len()).collect();
    orient_ccw(&vertices, &mut triangles);
    Mesh::from_parts(vertices, triangles, boundary_loop, radius)
}

fn orient_ccw(vertices: &[Point], triangles: &mut [[usize; 3]]) {
    for t in triangles.iter_mut() {
        let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        if (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]) < 0.0 {
            t.swap(1, 2);
        }
    }
}

/// Uniform quadrisection; new boundary midpoints are projected onto the
/// circle.
pub fn refine(mesh: &Mesh) -> Result<Mesh> {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let boundary_edges: std::collections::HashSet<(usize, usize)> = mesh
        .boundary_edges()
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect();
    let r = mesh.radius;
    let mut mid = |u: usize, v: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (u.min(v), u.max(v));
        *midpoint.entry(key).or_insert_with(|| {
            let (a, b) = (vertices[u], vertices[v]);
            let mut m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if boundary_edges.contains(&key) {
                let s = r / norm(m);
                m = [m[0] * s, m[1] * s];
            }
            vertices.push(m);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary_loop = Vec::with_capacity(2 * mesh.boundary_loop.len());
    for (u, v) in mesh.boundary_edges() {
        boundary_loop.push(u);
        boundary_loop.push(mid(u, v, &mut vertices));
    }
    orient_ccw(&vertices, &mut triangles);
    Mesh::from_parts(vertices, triangles, boundary_loop, r)
}

/// Uniform bucket grid over the bounding square for point location.
#[derive(Debug)]
struct Locator {
    origin: Point,
    cell: f64,
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn build(mesh: &Mesh) -> Self {
        let r = mesh.radius * (1.0 + 1e-9);
        let n = ((mesh.triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = 2.0 * r / n as f64;
        let origin = [-r, -r];
        let mut buckets = vec![Vec::new(); n * n];
        let clamp = |v: f64| ((v / cell).floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.triangles.len() {
            let p = mesh.corners(t);
            let xs = p.iter().map(|q| q[0] - origin[0]);
            let ys = p.iter().map(|q| q[1] - origin[1]);
            let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
            for iy in clamp(y0 - 1e-9)..=clamp(y1 + 1e-9) {
                for ix in clamp(x0 - 1e-9)..=clamp(x1 + 1e-9) {
                    buckets[iy * n + ix].push(t);
                }
            }
        }
        Self { origin, cell, n, buckets }
    }

    fn candidates(&self, p: Point) -> &[usize] {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        if fx < 0.0 || fy < 0.0 || fx >= self.n as f64 || fy >= self.n as f64 {
            return &[];
        }
        &self.buckets[fy as usize * self.n + fx as usize]
    }
}

/// Complex P1 field on a mesh, one value per vertex.
#[derive(Debug, Clone)]
pub struct NodalField {
    mesh: Arc<Mesh>,
    values: Vec<Complex64>,
}

impl NodalField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Contract(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Contract("field contains non-finite values".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_vertices();
        Self { mesh, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> Complex64) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn same_mesh(&self, other: &NodalField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    /// Values along the boundary loop.
    pub fn boundary_values(&self) -> Vec<Complex64> {
        self.mesh.boundary_loop().iter().map(|&b| self.values[b]).collect()
    }

    /// Discrete max-norm.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `L^2(Omega)` norm of the P1 interpolant (exact for P1).
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let [i, j, k] = self.mesh.triangles()[t];
            let (a, b, c) = (self.values[i], self.values[j], self.values[k]);
            let area = self.mesh.signed_area(t);
            // exact integral of |linear|^2 on a triangle
            let s = a.norm_sqr() + b.norm_sqr() + c.norm_sqr()
                + (a * b.conj()).re + (b * c.conj()).re + (c * a.conj()).re;
            acc += area / 6.0 * s;
        }
        acc.max(0.0).sqrt()
    }
}

/// Barycentric-linear interpolation of `field` at `point`.
pub fn interpolate(field: &NodalField, point: Point) -> Result<Complex64> {
    let mesh = field.mesh();
    let (t, bary) = mesh.locate(point).ok_or_else(|| {
        Error::Domain(format!("point ({}, {}) lies outside the mesh", point[0], point[1]))
    })?;
    let tri = mesh.triangles()[t];
    Ok((0..3).map(|i| field.values()[tri[i]] * bary[i]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn coarse_disk_area() {
        let m = generate_disk_mesh(1.0, 0.5).unwrap();
        assert!((m.total_area() - PI).abs() < 0.1 * PI);
    }

    #[test]
    fn area_deficit_converges_quadratically() {
        let deficits: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| PI - generate_disk_mesh(1.0, h).unwrap().total_area())
            .collect();
        for w in deficits.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
        }
    }

    #[test]
    fn boundary_on_circle() {
        let m = generate_disk_mesh(2.0, 0.1).unwrap();
        for &b in m.boundary_loop() {
            let [x, y] = m.vertices()[b];
            assert!(((x * x + y * y).sqrt() - 2.0).abs() <= 1e-12 * 2.0);
        }
    }

    #[test]
    fn quality_bounds() {
        for h in [0.5, 0.2, 0.07] {
            let m = generate_disk_mesh(1.0, h).unwrap();
            assert!(m.max_edge_length() <= 1.5 * h, "max edge {}", m.max_edge_length());
            assert!(m.min_angle_deg() >= 20.0, "min angle {}", m.min_angle_deg());
        }
    }

    #[test]
    fn euler_relation() {
        let m = generate_disk_mesh(1.0, 0.15).unwrap();
        for mesh in [m.clone(), refine(&m).unwrap()] {
            let v = mesh.num_vertices() as i64;
            let e = mesh.edges().len() as i64;
            let t = mesh.num_triangles() as i64;
            assert_eq!(v - e + t, 1);
        }
    }

    #[test]
    fn refinement_counts_and_area() {
        let m = generate_disk_mesh(1.0, 0.25).unwrap();
        let r = refine(&m).unwrap();
        assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        assert_eq!(r.boundary_loop().len(), 2 * m.boundary_loop().len());
        let ratio = (PI - m.total_area()) / (PI - r.total_area());
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
        assert!(r.min_angle_deg() >= 19.0);
        let fine = generate_disk_mesh(1.0, 0.05).unwrap();
        let drift = fine.min_angle_deg() - refine(&fine).unwrap().min_angle_deg();
        assert!(drift < 1.0, "drift {drift}");
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate_disk_mesh(1.0, 1.5).is_err());
        assert!(generate_disk_mesh(1.0, 0.0).is_err());
        assert!(matches!(generate_disk_mesh(1.0, 1e-5), Err(Error::Resource(_))));
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let mesh = Arc::new(generate_disk_mesh(1.0, 0.2).unwrap());
        let f = NodalField::from_fn(mesh.clone(), |p| Complex64::new(p[0] + 2.0 * p[1], 3.0));
        for p in [[0.1, 0.2], [-0.5, 0.33], [0.0, 0.0], [0.7, -0.6]] {
            let v = interpolate(&f, p).unwrap();
            assert!((v - Complex64::new(p[0] + 2.0 * p[1], 3.0)).norm() < 1e-12);
        }
        let v = mesh.vertices()[17];
        assert!((interpolate(&f, v).unwrap().re - (v[0] + 2.0 * v[1])).abs() < 1e-12);
        assert!(interpolate(&f, [1.2, 0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = refine(&generate_disk_mesh(1.3, 0.4).unwrap()).unwrap();
        let back = Mesh::parse_text(&m.write_text(), Path::new("mem")).unwrap();
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_loop(), m.boundary_loop());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a[0] - b[0]).abs() <= 1e-15 && (a[1] - b[1]).abs() <= 1e-15);
        }
        assert!(Mesh::parse_text("3 vertices 1 triangle", Path::new("mem")).is_err());
    }
}
