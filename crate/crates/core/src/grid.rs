//! Uniform Cartesian reconstruction grid over the bounding square of the
//! disk. Cell-centred real values; the grid is the state of record for the
//! conductivity during reconstruction.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodalField, Point};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    radius: f64,
}

impl Grid {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n == 0 || !(radius > 0.0) {
            return Err(Error::Contract(format!("invalid grid {n} cells, radius {radius}")));
        }
        Ok(Self { n, radius })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cell_size(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size().powi(2)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Centre of cell `idx = iy * n + ix`.
    pub fn center(&self, idx: usize) -> Point {
        let (ix, iy) = (idx % self.n, idx / self.n);
        let h = self.cell_size();
        [-self.radius + (ix as f64 + 0.5) * h, -self.radius + (iy as f64 + 0.5) * h]
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.center(i))
    }

    /// Indices of cells whose centre lies strictly inside the disk of the
    /// given radius.
    pub fn cells_within(&self, r: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let c = self.center(i);
                c[0] * c[0] + c[1] * c[1] < r * r
            })
            .collect()
    }

    pub fn domain_cells(&self) -> Vec<usize> {
        self.cells_within(self.radius)
    }
}

/// Real cell-centred values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.n(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.centers().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Zeroes every cell whose centre is not inside the disk of radius `r`.
    pub fn apply_support(&mut self, r: f64) {
        for i in 0..self.values.len() {
            let c = self.grid.center(i);
            if c[0] * c[0] + c[1] * c[1] >= r * r {
                self.values[i] = 0.0;
            }
        }
    }

    /// Bilinear interpolation between cell centres, constant extension past
    /// the outermost centres.
    pub fn sample(&self, p: Point) -> f64 {
        let n = self.grid.n;
        let h = self.grid.cell_size();
        let coord = |v: f64| ((v + self.grid.radius) / h - 0.5).clamp(0.0, (n - 1) as f64);
        let (fx, fy) = (coord(p[0]), coord(p[1]));
        let (ix, iy) = ((fx.floor() as usize).min(n.saturating_sub(2)), (fy.floor() as usize).min(n.saturating_sub(2)));
        if n == 1 {
            return self.values[0];
        }
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let v = |x: usize, y: usize| self.values[y * n + x];
        (1.0 - ty) * ((1.0 - tx) * v(ix, iy) + tx * v(ix + 1, iy))
            + ty * ((1.0 - tx) * v(ix, iy + 1) + tx * v(ix + 1, iy + 1))
    }

    /// Values at the mesh vertices, as the real part of a nodal field.
    pub fn to_mesh(&self, mesh: &Arc<Mesh>) -> NodalField {
        NodalField::from_fn(mesh.clone(), |p| Complex64::new(self.sample(p), 0.0))
    }

    /// CSV `x,y,sigma`, one row per cell centre, rows ordered by `y` then `x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,sigma\n");
        for (i, v) in self.values.iter().enumerate() {
            let c = self.grid.center(i);
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", c[0], c[1], v);
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "x,y,sigma" => {}
            _ => return Err(Error::parse(origin, 1, "expected header `x,y,sigma`")),
        }
        let mut rows = Vec::new();
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, ln + 1, "non-numeric field"))?;
            if f.len() != 3 {
                return Err(Error::parse(origin, ln + 1, "expected 3 fields"));
            }
            rows.push((ln + 1, f));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != rows.len() {
            return Err(Error::parse(origin, 1, format!("{} rows do not form a square grid", rows.len())));
        }
        if n == 1 {
            // the lone centre sits at the origin whatever the extent
            return Err(Error::parse(origin, 2, "a single cell does not determine the grid extent"));
        }
        let x0 = rows[0].1[0];
        let x1 = rows[n - 1].1[0];
        let h = (x1 - x0) / (n - 1) as f64;
        if !(h > 0.0) {
            return Err(Error::parse(origin, 2, "cell centres must increase along x"));
        }
        let grid = Grid::new(n, -x0 + 0.5 * h)?;
        let tol = 1e-9 * grid.radius();
        let mut values = Vec::with_capacity(rows.len());
        for (i, (ln, f)) in rows.iter().enumerate() {
            let c = grid.center(i);
            if (c[0] - f[0]).abs() > tol || (c[1] - f[1]).abs() > tol {
                return Err(Error::parse(origin, *ln, "cell centre does not match a uniform grid"));
            }
            values.push(f[2]);
        }
        GridField::new(grid, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

/// Samples a nodal mesh field (real part) at grid cells inside radius `r`;
/// other cells are zero.
pub fn mesh_to_grid(field: &NodalField, grid: &Grid, r: f64, part: impl Fn(Complex64) -> f64) -> Result<GridField> {
    let mut out = GridField::zeros(grid.clone());
    for idx in grid.cells_within(r) {
        let c = grid.center(idx);
        // centres between the boundary polygon and the circle are pulled
        // radially onto the mesh
        let mut v = crate::mesh::interpolate(field, c);
        let mut s = 1.0;
        while v.is_err() && s > 0.5 {
            s *= 0.995;
            v = crate::mesh::interpolate(field, [c[0] * s, c[1] * s]);
        }
        out.values[idx] = part(v?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;

    #[test]
    fn centers_and_domain() {
        let g = Grid::new(4, 1.0).unwrap();
        assert_eq!(g.center(0), [-0.75, -0.75]);
        assert_eq!(g.center(15), [0.75, 0.75]);
        assert_eq!(g.domain_cells().len(), 12);
    }

    #[test]
    fn bilinear_reproduces_affine_inside() {
        let g = Grid::new(16, 1.0).unwrap();
        let f = GridField::from_fn(g, |p| 2.0 * p[0] - p[1] + 0.5);
        for p in [[0.1, 0.2], [-0.6, 0.3], [0.0, -0.9]] {
            assert!((f.sample(p) - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(8, 1.0).unwrap();
        let f = GridField::from_fn(g, |p| p[0] * p[1] + 0.1);
        let back = GridField::from_csv(&f.to_csv(), Path::new("mem")).unwrap();
        assert_eq!(back, f);
        let single = GridField::zeros(Grid::new(1, 1.0).unwrap());
        assert!(GridField::from_csv(&single.to_csv(), Path::new("mem")).is_err());
    }

    #[test]
    fn mesh_round_trip_of_affine() {
        let mesh = Arc::new(generate_disk_mesh(1.0, 0.1).unwrap());
        let g = Grid::new(32, 1.0).unwrap();
        let f = GridField::from_fn(g.clone(), |p| p[0] + 3.0 * p[1]);
        let nodal = f.to_mesh(&mesh);
        let back = mesh_to_grid(&nodal, &g, 0.9, |z| z.re).unwrap();
        for idx in g.cells_within(0.9) {
            assert!((back.values()[idx] - f.values()[idx]).abs() < 1e-12);
        }
        // cells near the circle but outside the inscribed polygon
        let full = mesh_to_grid(&nodal, &g, 1.0, |z| z.re).unwrap();
        assert_eq!(full.values().len(), g.len());
    }

    #[test]
    fn support_mask() {
        let g = Grid::new(10, 1.0).unwrap();
        let mut f = GridField::from_fn(g.clone(), |_| 1.0);
        f.apply_support(0.5);
        for (i, v) in f.values().iter().enumerate() {
            let c = g.center(i);
            if c[0].hypot(c[1]) >= 0.5 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
