//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use invscat::forward::Scatterer;
use invscat::mesh::Mesh;
use invscat::specfun::{bessel_j, hankel1, hankel1_derivative, CylOrder};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `J_n(z)` for complex `z` of modest size, by the ascending series.
pub fn bessel_j_complex(n: u32, z: Complex64) -> Complex64 {
    let half = z * 0.5;
    let mut lead = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        lead *= half / k as f64;
    }
    let q = -half * half;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..300u32 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn bessel_j_complex_signed(n: i32, z: Complex64) -> Complex64 {
    let v = bessel_j_complex(n.unsigned_abs(), z);
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

fn djc(n: i32, z: Complex64) -> Complex64 {
    (bessel_j_complex_signed(n - 1, z) - bessel_j_complex_signed(n + 1, z)) * 0.5
}

/// Separation-of-variables solution for plane-wave scattering by a
/// concentric disk of radius `a` with constant `q`: traces of `u^s` on the
/// circle `r_gamma` at the given angles, `(dirichlet, d/dr)`.
pub fn disk_transmission_trace(
    k: f64,
    theta_inc: f64,
    a: f64,
    q: Complex64,
    r_gamma: f64,
    angles: &[f64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    let k1 = Complex64::new(k, 0.0) * (Complex64::new(1.0, 0.0) + q).sqrt();
    let nmax = (k * r_gamma).ceil() as i32 + 25;
    let mut dir = vec![Complex64::new(0.0, 0.0); angles.len()];
    let mut neu = dir.clone();
    for n in -nmax..=nmax {
        let o = CylOrder::new(n).unwrap();
        let jn = bessel_j(o, k * a).unwrap();
        let djn = (bessel_j(CylOrder::new(n - 1).unwrap(), k * a).unwrap()
            - bessel_j(CylOrder::new(n + 1).unwrap(), k * a).unwrap())
            * 0.5;
        let hn = hankel1(o, k * a).unwrap();
        let dhn = hankel1_derivative(o, k * a).unwrap();
        let j1 = bessel_j_complex_signed(n, k1 * a);
        let dj1 = djc(n, k1 * a);
        let inc = I.powi(n);
        let b = inc * (k1 * dj1 * jn - k * djn * j1) / (k * dhn * j1 - k1 * dj1 * hn);
        let hg = hankel1(o, k * r_gamma).unwrap();
        let dhg = hankel1_derivative(o, k * r_gamma).unwrap() * k;
        for (i, &t) in angles.iter().enumerate() {
            let e = (I * (n as f64 * (t - theta_inc))).exp();
            dir[i] += b * hg * e;
            neu[i] += b * dhg * e;
        }
    }
    (dir, neu)
}

/// Per-triangle `q` equal to `value` times the fraction of each triangle
/// inside the disk `|x - c| < a`, estimated on a uniform sub-triangle
/// lattice of `s^2` points.
pub fn disk_fraction_scatterer(mesh: &Arc<Mesh>, c: [f64; 2], a: f64, value: Complex64, s: usize) -> Scatterer {
    let vals = (0..mesh.num_triangles())
        .map(|t| {
            let p = mesh.corners(t);
            let mut inside = 0usize;
            let mut total = 0usize;
            for i in 0..s {
                for j in 0..s - i {
                    // centroid-like lattice points of the s-subdivision
                    for (di, dj) in [(1.0 / 3.0, 1.0 / 3.0), (2.0 / 3.0, 2.0 / 3.0)] {
                        let u = (i as f64 + di) / s as f64;
                        let v = (j as f64 + dj) / s as f64;
                        if u + v > 1.0 {
                            continue;
                        }
                        let x = p[0][0] + u * (p[1][0] - p[0][0]) + v * (p[2][0] - p[0][0]);
                        let y = p[0][1] + u * (p[1][1] - p[0][1]) + v * (p[2][1] - p[0][1]);
                        total += 1;
                        if (x - c[0]).powi(2) + (y - c[1]).powi(2) < a * a {
                            inside += 1;
                        }
                    }
                }
            }
            value * (inside as f64 / total as f64)
        })
        .collect();
    Scatterer::per_triangle(mesh.clone(), vals).unwrap()
}

pub fn rel_l2(got: &[Complex64], want: &[Complex64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(g, w)| (g - w).norm_sqr()).sum();
    let den: f64 = want.iter().map(|w| w.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn wavelength(k: f64) -> f64 {
    2.0 * PI / k
}
