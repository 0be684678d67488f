mod common;

use common::*;
use invscat::born::*;
use invscat::forward::min_modes;
use invscat::grid::Grid;
use invscat::mesh::generate_disk_mesh;
use invscat::synth::{generate_data, incidence_angles, Phantom};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

struct Weak {
    k: f64,
    angles: Vec<f64>,
    grid: Grid,
    phantom: Phantom,
    data: invscat::synth::ScatteringDataset,
}

fn weak_setup() -> Weak {
    let k = 0.8;
    let mesh = Arc::new(generate_disk_mesh(1.0, wavelength(k) / 40.0).unwrap());
    let phantom = Phantom::Bump { center: [0.1, -0.2], radius: 0.4, amplitude: 8e-4 };
    let angles = incidence_angles(8);
    let data = generate_data(&phantom, &[k], &angles, &mesh, min_modes(k, 1.0) + 8).unwrap();
    Weak { k, angles, grid: Grid::new(48, 1.0).unwrap(), phantom, data }
}

#[test]
fn data_of_a_weak_scatterer_match_the_linear_model() {
    let w = weak_setup();
    let cells = w.grid.domain_cells();
    let a = assemble_born_operator(&w.grid, &cells, w.k, &w.angles).unwrap();
    let q: DVector<Complex64> =
        DVector::from_iterator(cells.len(), cells.iter().map(|&c| I * (w.phantom.sigma(w.grid.center(c)) / w.k)));
    let aq = &a * q;
    let f = born_rhs(&w.data.traces_at(w.k).unwrap(), w.k, &w.angles, 1.0).unwrap();
    let rel = (&f - &aq).norm() / aq.norm();
    println!("Born model mismatch {rel:.3e}");
    assert!(rel < 0.05);
}

#[test]
fn operator_and_data_are_reciprocal() {
    let w = weak_setup();
    let n = w.angles.len();
    let a = assemble_born_operator(&w.grid, &w.grid.domain_cells(), w.k, &w.angles).unwrap();
    let f = born_rhs(&w.data.traces_at(w.k).unwrap(), w.k, &w.angles, 1.0).unwrap();
    for i in 0..n {
        for j in 0..n {
            assert_eq!(a.row(i * n + j), a.row(j * n + i));
            let (x, y) = (f[i * n + j], f[j * n + i]);
            assert!((x - y).norm() <= 0.05 * x.norm().max(y.norm()), "({i}, {j}): {x} vs {y}");
        }
    }
}

#[test]
fn tikhonov_residual_grows_with_alpha() {
    let a = DMatrix::from_fn(12, 30, |i, j| Complex64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, (i as f64 - j as f64).sin()));
    let f = DVector::from_fn(12, |i, _| Complex64::new(i as f64 * 0.3 - 1.0, 0.2));
    let mut last_res = 0.0;
    let mut last_norm = f64::INFINITY;
    for alpha in [1e-4, 1e-2, 1.0, 1e2, 1e4] {
        let q = tikhonov_solve(&a, &f, alpha).unwrap();
        let res = (&a * &q - &f).norm();
        assert!(res >= last_res, "residual fell at alpha = {alpha}");
        assert!(q.norm() <= last_norm, "norm grew at alpha = {alpha}");
        last_res = res;
        last_norm = q.norm();
    }
    assert!(tikhonov_solve(&a, &f, 0.0).is_err());
}

#[test]
fn born_start_has_the_right_sign_and_mass() {
    let w = weak_setup();
    let traces = w.data.traces_at(w.k).unwrap();
    let (sigma, sys) = born_initialize(&w.grid, 1.0, w.k, &w.angles, &traces, 1.0, 1e-2, (-10.0, 10.0)).unwrap();
    let truth = w.phantom.truth_grid(&w.grid, 1.0);
    let mass = |v: &[f64]| v.iter().sum::<f64>();
    let ratio = mass(sigma.values()) / mass(truth.values());
    println!("Born mass ratio {ratio:.3}, alpha {:.3e}", sys.alpha);
    assert!(sys.alpha > 0.0);
    assert!((0.7..1.1).contains(&ratio), "{ratio}");
    assert_eq!(sys.cells.len(), w.grid.domain_cells().len());
}
