//! Acceptance suite. Each test reports one `criterion N ...: PASS|FAIL`
//! line with the measured numbers, then asserts the same condition.

mod common;

use common::*;
use invscat::born::born_initialize;
use invscat::cli::grid_plot_files;
use invscat::config::RunConfig;
use invscat::forward::*;
use invscat::grid::{Grid, GridField};
use invscat::mesh::{generate_disk_mesh, refine, Mesh, NodalField};
use invscat::rla::{frechet_apply, landweber_direction, reconstruct, SweepContext};
use invscat::synth::{add_noise, generate_data, incidence_angles, relative_error, Phantom, ScatteringDataset};
use num_complex::Complex64;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Written straight to the stderr handle so the line shows even when the
/// harness captures test output.
fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} {name}: {word} ({detail})");
}

fn disk(h: f64) -> Arc<Mesh> {
    Arc::new(generate_disk_mesh(1.0, h).unwrap())
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn artifacts(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_01_forward_oracle() {
    let (k, a, q, theta) = (2.0, 0.5, Complex64::new(0.0, 0.1), 0.0);
    let start = Instant::now();
    let mesh = disk(wavelength(k) / 12.0);
    let s = disk_fraction_scatterer(&mesh, [0.0, 0.0], a, q, 8);
    let wave = IncidentWave::new(k, theta).unwrap();
    let coupled = couple_fem_bem(&mesh, &s, &wave, 24).unwrap();
    let (want, _) = disk_transmission_trace(k, theta, a, q, 1.0, coupled.trace.angles());
    let e_coupled = rel_l2(coupled.trace.dirichlet(), &want);
    let abc = solve_scattered_abc(&mesh, &s, &wave).unwrap();
    let bangles = mesh.boundary_angles();
    let (want_abc, _) = disk_transmission_trace(k, theta, a, q, 1.0, &bangles);
    let e_abc = rel_l2(&abc.boundary_values(), &want_abc);
    let elapsed = start.elapsed();
    let pass = e_coupled <= 5e-3 && e_abc <= 3e-2 && elapsed <= Duration::from_secs(60);
    verdict(
        1,
        "forward oracle",
        pass,
        &format!(
            "coupled {e_coupled:.3e} vs 5e-3, ABC {e_abc:.3e} vs 3e-2, {} vertices, {:.2?}",
            mesh.num_vertices(),
            elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_zero_scatterer() {
    let mut worst_abc = 0.0f64;
    let mut worst_coupled = 0.0f64;
    for k in [1.0, 5.0, 12.1] {
        let mesh = disk(wavelength(k) / 10.0);
        let q = Scatterer::zero(mesh.clone());
        let solver = CoupledSolver::new(&mesh, &q, k, min_modes(k, 1.0)).unwrap();
        for theta in [0.0, 1.0, 2.5, 4.4] {
            let wave = IncidentWave::new(k, theta).unwrap();
            worst_abc = worst_abc.max(solve_scattered_abc(&mesh, &q, &wave).unwrap().max_abs());
            let res = solver.solve(theta).unwrap();
            let tr = res.trace.dirichlet().iter().chain(res.trace.neumann()).map(|v| v.norm());
            worst_coupled = worst_coupled.max(res.scattered_field.max_abs()).max(tr.fold(0.0, f64::max));
        }
    }
    let pass = worst_abc == 0.0 && worst_coupled <= 1e-8;
    verdict(2, "zero scatterer", pass, &format!("ABC max {worst_abc:e}, coupled max {worst_coupled:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_03_frechet_order() {
    let start = Instant::now();
    let k = 4.0;
    let mesh = disk(wavelength(k) / 12.0);
    let wave = IncidentWave::new(k, 0.3).unwrap();
    let base = NodalField::from_fn(mesh.clone(), |p| {
        let s = (p[0] - 0.2).powi(2) + (p[1] + 0.1).powi(2);
        Complex64::new(0.0, 0.15) * (-s / 0.15).exp()
    });
    let dq = NodalField::from_fn(mesh.clone(), |p| {
        let s = (p[0] + 0.25).powi(2) + (p[1] - 0.3).powi(2);
        Complex64::new(0.0, 0.05) * (-s / 0.08).exp()
    });
    let shifted = |t: f64| -> Scatterer {
        let v = base.values().iter().zip(dq.values()).map(|(a, b)| a + b * t).collect();
        NodalField::new(mesh.clone(), v).unwrap().into()
    };
    let q0 = shifted(0.0);
    let u0 = solve_scattered_abc(&mesh, &q0, &wave).unwrap().boundary_values();
    let lin = frechet_apply(&mesh, &q0, &dq, &wave).unwrap().boundary_values();
    let remainder = |t: f64| {
        let ut = solve_scattered_abc(&mesh, &shifted(t), &wave).unwrap().boundary_values();
        ut.iter().zip(&u0).zip(&lin).map(|((a, b), l)| (a - b - l * t).norm_sqr()).sum::<f64>().sqrt()
    };
    let r: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&t| remainder(t)).collect();
    let slopes = [(r[0] / r[1]).log2(), (r[1] / r[2]).log2()];
    let elapsed = start.elapsed();
    let pass = slopes.iter().all(|s| (1.7..=2.3).contains(s)) && elapsed <= Duration::from_secs(120);
    verdict(
        3,
        "Frechet derivative order",
        pass,
        &format!("remainders {:.3e}, {:.3e}, {:.3e}, slopes {:.3} and {:.3}, {elapsed:.2?}", r[0], r[1], r[2], slopes[0], slopes[1]),
    );
    assert!(pass);
}

/// Four-point degree-3 rule on a triangle: barycentric point and weight.
const HAMMER4: [([f64; 3], f64); 4] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], -27.0 / 48.0),
    ([0.6, 0.2, 0.2], 25.0 / 48.0),
    ([0.2, 0.6, 0.2], 25.0 / 48.0),
    ([0.2, 0.2, 0.6], 25.0 / 48.0),
];

/// Relative gap between the boundary and volume sides of the adjoint
/// identity on one mesh.
fn adjoint_gap(mesh: &Arc<Mesh>, k: f64) -> f64 {
    let q: Scatterer = NodalField::from_fn(mesh.clone(), |p| {
        let s = (p[0] - 0.1).powi(2) + (p[1] + 0.2).powi(2);
        Complex64::new(0.0, 0.2) * (-s / 0.2).exp()
    })
    .into();
    let dq = NodalField::from_fn(mesh.clone(), |p| Complex64::new(0.0, 0.1) * (1.0 + p[0] - 0.5 * p[1] * p[1]));
    let wave = IncidentWave::new(k, 0.7).unwrap();
    let us = solve_scattered_abc(mesh, &q, &wave).unwrap();
    let v = frechet_apply(mesh, &q, &dq, &wave).unwrap();
    let loop_ = mesh.boundary_loop();
    let residual: Vec<Complex64> = mesh
        .boundary_angles()
        .iter()
        .map(|&t| Complex64::new(t.cos(), 0.5) + (I * (2.0 * t)).exp())
        .collect();
    let psi = solve_adjoint(mesh, &q, k, &residual).unwrap();

    // <v, R> on the boundary polygon, exact for the linear interpolants
    let nb = loop_.len();
    let mut lhs = Complex64::new(0.0, 0.0);
    for i in 0..nb {
        let (a, b) = (loop_[i], loop_[(i + 1) % nb]);
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        let (va, vb) = (v.values()[a], v.values()[b]);
        let (ra, rb) = (residual[i].conj(), residual[(i + 1) % nb].conj());
        lhs += (va * ra * 2.0 + va * rb + vb * ra + vb * rb * 2.0) * (len / 6.0);
    }
    // <dq, conj(u) psi> over the domain with u = u^i + u^s, exact for the
    // linear interpolants and with the plane wave sampled pointwise
    let mut rhs = Complex64::new(0.0, 0.0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t);
        let p = mesh.corners(t);
        for (l, w) in HAMMER4 {
            let at = |f: &dyn Fn(usize) -> Complex64| f(tri[0]) * l[0] + f(tri[1]) * l[1] + f(tri[2]) * l[2];
            let x = [
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ];
            let d = at(&|i| dq.values()[i]);
            let uu = at(&|i| us.values()[i]) + wave.value(x);
            let pp = at(&|i| psi.values()[i]);
            rhs += d * (uu.conj() * pp).conj() * (w * area);
        }
    }
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm())
}

#[test]
fn criterion_04_adjoint_identity() {
    let k = 4.0;
    let coarse = disk(wavelength(k) / 12.0);
    let fine = Arc::new(refine(&coarse).unwrap());
    let g0 = adjoint_gap(&coarse, k);
    let g1 = adjoint_gap(&fine, k);
    let pass = g0 <= 1e-3 && g1 < g0;
    verdict(4, "adjoint identity", pass, &format!("relative gap {g0:.3e} at h = lambda/12, {g1:.3e} refined"));
    assert!(pass);
}

#[test]
fn criterion_05_energy_scaling() {
    let mesh = disk(0.05);
    let q: Scatterer = NodalField::from_fn(mesh.clone(), |p| {
        let s = p[0] * p[0] + (p[1] - 0.2).powi(2);
        Complex64::new(0.0, 0.1) * (-s / 0.2).exp()
    })
    .into();
    let norm_at = |k: f64| {
        let res = couple_fem_bem(&mesh, &q, &IncidentWave::new(k, 0.0).unwrap(), min_modes(k, 1.0)).unwrap();
        res.scattered_field.l2_norm()
    };
    // the ratio tends to 4 from below, with a logarithmic correction in 2D
    let ratio = norm_at(0.1) / norm_at(0.05);
    let pass = (3.2..=4.8).contains(&ratio);
    verdict(5, "energy scaling", pass, &format!("||u^s|| ratio {ratio:.4} for k 0.05 -> 0.1"));
    assert!(pass);
}

/// `sum_c f(x_c) e^{-i xi.x_c} |c|` over the cells inside the disk.
fn grid_fourier(f: &GridField, xi: [f64; 2]) -> Complex64 {
    let g = f.grid();
    g.domain_cells()
        .into_iter()
        .map(|c| {
            let x = g.center(c);
            f.values()[c] * (-I * (xi[0] * x[0] + xi[1] * x[1])).exp() * g.cell_area()
        })
        .sum()
}

#[test]
fn criterion_06_born_low_pass() {
    let k = 1.0;
    let phantom = Phantom::Bump { center: [0.2, -0.15], radius: 0.55, amplitude: 0.01 * k };
    let mesh = disk(0.04);
    let angles = incidence_angles(32);
    let data = generate_data(&phantom, &[k], &angles, &mesh, min_modes(k, 1.0) + 8).unwrap();
    let grid = Grid::new(64, 1.0).unwrap();
    let (sigma, _) =
        born_initialize(&grid, 1.0, k, &angles, &data.traces_at(k).unwrap(), 1.0, 1e-2, (-10.0, 10.0)).unwrap();
    let truth = phantom.truth_grid(&grid, 1.0);
    let (mut num, mut den, mut count) = (0.0, 0.0, 0);
    let step = 0.2;
    for i in -8i32..=8 {
        for j in -8i32..=8 {
            let xi = [i as f64 * step, j as f64 * step];
            if xi[0].hypot(xi[1]) > 1.6 + 1e-12 {
                continue;
            }
            let (a, b) = (grid_fourier(&sigma, xi), grid_fourier(&truth, xi));
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
            count += 1;
        }
    }
    let rel = (num / den).sqrt();
    let pass = rel <= 0.2;
    verdict(6, "Born low-pass", pass, &format!("{count} modes with |xi| <= 1.6, relative error {rel:.4}"));
    assert!(pass);
}

struct ExampleRun {
    clean: f64,
    noisy: f64,
    elapsed_clean: Duration,
}

/// Generates the data of `clean_cfg` once, adds the noise of `noisy_cfg`,
/// reconstructs both and stores grids, logs and cross sections.
fn run_example(clean_cfg: &str, noisy_cfg: &str, tag: &str) -> ExampleRun {
    let clean = RunConfig::load(&config_path(clean_cfg)).unwrap();
    let noisy = RunConfig::load(&config_path(noisy_cfg)).unwrap();
    assert_eq!(clean.data.noise_level, 0.0);
    assert_eq!(clean.phantom.kind, noisy.phantom.kind);
    assert_eq!(clean.schedule().unwrap(), noisy.schedule().unwrap());
    assert_eq!((clean.data.angles, clean.data_modes()), (noisy.data.angles, noisy.data_modes()));
    assert_eq!((clean.recon_h(), clean.mesh.data_refinements), (noisy.recon_h(), noisy.mesh.data_refinements));

    let start = Instant::now();
    let ks = clean.schedule().unwrap().wavenumbers;
    let data = generate_data(
        &clean.phantom().unwrap(),
        &ks,
        &incidence_angles(clean.data.angles),
        &clean.data_mesh().unwrap(),
        clean.data_modes(),
    )
    .unwrap();
    let data_time = start.elapsed();
    let settings = clean.reconstruction_settings().unwrap();
    let truth = clean.phantom().unwrap().truth_grid(&settings.grid, clean.mesh.radius);

    let run = |data: &ScatteringDataset, name: &str, y: f64| -> f64 {
        let dir = artifacts(&format!("{tag}_{name}"));
        let (state, report) = reconstruct(&settings, data, Some(&truth), None).unwrap();
        state.sigma.save(&dir.join("sigma.csv")).unwrap();
        std::fs::write(dir.join("log.csv"), state.log_csv()).unwrap();
        let (matrix, cross) = grid_plot_files(&state.sigma, y);
        std::fs::write(dir.join("sigma_matrix.txt"), matrix).unwrap();
        std::fs::write(dir.join("sigma_cross.csv"), cross).unwrap();
        let (_, truth_cross) = grid_plot_files(&truth, y);
        std::fs::write(dir.join("truth_cross.csv"), truth_cross).unwrap();
        println!("{tag} {name}: Born error {:?}, skipped {:?}", report.born_error, report.skipped);
        relative_error(&state.sigma, &truth).unwrap()
    };
    let t = Instant::now();
    let e_clean = run(&data, "clean", clean.plot.cross_section_y);
    let elapsed_clean = data_time + t.elapsed();
    let noisy_data = add_noise(&data, noisy.data.noise_level, noisy.data.seed).unwrap();
    let e_noisy = run(&noisy_data, "noisy", noisy.plot.cross_section_y);
    ExampleRun { clean: e_clean, noisy: e_noisy, elapsed_clean }
}

#[test]
fn criterion_07_example2() {
    let r = run_example("example2.toml", "example2_noisy.toml", "example2");
    let pass = r.clean <= 0.10 && r.noisy <= 0.25 && r.elapsed_clean <= Duration::from_secs(1800);
    verdict(
        7,
        "Example 2 end to end",
        pass,
        &format!(
            "noise-free {:.4} vs 0.10, 2% noise {:.4} vs 0.25, noise-free run {:.1?}",
            r.clean, r.noisy, r.elapsed_clean
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_example1() {
    let r = run_example("example1.toml", "example1_noisy.toml", "example1");
    let cross = artifacts("example1_clean").join("sigma_cross.csv");
    let rows = std::fs::read_to_string(&cross).map(|t| t.lines().count() - 1).unwrap_or(0);
    let pass = r.clean <= 0.08 && r.noisy <= 0.12 && rows == 64;
    verdict(
        8,
        "Example 1 end to end",
        pass,
        &format!(
            "noise-free {:.4} vs 0.08, 2% noise {:.4} vs 0.12, noise-free run {:.1?}, cross section y = -0.6 with {rows} rows at {}",
            r.clean,
            r.noisy,
            r.elapsed_clean,
            cross.display()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_fixed_point() {
    let k = 3.0;
    let mesh = disk(wavelength(k) / 12.0);
    let grid = Grid::new(64, 1.0).unwrap();
    let sigma = Phantom::Example1.truth_grid(&grid, 1.0);
    let angles = incidence_angles(16);
    let n_modes = min_modes(k, 1.0);
    let data = generate_data(&Phantom::Custom(sigma.clone()), &[k], &angles, &mesh, n_modes).unwrap();
    let ctx = SweepContext { mesh: mesh.clone(), support: 1.0, extra_modes: 0 };
    let out = landweber_direction(&sigma, &data.traces_at(k).unwrap(), k, &angles, 2.0 / (k * k), &ctx).unwrap();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ratio = norm(out.delta_sigma.values()) / norm(sigma.values());
    let pass = ratio <= 1e-6;
    verdict(9, "fixed-point sweep", pass, &format!("||d sigma|| / ||sigma|| = {ratio:.3e}, residual {:.3e}", out.residual));
    assert!(pass);
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let text = std::fs::read_to_string(config_path("quick.toml")).unwrap();
    let text = text.replace("output = \"../out/quick\"", "output = \"out\"");
    let runs: Vec<Vec<(PathBuf, Vec<u8>)>> = (0..2)
        .map(|i| {
            let dir = artifacts(&format!("determinism_{i}"));
            let _ = std::fs::remove_dir_all(dir.join("out"));
            let cfg = dir.join("quick.toml");
            std::fs::write(&cfg, &text).unwrap();
            for args in [vec!["synth", cfg.to_str().unwrap()], vec![
                "reconstruct",
                cfg.to_str().unwrap(),
                dir.join("out/dataset").to_str().unwrap(),
            ]] {
                let out = Command::new(env!("CARGO_BIN_EXE_invscat"))
                    .args(&args)
                    .env("RUST_LOG", "warn")
                    .output()
                    .unwrap();
                assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
            }
            files_under(&dir.join("out"))
        })
        .collect();
    let names: Vec<_> = runs[0].iter().map(|(p, _)| p.clone()).collect();
    let differing: Vec<_> = runs[0].iter().zip(&runs[1]).filter(|(a, b)| a != b).map(|(a, _)| a.0.clone()).collect();
    let has = |n: &str| names.iter().any(|p| p.ends_with(n));
    let pass = runs[0].len() == runs[1].len() && differing.is_empty() && has("meta") && has("log.csv") && has("sigma.csv");
    verdict(
        10,
        "determinism",
        pass,
        &format!("{} files compared, {} differ", runs[0].len(), differing.len()),
    );
    assert!(pass);
}
