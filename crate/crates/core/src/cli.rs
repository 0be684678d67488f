//! Command-line front end. Every subcommand reads a TOML run configuration
//! (see [`crate::config`]) and writes plain-text artifacts.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::forward::{
    incident_trace, min_modes, solve_scattered_abc, BoundaryTrace, CoupledSolver, IncidentWave,
};
use crate::grid::{Grid, GridField};
use crate::rla::reconstruct;
use crate::synth::{add_noise, generate_data, incidence_angles, relative_error, Phantom, ScatteringDataset};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "invscat", version, about = "Inverse medium scattering in two dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic multi-frequency dataset into `<output>/dataset`
    Synth { config: PathBuf },
    /// Solve one forward problem and write its boundary trace
    Forward { config: PathBuf },
    /// Born initial guess at the lowest wavenumber of the schedule
    Born { config: PathBuf, dataset: PathBuf },
    /// Full recursive-linearization reconstruction
    Reconstruct { config: PathBuf, dataset: PathBuf },
    /// Relative error of a grid against a truth
    Evaluate {
        grid: PathBuf,
        /// `example1`, `example2` or a grid CSV
        #[arg(long)]
        truth: String,
        /// directory for `report.txt`; defaults to the grid's directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot-ready files from a grid CSV or a convergence log
    Plotdata {
        input: PathBuf,
        /// height of the cross section
        #[arg(long, default_value_t = -0.6, allow_negative_numbers = true)]
        y: f64,
        /// output directory; defaults to the input's directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Synth { config } => synth(&load(&config)?),
        Command::Forward { config } => forward(&load(&config)?),
        Command::Born { config, dataset } => born(&load(&config)?, &dataset),
        Command::Reconstruct { config, dataset } => reconstruct_cmd(&load(&config)?, &dataset),
        Command::Evaluate { grid, truth, out } => evaluate(&grid, &truth, out.as_deref()),
        Command::Plotdata { input, y, out } => plotdata(&input, y, out.as_deref()),
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let cfg = RunConfig::load(path)?;
    if cfg.workers > 0 {
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn synth(cfg: &RunConfig) -> Result<i32> {
    let ks = cfg.schedule()?.wavenumbers;
    let angles = incidence_angles(cfg.data.angles);
    let mesh = cfg.data_mesh()?;
    log::info!(
        "data mesh: {} vertices, h = {:.4}; {} wavenumbers x {} angles",
        mesh.num_vertices(),
        mesh.max_edge_length(),
        ks.len(),
        angles.len()
    );
    let clean = generate_data(&cfg.phantom()?, &ks, &angles, &mesh, cfg.data_modes())?;
    let data = add_noise(&clean, cfg.data.noise_level, cfg.data.seed)?;
    let dir = cfg.output.join("dataset");
    data.save(&dir)?;
    if data.is_partial() {
        eprintln!("warning: dataset at {} is partial", dir.display());
        return Ok(EXIT_PARTIAL);
    }
    println!("{}", dir.display());
    Ok(EXIT_OK)
}

fn forward(cfg: &RunConfig) -> Result<i32> {
    let f = &cfg.forward;
    let wave = IncidentWave::new(f.k, f.theta)?;
    let mesh = cfg.data_mesh()?;
    let q = cfg.phantom()?.scatterer(&mesh, f.k)?;
    let trace = if f.method == "abc" {
        // outgoing condition du/dn = i k u on the boundary
        let us = solve_scattered_abc(&mesh, &q, &wave)?;
        let d = us.boundary_values();
        let n = d.iter().map(|v| v * Complex64::new(0.0, f.k)).collect();
        BoundaryTrace::new(mesh.boundary_angles(), d, n)?
    } else {
        let n = if f.n_modes > 0 { f.n_modes } else { min_modes(f.k, mesh.radius()) };
        CoupledSolver::new(&mesh, &q, f.k, n)?.solve(f.theta)?.trace
    };
    create_dir(&cfg.output)?;
    let path = cfg.output.join("forward_trace.csv");
    write(&path, &trace.to_csv(f.theta, f.k))?;
    let inc = incident_trace(&wave, trace.angles(), mesh.radius())?;
    let ratio = norm(trace.dirichlet()) / norm(inc.dirichlet());
    println!("{} ({} samples, |u^s|/|u^i| = {ratio:.4e})", path.display(), trace.len());
    Ok(EXIT_OK)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn load_dataset(dir: &Path, ks: &[f64]) -> Result<std::result::Result<ScatteringDataset, String>> {
    let data = ScatteringDataset::load(dir)?;
    let gaps = data.gaps(ks);
    if gaps.is_empty() {
        return Ok(Ok(data));
    }
    let list: Vec<String> = gaps.iter().map(|k| k.to_string()).collect();
    Ok(Err(format!("dataset {} lacks wavenumbers: {}", dir.display(), list.join(", "))))
}

/// Truth on `grid` from the configured phantom, unless it vanishes.
fn config_truth(cfg: &RunConfig, grid: &Grid) -> Result<Option<GridField>> {
    let t = cfg.phantom()?.truth_grid(grid, cfg.mesh.radius);
    Ok(t.values().iter().any(|v| *v != 0.0).then_some(t))
}

fn born(cfg: &RunConfig, dataset: &Path) -> Result<i32> {
    let ks = cfg.schedule()?.wavenumbers;
    let data = match load_dataset(dataset, &ks[..1])? {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("error: {msg}");
            return Ok(EXIT_ERROR);
        }
    };
    let settings = cfg.reconstruction_settings()?;
    let k = ks[0];
    let (sigma, sys) = crate::born::born_initialize(
        &settings.grid,
        settings.ctx.support,
        k,
        data.angles(),
        &data.traces_at(k)?,
        cfg.mesh.radius,
        settings.alpha_rel,
        settings.sigma_bounds,
    )?;
    create_dir(&cfg.output)?;
    let path = cfg.output.join("born.csv");
    sigma.save(&path)?;
    let mut msg = format!("{}: k = {k}, alpha = {:.4e}", path.display(), sys.alpha);
    if let Some(t) = config_truth(cfg, &settings.grid)? {
        let _ = write!(msg, ", relative error {:.6}", relative_error(&sigma, &t)?);
    }
    println!("{msg}");
    Ok(EXIT_OK)
}

fn reconstruct_cmd(cfg: &RunConfig, dataset: &Path) -> Result<i32> {
    let settings = cfg.reconstruction_settings()?;
    let data = match load_dataset(dataset, &settings.schedule.wavenumbers)? {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("error: {msg}");
            return Ok(EXIT_ERROR);
        }
    };
    log::info!(
        "reconstruction mesh: {} vertices, h = {:.4}; {} wavenumbers",
        settings.ctx.mesh.num_vertices(),
        settings.ctx.mesh.max_edge_length(),
        settings.schedule.wavenumbers.len()
    );
    let truth = config_truth(cfg, &settings.grid)?;
    create_dir(&cfg.output)?;
    let snaps = cfg.rla.snapshots.then(|| cfg.output.join("snapshots"));
    let (state, report) = reconstruct(&settings, &data, truth.as_ref(), snaps.as_deref())?;
    state.sigma.save(&cfg.output.join("sigma.csv"))?;
    write(&cfg.output.join("log.csv"), &state.log_csv())?;

    let fmt = |e: Option<f64>| e.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into());
    let mut text = format!("born_error = {}\n", fmt(report.born_error));
    for (k, e) in &report.per_k {
        let _ = writeln!(text, "k = {k}: error = {}", fmt(*e));
    }
    let skipped: Vec<String> = report.skipped.iter().map(|k| k.to_string()).collect();
    let _ = writeln!(text, "skipped = [{}]", skipped.join(", "));
    let final_err = report.per_k.last().and_then(|p| p.1);
    let _ = writeln!(text, "final_error = {}", fmt(final_err));
    write(&cfg.output.join("reconstruct_report.txt"), &text)?;
    println!("{}: final relative error {}", cfg.output.join("sigma.csv").display(), fmt(final_err));
    Ok(if report.skipped.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

fn evaluate(grid_path: &Path, truth: &str, out: Option<&Path>) -> Result<i32> {
    let rec = GridField::load(grid_path)?;
    let truth_grid = match truth {
        "example1" => Phantom::Example1.truth_grid(rec.grid(), rec.grid().radius()),
        "example2" => Phantom::Example2.truth_grid(rec.grid(), rec.grid().radius()),
        path => GridField::load(Path::new(path))?,
    };
    if truth_grid.grid() != rec.grid() {
        return Err(Error::Contract(format!(
            "grid mismatch: {}x{} against a {}x{} truth",
            rec.grid().n(),
            rec.grid().n(),
            truth_grid.grid().n(),
            truth_grid.grid().n()
        )));
    }
    let err = relative_error(&rec, &truth_grid)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| parent_dir(grid_path));
    create_dir(&dir)?;
    let text = format!("grid = {}\ntruth = {truth}\nrelative_error = {err:.6e}\n", grid_path.display());
    write(&dir.join("report.txt"), &text)?;
    println!("relative error {err:.6}");
    Ok(EXIT_OK)
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

const LOG_HEADER: &str = "k,sweep,residual_l2,rel_error";

fn plotdata(input: &Path, y: f64, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| parent_dir(input));
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    create_dir(&dir)?;
    let header = text.lines().next().unwrap_or("").trim();
    if header == "x,y,sigma" {
        let field = GridField::from_csv(&text, input)?;
        let (matrix, cross) = grid_plot_files(&field, y);
        let mpath = dir.join(format!("{stem}_matrix.txt"));
        let cpath = dir.join(format!("{stem}_cross.csv"));
        write(&mpath, &matrix)?;
        write(&cpath, &cross)?;
        println!("{}\n{}", mpath.display(), cpath.display());
    } else if header == LOG_HEADER {
        let series = residual_series(&text, input)?;
        let path = dir.join(format!("{stem}_residual.csv"));
        write(&path, &series)?;
        println!("{}", path.display());
    } else {
        return Err(Error::parse(input, 1, format!("unknown input schema `{header}`")));
    }
    Ok(EXIT_OK)
}

/// Matrix file (one line per grid row, bottom row first, preceded by the
/// x and y centre coordinates as comments) and the cross section at `y`,
/// one row per x centre.
pub fn grid_plot_files(field: &GridField, y: f64) -> (String, String) {
    let g = field.grid();
    let n = g.n();
    let coords: Vec<String> = (0..n).map(|i| format!("{:.8e}", g.center(i)[0])).collect();
    let mut matrix = format!("# x {}\n# y {}\n", coords.join(" "), coords.join(" "));
    for row in field.values().chunks(n) {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        matrix.push_str(&vals.join(" "));
        matrix.push('\n');
    }
    let mut cross = String::from("x,sigma\n");
    for i in 0..n {
        let x = g.center(i)[0];
        let _ = writeln!(cross, "{x:.8e},{:.8e}", field.sample([x, y]));
    }
    (matrix, cross)
}

/// `k,sweep,residual_l2` columns of a convergence log.
pub fn residual_series(text: &str, origin: &Path) -> Result<String> {
    let mut out = String::from("k,sweep,residual_l2\n");
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 || f[..3].iter().any(|s| s.trim().parse::<f64>().is_err()) {
            return Err(Error::parse(origin, i + 1, "malformed log row"));
        }
        let _ = writeln!(out, "{},{},{}", f[0].trim(), f[1].trim(), f[2].trim());
    }
    Ok(out)
}
